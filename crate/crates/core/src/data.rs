//! Tabular data loading, categorical label encoding, time-ordered splits and
//! a synthetic generator with controllable noise structure.
//!
//! Categorical codes are assigned by first appearance in the training file.
//! Test-time categories that never appeared in training encode to
//! [`UNSEEN_CATEGORY`], which sorts below every training code so threshold
//! splits treat it as its own value.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use ndarray::{s, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Code assigned to a categorical value never seen in training.
pub const UNSEEN_CATEGORY: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Name, kind and (for categoricals) the training vocabulary of one feature column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Category labels in code order: `encoding[c]` has code `c`. Empty for numeric columns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub encoding: Vec<String>,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
            encoding: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, encoding: Vec<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            encoding,
        }
    }

    /// Integer code of a category label, if it was seen in training.
    pub fn code_of(&self, label: &str) -> Option<usize> {
        self.encoding.iter().position(|l| l == label)
    }

    /// Encodes one cell. Numeric cells must parse; categorical cells map
    /// through the vocabulary with unseen labels going to [`UNSEEN_CATEGORY`].
    fn encode_cell(&self, cell: &str) -> Option<f64> {
        match self.kind {
            ColumnKind::Numeric => cell.parse::<f64>().ok().filter(|v| v.is_finite()),
            ColumnKind::Categorical => Some(
                self.code_of(cell)
                    .map(|c| c as f64)
                    .unwrap_or(UNSEEN_CATEGORY),
            ),
        }
    }

    fn decode_cell(&self, value: f64) -> String {
        match self.kind {
            ColumnKind::Numeric => value.to_string(),
            ColumnKind::Categorical => {
                if value >= 0.0 && (value as usize) < self.encoding.len() {
                    self.encoding[value as usize].clone()
                } else {
                    String::from("__unseen__")
                }
            }
        }
    }
}

/// Everything needed to encode new rows consistently with a training file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
    /// Class labels in class-id order when the target column was non-numeric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// An immutable feature matrix with target vector and column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub target: Vec<f64>,
    pub columns: Vec<ColumnSpec>,
    pub target_name: String,
    pub target_labels: Option<Vec<String>>,
    pub timestamp_name: Option<String>,
    /// Monotone ordering key; rows are sorted ascending by it when present.
    pub row_order_key: Option<Vec<f64>>,
    /// Rows rejected at load time because of missing or unparseable cells.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn features_view(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn schema(&self) -> Schema {
        Schema {
            columns: self.columns.clone(),
            target: self.target_name.clone(),
            target_labels: self.target_labels.clone(),
            timestamp: self.timestamp_name.clone(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Contiguous row range as a new dataset.
    pub fn slice_rows(&self, range: Range<usize>) -> Dataset {
        Dataset {
            features: self.features.slice(s![range.clone(), ..]).to_owned(),
            target: self.target[range.clone()].to_vec(),
            columns: self.columns.clone(),
            target_name: self.target_name.clone(),
            target_labels: self.target_labels.clone(),
            timestamp_name: self.timestamp_name.clone(),
            row_order_key: self.row_order_key.as_ref().map(|k| k[range].to_vec()),
            dropped_rows: 0,
        }
    }

    /// Renders the dataset back to text cells (features, then target, then timestamp).
    pub fn to_raw(&self) -> RawTable {
        let mut header: Vec<String> = self.columns.iter().map(|c| c.name.clone()).collect();
        header.push(self.target_name.clone());
        if let (Some(name), Some(_)) = (&self.timestamp_name, &self.row_order_key) {
            header.push(name.clone());
        }
        let rows = (0..self.n_rows())
            .map(|i| {
                let mut cells: Vec<String> = self
                    .columns
                    .iter()
                    .zip(self.features.row(i))
                    .map(|(spec, &v)| spec.decode_cell(v))
                    .collect();
                cells.push(match &self.target_labels {
                    Some(labels) => labels[self.target[i] as usize].clone(),
                    None => self.target[i].to_string(),
                });
                if let Some(key) = &self.row_order_key {
                    if self.timestamp_name.is_some() {
                        cells.push(key[i].to_string());
                    }
                }
                cells
            })
            .collect();
        RawTable { header, rows }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_raw().write_csv(path)
    }
}

/// Header plus text cells, exactly as read from a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read_csv(path: impl AsRef<Path>) -> Result<RawTable> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<RawTable> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(RawTable { header, rows })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn is_missing(cell: Option<&String>) -> bool {
    cell.is_none_or(|c| c.is_empty())
}

fn parse_timestamp(column: &str, cell: &str) -> Result<f64> {
    if let Ok(v) = cell.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(cell, fmt) {
            return Ok(dt.and_utc().timestamp() as f64);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(cell, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp() as f64);
    }
    Err(Error::InvalidTimestamp {
        column: column.to_string(),
        value: cell.to_string(),
    })
}

/// Builds a first-appearance vocabulary.
fn first_appearance<'a>(cells: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for c in cells {
        if !seen.contains_key(c) {
            seen.insert(c.to_string(), out.len());
            out.push(c.to_string());
        }
    }
    out
}

/// Loads a training CSV, inferring column kinds and building encodings from it.
///
/// A column is categorical iff any of its non-empty cells fails to parse as a
/// number. Rows with an empty cell in any used column are dropped and counted.
/// A non-monotone timestamp column is accepted and the rows are sorted by it
/// (stable, so equal timestamps keep file order).
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    timestamp_column: Option<&str>,
) -> Result<Dataset> {
    let raw = RawTable::read_csv(path)?;
    from_raw(&raw, target_column, timestamp_column)
}

/// [`load_csv`] over an in-memory table.
pub fn from_raw(
    raw: &RawTable,
    target_column: &str,
    timestamp_column: Option<&str>,
) -> Result<Dataset> {
    let target_idx = raw
        .column(target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_string()))?;
    let ts_idx = match timestamp_column {
        Some(name) => Some(
            raw.column(name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?,
        ),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..raw.header.len())
        .filter(|&c| c != target_idx && Some(c) != ts_idx)
        .collect();

    let used: Vec<usize> = feature_idx
        .iter()
        .copied()
        .chain(std::iter::once(target_idx))
        .chain(ts_idx)
        .collect();
    let kept: Vec<&Vec<String>> = raw
        .rows
        .iter()
        .filter(|row| used.iter().all(|&c| !is_missing(row.get(c))))
        .collect();
    let dropped = raw.rows.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::NoUsableRows { dropped });
    }

    let columns: Vec<ColumnSpec> = feature_idx
        .iter()
        .map(|&c| {
            let name = raw.header[c].clone();
            let numeric = kept
                .iter()
                .all(|row| row[c].parse::<f64>().is_ok_and(f64::is_finite));
            if numeric {
                ColumnSpec::numeric(name)
            } else {
                ColumnSpec::categorical(name, first_appearance(kept.iter().map(|r| r[c].as_str())))
            }
        })
        .collect();

    let target_numeric = kept
        .iter()
        .all(|row| row[target_idx].parse::<f64>().is_ok_and(f64::is_finite));
    let target_labels = if target_numeric {
        None
    } else {
        Some(first_appearance(kept.iter().map(|r| r[target_idx].as_str())))
    };

    let n = kept.len();
    let mut features = Array2::<f64>::zeros((n, columns.len()));
    let mut target = Vec::with_capacity(n);
    let mut key = ts_idx.map(|_| Vec::with_capacity(n));
    for (i, row) in kept.iter().enumerate() {
        for (j, (&c, spec)) in feature_idx.iter().zip(&columns).enumerate() {
            features[[i, j]] = spec
                .encode_cell(&row[c])
                .ok_or(Error::NonFinite { row: i })?;
        }
        target.push(match &target_labels {
            Some(labels) => labels.iter().position(|l| *l == row[target_idx]).unwrap() as f64,
            None => row[target_idx].parse::<f64>().unwrap(),
        });
        if let (Some(k), Some(c)) = (key.as_mut(), ts_idx) {
            k.push(parse_timestamp(&raw.header[c], &row[c])?);
        }
    }

    let mut ds = Dataset {
        features,
        target,
        columns,
        target_name: target_column.to_string(),
        target_labels,
        timestamp_name: timestamp_column.map(str::to_string),
        row_order_key: key,
        dropped_rows: dropped,
    };
    sort_by_key(&mut ds);
    Ok(ds)
}

fn sort_by_key(ds: &mut Dataset) {
    let Some(key) = &ds.row_order_key else { return };
    if key.windows(2).all(|w| w[0] <= w[1]) {
        return;
    }
    log::warn!("timestamp column is not monotone; sorting rows");
    let mut order: Vec<usize> = (0..key.len()).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]));
    ds.features = ds.features.select(ndarray::Axis(0), &order);
    ds.target = order.iter().map(|&i| ds.target[i]).collect();
    ds.row_order_key = Some(order.iter().map(|&i| key[i]).collect());
}

/// Feature rows (and labels when the target column is present) encoded with a
/// training schema.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRows {
    pub features: Array2<f64>,
    pub labels: Option<Vec<f64>>,
    /// Positions in the input table of the rows that were kept.
    pub kept_rows: Vec<usize>,
    pub dropped_rows: usize,
}

/// Encodes rows with a training schema. The target column is optional here,
/// so unlabeled query files are accepted.
pub fn encode_rows(schema: &Schema, raw: &RawTable) -> Result<EncodedRows> {
    let feature_idx = schema
        .columns
        .iter()
        .map(|spec| {
            raw.column(&spec.name).ok_or_else(|| {
                Error::ColumnMismatch(format!("training column `{}` absent from rows", spec.name))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let target_idx = raw.column(&schema.target);

    let mut features = Vec::new();
    let mut labels = target_idx.map(|_| Vec::new());
    let mut dropped = 0;
    let mut kept_rows = Vec::new();
    'rows: for (r, row) in raw.rows.iter().enumerate() {
        let mut encoded = Vec::with_capacity(feature_idx.len());
        for (&c, spec) in feature_idx.iter().zip(&schema.columns) {
            match row.get(c).filter(|v| !v.is_empty()).and_then(|v| spec.encode_cell(v)) {
                Some(v) => encoded.push(v),
                None => {
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        if let (Some(labels), Some(c)) = (labels.as_mut(), target_idx) {
            let Some(cell) = row.get(c).filter(|v| !v.is_empty()) else {
                dropped += 1;
                continue 'rows;
            };
            let label = match &schema.target_labels {
                Some(classes) => match classes.iter().position(|l| l == cell) {
                    Some(id) => id as f64,
                    None => {
                        return Err(Error::ColumnMismatch(format!(
                            "target class `{cell}` not seen in training"
                        )))
                    }
                },
                None => match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        dropped += 1;
                        continue 'rows;
                    }
                },
            };
            labels.push(label);
        }
        features.extend(encoded);
        kept_rows.push(r);
    }
    let n = features.len() / schema.columns.len().max(1);
    let features = Array2::from_shape_vec((n, schema.columns.len()), features)
        .expect("row-major buffer matches shape");
    Ok(EncodedRows {
        features,
        labels,
        kept_rows,
        dropped_rows: dropped,
    })
}

/// Encodes labeled rows with a training schema into a [`Dataset`].
pub fn encode_with(schema: &Schema, raw: &RawTable) -> Result<Dataset> {
    let enc = encode_rows(schema, raw)?;
    let target = enc
        .labels
        .ok_or_else(|| Error::MissingColumn(schema.target.clone()))?;
    if target.is_empty() {
        return Err(Error::NoUsableRows {
            dropped: enc.dropped_rows,
        });
    }
    Ok(Dataset {
        features: enc.features,
        target,
        columns: schema.columns.clone(),
        target_name: schema.target.clone(),
        target_labels: schema.target_labels.clone(),
        timestamp_name: None,
        row_order_key: None,
        dropped_rows: enc.dropped_rows,
    })
}

/// Splits time-ordered rows: the first `⌊N·train_fraction⌋` rows train, the rest test.
pub fn time_split(ds: &Dataset, train_fraction: f64) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::EmptySplit {
            n_rows: n,
            fraction: train_fraction,
        });
    }
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::EmptySplit {
            n_rows: n,
            fraction: train_fraction,
        });
    }
    Ok((ds.slice_rows(0..n_train), ds.slice_rows(n_train..n)))
}

/// Target noise model for synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseProfile {
    Homoscedastic { sigma: f64 },
    /// Noise standard deviation rises linearly in feature 0 from `low` to `high`.
    Heteroscedastic { low: f64, high: f64 },
}

impl NoiseProfile {
    /// Noise standard deviation at a given value of feature 0 (which lies in [0, 1]).
    pub fn sigma_at(&self, x0: f64) -> f64 {
        match *self {
            NoiseProfile::Homoscedastic { sigma } => sigma,
            NoiseProfile::Heteroscedastic { low, high } => low + (high - low) * x0,
        }
    }
}

impl fmt::Display for NoiseProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseProfile::Homoscedastic { sigma } => write!(f, "homoscedastic({sigma})"),
            NoiseProfile::Heteroscedastic { low, high } => {
                write!(f, "heteroscedastic({low},{high})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_rows: usize,
    pub n_numeric: usize,
    pub n_categorical: usize,
    pub noise: NoiseProfile,
    pub seed: u64,
}

/// Number of levels in each synthetic categorical column.
pub const SYNTHETIC_LEVELS: usize = 4;
const LEVEL_NAMES: [&str; SYNTHETIC_LEVELS] = ["A", "B", "C", "D"];
const LEVEL_OFFSETS: [f64; SYNTHETIC_LEVELS] = [-1.0, 0.0, 0.5, 1.5];

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_rows: 1000,
            n_numeric: 5,
            n_categorical: 1,
            noise: NoiseProfile::Homoscedastic { sigma: 0.5 },
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 {
            return Err(Error::InvalidConfig("n_rows must be positive".into()));
        }
        if self.n_numeric == 0 {
            return Err(Error::InvalidConfig("n_numeric must be positive".into()));
        }
        match self.noise {
            NoiseProfile::Homoscedastic { sigma } if !(sigma >= 0.0) => {
                Err(Error::InvalidConfig("sigma must be nonnegative".into()))
            }
            NoiseProfile::Heteroscedastic { low, high } if !(low >= 0.0 && low < high) => Err(
                Error::InvalidConfig("heteroscedastic noise needs 0 <= low < high".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Noiseless generating function evaluated on one encoded row of a
    /// dataset produced by [`generate_synthetic`].
    pub fn signal(&self, columns: &[ColumnSpec], row: &[f64]) -> f64 {
        let numeric = &row[..self.n_numeric];
        let levels = columns[self.n_numeric..]
            .iter()
            .zip(&row[self.n_numeric..])
            .map(|(spec, &code)| {
                let label = &spec.encoding[code as usize];
                LEVEL_NAMES.iter().position(|n| n == label).unwrap()
            });
        signal(numeric, levels)
    }

    /// Parses `key=value` lines (`#` comments and blank lines ignored).
    ///
    /// Keys: `n_rows`, `n_numeric`, `n_categorical`, `seed`, `noise`
    /// (`homoscedastic` or `heteroscedastic`), `sigma`, `sigma_low`, `sigma_high`.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = SyntheticConfig::default();
        let mut noise_kind: Option<String> = None;
        let (mut sigma, mut low, mut high) = (None, None, None);
        for line in text.lines() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n_rows" => cfg.n_rows = parse_value(key, value)?,
                "n_numeric" => cfg.n_numeric = parse_value(key, value)?,
                "n_categorical" => cfg.n_categorical = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "noise" => noise_kind = Some(value.to_ascii_lowercase()),
                "sigma" => sigma = Some(parse_value::<f64>(key, value)?),
                "sigma_low" => low = Some(parse_value::<f64>(key, value)?),
                "sigma_high" => high = Some(parse_value::<f64>(key, value)?),
                other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
            }
        }
        cfg.noise = match noise_kind.as_deref() {
            None | Some("homoscedastic") => NoiseProfile::Homoscedastic {
                sigma: sigma.unwrap_or(0.5),
            },
            Some("heteroscedastic") => NoiseProfile::Heteroscedastic {
                low: low.ok_or_else(|| Error::InvalidConfig("sigma_low required".into()))?,
                high: high.ok_or_else(|| Error::InvalidConfig("sigma_high required".into()))?,
            },
            Some(other) => return Err(Error::InvalidConfig(format!("unknown noise `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

fn signal(numeric: &[f64], levels: impl Iterator<Item = usize>) -> f64 {
    use std::f64::consts::PI;
    let mut y = 3.0 * numeric[0];
    if numeric.len() > 1 {
        y += 2.0 * (PI * numeric[0] * numeric[1]).sin();
    }
    for (k, &x) in numeric.iter().enumerate().skip(1) {
        y += match k % 3 {
            1 => 2.0 * (2.0 * PI * x).sin(),
            2 => 8.0 * (x - 0.5) * (x - 0.5),
            _ => 2.0 * x,
        };
    }
    for (c, level) in levels.enumerate() {
        y += LEVEL_OFFSETS[level] / (c + 1) as f64;
    }
    y
}

/// Generates a deterministic synthetic regression dataset.
///
/// Numeric features are uniform on [0, 1]; categorical features take
/// [`SYNTHETIC_LEVELS`] levels and add a fixed offset per level. The target is
/// a smooth nonlinear function plus Gaussian noise whose scale follows
/// [`NoiseProfile::sigma_at`] of feature 0. Rows carry a timestamp `t = i`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = cfg.n_numeric + cfg.n_categorical;
    let mut features = Array2::<f64>::zeros((cfg.n_rows, p));
    let mut raw_levels = vec![vec![0usize; cfg.n_rows]; cfg.n_categorical];
    let mut target = Vec::with_capacity(cfg.n_rows);
    for i in 0..cfg.n_rows {
        let numeric: Vec<f64> = (0..cfg.n_numeric).map(|_| rng.gen::<f64>()).collect();
        let levels: Vec<usize> = (0..cfg.n_categorical)
            .map(|_| rng.gen_range(0..SYNTHETIC_LEVELS))
            .collect();
        let z: f64 = rng.sample(StandardNormal);
        let y = signal(&numeric, levels.iter().copied()) + cfg.noise.sigma_at(numeric[0]) * z;
        for (j, &v) in numeric.iter().enumerate() {
            features[[i, j]] = v;
        }
        for (c, &l) in levels.iter().enumerate() {
            raw_levels[c][i] = l;
        }
        target.push(y);
    }

    let mut columns: Vec<ColumnSpec> = (0..cfg.n_numeric)
        .map(|j| ColumnSpec::numeric(format!("x{j}")))
        .collect();
    for (c, levels) in raw_levels.iter().enumerate() {
        // codes follow first appearance, matching what load_csv would assign
        let order = first_appearance(levels.iter().map(|&l| LEVEL_NAMES[l]));
        for (i, &l) in levels.iter().enumerate() {
            let code = order.iter().position(|n| n == LEVEL_NAMES[l]).unwrap();
            features[[i, cfg.n_numeric + c]] = code as f64;
        }
        columns.push(ColumnSpec::categorical(format!("c{c}"), order));
    }

    Ok(Dataset {
        features,
        target,
        columns,
        target_name: "y".into(),
        target_labels: None,
        timestamp_name: Some("t".into()),
        row_order_key: Some((0..cfg.n_rows).map(|i| i as f64).collect()),
        dropped_rows: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(text: &str) -> RawTable {
        RawTable::from_reader(text.as_bytes()).unwrap()
    }

    #[test]
    fn numeric_columns_parse_directly() {
        let ds = from_raw(&raw("a,b,y\n1,2,3\n4,5,6\n7,8,9\n"), "y", None).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 2);
        assert!(ds.columns.iter().all(|c| c.kind == ColumnKind::Numeric));
        assert_eq!(ds.target, vec![3.0, 6.0, 9.0]);
        assert_eq!(ds.features[[2, 1]], 8.0);
    }

    #[test]
    fn categorical_codes_follow_first_appearance() {
        let text = "sector,x,y\nIG,1,1\nHY,2,2\nIG,3,3\n";
        let ds = from_raw(&raw(text), "y", None).unwrap();
        let spec = &ds.columns[0];
        assert_eq!(spec.kind, ColumnKind::Categorical);
        // re-read the file and confirm order of first appearance
        let table = raw(text);
        let mut expected: Vec<String> = Vec::new();
        for row in &table.rows {
            if !expected.contains(&row[0]) {
                expected.push(row[0].clone());
            }
        }
        assert_eq!(spec.encoding, expected);
        assert_eq!(spec.encoding, vec!["IG", "HY"]);
        assert_eq!(ds.features.column(0).to_vec(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn rows_with_empty_cells_are_dropped() {
        let ds = from_raw(&raw("a,b,y\n1,2,3\n4,,6\n7,8,9\n"), "y", None).unwrap();
        assert_eq!(ds.dropped_rows, 1);
        assert_eq!(ds.n_rows(), 2);
    }

    #[test]
    fn missing_target_column_is_named() {
        let err = from_raw(&raw("a,b\n1,2\n"), "price", None).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "price"));
    }

    #[test]
    fn zero_usable_rows() {
        let err = from_raw(&raw("a,y\n,1\n2,\n"), "y", None).unwrap_err();
        assert!(matches!(err, Error::NoUsableRows { dropped: 2 }));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y", None),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn non_monotone_timestamps_are_sorted() {
        let ds = from_raw(
            &raw("t,x,y\n2024-01-03,3,30\n2024-01-01,1,10\n2024-01-02,2,20\n"),
            "y",
            Some("t"),
        )
        .unwrap();
        assert_eq!(ds.target, vec![10.0, 20.0, 30.0]);
        assert_eq!(ds.features.column(0).to_vec(), vec![1.0, 2.0, 3.0]);
        let key = ds.row_order_key.unwrap();
        assert!(key.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn encode_with_uses_training_vocabulary() {
        let train = from_raw(&raw("sector,x,y\nIG,1,1\nHY,2,2\n"), "y", None).unwrap();
        let schema = train.schema();
        let test = encode_with(&schema, &raw("x,sector,y\n5,IG,1\n6,EM,2\n7,HY,3\n")).unwrap();
        assert_eq!(test.features.column(0).to_vec(), vec![0.0, UNSEEN_CATEGORY, 1.0]);
        assert_eq!(test.features.column(1).to_vec(), vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn encode_with_rejects_missing_columns() {
        let train = from_raw(&raw("a,b,y\n1,2,3\n"), "y", None).unwrap();
        let err = encode_with(&train.schema(), &raw("a,y\n1,3\n")).unwrap_err();
        assert!(matches!(err, Error::ColumnMismatch(_)));
    }

    #[test]
    fn encode_rows_accepts_unlabeled_queries() {
        let train = from_raw(&raw("a,b,y\n1,2,3\n"), "y", None).unwrap();
        let q = encode_rows(&train.schema(), &raw("a,b\n1.5,2.5\n")).unwrap();
        assert!(q.labels.is_none());
        assert_eq!(q.features.row(0).to_vec(), vec![1.5, 2.5]);
    }

    #[test]
    fn categorical_target_becomes_class_ids() {
        let ds = from_raw(&raw("x,label\n1,cat\n2,dog\n3,cat\n"), "label", None).unwrap();
        assert_eq!(ds.target, vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.target_labels.as_deref(), Some(&["cat".to_string(), "dog".to_string()][..]));
    }

    fn ten_rows() -> Dataset {
        generate_synthetic(&SyntheticConfig {
            n_rows: 10,
            ..SyntheticConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn time_split_floor_arithmetic() {
        let ds = ten_rows();
        let (tr, te) = time_split(&ds, 0.75).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (7, 3));
        assert_eq!(te.target[0], ds.target[7]);
        let (tr, te) = time_split(&ds, 0.999).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (9, 1));
        assert!(matches!(time_split(&ds, 0.05), Err(Error::EmptySplit { .. })));
        assert!(time_split(&ds, 1.0).is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let cfg = SyntheticConfig {
            n_rows: 200,
            n_categorical: 2,
            ..SyntheticConfig::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        let other = generate_synthetic(&SyntheticConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.target, other.target);
    }

    #[test]
    fn zero_noise_target_is_the_signal() {
        let cfg = SyntheticConfig {
            n_rows: 100,
            n_numeric: 4,
            n_categorical: 2,
            noise: NoiseProfile::Homoscedastic { sigma: 0.0 },
            seed: 3,
        };
        let ds = generate_synthetic(&cfg).unwrap();
        for i in 0..ds.n_rows() {
            let row = ds.row(i).to_vec();
            assert_eq!(ds.target[i], cfg.signal(&ds.columns, &row));
        }
    }

    #[test]
    fn heteroscedastic_noise_grows_with_feature_zero() {
        let cfg = SyntheticConfig {
            n_rows: 50_000,
            n_numeric: 3,
            n_categorical: 1,
            noise: NoiseProfile::Heteroscedastic { low: 0.1, high: 2.0 },
            seed: 11,
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let mut pairs: Vec<(f64, f64)> = (0..ds.n_rows())
            .map(|i| {
                let row = ds.row(i).to_vec();
                (row[0], ds.target[i] - cfg.signal(&ds.columns, &row))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let std = |s: &[(f64, f64)]| {
            let m = s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64;
            (s.iter().map(|p| (p.1 - m).powi(2)).sum::<f64>() / s.len() as f64).sqrt()
        };
        let d = pairs.len() / 10;
        let bottom = std(&pairs[..d]);
        let top = std(&pairs[pairs.len() - d..]);
        assert!(top > bottom, "top {top} bottom {bottom}");
        // decile means of x0 are ~0.05 and ~0.95
        assert!((bottom - 0.195).abs() < 0.02, "{bottom}");
        assert!((top - 1.905).abs() < 0.1, "{top}");
    }

    #[test]
    fn config_validation() {
        let bad = SyntheticConfig {
            noise: NoiseProfile::Heteroscedastic { low: 2.0, high: 1.0 },
            ..SyntheticConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SyntheticConfig {
            noise: NoiseProfile::Homoscedastic { sigma: -1.0 },
            ..SyntheticConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn key_value_config() {
        let cfg = SyntheticConfig::from_key_values(
            "# comment\nn_rows = 500\nn_numeric=3\nn_categorical=0\nnoise=heteroscedastic\nsigma_low=0.1\nsigma_high=2\nseed=9\n",
        )
        .unwrap();
        assert_eq!(cfg.n_rows, 500);
        assert_eq!(cfg.noise, NoiseProfile::Heteroscedastic { low: 0.1, high: 2.0 });
        assert!(SyntheticConfig::from_key_values("bogus=1").is_err());
        assert!(SyntheticConfig::from_key_values("noise=heteroscedastic\nsigma_low=1").is_err());
    }
}
