//! Instance-based explanations built on GAP proximity rows.
//!
//! A prediction is attributed to training rows through its GAP weights; the
//! same weights average the neighbors' out-of-bag errors into a confidence
//! score that is available before the realized label is known.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, Task};
use crate::proximity::{gap_proximity_row, gap_proximity_rows, ProximityRow};

/// Thresholds reported by [`neighbors_needed`] when none are given.
pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.8, 0.9, 0.95, 0.99, 1.0];

/// Slack for cumulative sums that should reach a threshold exactly.
const CUMULATIVE_TOL: f64 = 1e-12;

/// A scalar regression output or a class-probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Output {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Output {
    fn from_vec(task: Task, v: Vec<f64>) -> Output {
        match task {
            Task::Regression => Output::Scalar(v[0]),
            Task::Classification { .. } => Output::Vector(v),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            Output::Scalar(v) => std::slice::from_ref(v),
            Output::Vector(v) => v,
        }
    }
}

/// Which fitted values define a training row's error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingErrorMode {
    /// Out-of-bag predictions; rows that are never out-of-bag have no error.
    #[default]
    OutOfBag,
    /// Fitted values over all trees (optimistic, for comparison only).
    InBag,
}

/// Absolute error of a prediction: `|y − ŷ|` for regression, `1 − p̂(y)` for
/// classification.
pub fn abs_error(task: Task, label: f64, prediction: &[f64]) -> f64 {
    match task {
        Task::Regression => (label - prediction[0]).abs(),
        Task::Classification { .. } => 1.0 - prediction.get(label as usize).copied().unwrap_or(0.0),
    }
}

/// Per-row training errors, computed once per forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingErrors {
    pub mode: TrainingErrorMode,
    pub errors: Vec<Option<f64>>,
    pub n_never_oob: usize,
    /// Mean absolute error over rows that have one.
    pub trainset_mae: f64,
}

impl TrainingErrors {
    pub fn compute(forest: &Forest, mode: TrainingErrorMode) -> Self {
        let task = forest.task();
        let errors: Vec<Option<f64>> = (0..forest.n_train())
            .into_par_iter()
            .map(|j| {
                let pred = match mode {
                    TrainingErrorMode::OutOfBag => forest.predict_oob(j).ok()?,
                    TrainingErrorMode::InBag => forest.predict_train(j).ok()?,
                };
                Some(abs_error(task, forest.targets()[j], &pred))
            })
            .collect();
        let valid: Vec<f64> = errors.iter().flatten().copied().collect();
        let n_never_oob = errors.len() - valid.len();
        if n_never_oob > 0 {
            log::warn!("{n_never_oob} training rows are never out-of-bag; excluded from error aggregates");
        }
        TrainingErrors {
            mode,
            trainset_mae: if valid.is_empty() { f64::NAN } else { valid.iter().sum::<f64>() / valid.len() as f64 },
            errors,
            n_never_oob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceScore {
    /// `Σ_j k_ij |e_j|`, renormalized over neighbors that have an error.
    pub weighted_mae: f64,
    pub trainset_mae: f64,
    /// `weighted_mae / trainset_mae`; absent when `trainset_mae` is zero.
    pub ratio: Option<f64>,
    /// Neighbors left out because they have no training error.
    pub excluded_neighbors: usize,
    pub excluded_weight: f64,
}

/// Weighted neighbor training error of one proximity row.
pub fn confidence_score(row: &ProximityRow, errors: &TrainingErrors) -> ConfidenceScore {
    let (mut num, mut den, mut excluded, mut excluded_weight) = (0.0, 0.0, 0, 0.0);
    for &(j, k) in &row.entries {
        match errors.errors[j] {
            Some(e) => {
                num += k * e;
                den += k;
            }
            None => {
                excluded += 1;
                excluded_weight += k;
            }
        }
    }
    let weighted_mae = if den > 0.0 { num / den } else { f64::NAN };
    ConfidenceScore {
        weighted_mae,
        trainset_mae: errors.trainset_mae,
        ratio: (errors.trainset_mae > 0.0).then(|| weighted_mae / errors.trainset_mae),
        excluded_neighbors: excluded,
        excluded_weight,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborAttribution {
    pub train_index: usize,
    pub weight: f64,
    pub label: f64,
    /// `weight × label` (`weight × onehot(label)` for classification).
    pub contribution: Output,
    pub train_abs_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCount {
    pub threshold: f64,
    pub count: usize,
}

/// Weights sorted descending with their running sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeWeightCurve {
    pub weights: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub n_for_threshold: Vec<ThresholdCount>,
}

impl CumulativeWeightCurve {
    pub fn from_weights(weights: &[f64], thresholds: &[f64]) -> Self {
        let mut sorted = weights.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let cumulative: Vec<f64> = sorted
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let n_for_threshold = thresholds
            .iter()
            .map(|&t| ThresholdCount {
                threshold: t,
                count: count_to_reach(&cumulative, t),
            })
            .collect();
        CumulativeWeightCurve {
            weights: sorted,
            cumulative,
            n_for_threshold,
        }
    }

    pub fn from_row(row: &ProximityRow, thresholds: &[f64]) -> Self {
        let w: Vec<f64> = row.entries.iter().map(|e| e.1).collect();
        Self::from_weights(&w, thresholds)
    }

    /// Neighbors needed to reach `threshold` of the total weight.
    pub fn count_for(&self, threshold: f64) -> usize {
        count_to_reach(&self.cumulative, threshold)
    }
}

/// Smallest prefix length whose running sum reaches `threshold`.
fn count_to_reach(cumulative: &[f64], threshold: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| c >= threshold - CUMULATIVE_TOL)
        .map_or(cumulative.len(), |p| p + 1)
}

/// How histogram bin edges are chosen from the training labels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    #[default]
    FreedmanDiaconis,
    Fixed(usize),
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Equal-width bin edges over `[min, max]` of the labels. Freedman–Diaconis
/// width is `2·IQR·n^(-1/3)`; degenerate spreads fall back to Sturges' rule.
pub fn bin_edges(labels: &[f64], binning: Binning) -> Vec<f64> {
    let mut sorted = labels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if max == min {
        return vec![min - 0.5, max + 0.5];
    }
    let n_bins = match binning {
        Binning::Fixed(k) => k.max(1),
        Binning::FreedmanDiaconis => {
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            let width = 2.0 * iqr * (sorted.len() as f64).powf(-1.0 / 3.0);
            if width > 0.0 {
                (((max - min) / width).ceil() as usize).clamp(1, 10_000)
            } else {
                ((sorted.len() as f64).log2().ceil() as usize + 1).max(1)
            }
        }
    };
    let step = (max - min) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|b| min + step * b as f64).collect();
    edges.push(max);
    edges
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted: Option<Vec<f64>>,
}

impl LabelHistogram {
    fn empty(edges: &[f64], weighted: bool) -> Self {
        let n = edges.len() - 1;
        LabelHistogram {
            edges: edges.to_vec(),
            counts: vec![0; n],
            weighted: weighted.then(|| vec![0.0; n]),
        }
    }

    fn bin_of(&self, v: f64) -> usize {
        let n = self.counts.len();
        match self.edges[1..n].iter().position(|&e| v < e) {
            Some(b) => b,
            None => n - 1,
        }
    }

    fn add(&mut self, v: f64, w: f64) {
        let b = self.bin_of(v);
        self.counts[b] += 1;
        if let Some(weighted) = self.weighted.as_mut() {
            weighted[b] += w;
        }
    }
}

/// Central interval of the GAP-weighted neighbor label distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub mass: f64,
    pub low: f64,
    pub high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains_realized: Option<bool>,
}

/// Weighted quantile: smallest label whose cumulative weight reaches `q`.
fn weighted_quantile(sorted: &[(f64, f64)], total: f64, q: f64) -> f64 {
    let mut acc = 0.0;
    for &(label, w) in sorted {
        acc += w;
        if acc >= q * total - CUMULATIVE_TOL {
            return label;
        }
    }
    sorted.last().map_or(f64::NAN, |e| e.0)
}

/// Interval holding the central `mass` of the weighted label distribution of a row.
pub fn weighted_label_interval(row: &ProximityRow, targets: &[f64], mass: f64) -> LabelInterval {
    let mut pairs: Vec<(f64, f64)> = row.entries.iter().map(|&(j, w)| (targets[j], w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let tail = (1.0 - mass) / 2.0;
    LabelInterval {
        mass,
        low: weighted_quantile(&pairs, total, tail),
        high: weighted_quantile(&pairs, total, 1.0 - tail),
        contains_realized: None,
    }
}

/// Attribution of one prediction across the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub query_id: usize,
    pub prediction: Output,
    pub realized_label: Option<f64>,
    pub abs_error: Option<f64>,
    pub threshold: f64,
    /// Sum of contributions over every neighbor (not just the kept prefix).
    pub contribution_sum: Output,
    pub n_neighbors_total: usize,
    /// Kept neighbors: the smallest weight-sorted prefix reaching `threshold`.
    pub neighbors: Vec<NeighborAttribution>,
    pub curve: CumulativeWeightCurve,
    pub neighbor_label_histogram: LabelHistogram,
    pub train_label_histogram: LabelHistogram,
    pub neighbor_label_interval: LabelInterval,
    pub confidence: ConfidenceScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainOptions {
    pub error_mode: TrainingErrorMode,
    pub binning: Binning,
    /// Mass of the central neighbor-label interval.
    pub interval_mass: f64,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            error_mode: TrainingErrorMode::OutOfBag,
            binning: Binning::FreedmanDiaconis,
            interval_mass: 0.95,
        }
    }
}

/// Explanation context for one forest: training errors and histogram bins
/// are computed once and shared by every query.
pub struct Explainer<'a> {
    forest: &'a Forest,
    options: ExplainOptions,
    errors: TrainingErrors,
    train_hist: LabelHistogram,
}

impl<'a> Explainer<'a> {
    pub fn new(forest: &'a Forest, options: ExplainOptions) -> Self {
        let errors = TrainingErrors::compute(forest, options.error_mode);
        let edges = bin_edges(forest.targets(), options.binning);
        let mut train_hist = LabelHistogram::empty(&edges, false);
        for &y in forest.targets() {
            train_hist.add(y, 1.0);
        }
        Explainer {
            forest,
            options,
            errors,
            train_hist,
        }
    }

    pub fn forest(&self) -> &Forest {
        self.forest
    }

    pub fn training_errors(&self) -> &TrainingErrors {
        &self.errors
    }

    pub fn train_histogram(&self) -> &LabelHistogram {
        &self.train_hist
    }

    pub fn confidence(&self, query: ArrayView1<'_, f64>) -> Result<ConfidenceScore> {
        Ok(confidence_score(&gap_proximity_row(self.forest, query)?, &self.errors))
    }

    /// Explains one external query.
    pub fn explain(&self, query_id: usize, query: ArrayView1<'_, f64>, realized: Option<f64>, threshold: f64) -> Result<ExplanationReport> {
        let mut row = gap_proximity_row(self.forest, query)?;
        row.query_id = query_id;
        let prediction = self.forest.predict_row(query)?;
        self.explain_row(&row, prediction, realized, threshold)
    }

    /// Explains a precomputed GAP row given the forest's prediction for it.
    pub fn explain_row(&self, row: &ProximityRow, prediction: Vec<f64>, realized: Option<f64>, threshold: f64) -> Result<ExplanationReport> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!("threshold {threshold} not in (0,1]")));
        }
        let forest = self.forest;
        let task = forest.task();
        let width = forest.output_width();
        let targets = forest.targets();

        let sorted = row.sorted_by_weight();
        let mut contribution_sum = vec![0.0; width];
        let mut attributions = Vec::with_capacity(sorted.len());
        for &(j, k) in &sorted {
            let enc = forest.encoded_target(j);
            let contribution: Vec<f64> = enc.iter().map(|e| k * e).collect();
            contribution_sum.iter_mut().zip(&contribution).for_each(|(s, c)| *s += c);
            attributions.push(NeighborAttribution {
                train_index: j,
                weight: k,
                label: targets[j],
                contribution: Output::from_vec(task, contribution),
                train_abs_error: self.errors.errors[j],
            });
        }

        let mut thresholds = DEFAULT_THRESHOLDS.to_vec();
        if !thresholds.contains(&threshold) {
            thresholds.push(threshold);
            thresholds.sort_by(f64::total_cmp);
        }
        let weights: Vec<f64> = sorted.iter().map(|e| e.1).collect();
        let curve = CumulativeWeightCurve::from_weights(&weights, &thresholds);
        let keep = curve.count_for(threshold);
        attributions.truncate(keep);

        let mut neighbor_hist = LabelHistogram::empty(&self.train_hist.edges, true);
        for a in &attributions {
            neighbor_hist.add(a.label, a.weight);
        }

        let abs_err = realized.map(|y| abs_error(task, y, &prediction));
        let mut interval = weighted_label_interval(row, targets, self.options.interval_mass);
        if let (Some(y), Task::Regression) = (realized, task) {
            interval.contains_realized = Some(interval.low <= y && y <= interval.high);
        }

        Ok(ExplanationReport {
            query_id: row.query_id,
            prediction: Output::from_vec(task, prediction),
            realized_label: realized,
            abs_error: abs_err,
            threshold,
            contribution_sum: Output::from_vec(task, contribution_sum),
            n_neighbors_total: sorted.len(),
            neighbors: attributions,
            curve,
            neighbor_label_histogram: neighbor_hist,
            train_label_histogram: self.train_hist.clone(),
            neighbor_label_interval: interval,
            confidence: confidence_score(row, &self.errors),
        })
    }

    /// Explains every row of a batch, in parallel.
    pub fn explain_batch(&self, queries: ArrayView2<'_, f64>, realized: Option<&[f64]>, threshold: f64) -> Result<Vec<ExplanationReport>> {
        if let Some(labels) = realized {
            if labels.len() != queries.nrows() {
                return Err(Error::LengthMismatch {
                    left: queries.nrows(),
                    right: labels.len(),
                });
            }
        }
        let rows = gap_proximity_rows(self.forest, queries)?;
        rows.par_iter()
            .map(|row| {
                let prediction = self.forest.predict_row(queries.row(row.query_id))?;
                self.explain_row(row, prediction, realized.map(|l| l[row.query_id]), threshold)
            })
            .collect()
    }
}

/// Per-query neighbor counts for a set of cumulative-weight thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborsNeeded {
    pub thresholds: Vec<f64>,
    /// `per_query[q][t]`: neighbors query `q` needs to reach `thresholds[t]`.
    pub per_query: Vec<Vec<usize>>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub curves: Vec<CumulativeWeightCurve>,
}

impl NeighborsNeeded {
    pub fn from_curves(curves: Vec<CumulativeWeightCurve>, thresholds: &[f64]) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::EmptyInput);
        }
        let per_query: Vec<Vec<usize>> = curves
            .iter()
            .map(|c| thresholds.iter().map(|&t| c.count_for(t)).collect())
            .collect();
        let mut mean = Vec::new();
        let mut median = Vec::new();
        for t in 0..thresholds.len() {
            let mut col: Vec<f64> = per_query.iter().map(|r| r[t] as f64).collect();
            mean.push(col.iter().sum::<f64>() / col.len() as f64);
            col.sort_by(f64::total_cmp);
            let m = col.len();
            median.push(if m % 2 == 1 { col[m / 2] } else { 0.5 * (col[m / 2 - 1] + col[m / 2]) });
        }
        Ok(NeighborsNeeded {
            thresholds: thresholds.to_vec(),
            per_query,
            mean,
            median,
            curves,
        })
    }

    /// Mean cumulative weight after `k` neighbors, for `k = 1..=max nnz`.
    /// Queries with fewer neighbors contribute their final value.
    pub fn mean_curve(&self) -> Vec<f64> {
        let longest = self.curves.iter().map(|c| c.cumulative.len()).max().unwrap_or(0);
        (0..longest)
            .map(|k| {
                self.curves
                    .iter()
                    .map(|c| c.cumulative.get(k).or(c.cumulative.last()).copied().unwrap_or(0.0))
                    .sum::<f64>()
                    / self.curves.len() as f64
            })
            .collect()
    }
}

/// How many top-weighted neighbors each query needs to reach each threshold.
pub fn neighbors_needed(forest: &Forest, queries: ArrayView2<'_, f64>, thresholds: &[f64]) -> Result<NeighborsNeeded> {
    if queries.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let rows = gap_proximity_rows(forest, queries)?;
    let curves = rows.iter().map(|r| CumulativeWeightCurve::from_row(r, thresholds)).collect();
    NeighborsNeeded::from_curves(curves, thresholds)
}

/// Pearson correlation; `None` when fewer than two points or either side has
/// zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidencePoint {
    pub query_id: usize,
    pub weighted_mae: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    pub decile: usize,
    pub n: usize,
    pub mean_weighted_mae: f64,
    pub mean_abs_error: f64,
}

/// Test error against weighted neighbor training error, per point and per
/// equal-count bin of the weighted error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceErrorTable {
    pub points: Vec<ConfidencePoint>,
    pub deciles: Vec<DecileRow>,
    pub pearson_per_point: Option<f64>,
    pub pearson_decile_means: Option<f64>,
}

/// Builds the table from `(weighted_mae, abs_error)` pairs in query order.
///
/// Points are ranked by weighted error (stable, so ties keep query order) and
/// cut into `n_bins` equal-count bins; the remainder goes to the leading bins.
pub fn decile_table(points: Vec<ConfidencePoint>, n_bins: usize) -> Result<ConfidenceErrorTable> {
    if n_bins == 0 || points.len() < n_bins {
        return Err(Error::TooFewRows {
            required: n_bins.max(1),
            got: points.len(),
        });
    }
    let mut ranked = points.clone();
    ranked.sort_by(|a, b| a.weighted_mae.total_cmp(&b.weighted_mae));
    let base = ranked.len() / n_bins;
    let extra = ranked.len() % n_bins;
    let mut deciles = Vec::with_capacity(n_bins);
    let mut start = 0;
    for d in 0..n_bins {
        let size = base + usize::from(d < extra);
        let bin = &ranked[start..start + size];
        deciles.push(DecileRow {
            decile: d + 1,
            n: size,
            mean_weighted_mae: bin.iter().map(|p| p.weighted_mae).sum::<f64>() / size as f64,
            mean_abs_error: bin.iter().map(|p| p.abs_error).sum::<f64>() / size as f64,
        });
        start += size;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.weighted_mae).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.abs_error).collect();
    let dx: Vec<f64> = deciles.iter().map(|d| d.mean_weighted_mae).collect();
    let dy: Vec<f64> = deciles.iter().map(|d| d.mean_abs_error).collect();
    Ok(ConfidenceErrorTable {
        pearson_per_point: pearson(&xs, &ys),
        pearson_decile_means: pearson(&dx, &dy),
        points,
        deciles,
    })
}

/// Relates each test point's weighted neighbor training error to its realized
/// absolute error.
pub fn confidence_vs_error(explainer: &Explainer<'_>, test_rows: ArrayView2<'_, f64>, test_labels: &[f64], n_deciles: usize) -> Result<ConfidenceErrorTable> {
    if test_rows.nrows() != test_labels.len() {
        return Err(Error::LengthMismatch {
            left: test_rows.nrows(),
            right: test_labels.len(),
        });
    }
    if test_rows.nrows() < n_deciles.max(1) {
        return Err(Error::TooFewRows {
            required: n_deciles.max(1),
            got: test_rows.nrows(),
        });
    }
    let forest = explainer.forest();
    let rows = gap_proximity_rows(forest, test_rows)?;
    let points = rows
        .par_iter()
        .map(|row| {
            let pred = forest.predict_row(test_rows.row(row.query_id))?;
            Ok(ConfidencePoint {
                query_id: row.query_id,
                weighted_mae: confidence_score(row, explainer.training_errors()).weighted_mae,
                abs_error: abs_error(forest.task(), test_labels[row.query_id], &pred),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    decile_table(points, n_deciles)
}
