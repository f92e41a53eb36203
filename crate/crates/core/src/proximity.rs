//! GAP and Breiman proximities as sparse weight rows over the training set.
//!
//! For a query `i`, the GAP weight of training row `j` is
//!
//! ```text
//! k_ij = 1/|S_i| · Σ_{t ∈ S_i} c_j(t) · 1[j shares i's leaf in t] / |M_i(t)|
//! ```
//!
//! where `c_j(t)` is the bag multiplicity of `j` in tree `t`, `|M_i(t)|` the
//! bag size of the leaf counted with multiplicity, and `S_i` the trees used:
//! all trees for an external query, the out-of-bag trees for a training row.
//! With these weights `Σ_j k_ij · y_j` equals the forest prediction.
//!
//! Breiman weights spread `1/N_i(t)` uniformly over the distinct bagged rows of
//! the leaf and average over all trees; they ignore multiplicities and so do
//! not reproduce bagged predictions.

use std::io::Write;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, Task};

/// Largest training set for which a dense proximity matrix is produced.
pub const DENSE_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProximityKind {
    GapTest,
    GapTrainOob,
    Breiman,
}

/// Sparse proximity weights of one query, ascending by training index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityRow {
    /// Batch position for external queries, training index for train rows.
    pub query_id: usize,
    pub kind: ProximityKind,
    pub entries: Vec<(usize, f64)>,
}

impl ProximityRow {
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.entries
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0.0, |pos| self.entries[pos].1)
    }

    /// Dense copy of length `n`.
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(j, w) in &self.entries {
            out[j] = w;
        }
        out
    }

    /// Entries sorted by descending weight, ties by ascending training index.
    pub fn sorted_by_weight(&self) -> Vec<(usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        e
    }
}

/// Dense accumulator reused across queries.
struct Accumulator {
    weights: Vec<f64>,
    touched: Vec<usize>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator {
            weights: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    fn add(&mut self, j: usize, w: f64) {
        if self.weights[j] == 0.0 {
            self.touched.push(j);
        }
        self.weights[j] += w;
    }

    fn drain(&mut self, scale: f64) -> Vec<(usize, f64)> {
        self.touched.sort_unstable();
        let out = self
            .touched
            .iter()
            .map(|&j| (j, self.weights[j] / scale))
            .filter(|e| e.1 > 0.0)
            .collect();
        for &j in &self.touched {
            self.weights[j] = 0.0;
        }
        self.touched.clear();
        out
    }
}

fn gap_accumulate(forest: &Forest, acc: &mut Accumulator, tree: usize, leaf: usize) {
    let members = forest.leaf_members(tree);
    let total = members.total(leaf);
    if total == 0 {
        return;
    }
    let (rows, counts) = members.members(leaf);
    for (&j, &c) in rows.iter().zip(counts) {
        acc.add(j as usize, c as f64 / total as f64);
    }
}

fn breiman_accumulate(forest: &Forest, acc: &mut Accumulator, tree: usize, leaf: usize) {
    let (rows, _) = forest.leaf_members(tree).members(leaf);
    if rows.is_empty() {
        return;
    }
    let w = 1.0 / rows.len() as f64;
    for &j in rows {
        acc.add(j as usize, w);
    }
}

fn gap_row_with(forest: &Forest, acc: &mut Accumulator, query: ArrayView1<'_, f64>, query_id: usize) -> Result<ProximityRow> {
    forest.check_row(query.len())?;
    for (t, tree) in forest.trees().iter().enumerate() {
        gap_accumulate(forest, acc, t, tree.leaf_of(query));
    }
    Ok(ProximityRow {
        query_id,
        kind: ProximityKind::GapTest,
        entries: acc.drain(forest.n_trees() as f64),
    })
}

fn gap_train_row_with(forest: &Forest, acc: &mut Accumulator, i: usize) -> Result<ProximityRow> {
    forest.check_train_index(i)?;
    let mut n_oob = 0usize;
    for t in forest.oob_trees(i) {
        gap_accumulate(forest, acc, t, forest.trees()[t].train_leaf(i));
        n_oob += 1;
    }
    if n_oob == 0 {
        return Err(Error::NeverOob(i));
    }
    Ok(ProximityRow {
        query_id: i,
        kind: ProximityKind::GapTrainOob,
        entries: acc.drain(n_oob as f64),
    })
}

fn breiman_row_with(forest: &Forest, acc: &mut Accumulator, query: ArrayView1<'_, f64>, query_id: usize) -> Result<ProximityRow> {
    forest.check_row(query.len())?;
    for (t, tree) in forest.trees().iter().enumerate() {
        breiman_accumulate(forest, acc, t, tree.leaf_of(query));
    }
    Ok(ProximityRow {
        query_id,
        kind: ProximityKind::Breiman,
        entries: acc.drain(forest.n_trees() as f64),
    })
}

/// GAP proximity row of an external query (out-of-bag for every tree).
pub fn gap_proximity_row(forest: &Forest, query: ArrayView1<'_, f64>) -> Result<ProximityRow> {
    gap_row_with(forest, &mut Accumulator::new(forest.n_train()), query, 0)
}

/// GAP proximity row of training row `i`, averaged over the trees where `i`
/// is out-of-bag. Its own index never receives weight.
pub fn gap_proximity_train_row(forest: &Forest, i: usize) -> Result<ProximityRow> {
    gap_train_row_with(forest, &mut Accumulator::new(forest.n_train()), i)
}

/// Breiman proximity row of an external query.
pub fn breiman_proximity_row(forest: &Forest, query: ArrayView1<'_, f64>) -> Result<ProximityRow> {
    breiman_row_with(forest, &mut Accumulator::new(forest.n_train()), query, 0)
}

/// Breiman proximity row of training row `i` over all trees (no OOB restriction).
pub fn breiman_proximity_train_row(forest: &Forest, i: usize) -> Result<ProximityRow> {
    forest.check_train_index(i)?;
    let mut acc = Accumulator::new(forest.n_train());
    for (t, tree) in forest.trees().iter().enumerate() {
        breiman_accumulate(forest, &mut acc, t, tree.train_leaf(i));
    }
    Ok(ProximityRow {
        query_id: i,
        kind: ProximityKind::Breiman,
        entries: acc.drain(forest.n_trees() as f64),
    })
}

/// GAP rows for a batch of external queries, computed in parallel. Query ids
/// are batch positions.
pub fn gap_proximity_rows(forest: &Forest, queries: ArrayView2<'_, f64>) -> Result<Vec<ProximityRow>> {
    forest.check_row(queries.ncols())?;
    (0..queries.nrows())
        .into_par_iter()
        .map(|q| (q, queries.row(q)))
        .map_init(
            || Accumulator::new(forest.n_train()),
            |acc, (q, row)| gap_row_with(forest, acc, row, q),
        )
        .collect()
}

/// Breiman rows for a batch of external queries.
pub fn breiman_proximity_rows(forest: &Forest, queries: ArrayView2<'_, f64>) -> Result<Vec<ProximityRow>> {
    forest.check_row(queries.ncols())?;
    (0..queries.nrows())
        .into_par_iter()
        .map(|q| (q, queries.row(q)))
        .map_init(
            || Accumulator::new(forest.n_train()),
            |acc, (q, row)| breiman_row_with(forest, acc, row, q),
        )
        .collect()
}

/// GAP out-of-bag rows for the given training indices.
pub fn gap_proximity_train_rows(forest: &Forest, indices: &[usize]) -> Vec<Result<ProximityRow>> {
    indices
        .par_iter()
        .map_init(
            || Accumulator::new(forest.n_train()),
            |acc, &i| gap_train_row_with(forest, acc, i),
        )
        .collect()
}

/// Dense `n_queries × N` GAP matrix; refused when `N` exceeds [`DENSE_LIMIT`].
pub fn dense_gap_matrix(forest: &Forest, queries: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = forest.n_train();
    if n > DENSE_LIMIT {
        return Err(Error::DenseTooLarge { n, limit: DENSE_LIMIT });
    }
    let rows = gap_proximity_rows(forest, queries)?;
    let mut out = Array2::zeros((rows.len(), n));
    for (q, row) in rows.iter().enumerate() {
        for &(j, w) in &row.entries {
            out[[q, j]] = w;
        }
    }
    Ok(out)
}

/// `Σ_j k_ij · y_j` for regression, `Σ_j k_ij · onehot(y_j)` for classification.
pub fn reconstruct_from(row: &ProximityRow, targets: &[f64], task: Task) -> Result<Vec<f64>> {
    let w = task.output_width();
    let mut out = vec![0.0; w];
    let mut enc = vec![0.0; w];
    for &(j, k) in &row.entries {
        let y = *targets.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: targets.len(),
        })?;
        task.encode_label(y, &mut enc)?;
        out.iter_mut().zip(&enc).for_each(|(o, e)| *o += k * e);
    }
    Ok(out)
}

/// [`reconstruct_from`] with the forest's own training targets.
pub fn reconstruct(forest: &Forest, row: &ProximityRow) -> Result<Vec<f64>> {
    reconstruct_from(row, forest.targets(), forest.task())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowDelta {
    pub query_id: usize,
    pub gap_error: f64,
    pub breiman_error: f64,
}

/// How far each proximity's reconstruction is from the forest's own prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub n_queries: usize,
    pub tolerance: f64,
    pub max_abs_gap_error: f64,
    pub max_abs_breiman_error: f64,
    pub gap_exact: bool,
    pub per_row: Vec<RowDelta>,
}

/// Compares GAP and Breiman reconstructions with `predict` on every query.
/// Errors are the largest absolute difference over output components.
pub fn verify_reconstruction(forest: &Forest, queries: ArrayView2<'_, f64>, tolerance: f64) -> Result<ReconstructionReport> {
    forest.check_row(queries.ncols())?;
    let per_row: Vec<RowDelta> = (0..queries.nrows())
        .into_par_iter()
        .map(|q| (q, queries.row(q)))
        .map_init(
            || Accumulator::new(forest.n_train()),
            |acc, (q, row)| {
                let pred = forest.predict_row(row)?;
                let gap = reconstruct(forest, &gap_row_with(forest, acc, row, q)?)?;
                let breiman = reconstruct(forest, &breiman_row_with(forest, acc, row, q)?)?;
                Ok(RowDelta {
                    query_id: q,
                    gap_error: max_abs_diff(&gap, &pred),
                    breiman_error: max_abs_diff(&breiman, &pred),
                })
            },
        )
        .collect::<Result<_>>()?;
    let max_abs_gap_error = per_row.iter().map(|d| d.gap_error).fold(0.0, f64::max);
    let max_abs_breiman_error = per_row.iter().map(|d| d.breiman_error).fold(0.0, f64::max);
    Ok(ReconstructionReport {
        n_queries: per_row.len(),
        tolerance,
        max_abs_gap_error,
        max_abs_breiman_error,
        gap_exact: max_abs_gap_error <= tolerance,
        per_row,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityMatrixSummary {
    pub n_queries: usize,
    pub mean_nnz: f64,
    pub max_nnz: usize,
    pub max_row_sum_deviation: f64,
}

impl ProximityMatrixSummary {
    pub fn from_rows(rows: &[ProximityRow]) -> Self {
        let n = rows.len();
        ProximityMatrixSummary {
            n_queries: n,
            mean_nnz: if n == 0 { 0.0 } else { rows.iter().map(|r| r.nnz()).sum::<usize>() as f64 / n as f64 },
            max_nnz: rows.iter().map(|r| r.nnz()).max().unwrap_or(0),
            max_row_sum_deviation: rows.iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max),
        }
    }
}

/// Writes rows as `query_id,train_index,weight` lines with a header.
pub fn write_rows_csv<W: Write>(rows: &[ProximityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query_id", "train_index", "weight"])?;
    for row in rows {
        for &(j, k) in &row.entries {
            w.write_record(&[row.query_id.to_string(), j.to_string(), k.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<proximity csv>", e))?;
    Ok(())
}
