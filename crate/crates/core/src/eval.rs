//! Error metrics, baseline comparison, walk-forward cross-validation plans and
//! randomized hyperparameter search.

use std::ops::Range;

use ndarray::{s, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams, MaxFeatures, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
}

pub fn metrics(predictions: &[f64], labels: &[f64]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = predictions.len() as f64;
    let (mut sse, mut sae) = (0.0, 0.0);
    for (p, y) in predictions.iter().zip(labels) {
        let e = p - y;
        sse += e * e;
        sae += e.abs();
    }
    Ok(Metrics {
        rmse: (sse / n).sqrt(),
        mae: sae / n,
    })
}

/// `100 · (baseline − model) / baseline`.
pub fn improvement_pct(baseline_rmse: f64, model_rmse: f64) -> f64 {
    100.0 * (baseline_rmse - model_rmse) / baseline_rmse
}

/// Model metrics, optionally against a baseline prediction column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_rows: usize,
    pub model: Metrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Metrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement_pct: Option<f64>,
}

impl EvalSummary {
    pub fn new(predictions: &[f64], labels: &[f64], baseline: Option<&[f64]>) -> Result<Self> {
        let model = metrics(predictions, labels)?;
        let baseline = baseline.map(|b| metrics(b, labels)).transpose()?;
        Ok(EvalSummary {
            n_rows: labels.len(),
            model,
            improvement_pct: baseline.map(|b| improvement_pct(b.rmse, model.rmse)),
            baseline,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Range<usize>,
    pub validation: Range<usize>,
}

/// Expanding-window, time-ordered folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_folds: usize,
    pub folds: Vec<Fold>,
}

/// Cuts `n_rows` into `n_folds + 1` contiguous blocks (the first block takes
/// the remainder); fold `k` trains on blocks `0..=k` and validates on `k + 1`.
pub fn walk_forward_splits(n_rows: usize, n_folds: usize) -> Result<CvPlan> {
    if n_folds == 0 {
        return Err(Error::InvalidConfig("n_folds must be positive".into()));
    }
    if n_rows < n_folds + 1 {
        return Err(Error::TooFewRows {
            required: n_folds + 1,
            got: n_rows,
        });
    }
    let n_blocks = n_folds + 1;
    let base = n_rows / n_blocks;
    let first = base + n_rows % n_blocks;
    let block_end = |b: usize| first + b * base;
    let folds = (0..n_folds)
        .map(|k| Fold {
            train: 0..block_end(k),
            validation: block_end(k)..block_end(k + 1),
        })
        .collect();
    Ok(CvPlan { n_folds, folds })
}

/// Candidate values for each searched hyperparameter; each is sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDistributions {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub max_features: Vec<MaxFeatures>,
    pub min_samples_leaf: Vec<usize>,
}

impl ParamDistributions {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators.is_empty()
            || self.max_depth.is_empty()
            || self.max_features.is_empty()
            || self.min_samples_leaf.is_empty()
        {
            return Err(Error::InvalidConfig("every parameter needs at least one value".into()));
        }
        if self.n_estimators.contains(&0) || self.min_samples_leaf.contains(&0) {
            return Err(Error::InvalidConfig("n_estimators and min_samples_leaf must be positive".into()));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R, seed: u64) -> ForestParams {
        let pick = |rng: &mut R, n: usize| rng.gen_range(0..n);
        ForestParams {
            n_estimators: self.n_estimators[pick(rng, self.n_estimators.len())],
            max_depth: self.max_depth[pick(rng, self.max_depth.len())],
            max_features: self.max_features[pick(rng, self.max_features.len())],
            min_samples_leaf: self.min_samples_leaf[pick(rng, self.min_samples_leaf.len())],
            bootstrap: true,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub index: usize,
    pub params: ForestParams,
    /// Validation RMSE per fold; `None` when the candidate cannot be fit on a fold.
    pub fold_rmse: Vec<Option<f64>>,
    pub mean_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_index: usize,
    pub best: ForestParams,
    pub plan: CvPlan,
    pub candidates: Vec<CandidateResult>,
}

/// Root mean squared error over encoded outputs: plain RMSE for regression,
/// root mean Brier score for class probabilities.
pub fn output_rmse(forest: &Forest, rows: ArrayView2<'_, f64>, labels: &[f64]) -> Result<f64> {
    let preds = forest.predict(rows)?;
    let task = forest.task();
    let mut enc = vec![0.0; task.output_width()];
    let mut sse = 0.0;
    for (p, &y) in preds.outer_iter().zip(labels) {
        task.encode_label(y, &mut enc)?;
        sse += p.iter().zip(&enc).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok((sse / labels.len() as f64).sqrt())
}

fn evaluate_fold(features: ArrayView2<'_, f64>, labels: &[f64], task: Task, params: &ForestParams, fold: &Fold) -> Option<f64> {
    let train_x = features.slice(s![fold.train.clone(), ..]);
    let val_x = features.slice(s![fold.validation.clone(), ..]);
    let forest = Forest::fit_arrays(train_x, &labels[fold.train.clone()], task, params).ok()?;
    output_rmse(&forest, val_x, &labels[fold.validation.clone()]).ok()
}

/// Samples `n_samples` hyperparameter combinations and keeps the one with the
/// lowest mean walk-forward validation RMSE; ties go to the earlier sample.
/// Every candidate's forest uses the same `seed`.
pub fn randomized_search(
    features: ArrayView2<'_, f64>,
    labels: &[f64],
    task: Task,
    distributions: &ParamDistributions,
    n_samples: usize,
    n_folds: usize,
    seed: u64,
) -> Result<SearchResult> {
    distributions.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    if features.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: labels.len(),
        });
    }
    let plan = walk_forward_splits(labels.len(), n_folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<ForestParams> = (0..n_samples).map(|_| distributions.sample(&mut rng, seed)).collect();

    let candidates: Vec<CandidateResult> = params
        .into_par_iter()
        .enumerate()
        .map(|(index, params)| {
            let fold_rmse: Vec<Option<f64>> = plan
                .folds
                .iter()
                .map(|fold| evaluate_fold(features, labels, task, &params, fold))
                .collect();
            let mean_rmse = fold_rmse
                .iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            CandidateResult {
                index,
                params,
                fold_rmse,
                mean_rmse,
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for c in &candidates {
        if let Some(m) = c.mean_rmse {
            if best.is_none_or(|(_, b)| m < b) {
                best = Some((c.index, m));
            }
        }
    }
    let (best_index, _) = best.ok_or_else(|| Error::InvalidConfig("no candidate could be fit on every fold".into()))?;
    Ok(SearchResult {
        best_index,
        best: candidates[best_index].params.clone(),
        plan,
        candidates,
    })
}
