//! Bagged CART forests with explicit per-tree bootstrap multiplicities.
//!
//! Every tree keeps the bag count `c_j(t)` of each training row and the leaf
//! each training row lands in, which is all the proximity module needs to
//! rewrite predictions as weighted label averages.

mod persist;
mod tree;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use persist::{ModelFile, MODEL_FORMAT, MODEL_VERSION};
pub use tree::{Node, Tree};

/// Learning task. Classification targets are class ids `0..n_classes` and are
/// encoded one-hot internally, so every leaf value is a class-frequency vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

impl Task {
    /// Length of a prediction vector: 1 for regression, `n_classes` otherwise.
    pub fn output_width(&self) -> usize {
        match *self {
            Task::Regression => 1,
            Task::Classification { n_classes } => n_classes,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Task::Classification { .. })
    }

    /// Writes the encoded form of `label` into `out` (length `output_width`).
    pub fn encode_label(&self, label: f64, out: &mut [f64]) -> Result<()> {
        match *self {
            Task::Regression => out[0] = label,
            Task::Classification { n_classes } => {
                if label < 0.0 || label.fract() != 0.0 || label as usize >= n_classes {
                    return Err(Error::InvalidLabel { label, n_classes });
                }
                out.iter_mut().for_each(|v| *v = 0.0);
                out[label as usize] = 1.0;
            }
        }
        Ok(())
    }

    pub(crate) fn encode_all(&self, labels: &[f64]) -> Result<Vec<f64>> {
        let w = self.output_width();
        let mut out = vec![0.0; labels.len() * w];
        for (j, &y) in labels.iter().enumerate() {
            self.encode_label(y, &mut out[j * w..(j + 1) * w])?;
        }
        Ok(out)
    }
}

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(&self, n_features: usize) -> usize {
        let k = match *self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::Fraction(p) => (p * n_features as f64).floor() as usize,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "none" | "1.0" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            other => match other.parse::<f64>() {
                Ok(p) if p > 0.0 && p <= 1.0 => Ok(MaxFeatures::Fraction(p)),
                _ => Err(Error::InvalidParams(format!(
                    "max_features must be all, sqrt or a fraction in (0,1], got `{s}`"
                ))),
            },
        }
    }
}

impl std::fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaxFeatures::All => write!(f, "all"),
            MaxFeatures::Sqrt => write!(f, "sqrt"),
            MaxFeatures::Fraction(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// `None` grows until leaves are pure or hit `min_samples_leaf`.
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    /// Minimum bagged weight (rows counted with multiplicity) in each child.
    pub min_samples_leaf: usize,
    /// When false every tree sees each row exactly once (`c_j(t) = 1`).
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: None,
            max_features: MaxFeatures::All,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParams("n_estimators must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParams("min_samples_leaf must be positive".into()));
        }
        if self.min_samples_leaf >= n_rows {
            return Err(Error::InvalidParams(format!(
                "min_samples_leaf {} must be below the number of rows {n_rows}",
                self.min_samples_leaf
            )));
        }
        if let MaxFeatures::Fraction(p) = self.max_features {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParams(format!("max_features fraction {p} not in (0,1]")));
            }
        }
        Ok(())
    }
}

/// Bootstrap multiplicities of one tree: `counts[j]` is how often training
/// row `j` was drawn. Row `j` is out-of-bag iff `counts[j] == 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BagCounts(pub Vec<u32>);

impl BagCounts {
    pub fn count(&self, j: usize) -> u32 {
        self.0[j]
    }

    pub fn is_oob(&self, j: usize) -> bool {
        self.0[j] == 0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }

    fn draw<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut counts = vec![0u32; n];
        for _ in 0..n {
            counts[rng.gen_range(0..n)] += 1;
        }
        BagCounts(counts)
    }
}

/// Leaf ids of one query row, one per tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafAssignment(pub Vec<u32>);

/// Bagged members of every leaf of one tree in CSR layout, ascending by row.
#[derive(Debug, Clone, Default)]
pub(crate) struct LeafMembers {
    offsets: Vec<usize>,
    rows: Vec<u32>,
    counts: Vec<u32>,
    /// `|M(leaf)|`: bag size of the leaf counted with multiplicity.
    totals: Vec<u64>,
}

impl LeafMembers {
    fn build(tree: &Tree, bag: &BagCounts) -> Self {
        let n_leaves = tree.n_leaves;
        let mut sizes = vec![0usize; n_leaves];
        for (j, &leaf) in tree.train_leaves.iter().enumerate() {
            if bag.0[j] > 0 {
                sizes[leaf as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n_leaves + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let nnz = *offsets.last().unwrap();
        let mut rows = vec![0u32; nnz];
        let mut counts = vec![0u32; nnz];
        let mut totals = vec![0u64; n_leaves];
        let mut cursor = offsets[..n_leaves].to_vec();
        for (j, &leaf) in tree.train_leaves.iter().enumerate() {
            let c = bag.0[j];
            if c > 0 {
                let leaf = leaf as usize;
                rows[cursor[leaf]] = j as u32;
                counts[cursor[leaf]] = c;
                totals[leaf] += c as u64;
                cursor[leaf] += 1;
            }
        }
        LeafMembers {
            offsets,
            rows,
            counts,
            totals,
        }
    }

    pub(crate) fn members(&self, leaf: usize) -> (&[u32], &[u32]) {
        let r = self.offsets[leaf]..self.offsets[leaf + 1];
        (&self.rows[r.clone()], &self.counts[r])
    }

    pub(crate) fn total(&self, leaf: usize) -> u64 {
        self.totals[leaf]
    }
}

/// A trained forest. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Forest {
    task: Task,
    params: ForestParams,
    n_features: usize,
    targets: Vec<f64>,
    encoded_targets: Vec<f64>,
    trees: Vec<Tree>,
    bags: Vec<BagCounts>,
    members: Vec<LeafMembers>,
}

impl PartialEq for Forest {
    fn eq(&self, other: &Self) -> bool {
        self.task == other.task
            && self.params == other.params
            && self.n_features == other.n_features
            && self.targets == other.targets
            && self.trees == other.trees
            && self.bags == other.bags
    }
}

impl Forest {
    /// Fits a forest on a dataset.
    pub fn fit(ds: &Dataset, task: Task, params: &ForestParams) -> Result<Forest> {
        Self::fit_arrays(ds.features_view(), &ds.target, task, params)
    }

    /// Fits a forest on a feature matrix and label vector.
    ///
    /// Each tree draws its own bootstrap from a ChaCha stream keyed by
    /// `(seed, tree index)`, so trees can be grown in parallel and the result
    /// does not depend on thread scheduling.
    pub fn fit_arrays(
        features: ArrayView2<'_, f64>,
        targets: &[f64],
        task: Task,
        params: &ForestParams,
    ) -> Result<Forest> {
        let n = features.nrows();
        if n != targets.len() {
            return Err(Error::LengthMismatch {
                left: n,
                right: targets.len(),
            });
        }
        if n < 2 {
            return Err(Error::TooFewRows {
                required: 2,
                got: n,
            });
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidParams("too many rows".into()));
        }
        if features.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite feature or target value".into()));
        }
        params.validate(n)?;
        let width = task.output_width();
        let encoded = task.encode_all(targets)?;
        let cfg = tree::GrowConfig {
            max_depth: params.max_depth,
            n_candidate_features: params.max_features.resolve(features.ncols()),
            min_samples_leaf: params.min_samples_leaf as u64,
        };

        let grown: Vec<(Tree, BagCounts)> = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let bag = if params.bootstrap {
                    BagCounts::draw(n, &mut rng)
                } else {
                    BagCounts(vec![1; n])
                };
                let (nodes, n_leaves) = tree::grow(features, &encoded, width, &bag.0, &cfg, &mut rng);
                let tree = Self::finish_tree(nodes, n_leaves, features, &bag, &encoded, width);
                (tree, bag)
            })
            .collect();
        let (trees, bags): (Vec<_>, Vec<_>) = grown.into_iter().unzip();
        Ok(Self::assemble(task, params.clone(), features.ncols(), targets.to_vec(), encoded, trees, bags))
    }

    /// Builds a forest from explicit tree structures and bag counts, e.g. a
    /// hand-constructed example. Training rows are routed through each tree
    /// and leaf values are recomputed from the bags.
    pub fn from_structure(
        task: Task,
        features: ArrayView2<'_, f64>,
        targets: &[f64],
        trees: Vec<Vec<Node>>,
        bags: Vec<BagCounts>,
    ) -> Result<Forest> {
        let n = features.nrows();
        if n != targets.len() {
            return Err(Error::LengthMismatch {
                left: n,
                right: targets.len(),
            });
        }
        if trees.is_empty() || trees.len() != bags.len() {
            return Err(Error::MalformedForest("need one bag per tree".into()));
        }
        let encoded = task.encode_all(targets)?;
        let width = task.output_width();
        let mut built = Vec::with_capacity(trees.len());
        for (nodes, bag) in trees.into_iter().zip(&bags) {
            if bag.0.len() != n {
                return Err(Error::MalformedForest("bag length differs from row count".into()));
            }
            let n_leaves = validate_nodes(&nodes, features.ncols())?;
            built.push(Self::finish_tree(nodes, n_leaves, features, bag, &encoded, width));
        }
        let params = ForestParams {
            n_estimators: built.len(),
            bootstrap: bags.iter().any(|b| b.0.iter().any(|&c| c != 1)),
            ..ForestParams::default()
        };
        Ok(Self::assemble(task, params, features.ncols(), targets.to_vec(), encoded, built, bags))
    }

    fn finish_tree(
        nodes: Vec<Node>,
        n_leaves: usize,
        features: ArrayView2<'_, f64>,
        bag: &BagCounts,
        encoded: &[f64],
        width: usize,
    ) -> Tree {
        let mut tree = Tree {
            nodes,
            n_leaves,
            leaf_values: Vec::new(),
            train_leaves: Vec::new(),
        };
        tree.train_leaves = features
            .rows()
            .into_iter()
            .map(|r| tree.leaf_of(r) as u32)
            .collect();
        tree.leaf_values = tree::leaf_means(n_leaves, &tree.train_leaves, &bag.0, encoded, width);
        tree
    }

    fn assemble(
        task: Task,
        params: ForestParams,
        n_features: usize,
        targets: Vec<f64>,
        encoded_targets: Vec<f64>,
        trees: Vec<Tree>,
        bags: Vec<BagCounts>,
    ) -> Forest {
        let members = trees
            .iter()
            .zip(&bags)
            .map(|(t, b)| LeafMembers::build(t, b))
            .collect();
        Forest {
            task,
            params,
            n_features,
            targets,
            encoded_targets,
            trees,
            bags,
            members,
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_train(&self) -> usize {
        self.targets.len()
    }

    pub fn output_width(&self) -> usize {
        self.task.output_width()
    }

    /// Training labels as supplied to `fit` (class ids for classification).
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Encoded training label of row `j` (`[y]` or one-hot).
    pub fn encoded_target(&self, j: usize) -> &[f64] {
        let w = self.output_width();
        &self.encoded_targets[j * w..(j + 1) * w]
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn bags(&self) -> &[BagCounts] {
        &self.bags
    }

    pub(crate) fn leaf_members(&self, tree: usize) -> &LeafMembers {
        &self.members[tree]
    }

    /// Trees for which training row `i` is out-of-bag (`S_i`).
    pub fn oob_trees(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.bags
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.is_oob(i))
            .map(|(t, _)| t)
    }

    pub fn is_ever_oob(&self, i: usize) -> bool {
        self.bags.iter().any(|b| b.is_oob(i))
    }

    pub(crate) fn check_row(&self, len: usize) -> Result<()> {
        if len != self.n_features {
            return Err(Error::FeatureMismatch {
                expected: self.n_features,
                got: len,
            });
        }
        Ok(())
    }

    pub(crate) fn check_train_index(&self, i: usize) -> Result<()> {
        if i >= self.n_train() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_train(),
            });
        }
        Ok(())
    }

    /// Leaf ids of one row in every tree.
    pub fn apply_row(&self, row: ArrayView1<'_, f64>) -> Result<LeafAssignment> {
        self.check_row(row.len())?;
        Ok(LeafAssignment(
            self.trees.iter().map(|t| t.leaf_of(row) as u32).collect(),
        ))
    }

    /// Leaf ids of many rows in every tree.
    pub fn apply(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<LeafAssignment>> {
        self.check_row(rows.ncols())?;
        Ok((0..rows.nrows())
            .into_par_iter()
            .map(|i| rows.row(i))
            .map(|r| LeafAssignment(self.trees.iter().map(|t| t.leaf_of(r) as u32).collect()))
            .collect())
    }

    /// Mean over trees of the leaf outputs of one row.
    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        self.check_row(row.len())?;
        let w = self.output_width();
        let mut out = vec![0.0; w];
        for tree in &self.trees {
            let v = tree.leaf_value(tree.leaf_of(row), w);
            out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
        }
        let m = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= m);
        Ok(out)
    }

    /// Predictions for many rows, `n_rows × output_width`. Classification rows
    /// are soft votes (mean class-frequency vectors).
    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_row(rows.ncols())?;
        let w = self.output_width();
        let preds: Vec<Vec<f64>> = (0..rows.nrows())
            .into_par_iter()
            .map(|i| self.predict_row(rows.row(i)))
            .collect::<Result<_>>()?;
        Ok(Array2::from_shape_vec((rows.nrows(), w), preds.concat()).expect("shape"))
    }

    /// Scalar regression predictions (first output column).
    pub fn predict_values(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.predict(rows)?.column(0).to_vec())
    }

    /// Argmax class per row, ties broken toward the smaller class id.
    pub fn predict_classes(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self.predict(rows)?.outer_iter().map(|p| argmax(p.as_slice().unwrap())).collect())
    }

    /// Out-of-bag prediction of training row `i`: mean leaf output over `S_i`.
    pub fn predict_oob(&self, i: usize) -> Result<Vec<f64>> {
        self.check_train_index(i)?;
        let w = self.output_width();
        let mut out = vec![0.0; w];
        let mut n_oob = 0usize;
        for t in self.oob_trees(i) {
            let tree = &self.trees[t];
            let v = tree.leaf_value(tree.train_leaf(i), w);
            out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
            n_oob += 1;
        }
        if n_oob == 0 {
            return Err(Error::NeverOob(i));
        }
        out.iter_mut().for_each(|o| *o /= n_oob as f64);
        Ok(out)
    }

    /// In-bag fitted value of training row `i`: mean leaf output over all trees.
    pub fn predict_train(&self, i: usize) -> Result<Vec<f64>> {
        self.check_train_index(i)?;
        let w = self.output_width();
        let mut out = vec![0.0; w];
        for tree in &self.trees {
            let v = tree.leaf_value(tree.train_leaf(i), w);
            out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
        }
        let m = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= m);
        Ok(out)
    }

    /// Recomputes every leaf value from bags, leaf membership and training
    /// targets and compares with the stored values bit for bit.
    pub fn leaf_values_consistent(&self) -> bool {
        let w = self.output_width();
        self.trees.iter().zip(&self.bags).all(|(tree, bag)| {
            tree::leaf_means(tree.n_leaves, &tree.train_leaves, &bag.0, &self.encoded_targets, w)
                == tree.leaf_values
        })
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Checks node links and returns the leaf count; leaf ids must be dense.
fn validate_nodes(nodes: &[Node], n_features: usize) -> Result<usize> {
    if nodes.is_empty() {
        return Err(Error::MalformedForest("empty tree".into()));
    }
    let mut leaf_ids = Vec::new();
    for node in nodes {
        match *node {
            Node::Leaf { leaf_id } => leaf_ids.push(leaf_id),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if feature >= n_features || left >= nodes.len() || right >= nodes.len() || !threshold.is_finite() {
                    return Err(Error::MalformedForest("bad split node".into()));
                }
            }
        }
    }
    leaf_ids.sort_unstable();
    if leaf_ids.iter().enumerate().any(|(i, &id)| i != id) {
        return Err(Error::MalformedForest("leaf ids are not dense".into()));
    }
    Ok(leaf_ids.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, NoiseProfile, SyntheticConfig};
    use ndarray::array;

    fn leaf() -> Vec<Node> {
        vec![Node::Leaf { leaf_id: 0 }]
    }

    fn synthetic(n: usize, sigma: f64, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticConfig {
            n_rows: n,
            n_numeric: 4,
            n_categorical: 1,
            noise: NoiseProfile::Homoscedastic { sigma },
            seed,
        })
        .unwrap()
    }

    #[test]
    fn single_row_rejected() {
        let x = array![[1.0]];
        let err = Forest::fit_arrays(x.view(), &[1.0], Task::Regression, &ForestParams::default());
        assert!(matches!(err, Err(Error::TooFewRows { .. })));
        let x = Array2::<f64>::zeros((0, 2));
        assert!(Forest::fit_arrays(x.view(), &[], Task::Regression, &ForestParams::default()).is_err());
    }

    #[test]
    fn min_samples_leaf_must_be_below_n() {
        let ds = synthetic(10, 0.1, 0);
        let params = ForestParams {
            min_samples_leaf: 10,
            ..ForestParams::default()
        };
        assert!(matches!(Forest::fit(&ds, Task::Regression, &params), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn depth_zero_trees_predict_bag_mean() {
        let ds = synthetic(50, 0.5, 1);
        let params = ForestParams {
            n_estimators: 5,
            max_depth: Some(0),
            ..ForestParams::default()
        };
        let forest = Forest::fit(&ds, Task::Regression, &params).unwrap();
        for (tree, bag) in forest.trees().iter().zip(forest.bags()) {
            assert_eq!(tree.n_leaves(), 1);
            let mean = ds
                .target
                .iter()
                .zip(&bag.0)
                .map(|(y, &c)| y * c as f64)
                .sum::<f64>()
                / ds.n_rows() as f64;
            approx::assert_abs_diff_eq!(tree.leaf_value(0, 1)[0], mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let ds = synthetic(300, 0.5, 2);
        let params = ForestParams {
            n_estimators: 20,
            max_features: MaxFeatures::Sqrt,
            seed: 42,
            ..ForestParams::default()
        };
        let a = Forest::fit(&ds, Task::Regression, &params).unwrap();
        let b = Forest::fit(&ds, Task::Regression, &params).unwrap();
        assert_eq!(a, b);
        let held_out = synthetic(1, 0.5, 99);
        assert_eq!(
            a.predict(held_out.features_view()).unwrap(),
            b.predict(held_out.features_view()).unwrap()
        );
        let c = Forest::fit(&ds, Task::Regression, &ForestParams { seed: 43, ..params }).unwrap();
        assert_ne!(a.bags(), c.bags());
    }

    #[test]
    fn bag_counts_sum_to_n() {
        let ds = synthetic(123, 0.5, 3);
        let forest = Forest::fit(&ds, Task::Regression, &ForestParams {
            n_estimators: 30,
            ..ForestParams::default()
        })
        .unwrap();
        assert!(forest.bags().iter().all(|b| b.total() == 123));
        assert!(forest.leaf_values_consistent());
    }

    #[test]
    fn single_leaf_tree_applies_to_leaf_zero() {
        let x = array![[1.0], [2.0], [3.0]];
        let f = Forest::from_structure(Task::Regression, x.view(), &[1.0, 2.0, 3.0], vec![leaf()], vec![BagCounts(vec![1, 1, 1])]).unwrap();
        assert_eq!(f.apply_row(array![17.0].view()).unwrap(), LeafAssignment(vec![0]));
        assert_eq!(f.predict_row(array![-5.0].view()).unwrap(), vec![2.0]);
    }

    #[test]
    fn two_trees_average() {
        let x = array![[0.0], [1.0]];
        let f = Forest::from_structure(
            Task::Regression,
            x.view(),
            &[1.0, 3.0],
            vec![leaf(), leaf()],
            vec![BagCounts(vec![2, 0]), BagCounts(vec![0, 2])],
        )
        .unwrap();
        assert_eq!(f.predict_row(array![0.5].view()).unwrap(), vec![2.0]);
    }

    #[test]
    fn soft_vote_and_argmax() {
        // tree 1 leaf frequencies (0.5,0.5), tree 2 (0.25,0.75)
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0.0, 1.0, 0.0, 1.0];
        let f = Forest::from_structure(
            Task::Classification { n_classes: 2 },
            x.view(),
            &y,
            vec![leaf(), leaf()],
            vec![BagCounts(vec![1, 1, 1, 1]), BagCounts(vec![1, 3, 0, 0])],
        )
        .unwrap();
        let p = f.predict(array![[0.0]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.375, 0.625]);
        assert_eq!(f.predict_classes(array![[0.0]].view()).unwrap(), vec![1]);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn oob_prediction_uses_only_oob_trees() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = [1.0, 2.0, 3.0];
        let single = Forest::from_structure(Task::Regression, x.view(), &y, vec![leaf()], vec![BagCounts(vec![1, 2, 0])]).unwrap();
        // M=1, counts[2]=0, bag mean (1+2+2)/3
        assert_eq!(single.predict_oob(2).unwrap(), vec![5.0 / 3.0]);
        assert!(matches!(single.predict_oob(0), Err(Error::NeverOob(0))));

        let split = vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
            Node::Leaf { leaf_id: 0 },
            Node::Leaf { leaf_id: 1 },
        ];
        let two = Forest::from_structure(
            Task::Regression,
            x.view(),
            &y,
            vec![leaf(), split],
            vec![BagCounts(vec![1, 1, 1]), BagCounts(vec![0, 1, 2])],
        )
        .unwrap();
        // row 0 is OOB only for tree 2, where it sits in the left leaf with no bag
        assert_eq!(two.oob_trees(0).collect::<Vec<_>>(), vec![1]);
        let tree2 = &two.trees()[1];
        assert_eq!(two.predict_oob(0).unwrap(), tree2.leaf_value(tree2.train_leaf(0), 1).to_vec());
    }

    #[test]
    fn vectorized_apply_matches_single_traversal() {
        let ds = synthetic(400, 0.3, 4);
        let forest = Forest::fit(&ds, Task::Regression, &ForestParams {
            n_estimators: 10,
            min_samples_leaf: 3,
            ..ForestParams::default()
        })
        .unwrap();
        let queries = synthetic(25, 0.3, 5);
        let batch = forest.apply(queries.features_view()).unwrap();
        for (i, assignment) in batch.iter().enumerate() {
            for (t, tree) in forest.trees().iter().enumerate() {
                let leaf = tree.leaf_of(queries.row(i));
                assert_eq!(assignment.0[t] as usize, leaf);
                assert!(leaf < tree.n_leaves());
            }
        }
    }

    #[test]
    fn feature_mismatch_is_reported() {
        let ds = synthetic(30, 0.3, 6);
        let forest = Forest::fit(&ds, Task::Regression, &ForestParams {
            n_estimators: 2,
            ..ForestParams::default()
        })
        .unwrap();
        let bad = Array2::<f64>::zeros((1, 2));
        assert!(matches!(forest.predict(bad.view()), Err(Error::FeatureMismatch { expected: 5, got: 2 })));
        assert!(forest.apply(bad.view()).is_err());
    }

    #[test]
    fn full_depth_trees_interpolate_noiseless_bags() {
        let ds = synthetic(300, 0.0, 7);
        let forest = Forest::fit(&ds, Task::Regression, &ForestParams {
            n_estimators: 5,
            ..ForestParams::default()
        })
        .unwrap();
        for (tree, bag) in forest.trees().iter().zip(forest.bags()) {
            let mut sse = 0.0;
            for j in 0..ds.n_rows() {
                if bag.count(j) > 0 {
                    let e = tree.leaf_value(tree.leaf_of(ds.row(j)), 1)[0] - ds.target[j];
                    sse += e * e;
                }
            }
            assert!(sse.sqrt() < 1e-9, "in-bag rmse {sse}");
        }
    }

    #[test]
    fn classification_rejects_bad_labels() {
        let x = array![[0.0], [1.0]];
        let r = Forest::fit_arrays(x.view(), &[0.0, 2.0], Task::Classification { n_classes: 2 }, &ForestParams::default());
        assert!(matches!(r, Err(Error::InvalidLabel { .. })));
    }

    #[test]
    fn max_features_parsing() {
        assert_eq!("sqrt".parse::<MaxFeatures>().unwrap(), MaxFeatures::Sqrt);
        assert_eq!("all".parse::<MaxFeatures>().unwrap(), MaxFeatures::All);
        assert_eq!("0.5".parse::<MaxFeatures>().unwrap(), MaxFeatures::Fraction(0.5));
        assert!("1.5".parse::<MaxFeatures>().is_err());
        assert_eq!(MaxFeatures::Sqrt.resolve(10), 3);
        assert_eq!(MaxFeatures::Fraction(0.01).resolve(10), 1);
    }
}
