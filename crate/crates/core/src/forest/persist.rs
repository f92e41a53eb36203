//! Versioned JSON model files.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so a save/load cycle reproduces every value bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BagCounts, Forest, ForestParams, LeafMembers, Task, Tree};
use crate::data::Schema;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "gaprf-forest";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestRepr {
    task: Task,
    params: ForestParams,
    n_features: usize,
    targets: Vec<f64>,
    trees: Vec<Tree>,
    bags: Vec<BagCounts>,
}

impl Serialize for Forest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Ref<'a> {
            task: Task,
            params: &'a ForestParams,
            n_features: usize,
            targets: &'a [f64],
            trees: &'a [Tree],
            bags: &'a [BagCounts],
        }
        Ref {
            task: self.task,
            params: &self.params,
            n_features: self.n_features,
            targets: &self.targets,
            trees: &self.trees,
            bags: &self.bags,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Forest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ForestRepr::deserialize(d)?;
        Forest::from_repr(repr).map_err(serde::de::Error::custom)
    }
}

impl Forest {
    fn from_repr(r: ForestRepr) -> Result<Forest> {
        let n = r.targets.len();
        let width = r.task.output_width();
        if r.trees.len() != r.bags.len() || r.trees.is_empty() {
            return Err(Error::MalformedForest("tree and bag counts differ".into()));
        }
        for (tree, bag) in r.trees.iter().zip(&r.bags) {
            if bag.0.len() != n || tree.train_leaves.len() != n {
                return Err(Error::MalformedForest("per-row vectors have wrong length".into()));
            }
            if tree.leaf_values.len() != tree.n_leaves * width
                || tree.train_leaves.iter().any(|&l| l as usize >= tree.n_leaves)
            {
                return Err(Error::MalformedForest("leaf table inconsistent".into()));
            }
            super::validate_nodes(&tree.nodes, r.n_features)?;
        }
        let encoded = r.task.encode_all(&r.targets)?;
        let members: Vec<LeafMembers> = r
            .trees
            .iter()
            .zip(&r.bags)
            .map(|(t, b)| LeafMembers::build(t, b))
            .collect();
        let forest = Forest {
            task: r.task,
            params: r.params,
            n_features: r.n_features,
            targets: r.targets,
            encoded_targets: encoded,
            trees: r.trees,
            bags: r.bags,
            members,
        };
        if !forest.leaf_values_consistent() {
            return Err(Error::MalformedForest(
                "stored leaf values disagree with bags and targets".into(),
            ));
        }
        Ok(forest)
    }
}

/// A forest plus the schema needed to encode new rows for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<Schema>,
    pub forest: Forest,
}

impl ModelFile {
    pub fn new(forest: Forest, schema: Option<Schema>) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            schema,
            forest,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<ModelFile> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format != MODEL_FORMAT {
            return Err(Error::MalformedForest(format!("unknown format `{}`", header.format)));
        }
        if header.version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.version,
                expected: MODEL_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
