//! Binary regression trees and ensembles: bagged random forests,
//! first-order gradient boosting and second-order regularized boosting.

mod builder;
mod fit;
mod tune;

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::Predictor;

pub use fit::{fit_gbdt, fit_rf, fit_rf_with, fit_tree, fit_xgb, RowSampling};
pub use tune::{tune_random_search, IntRange, RealRange, SearchSpace, TuneResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Rf,
    Gbdt,
    Xgb,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 3] = [EnsembleKind::Rf, EnsembleKind::Gbdt, EnsembleKind::Xgb];

    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::Rf => "rf",
            EnsembleKind::Gbdt => "gbdt",
            EnsembleKind::Xgb => "xgb",
        }
    }
}

impl std::fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" => Ok(EnsembleKind::Rf),
            "gbdt" => Ok(EnsembleKind::Gbdt),
            "xgb" | "xgboost" => Ok(EnsembleKind::Xgb),
            other => Err(Error::invalid(format!("unknown ensemble kind `{other}`"))),
        }
    }
}

/// A tree node. Children are indices into [`Tree::nodes`]. Rows with
/// `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize, cover: usize },
    Leaf { value: f64, cover: usize },
}

impl Node {
    pub fn cover(&self) -> usize {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

/// A regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, cover: usize) -> Self {
        Tree { nodes: vec![Node::Leaf { value, cover }] }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    idx = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Features used by any split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    /// Structural checks: children in range and visited once, every cover
    /// at least one, and every split cover equal to the sum of its children.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::ModelIntegrity("tree has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::ModelIntegrity(format!("node {i} reachable twice")));
            }
            let node = &self.nodes[i];
            if node.cover() == 0 {
                return Err(Error::ModelIntegrity(format!("node {i} has zero cover")));
            }
            if let Node::Split { feature, threshold, left, right, cover } = *node {
                if feature >= n_features {
                    return Err(Error::ModelIntegrity(format!(
                        "node {i} splits on feature {feature} of {n_features}"
                    )));
                }
                if !threshold.is_finite() {
                    return Err(Error::ModelIntegrity(format!("node {i} threshold not finite")));
                }
                if left >= self.nodes.len() || right >= self.nodes.len() {
                    return Err(Error::ModelIntegrity(format!("node {i} child out of range")));
                }
                let sum = self.nodes[left].cover() + self.nodes[right].cover();
                if sum != cover {
                    return Err(Error::ModelIntegrity(format!(
                        "node {i} cover {cover} != children {sum}"
                    )));
                }
                stack.push(left);
                stack.push(right);
            }
        }
        Ok(())
    }
}

/// A trained ensemble.
///
/// Random forests average their trees; boosted ensembles output
/// `base_score + learning_rate * Σ tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub kind: EnsembleKind,
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub feature_names: Vec<String>,
}

impl TreeEnsemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// `(offset, scale)` such that the output is `offset + scale * Σ tree(x)`.
    pub fn output_affine(&self) -> (f64, f64) {
        match self.kind {
            EnsembleKind::Rf if self.trees.is_empty() => (0.0, 0.0),
            EnsembleKind::Rf => (0.0, 1.0 / self.trees.len() as f64),
            EnsembleKind::Gbdt | EnsembleKind::Xgb => (self.base_score, self.learning_rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == EnsembleKind::Rf && self.trees.is_empty() {
            return Err(Error::ModelIntegrity("random forest has no trees".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            tree.validate(self.n_features())
                .map_err(|e| Error::ModelIntegrity(format!("tree {t}: {e}")))?;
        }
        Ok(())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        serde_json::to_writer_pretty(File::create(path)?, self)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let model: TreeEnsemble = serde_json::from_reader(File::open(path)?)?;
        model.validate()?;
        Ok(model)
    }
}

impl Predictor for TreeEnsemble {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let (offset, scale) = self.output_affine();
        offset + scale * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

/// Apply the ensemble's combination rule to every row.
pub fn predict(ensemble: &TreeEnsemble, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    Predictor::predict(ensemble, x)
}

/// Training hyperparameters. Unused fields are ignored by a given kind
/// (`lambda`/`gamma` only matter for second-order boosting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub n_trees: usize,
    /// 0 means a single leaf.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub subsample_fraction: f64,
    pub feature_fraction: f64,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 4,
            min_samples_leaf: 2,
            subsample_fraction: 1.0,
            feature_fraction: 1.0,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::HyperParams(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.subsample_fraction) {
            return bad("subsample_fraction must lie in (0, 1]");
        }
        if !unit(self.feature_fraction) {
            return bad("feature_fraction must lie in (0, 1]");
        }
        if !unit(self.learning_rate) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) {
            return bad("lambda and gamma must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 4 },
                Node::Leaf { value: -1.0, cover: 3 },
                Node::Leaf { value: 2.0, cover: 1 },
            ],
        }
    }

    #[test]
    fn boosting_with_no_trees_returns_base_score() {
        let e = TreeEnsemble {
            kind: EnsembleKind::Gbdt,
            trees: vec![],
            base_score: 3.25,
            learning_rate: 0.1,
            feature_names: vec!["a".into()],
        };
        assert_eq!(predict(&e, &[vec![0.0], vec![9.0]]).unwrap(), vec![3.25, 3.25]);
    }

    #[test]
    fn forest_of_identical_trees_equals_one_tree() {
        let e = TreeEnsemble {
            kind: EnsembleKind::Rf,
            trees: vec![stump(); 7],
            base_score: 0.0,
            learning_rate: 1.0,
            feature_names: vec!["a".into()],
        };
        for x in [0.0, 0.5, 1.0] {
            assert_eq!(e.predict_row(&[x]), stump().predict_row(&[x]));
        }
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let e = TreeEnsemble {
            kind: EnsembleKind::Rf,
            trees: vec![stump()],
            base_score: 0.0,
            learning_rate: 1.0,
            feature_names: vec!["a".into()],
        };
        assert!(matches!(predict(&e, &[vec![0.0, 1.0]]), Err(Error::Arity { .. })));
    }

    #[test]
    fn validate_catches_bad_cover() {
        let mut t = stump();
        t.nodes[2] = Node::Leaf { value: 2.0, cover: 2 };
        assert!(t.validate(1).is_err());
        t.nodes[2] = Node::Leaf { value: 2.0, cover: 0 };
        assert!(t.validate(1).is_err());
        assert!(stump().validate(1).is_ok());
        assert!(stump().validate(0).is_err());
    }

    #[test]
    fn node_json_form() {
        let json = serde_json::to_string(&stump().nodes[0]).unwrap();
        assert_eq!(
            json,
            r#"{"type":"split","feature":0,"threshold":0.5,"left":1,"right":2,"cover":4}"#
        );
        let leaf = serde_json::to_string(&stump().nodes[1]).unwrap();
        assert_eq!(leaf, r#"{"type":"leaf","value":-1.0,"cover":3}"#);
    }

    #[test]
    fn hyperparams_validation() {
        assert!(HyperParams::default().validate().is_ok());
        let mut hp = HyperParams { learning_rate: 0.0, ..Default::default() };
        assert!(hp.validate().is_err());
        hp.learning_rate = 0.3;
        hp.feature_fraction = 1.5;
        assert!(hp.validate().is_err());
        let hp = HyperParams { max_depth: 0, ..Default::default() };
        assert!(hp.validate().is_ok());
    }
}
