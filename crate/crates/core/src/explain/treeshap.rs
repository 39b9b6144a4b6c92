//! Polynomial-time path algorithm for exact SHAP values on trees.
//!
//! Each root-to-leaf path carries the set of unique features split on so
//! far, with the fraction of cover flowing through the path when that
//! feature is unknown (`zero`) or known (`one`). `weight[k]` holds the
//! summed Shapley permutation weight of having `k` of those features
//! known. Repeated features are unwound and re-extended with multiplied
//! fractions, so the values match exact enumeration of the path-dependent
//! expectation game.

use rayon::prelude::*;

use super::attribution::{AttributionMatrix, InteractionTensor};
use super::expectation::expected_value;
use crate::error::{Error, Result};
use crate::trees::{Node, Tree, TreeEnsemble};

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let d = path.len();
    path.push(PathElement { feature, zero, one, weight: if d == 0 { 1.0 } else { 0.0 } });
    let denom = (d + 1) as f64;
    for i in (0..d).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero * path[i].weight * (d - i) as f64 / denom;
    }
}

fn unwind(path: &mut Vec<PathElement>, idx: usize) {
    let d = path.len() - 1;
    let PathElement { zero, one, .. } = path[idx];
    let denom = (d + 1) as f64;
    let mut next = path[d].weight;
    for i in (0..d).rev() {
        if one != 0.0 {
            let held = path[i].weight;
            path[i].weight = next * denom / ((i + 1) as f64 * one);
            next = held - path[i].weight * zero * (d - i) as f64 / denom;
        } else {
            path[i].weight = path[i].weight * denom / (zero * (d - i) as f64);
        }
    }
    for i in idx..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

/// Total permutation weight of the path with element `idx` removed.
fn unwound_sum(path: &[PathElement], idx: usize) -> f64 {
    let d = path.len() - 1;
    let PathElement { zero, one, .. } = path[idx];
    let denom = (d + 1) as f64;
    let mut next = path[d].weight;
    let mut total = 0.0;
    for i in (0..d).rev() {
        if one != 0.0 {
            let w = next * denom / ((i + 1) as f64 * one);
            total += w;
            next = path[i].weight - w * zero * (d - i) as f64 / denom;
        } else {
            total += path[i].weight * denom / (zero * (d - i) as f64);
        }
    }
    total
}

/// Conditioning on one feature, used to split SHAP values into pairwise
/// interaction terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Condition {
    None,
    /// Feature always known (follows `x`).
    Known(usize),
    /// Feature always unknown (cover-weighted average).
    Unknown(usize),
}

impl Condition {
    fn feature(self) -> Option<usize> {
        match self {
            Condition::None => None,
            Condition::Known(f) | Condition::Unknown(f) => Some(f),
        }
    }
}

struct Walker<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    condition: Condition,
    phi: &'a mut [f64],
}

impl Walker<'_> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        node: usize,
        parent: &[PathElement],
        zero: f64,
        one: f64,
        feature: Option<usize>,
        condition_fraction: f64,
    ) {
        if condition_fraction == 0.0 {
            return;
        }
        let mut path = parent.to_vec();
        if feature.is_none() || feature != self.condition.feature() {
            extend(&mut path, zero, one, feature);
        }
        match self.tree.nodes[node] {
            Node::Leaf { value, .. } => {
                for i in 1..path.len() {
                    let el = path[i];
                    let w = unwound_sum(&path, i);
                    let f = el.feature.expect("only the root element has no feature");
                    self.phi[f] += w * (el.one - el.zero) * value * condition_fraction;
                }
            }
            Node::Split { feature: f, threshold, left, right, cover } => {
                let (hot, cold) = if self.x[f] < threshold { (left, right) } else { (right, left) };
                let hot_zero = self.tree.nodes[hot].cover() as f64 / cover as f64;
                let cold_zero = self.tree.nodes[cold].cover() as f64 / cover as f64;
                let mut incoming_zero = 1.0;
                let mut incoming_one = 1.0;
                if let Some(k) = path.iter().position(|e| e.feature == Some(f)) {
                    incoming_zero = path[k].zero;
                    incoming_one = path[k].one;
                    unwind(&mut path, k);
                }
                let (mut hot_cf, mut cold_cf) = (condition_fraction, condition_fraction);
                match self.condition {
                    Condition::Known(c) if c == f => cold_cf = 0.0,
                    Condition::Unknown(c) if c == f => {
                        hot_cf *= hot_zero;
                        cold_cf *= cold_zero;
                    }
                    _ => {}
                }
                self.recurse(hot, &path, hot_zero * incoming_zero, incoming_one, Some(f), hot_cf);
                self.recurse(cold, &path, cold_zero * incoming_zero, 0.0, Some(f), cold_cf);
            }
        }
    }
}

/// Per-feature attribution of one sample, summed over trees and scaled by
/// the ensemble's combination rule.
fn shap_row(ensemble: &TreeEnsemble, x: &[f64], condition: Condition) -> Vec<f64> {
    let m = ensemble.n_features();
    let mut phi = vec![0.0; m];
    for tree in &ensemble.trees {
        let mut walker = Walker { tree, x, condition, phi: &mut phi };
        walker.recurse(0, &[], 1.0, 1.0, None, 1.0);
    }
    let (_, scale) = ensemble.output_affine();
    for p in &mut phi {
        *p *= scale;
    }
    phi
}

fn check_input(ensemble: &TreeEnsemble, x: &[Vec<f64>]) -> Result<()> {
    ensemble.validate()?;
    let m = ensemble.n_features();
    if let Some(bad) = x.iter().find(|r| r.len() != m) {
        return Err(Error::Arity { expected: m, found: bad.len() });
    }
    Ok(())
}

/// SHAP values for every row of `x`. Rows are computed in parallel.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &[Vec<f64>]) -> Result<AttributionMatrix> {
    check_input(ensemble, x)?;
    let values = x.par_iter().map(|row| shap_row(ensemble, row, Condition::None)).collect();
    Ok(AttributionMatrix {
        values,
        base_value: expected_value(ensemble)?,
        feature_names: ensemble.feature_names.clone(),
    })
}

/// Pairwise SHAP interaction values. Off-diagonal entries are
/// `(φ_i | j known − φ_i | j unknown) / 2`; the diagonal is the main effect
/// `φ_i − Σ_{j≠i} φ_ij`.
pub fn shap_interactions(ensemble: &TreeEnsemble, x: &[Vec<f64>]) -> Result<InteractionTensor> {
    check_input(ensemble, x)?;
    let m = ensemble.n_features();
    let mut used = vec![false; m];
    for tree in &ensemble.trees {
        for f in tree.split_features() {
            used[f] = true;
        }
    }
    let values = x
        .par_iter()
        .map(|row| {
            let phi = shap_row(ensemble, row, Condition::None);
            let mut t = vec![vec![0.0; m]; m];
            for j in (0..m).filter(|&j| used[j]) {
                let known = shap_row(ensemble, row, Condition::Known(j));
                let unknown = shap_row(ensemble, row, Condition::Unknown(j));
                for i in (0..m).filter(|&i| i != j) {
                    t[i][j] = 0.5 * (known[i] - unknown[i]);
                }
            }
            for i in 0..m {
                let off: f64 = (0..m).filter(|&j| j != i).map(|j| t[i][j]).sum();
                t[i][i] = phi[i] - off;
            }
            t
        })
        .collect();
    Ok(InteractionTensor { values, feature_names: ensemble.feature_names.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{shapley_exact, shapley_interaction_exact, TreeGame};
    use crate::predictor::Predictor;
    use crate::trees::EnsembleKind;

    fn seven_node() -> TreeEnsemble {
        crate::explain::expectation::tests::seven_node_tree()
    }

    #[test]
    fn matches_enumeration_on_hand_tree() {
        let e = seven_node();
        for x in [[0.1, 0.1], [0.1, 0.9], [0.9, 0.1], [0.9, 0.9], [0.9, 0.4]] {
            let fast = tree_shap(&e, &[x.to_vec()]).unwrap();
            let exact = shapley_exact(&TreeGame::new(&e, &x).unwrap()).unwrap();
            for (a, b) in fast.values[0].iter().zip(&exact) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b} at {x:?}");
            }
            let total = fast.base_value + fast.values[0].iter().sum::<f64>();
            assert!((total - e.predict_row(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_feature_on_path() {
        // x0 split twice along one path
        let e = TreeEnsemble {
            kind: EnsembleKind::Gbdt,
            trees: vec![Tree {
                nodes: vec![
                    Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 9 },
                    Node::Split { feature: 1, threshold: 0.5, left: 3, right: 4, cover: 5 },
                    Node::Leaf { value: 4.0, cover: 4 },
                    Node::Split { feature: 0, threshold: 0.2, left: 5, right: 6, cover: 3 },
                    Node::Leaf { value: -1.0, cover: 2 },
                    Node::Leaf { value: 2.0, cover: 1 },
                    Node::Leaf { value: 7.0, cover: 2 },
                ],
            }],
            base_score: 0.3,
            learning_rate: 0.5,
            feature_names: vec!["a".into(), "b".into(), "c".into()],
        };
        for x in [[0.1, 0.1, 0.0], [0.3, 0.2, 1.0], [0.7, 0.9, 0.0], [0.3, 0.9, 0.5]] {
            let fast = tree_shap(&e, &[x.to_vec()]).unwrap();
            let exact = shapley_exact(&TreeGame::new(&e, &x).unwrap()).unwrap();
            for (a, b) in fast.values[0].iter().zip(&exact) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            assert_eq!(fast.values[0][2], 0.0);
        }
    }

    #[test]
    fn interactions_match_enumeration_on_hand_tree() {
        let e = seven_node();
        for x in [[0.1, 0.1], [0.9, 0.4], [0.9, 0.9]] {
            let fast = shap_interactions(&e, &[x.to_vec()]).unwrap();
            let exact = shapley_interaction_exact(&TreeGame::new(&e, &x).unwrap()).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((fast.values[0][i][j] - exact[i][j]).abs() < 1e-12);
                }
            }
            assert!(fast.values[0][0][1].abs() > 1e-6, "tree has a real interaction");
        }
    }

    #[test]
    fn single_leaf_tree_attributes_nothing() {
        let e = TreeEnsemble {
            kind: EnsembleKind::Rf,
            trees: vec![Tree::leaf(3.0, 5)],
            base_score: 0.0,
            learning_rate: 1.0,
            feature_names: vec!["a".into()],
        };
        let a = tree_shap(&e, &[vec![1.0]]).unwrap();
        assert_eq!(a.values[0], vec![0.0]);
        assert_eq!(a.base_value, 3.0);
    }
}
