use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::builder::{Objective, TreeBuilder};
use super::{EnsembleKind, HyperParams, Tree, TreeEnsemble};
use crate::error::{Error, Result};
use crate::stats::mean;

/// How a random forest draws each tree's training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSampling {
    /// `⌈subsample_fraction·N⌉` draws with replacement.
    Bootstrap,
    /// Every row exactly once.
    Identity,
}

fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::invalid("training data has no rows"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    let m = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != m) {
        return Err(Error::Arity { expected: m, found: bad.len() });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data contains non-finite values"));
    }
    Ok(m)
}

pub(crate) fn default_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("f{i}")).collect()
}

fn features_per_split(hp: &HyperParams, m: usize) -> usize {
    ((hp.feature_fraction * m as f64).ceil() as usize).clamp(1, m.max(1))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n)
}

/// Fit one least-squares regression tree on all rows.
pub fn fit_tree(x: &[Vec<f64>], y: &[f64], hp: &HyperParams) -> Result<Tree> {
    hp.validate()?;
    let m = check_xy(x, y)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    let builder = TreeBuilder::new(
        x,
        Objective::Variance { targets: y },
        hp.max_depth,
        hp.min_samples_leaf,
        features_per_split(hp, m),
    );
    Ok(builder.build(&rows, &mut stream_rng(hp.seed, 0)))
}

/// Bagged random forest with bootstrap rows and per-split feature subsets.
pub fn fit_rf(x: &[Vec<f64>], y: &[f64], hp: &HyperParams) -> Result<TreeEnsemble> {
    fit_rf_with(x, y, hp, RowSampling::Bootstrap)
}

/// Random forest with an explicit row-sampling rule. Tree `t` draws from
/// its own ChaCha8 stream `(seed, t)`, so trees train in parallel and the
/// result does not depend on scheduling.
pub fn fit_rf_with(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &HyperParams,
    sampling: RowSampling,
) -> Result<TreeEnsemble> {
    hp.validate()?;
    let m = check_xy(x, y)?;
    let n = x.len();
    let k = features_per_split(hp, m);
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(hp.seed, t as u64);
            let rows: Vec<usize> = match sampling {
                RowSampling::Identity => (0..n).collect(),
                RowSampling::Bootstrap => {
                    let mut rows: Vec<usize> = (0..sample_size(hp.subsample_fraction, n))
                        .map(|_| rng.random_range(0..n))
                        .collect();
                    rows.sort_unstable();
                    rows
                }
            };
            TreeBuilder::new(
                x,
                Objective::Variance { targets: y },
                hp.max_depth,
                hp.min_samples_leaf,
                k,
            )
            .build(&rows, &mut rng)
        })
        .collect();
    Ok(TreeEnsemble {
        kind: EnsembleKind::Rf,
        trees,
        base_score: 0.0,
        learning_rate: 1.0,
        feature_names: default_names(m),
    })
}

/// First-order gradient boosting on squared loss. Returns the ensemble and
/// the training MSE before the first stage and after each stage.
pub fn fit_gbdt(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &HyperParams,
) -> Result<(TreeEnsemble, Vec<f64>)> {
    boost(x, y, hp, EnsembleKind::Gbdt)
}

/// Second-order boosting with L2 leaf penalty `lambda` and split penalty
/// `gamma` on squared loss (gradient `ŷ − y`, hessian 1).
pub fn fit_xgb(x: &[Vec<f64>], y: &[f64], hp: &HyperParams) -> Result<TreeEnsemble> {
    boost(x, y, hp, EnsembleKind::Xgb).map(|(e, _)| e)
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (t - p) * (t - p)).sum::<f64>() / y.len() as f64
}

/// Shared boosting loop. Stage `t` subsamples rows from ChaCha8 stream
/// `(seed, t)` without replacement, so both kinds see identical rows.
fn boost(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &HyperParams,
    kind: EnsembleKind,
) -> Result<(TreeEnsemble, Vec<f64>)> {
    hp.validate()?;
    let m = check_xy(x, y)?;
    let n = x.len();
    let k = features_per_split(hp, m);
    let base_score = mean(y);
    let mut pred = vec![base_score; n];
    let mut losses = vec![mse(&pred, y)];
    let mut trees = Vec::with_capacity(hp.n_trees);
    let hess = vec![1.0; n];
    let size = sample_size(hp.subsample_fraction, n);

    for stage in 0..hp.n_trees {
        let mut rng = stream_rng(hp.seed, stage as u64);
        let rows: Vec<usize> = if size == n {
            (0..n).collect()
        } else {
            let mut rows = index::sample(&mut rng, n, size).into_vec();
            rows.sort_unstable();
            rows
        };
        let tree = match kind {
            EnsembleKind::Gbdt => {
                let residuals: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
                TreeBuilder::new(
                    x,
                    Objective::Variance { targets: &residuals },
                    hp.max_depth,
                    hp.min_samples_leaf,
                    k,
                )
                .build(&rows, &mut rng)
            }
            EnsembleKind::Xgb => {
                let grad: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
                TreeBuilder::new(
                    x,
                    Objective::SecondOrder {
                        grad: &grad,
                        hess: &hess,
                        lambda: hp.lambda,
                        gamma: hp.gamma,
                    },
                    hp.max_depth,
                    hp.min_samples_leaf,
                    k,
                )
                .build(&rows, &mut rng)
            }
            EnsembleKind::Rf => unreachable!("random forests are not boosted"),
        };
        for (p, row) in pred.iter_mut().zip(x) {
            *p += hp.learning_rate * tree.predict_row(row);
        }
        losses.push(mse(&pred, y));
        trees.push(tree);
    }
    let ensemble = TreeEnsemble {
        kind,
        trees,
        base_score,
        learning_rate: hp.learning_rate,
        feature_names: default_names(m),
    };
    Ok((ensemble, losses))
}

/// Fit any kind with default feature names.
pub(crate) fn fit_kind(
    kind: EnsembleKind,
    x: &[Vec<f64>],
    y: &[f64],
    hp: &HyperParams,
) -> Result<TreeEnsemble> {
    match kind {
        EnsembleKind::Rf => fit_rf(x, y, hp),
        EnsembleKind::Gbdt => fit_gbdt(x, y, hp).map(|(e, _)| e),
        EnsembleKind::Xgb => fit_xgb(x, y, hp),
    }
}

impl TreeEnsemble {
    /// Fit an ensemble of the given kind.
    pub fn fit(
        kind: EnsembleKind,
        x: &[Vec<f64>],
        y: &[f64],
        hp: &HyperParams,
    ) -> Result<TreeEnsemble> {
        fit_kind(kind, x, y, hp)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_names.len() {
            return Err(Error::Arity { expected: self.feature_names.len(), found: names.len() });
        }
        self.feature_names = names;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::Predictor;
    use crate::trees::Node;

    fn random_data(seed: u64, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
        let y = x
            .iter()
            .map(|r| (3.0 * r[0]).sin() + r[1] * r[1] + 0.3 * rng.random::<f64>())
            .collect();
        (x, y)
    }

    fn in_sample_mse(tree: &Tree, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let p: Vec<f64> = x.iter().map(|r| tree.predict_row(r)).collect();
        mse(&p, y)
    }

    #[test]
    fn constant_target_gives_single_leaf() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let t = fit_tree(&x, &[5.0; 3], &HyperParams::default()).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { value: 5.0, cover: 3 }]);
    }

    #[test]
    fn two_point_stump() {
        let x = vec![vec![0.0], vec![1.0]];
        let hp = HyperParams { max_depth: 1, min_samples_leaf: 1, ..Default::default() };
        let t = fit_tree(&x, &[0.0, 1.0], &hp).unwrap();
        match t.nodes[0] {
            Node::Split { feature: 0, threshold, left, right, cover: 2 } => {
                assert!(threshold > 0.0 && threshold < 1.0);
                assert_eq!(t.nodes[left], Node::Leaf { value: 0.0, cover: 1 });
                assert_eq!(t.nodes[right], Node::Leaf { value: 1.0, cover: 1 });
            }
            ref other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn deeper_tree_fits_better_in_sample() {
        let (x, y) = random_data(1, 50, 4);
        let shallow = HyperParams { max_depth: 1, min_samples_leaf: 1, ..Default::default() };
        let deep = HyperParams { max_depth: 6, ..shallow.clone() };
        let a = in_sample_mse(&fit_tree(&x, &y, &shallow).unwrap(), &x, &y);
        let b = in_sample_mse(&fit_tree(&x, &y, &deep).unwrap(), &x, &y);
        assert!(b <= a, "depth-6 {b} > depth-1 {a}");
    }

    #[test]
    fn max_depth_zero_is_a_leaf() {
        let (x, y) = random_data(2, 20, 2);
        let hp = HyperParams { max_depth: 0, ..Default::default() };
        let t = fit_tree(&x, &y, &hp).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn identity_forest_of_one_equals_single_tree() {
        let (x, y) = random_data(3, 40, 3);
        let hp = HyperParams { n_trees: 1, max_depth: 5, ..Default::default() };
        let rf = fit_rf_with(&x, &y, &hp, RowSampling::Identity).unwrap();
        let tree = fit_tree(&x, &y, &hp).unwrap();
        assert_eq!(rf.trees[0], tree);
        for r in &x {
            assert_eq!(rf.predict_row(r), tree.predict_row(r));
        }
    }

    #[test]
    fn forest_is_deterministic() {
        let (x, y) = random_data(4, 60, 4);
        let hp = HyperParams { n_trees: 20, feature_fraction: 0.5, seed: 17, ..Default::default() };
        assert_eq!(fit_rf(&x, &y, &hp).unwrap(), fit_rf(&x, &y, &hp).unwrap());
    }

    #[test]
    fn boosting_single_leaf_predicts_mean() {
        let (x, y) = random_data(5, 30, 2);
        let hp = HyperParams { n_trees: 1, max_depth: 0, ..Default::default() };
        let (e, _) = fit_gbdt(&x, &y, &hp).unwrap();
        let m = mean(&y);
        for r in &x {
            assert!((e.predict_row(r) - m).abs() < 1e-12);
        }
    }

    #[test]
    fn full_rate_deep_boosting_interpolates() {
        let (x, y) = random_data(6, 12, 2);
        let hp = HyperParams {
            n_trees: 3,
            max_depth: 8,
            min_samples_leaf: 1,
            learning_rate: 1.0,
            ..Default::default()
        };
        let (_, losses) = fit_gbdt(&x, &y, &hp).unwrap();
        assert!(*losses.last().unwrap() < 1e-20, "{losses:?}");
    }

    #[test]
    fn huge_gamma_gives_base_score_model() {
        let (x, y) = random_data(7, 40, 3);
        let hp = HyperParams { n_trees: 5, gamma: 1e9, ..Default::default() };
        let e = fit_xgb(&x, &y, &hp).unwrap();
        assert!(e.trees.iter().all(|t| t.nodes.len() == 1));
        // residuals sum to ~0 around the mean, so leaves are ~0
        for r in &x {
            assert!((e.predict_row(r) - e.base_score).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_lambda_shrinks_leaves() {
        let (x, y) = random_data(8, 40, 3);
        let hp = HyperParams { n_trees: 3, lambda: 1e12, ..Default::default() };
        let e = fit_xgb(&x, &y, &hp).unwrap();
        for t in &e.trees {
            for n in &t.nodes {
                if let Node::Leaf { value, .. } = n {
                    assert!(value.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn subsampled_stages_record_sample_cover() {
        let (x, y) = random_data(9, 50, 3);
        let hp = HyperParams { n_trees: 4, subsample_fraction: 0.5, ..Default::default() };
        let e = fit_xgb(&x, &y, &hp).unwrap();
        for t in &e.trees {
            assert_eq!(t.root().cover(), 25);
            t.validate(3).unwrap();
        }
    }

    #[test]
    fn bad_inputs_rejected() {
        let hp = HyperParams::default();
        assert!(fit_tree(&[], &[], &hp).is_err());
        assert!(fit_tree(&[vec![1.0]], &[1.0, 2.0], &hp).is_err());
        assert!(fit_tree(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0], &hp).is_err());
        assert!(fit_tree(&[vec![f64::NAN]], &[1.0], &hp).is_err());
    }
}
