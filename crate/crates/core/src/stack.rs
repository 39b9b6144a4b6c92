//! k-fold stacked generalization with a least-squares meta-model.
//!
//! Every base kind `z` is trained `k` times, once per held-out fold. The
//! out-of-fold predictions `ξ_z` (each row predicted by the one sub-model
//! that never saw it) train a linear meta-model `y ≈ b + Σ_z w_z ξ_z`. At
//! prediction time the `k` sub-models of each kind are averaged before the
//! meta-model is applied.

use std::fs::{self, File};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folds::{assign_folds, held_out_rows, training_rows};
use crate::predictor::Predictor;
use crate::stats::mean;
use crate::trees::{EnsembleKind, HyperParams, TreeEnsemble};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLearner {
    pub kind: EnsembleKind,
    pub hp: HyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl MetaModel {
    pub fn apply(&self, inputs: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(inputs).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedModel {
    pub base_kinds: Vec<EnsembleKind>,
    pub folds: usize,
    /// Fold of every training row.
    pub fold_assignment: Vec<usize>,
    /// `sub_models[z][j]` was trained with fold `j` held out.
    pub sub_models: Vec<Vec<TreeEnsemble>>,
    pub meta: MetaModel,
    pub feature_names: Vec<String>,
    /// Out-of-fold predictions `ξ_z`, one vector per base kind.
    pub oof_predictions: Vec<Vec<f64>>,
}

/// Least squares of `y` on the columns of `inputs` plus an intercept.
///
/// Columns are centered first so the intercept is unpenalized, then the
/// weights come from an SVD solve, which returns the minimum-norm solution
/// when columns are collinear (e.g. base models that agree exactly).
pub fn fit_meta(inputs: &[Vec<f64>], y: &[f64]) -> Result<MetaModel> {
    let z = inputs.len();
    let n = y.len();
    if n == 0 {
        return Err(Error::invalid("meta-model needs at least one row"));
    }
    if let Some(bad) = inputs.iter().find(|c| c.len() != n) {
        return Err(Error::invalid(format!("meta input has {} rows, target {n}", bad.len())));
    }
    let y_mean = mean(y);
    if z == 0 {
        return Ok(MetaModel { weights: Vec::new(), intercept: y_mean });
    }
    let means: Vec<f64> = inputs.iter().map(|c| mean(c)).collect();
    let a = DMatrix::from_fn(n, z, |r, c| inputs[c][r] - means[c]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let svd = a.svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let weights = if top == 0.0 {
        vec![0.0; z]
    } else {
        let w = svd
            .solve(&b, top * 1e-12)
            .map_err(|e| Error::invalid(format!("meta-model solve failed: {e}")))?;
        w.iter().copied().collect()
    };
    let intercept = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    Ok(MetaModel { weights, intercept })
}

/// Train the stack. Needs `k ≥ 2`, `N ≥ 2k`, and every fold at least as
/// large as the biggest `min_samples_leaf` among the learners.
pub fn fit_stacked(
    x: &[Vec<f64>],
    y: &[f64],
    learners: &[BaseLearner],
    k: usize,
    seed: u64,
) -> Result<StackedModel> {
    let n = x.len();
    if k < 2 {
        return Err(Error::invalid("stacking needs k >= 2 folds"));
    }
    if n < 2 * k {
        return Err(Error::invalid(format!("stacking needs N >= 2k, got N={n}, k={k}")));
    }
    if y.len() != n {
        return Err(Error::invalid("feature and target row counts differ"));
    }
    if learners.is_empty() {
        return Err(Error::invalid("stacking needs at least one base learner"));
    }
    let fold_assignment = assign_folds(n, k, seed)?;
    let min_leaf = learners.iter().map(|l| l.hp.min_samples_leaf).max().unwrap_or(1);
    for j in 0..k {
        let size = fold_assignment.iter().filter(|&&f| f == j).count();
        if size < min_leaf {
            return Err(Error::invalid(format!(
                "fold {j} has {size} rows, fewer than min_samples_leaf {min_leaf}"
            )));
        }
    }
    let m = x.first().map_or(0, Vec::len);

    let jobs: Vec<(usize, usize)> =
        (0..learners.len()).flat_map(|z| (0..k).map(move |j| (z, j))).collect();
    let trained: Vec<TreeEnsemble> = jobs
        .par_iter()
        .map(|&(z, j)| {
            let rows = training_rows(&fold_assignment, j);
            let xt: Vec<Vec<f64>> = rows.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            TreeEnsemble::fit(learners[z].kind, &xt, &yt, &learners[z].hp)
        })
        .collect::<Result<_>>()?;
    let mut sub_models: Vec<Vec<TreeEnsemble>> = vec![Vec::with_capacity(k); learners.len()];
    for ((z, _), model) in jobs.into_iter().zip(trained) {
        sub_models[z].push(model);
    }

    let mut oof = vec![vec![0.0; n]; learners.len()];
    for (z, models) in sub_models.iter().enumerate() {
        for (j, model) in models.iter().enumerate() {
            for i in held_out_rows(&fold_assignment, j) {
                oof[z][i] = model.predict_row(&x[i]);
            }
        }
    }
    let meta = fit_meta(&oof, y)?;
    Ok(StackedModel {
        base_kinds: learners.iter().map(|l| l.kind).collect(),
        folds: k,
        fold_assignment,
        sub_models,
        meta,
        feature_names: (0..m).map(|i| format!("f{i}")).collect(),
        oof_predictions: oof,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    base_kinds: Vec<EnsembleKind>,
    folds: usize,
    weights: Vec<f64>,
    intercept: f64,
    fold_assignment: Vec<usize>,
    feature_names: Vec<String>,
    oof_predictions: Vec<Vec<f64>>,
}

impl StackedModel {
    /// Rows used to train sub-model `(z, j)`; identical for every `z`.
    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        training_rows(&self.fold_assignment, fold)
    }

    pub fn held_out_indices(&self, fold: usize) -> Vec<usize> {
        held_out_rows(&self.fold_assignment, fold)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_names.len() {
            return Err(Error::Arity { expected: self.feature_names.len(), found: names.len() });
        }
        for models in &mut self.sub_models {
            for model in models.iter_mut() {
                model.feature_names = names.clone();
            }
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Per-kind averages of the `k` sub-model predictions for one row.
    pub fn base_predictions(&self, row: &[f64]) -> Vec<f64> {
        self.sub_models
            .iter()
            .map(|models| {
                models.iter().map(|m| m.predict_row(row)).sum::<f64>() / models.len() as f64
            })
            .collect()
    }

    /// One `sub_model_<kind>_<fold>.json` per sub-model plus `meta.json`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (kind, models) in self.base_kinds.iter().zip(&self.sub_models) {
            for (j, model) in models.iter().enumerate() {
                let path = dir.join(format!("sub_model_{kind}_{j}.json"));
                model.save_json(&path)?;
                written.push(path);
            }
        }
        let meta = MetaFile {
            base_kinds: self.base_kinds.clone(),
            folds: self.folds,
            weights: self.meta.weights.clone(),
            intercept: self.meta.intercept,
            fold_assignment: self.fold_assignment.clone(),
            feature_names: self.feature_names.clone(),
            oof_predictions: self.oof_predictions.clone(),
        };
        let path = dir.join("meta.json");
        serde_json::to_writer_pretty(File::create(&path)?, &meta)?;
        written.push(path);
        Ok(written)
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: MetaFile = serde_json::from_reader(File::open(dir.join("meta.json"))?)?;
        if meta.weights.len() != meta.base_kinds.len() {
            return Err(Error::ModelIntegrity("meta weights do not match base kinds".into()));
        }
        let mut sub_models = Vec::with_capacity(meta.base_kinds.len());
        for kind in &meta.base_kinds {
            let models = (0..meta.folds)
                .map(|j| TreeEnsemble::load_json(dir.join(format!("sub_model_{kind}_{j}.json"))))
                .collect::<Result<Vec<_>>>()?;
            if models.iter().any(|m| m.n_features() != meta.feature_names.len()) {
                return Err(Error::ModelIntegrity("sub-model feature count mismatch".into()));
            }
            sub_models.push(models);
        }
        Ok(StackedModel {
            base_kinds: meta.base_kinds,
            folds: meta.folds,
            fold_assignment: meta.fold_assignment,
            sub_models,
            meta: MetaModel { weights: meta.weights, intercept: meta.intercept },
            feature_names: meta.feature_names,
            oof_predictions: meta.oof_predictions,
        })
    }
}

impl Predictor for StackedModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.meta.apply(&self.base_predictions(row))
    }
}

pub fn predict_stacked(model: &StackedModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub mse: f64,
    pub mae: f64,
}

/// R², MSE and MAE of `predictions` against `y`. When `y` is constant, R²
/// is 1 for a perfect fit and 0 otherwise.
pub fn metrics(predictions: &[f64], y: &[f64]) -> Result<Metrics> {
    if y.is_empty() {
        return Err(Error::invalid("cannot evaluate on zero rows"));
    }
    if predictions.len() != y.len() {
        return Err(Error::invalid("prediction and target lengths differ"));
    }
    let n = y.len() as f64;
    let ss_res: f64 = predictions.iter().zip(y).map(|(p, t)| (t - p) * (t - p)).sum();
    let mae = predictions.iter().zip(y).map(|(p, t)| (t - p).abs()).sum::<f64>() / n;
    let m = mean(y);
    let ss_tot: f64 = y.iter().map(|t| (t - m) * (t - m)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(Metrics { r2, mse: ss_res / n, mae })
}

pub fn evaluate(model: &impl Predictor, x: &[Vec<f64>], y: &[f64]) -> Result<Metrics> {
    if x.len() != y.len() {
        return Err(Error::invalid("feature and target row counts differ"));
    }
    metrics(&model.predict(x)?, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_recovers_affine_shift() {
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = 2.5;
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let meta = fit_meta(&[shifted], &y).unwrap();
        assert!((meta.weights[0] - 1.0).abs() < 1e-12);
        assert!((meta.intercept + c).abs() < 1e-12);
    }

    #[test]
    fn meta_with_identical_perfect_inputs_reproduces_target() {
        let y: Vec<f64> = (0..15).map(|i| (i * i) as f64 * 0.1).collect();
        let meta = fit_meta(&[y.clone(), y.clone(), y.clone()], &y).unwrap();
        for w in &meta.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-10);
        }
        let pred: Vec<f64> = (0..15).map(|i| meta.apply(&[y[i], y[i], y[i]])).collect();
        let m = metrics(&pred, &y).unwrap();
        assert!((m.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_perfect_and_mean() {
        let y = [1.0, 2.0, 4.0];
        let m = metrics(&y, &y).unwrap();
        assert_eq!((m.r2, m.mse, m.mae), (1.0, 0.0, 0.0));
        let mean_pred = [7.0 / 3.0; 3];
        assert!(metrics(&mean_pred, &y).unwrap().r2.abs() < 1e-12);
        assert!(metrics(&[], &[]).is_err());
    }

    #[test]
    fn single_sample_mae_is_root_mse() {
        let m = metrics(&[1.5], &[4.0]).unwrap();
        assert_eq!(m.mae, m.mse.sqrt());
    }
}
