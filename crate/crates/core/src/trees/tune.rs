use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fit::fit_kind;
use super::{EnsembleKind, HyperParams};
use crate::error::{Error, Result};
use crate::folds::{assign_folds, held_out_rows, training_rows};
use crate::predictor::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealRange {
    pub min: f64,
    pub max: f64,
}

impl IntRange {
    pub fn point(v: usize) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

impl RealRange {
    pub fn point(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

/// Inclusive ranges per hyperparameter. The defaults are working guesses
/// for a few hundred wells, not tuned values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub n_trees: IntRange,
    pub max_depth: IntRange,
    pub min_samples_leaf: IntRange,
    pub subsample_fraction: RealRange,
    pub feature_fraction: RealRange,
    pub learning_rate: RealRange,
    pub lambda: RealRange,
    pub gamma: RealRange,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_trees: IntRange { min: 100, max: 500 },
            max_depth: IntRange { min: 3, max: 8 },
            min_samples_leaf: IntRange { min: 1, max: 5 },
            subsample_fraction: RealRange { min: 0.7, max: 1.0 },
            feature_fraction: RealRange { min: 0.5, max: 1.0 },
            learning_rate: RealRange { min: 0.02, max: 0.2 },
            lambda: RealRange { min: 0.0, max: 5.0 },
            gamma: RealRange { min: 0.0, max: 0.05 },
        }
    }
}

impl SearchSpace {
    /// The degenerate space containing only `hp`.
    pub fn point(hp: &HyperParams) -> Self {
        Self {
            n_trees: IntRange::point(hp.n_trees),
            max_depth: IntRange::point(hp.max_depth),
            min_samples_leaf: IntRange::point(hp.min_samples_leaf),
            subsample_fraction: RealRange::point(hp.subsample_fraction),
            feature_fraction: RealRange::point(hp.feature_fraction),
            learning_rate: RealRange::point(hp.learning_rate),
            lambda: RealRange::point(hp.lambda),
            gamma: RealRange::point(hp.gamma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("n_trees", self.n_trees),
            ("max_depth", self.max_depth),
            ("min_samples_leaf", self.min_samples_leaf),
        ];
        for (name, r) in ints {
            if r.min > r.max {
                return Err(Error::invalid(format!("empty range for {name}")));
            }
        }
        let reals = [
            ("subsample_fraction", self.subsample_fraction),
            ("feature_fraction", self.feature_fraction),
            ("learning_rate", self.learning_rate),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
        ];
        for (name, r) in reals {
            if !(r.min <= r.max) {
                return Err(Error::invalid(format!("empty range for {name}")));
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, seed: u64) -> HyperParams {
        HyperParams {
            n_trees: self.n_trees.sample(rng),
            max_depth: self.max_depth.sample(rng),
            min_samples_leaf: self.min_samples_leaf.sample(rng),
            subsample_fraction: self.subsample_fraction.sample(rng),
            feature_fraction: self.feature_fraction.sample(rng),
            learning_rate: self.learning_rate.sample(rng),
            lambda: self.lambda.sample(rng),
            gamma: self.gamma.sample(rng),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: HyperParams,
    pub best_score: f64,
    /// Every sampled configuration with its CV MSE, in draw order.
    pub candidates: Vec<(HyperParams, f64)>,
}

/// k-fold cross-validated MSE of one configuration.
pub fn cv_mse(
    kind: EnsembleKind,
    x: &[Vec<f64>],
    y: &[f64],
    hp: &HyperParams,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let folds = assign_folds(x.len(), k, seed)?;
    let mut sse = 0.0;
    for fold in 0..k {
        let train = training_rows(&folds, fold);
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = fit_kind(kind, &xt, &yt, hp)?;
        for i in held_out_rows(&folds, fold) {
            let e = y[i] - model.predict_row(&x[i]);
            sse += e * e;
        }
    }
    Ok(sse / x.len() as f64)
}

/// Random search: draw `budget` configurations uniformly from `space`,
/// score each by k-fold CV MSE on the same folds, keep the lowest. Ties go
/// to the earlier draw.
pub fn tune_random_search(
    kind: EnsembleKind,
    x: &[Vec<f64>],
    y: &[f64],
    space: &SearchSpace,
    budget: usize,
    k: usize,
    seed: u64,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(Error::invalid("tuning budget must be at least 1"));
    }
    if k < 2 {
        return Err(Error::invalid("tuning needs k >= 2 folds"));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = Vec::with_capacity(budget);
    for _ in 0..budget {
        let hp = space.sample(&mut rng, seed);
        hp.validate()?;
        let score = cv_mse(kind, x, y, &hp, k, seed)?;
        candidates.push((hp, score));
    }
    let (best, best_score) = candidates
        .iter()
        .fold(None::<&(HyperParams, f64)>, |acc, c| match acc {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .cloned()
        .expect("budget >= 1");
    Ok(TuneResult { best, best_score, candidates })
}
