use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// N × M SHAP values in target units plus the shared base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub values: Vec<Vec<f64>>,
    pub base_value: f64,
    pub feature_names: Vec<String>,
}

impl AttributionMatrix {
    pub fn n_samples(&self) -> usize {
        self.values.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// `base_value + Σ_i φ_i` for sample `n`.
    pub fn reconstruct(&self, n: usize) -> f64 {
        self.base_value + self.values[n].iter().sum::<f64>()
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[feature]).collect()
    }

    /// Largest relative reconstruction error against `predictions`, using
    /// `max(1, |prediction|)` as the scale.
    pub fn additivity_error(&self, predictions: &[f64]) -> f64 {
        assert_eq!(predictions.len(), self.n_samples());
        predictions
            .iter()
            .enumerate()
            .map(|(n, p)| (self.reconstruct(n) - p).abs() / p.abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// N × M × M SHAP interaction values. `values[n][i][i]` is the main effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTensor {
    pub values: Vec<Vec<Vec<f64>>>,
    pub feature_names: Vec<String>,
}

impl InteractionTensor {
    pub fn main_effect(&self, n: usize, feature: usize) -> f64 {
        self.values[n][feature][feature]
    }

    /// `Σ_j φ_ij`, which equals the SHAP value of feature `i`.
    pub fn row_sum(&self, n: usize, feature: usize) -> f64 {
        self.values[n][feature].iter().sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in &self.values {
            for i in 0..t.len() {
                for j in 0..i {
                    worst = worst.max((t[i][j] - t[j][i]).abs());
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorImportance {
    pub name: String,
    /// Mean absolute SHAP value.
    pub mean_abs: f64,
}

/// Features ordered by mean |φ|, largest first. Ties keep declaration order.
pub fn rank_factors(attr: &AttributionMatrix) -> Result<Vec<FactorImportance>> {
    let n = attr.n_samples();
    if n == 0 {
        return Err(Error::invalid("cannot rank factors over zero samples"));
    }
    let mut ranked: Vec<FactorImportance> = attr
        .feature_names
        .iter()
        .enumerate()
        .map(|(i, name)| FactorImportance {
            name: name.clone(),
            mean_abs: attr.values.iter().map(|r| r[i].abs()).sum::<f64>() / n as f64,
        })
        .collect();
    ranked.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs));
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub name: String,
    pub value: f64,
}

/// One sample's decomposition: base value, contributions by decreasing
/// magnitude, and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waterfall {
    pub sample: usize,
    pub base_value: f64,
    pub contributions: Vec<Contribution>,
    pub prediction: f64,
}

pub fn explain_well(attr: &AttributionMatrix, n: usize) -> Result<Waterfall> {
    let row = attr
        .values
        .get(n)
        .ok_or_else(|| Error::invalid(format!("sample {n} out of range ({})", attr.n_samples())))?;
    let mut contributions: Vec<Contribution> = attr
        .feature_names
        .iter()
        .zip(row)
        .map(|(name, &value)| Contribution { name: name.clone(), value })
        .collect();
    contributions.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
    Ok(Waterfall {
        sample: n,
        base_value: attr.base_value,
        contributions,
        prediction: attr.reconstruct(n),
    })
}
