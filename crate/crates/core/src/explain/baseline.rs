//! Classical correlation baselines for comparison with SHAP rankings.
//! Spearman stands in for a rank-based dependence measure.

use serde::{Deserialize, Serialize};

use crate::data::WellTable;
use crate::error::{Error, Result};
use crate::stats::{pearson, spearman};

/// Distinguishing coefficient of the grey relational grade.
pub const GRA_RHO: f64 = 0.5;

/// `None` marks a statistic that is undefined (zero-variance feature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCorrelation {
    pub name: String,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub gra: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub factors: Vec<BaselineCorrelation>,
    /// Feature names by decreasing |Pearson|; undefined values last.
    pub pearson_rank: Vec<String>,
    pub spearman_rank: Vec<String>,
    /// Feature names by decreasing grey relational grade.
    pub gra_rank: Vec<String>,
}

fn min_max(values: &[f64]) -> Option<Vec<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    Some(values.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// Deng's grey relational grade of each comparison sequence against the
/// reference, on min-max normalized sequences with global Δmin/Δmax.
fn grey_relational_grades(reference: &[f64], factors: &[Vec<f64>], rho: f64) -> Vec<Option<f64>> {
    let Some(r) = min_max(reference) else {
        return vec![None; factors.len()];
    };
    let deltas: Vec<Option<Vec<f64>>> = factors
        .iter()
        .map(|f| min_max(f).map(|f| f.iter().zip(&r).map(|(a, b)| (a - b).abs()).collect()))
        .collect();
    let all = deltas.iter().flatten().flatten().copied();
    let dmin = all.clone().fold(f64::INFINITY, f64::min);
    let dmax = all.fold(f64::NEG_INFINITY, f64::max);
    deltas
        .into_iter()
        .map(|d| {
            let d = d?;
            if dmax == 0.0 {
                return Some(1.0);
            }
            let xi: f64 = d.iter().map(|v| (dmin + rho * dmax) / (v + rho * dmax)).sum();
            Some(xi / d.len() as f64)
        })
        .collect()
}

fn rank_by(names: &[String], scores: &[Option<f64>]) -> Vec<String> {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| match (scores[a], scores[b]) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    order.into_iter().map(|i| names[i].clone()).collect()
}

/// Pearson, Spearman and grey relational grade of every feature against
/// the target, with per-method rankings.
pub fn baseline_correlations(table: &WellTable) -> Result<BaselineReport> {
    let (x, y) = table.to_xy()?;
    if y.len() < 2 {
        return Err(Error::invalid("baseline correlations need at least two rows"));
    }
    let names = table.feature_names();
    let columns: Vec<Vec<f64>> =
        (0..names.len()).map(|j| x.iter().map(|r| r[j]).collect()).collect();
    let gra = grey_relational_grades(&y, &columns, GRA_RHO);
    let factors: Vec<BaselineCorrelation> = names
        .iter()
        .zip(&columns)
        .zip(&gra)
        .map(|((name, col), &g)| BaselineCorrelation {
            name: name.clone(),
            pearson: pearson(col, &y),
            spearman: spearman(col, &y),
            gra: g,
        })
        .collect();
    let abs = |v: Option<f64>| v.map(f64::abs);
    let p: Vec<Option<f64>> = factors.iter().map(|f| abs(f.pearson)).collect();
    let s: Vec<Option<f64>> = factors.iter().map(|f| abs(f.spearman)).collect();
    Ok(BaselineReport {
        pearson_rank: rank_by(&names, &p),
        spearman_rank: rank_by(&names, &s),
        gra_rank: rank_by(&names, &gra),
        factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Category, FactorSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(cols: &[Vec<f64>], y: &[f64]) -> WellTable {
        let mut specs: Vec<FactorSpec> = (0..cols.len())
            .map(|i| FactorSpec::new(&format!("f{i}"), "-", Category::Geologic, false))
            .collect();
        specs.push(FactorSpec::new("eur", "10⁸m³", Category::Production, false));
        let x: Vec<Vec<f64>> = (0..y.len()).map(|n| cols.iter().map(|c| c[n]).collect()).collect();
        WellTable::from_xy(specs, &x, y).unwrap()
    }

    #[test]
    fn identical_and_negated_features() {
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let rep = baseline_correlations(&table(&[y.clone(), neg], &y)).unwrap();
        let same = &rep.factors[0];
        assert!((same.pearson.unwrap() - 1.0).abs() < 1e-12);
        assert!((same.spearman.unwrap() - 1.0).abs() < 1e-12);
        assert!((same.gra.unwrap() - 1.0).abs() < 1e-12);
        assert!((rep.factors[1].pearson.unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(rep.gra_rank[0], "f0");
    }

    #[test]
    fn independent_noise_is_weakly_correlated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let y: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let noise: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let rep = baseline_correlations(&table(&[noise], &y)).unwrap();
        assert!(rep.factors[0].pearson.unwrap().abs() < 0.2);
    }

    #[test]
    fn zero_variance_feature_is_undefined() {
        let y = vec![1.0, 2.0, 3.0];
        let rep = baseline_correlations(&table(&[vec![4.0; 3], y.clone()], &y)).unwrap();
        assert_eq!(rep.factors[0].pearson, None);
        assert_eq!(rep.factors[0].gra, None);
        assert_eq!(rep.pearson_rank, vec!["f1", "f0"]);
    }
}
