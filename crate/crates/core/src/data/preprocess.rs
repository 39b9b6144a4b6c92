use serde::{Deserialize, Serialize};

use super::{FactorSpec, WellTable};
use crate::error::{Error, Result};
use crate::stats::{mean, pearson, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Features with a larger missing fraction are dropped.
    pub missing_ratio_max: f64,
    /// Rows with any |z| above this on any column are dropped.
    pub outlier_z: f64,
    /// Later-declared feature of a pair with |r| at or above this is dropped.
    pub redundancy_r: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { missing_ratio_max: 0.2, outlier_z: 4.0, redundancy_r: 0.9 }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.missing_ratio_max) {
            return Err(Error::invalid("missing_ratio_max must lie in [0, 1]"));
        }
        if !(self.outlier_z > 0.0) {
            return Err(Error::invalid("outlier_z must be positive"));
        }
        if !(self.redundancy_r > 0.0 && self.redundancy_r <= 1.0) {
            return Err(Error::invalid("redundancy_r must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum FeatureDropReason {
    MissingRatio { ratio: f64 },
    Redundancy { correlated_with: String, r: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    #[serde(flatten)]
    pub reason: FeatureDropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum RowDropReason {
    MissingTarget,
    MissingValue { column: String },
    Outlier { column: String, z: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    /// Row index in the input table.
    pub row: usize,
    #[serde(flatten)]
    pub reason: RowDropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedFeature {
    pub name: String,
    pub formula: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub dropped_features: Vec<DroppedFeature>,
    pub dropped_rows: Vec<DroppedRow>,
    pub derived_features: Vec<DerivedFeature>,
    /// Column names of `pearson_matrix`, all surviving columns in order.
    pub columns: Vec<String>,
    /// `None` where a column has zero variance.
    pub pearson_matrix: Vec<Vec<Option<f64>>>,
}

impl PreprocessReport {
    /// True when nothing was dropped or derived.
    pub fn is_empty(&self) -> bool {
        self.dropped_features.is_empty()
            && self.dropped_rows.is_empty()
            && self.derived_features.is_empty()
    }

    pub fn record_derived(&mut self, name: &str, formula: &str) {
        self.derived_features.push(DerivedFeature { name: name.into(), formula: formula.into() });
    }
}

/// Clean a table without imputation:
///
/// 1. rows with a missing target are dropped;
/// 2. features whose missing fraction exceeds `missing_ratio_max` are dropped;
/// 3. rows still holding a missing cell are dropped;
/// 4. rows with |z| > `outlier_z` on any column are dropped, repeated until
///    no row exceeds the threshold, so the result is a fixed point;
/// 5. for every feature pair with |r| ≥ `redundancy_r`, the later-declared
///    feature is dropped.
pub fn preprocess(
    table: &WellTable,
    config: &PreprocessConfig,
) -> Result<(WellTable, PreprocessReport)> {
    config.validate()?;
    if table.n_rows() == 0 {
        return Err(Error::invalid("cannot preprocess an empty table"));
    }
    let mut report = PreprocessReport::default();
    let target = table.target_index();
    // original row index for each live row
    let mut live: Vec<usize> = Vec::with_capacity(table.n_rows());
    for (i, row) in table.rows().iter().enumerate() {
        if row[target].is_none() {
            report.dropped_rows.push(DroppedRow { row: i, reason: RowDropReason::MissingTarget });
        } else {
            live.push(i);
        }
    }

    let specs = table.specs();
    let mut keep = vec![true; specs.len()];
    if !live.is_empty() {
        for (c, spec) in specs.iter().enumerate() {
            if c == target {
                continue;
            }
            let missing = live.iter().filter(|&&r| table.rows()[r][c].is_none()).count();
            let ratio = missing as f64 / live.len() as f64;
            if ratio > config.missing_ratio_max {
                keep[c] = false;
                report.dropped_features.push(DroppedFeature {
                    name: spec.name.clone(),
                    reason: FeatureDropReason::MissingRatio { ratio },
                });
            }
        }
    }

    live.retain(|&r| {
        let row = &table.rows()[r];
        match (0..specs.len()).find(|&c| keep[c] && row[c].is_none()) {
            Some(c) => {
                report.dropped_rows.push(DroppedRow {
                    row: r,
                    reason: RowDropReason::MissingValue { column: specs[c].name.clone() },
                });
                false
            }
            None => true,
        }
    });

    let kept_cols: Vec<usize> = (0..specs.len()).filter(|&c| keep[c]).collect();
    let value = |r: usize, c: usize| table.rows()[r][c].expect("complete after filtering");
    loop {
        if live.len() < 2 {
            break;
        }
        let moments: Vec<(usize, f64, f64)> = kept_cols
            .iter()
            .map(|&c| {
                let col: Vec<f64> = live.iter().map(|&r| value(r, c)).collect();
                (c, mean(&col), sample_sd(&col))
            })
            .collect();
        let mut dropped_any = false;
        live.retain(|&r| {
            let worst = moments
                .iter()
                .filter(|(_, _, sd)| *sd > 0.0)
                .map(|&(c, m, sd)| (c, (value(r, c) - m) / sd))
                .filter(|(_, z)| z.abs() > config.outlier_z)
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            match worst {
                Some((c, z)) => {
                    report.dropped_rows.push(DroppedRow {
                        row: r,
                        reason: RowDropReason::Outlier { column: specs[c].name.clone(), z },
                    });
                    dropped_any = true;
                    false
                }
                None => true,
            }
        });
        if !dropped_any {
            break;
        }
    }

    if live.is_empty() {
        return Err(Error::EmptyAfterPreprocessing);
    }
    if live.len() < 2 {
        return Err(Error::invalid("fewer than two rows remain after preprocessing"));
    }

    let column = |c: usize| -> Vec<f64> { live.iter().map(|&r| value(r, c)).collect() };
    let feature_cols: Vec<usize> = kept_cols.iter().copied().filter(|&c| c != target).collect();
    let mut survivors: Vec<usize> = Vec::new();
    for &c in &feature_cols {
        let col = column(c);
        let clash = survivors.iter().find_map(|&prev| {
            pearson(&column(prev), &col)
                .filter(|r| r.abs() >= config.redundancy_r)
                .map(|r| (prev, r))
        });
        match clash {
            Some((prev, r)) => {
                keep[c] = false;
                report.dropped_features.push(DroppedFeature {
                    name: specs[c].name.clone(),
                    reason: FeatureDropReason::Redundancy {
                        correlated_with: specs[prev].name.clone(),
                        r,
                    },
                });
            }
            None => survivors.push(c),
        }
    }

    let out = table.select_rows(&live).keep_columns(&keep);
    let (columns, matrix) = pearson_matrix(&out);
    report.columns = columns;
    report.pearson_matrix = matrix;
    Ok((out, report))
}

/// Pearson matrix over all columns of a complete table. The diagonal is
/// exactly one.
pub(crate) fn pearson_matrix(table: &WellTable) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let names: Vec<String> = table.specs().iter().map(|s| s.name.clone()).collect();
    let cols: Vec<Vec<f64>> = (0..table.n_columns())
        .map(|c| table.column(c).into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect();
    let m = cols.len();
    let mut matrix = vec![vec![None; m]; m];
    for i in 0..m {
        matrix[i][i] = Some(1.0);
        for j in 0..i {
            let r = pearson(&cols[i], &cols[j]);
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    (names, matrix)
}

/// Add `new_name = numerator / denominator`. Missing inputs give a missing
/// result; a present denominator must be strictly positive. The new column
/// takes the numerator's category and optimizable flag and is placed before
/// the target if the target is the last column.
pub fn derive_intensity(
    table: &WellTable,
    numerator: &str,
    denominator: &str,
    new_name: &str,
    keep_sources: bool,
) -> Result<WellTable> {
    let num = table.index_of(numerator).ok_or_else(|| Error::MissingColumn(numerator.into()))?;
    let den =
        table.index_of(denominator).ok_or_else(|| Error::MissingColumn(denominator.into()))?;
    if table.index_of(new_name).is_some() {
        return Err(Error::Schema(format!("column `{new_name}` already exists")));
    }
    let mut values = Vec::with_capacity(table.n_rows());
    for (i, row) in table.rows().iter().enumerate() {
        let v = match (row[num], row[den]) {
            (_, Some(d)) if d <= 0.0 => {
                return Err(Error::NonPositiveDenominator {
                    column: denominator.into(),
                    row: i,
                    value: d,
                })
            }
            (Some(n), Some(d)) => Some(n / d),
            _ => None,
        };
        values.push(v);
    }

    let num_spec = &table.specs()[num];
    let den_spec = &table.specs()[den];
    let spec = FactorSpec {
        name: new_name.into(),
        unit: format!("{}/{}", num_spec.unit, den_spec.unit),
        category: num_spec.category,
        optimizable: num_spec.optimizable,
        integer: false,
    };
    let target = table.target_index();
    let insert_at = if target == table.n_columns() - 1 { target } else { table.n_columns() };

    let mut specs = table.specs().to_vec();
    specs.insert(insert_at, spec);
    let mut rows = table.rows().to_vec();
    for (row, v) in rows.iter_mut().zip(values) {
        row.insert(insert_at, v);
    }
    let widened = WellTable::new(specs, rows)?;
    if keep_sources {
        return Ok(widened);
    }
    let keep: Vec<bool> = widened
        .specs()
        .iter()
        .map(|s| s.name != numerator && s.name != denominator)
        .collect();
    Ok(widened.keep_columns(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Category;

    fn spec(name: &str) -> FactorSpec {
        FactorSpec::new(name, "m", Category::Completion, true)
    }

    fn table(cols: &[(&str, Vec<Option<f64>>)], y: Vec<Option<f64>>) -> WellTable {
        let mut specs: Vec<FactorSpec> = cols.iter().map(|(n, _)| spec(n)).collect();
        specs.push(FactorSpec::new("eur", "10⁸m³", Category::Production, false));
        let rows = (0..y.len())
            .map(|i| {
                let mut r: Vec<Option<f64>> = cols.iter().map(|(_, c)| c[i]).collect();
                r.push(y[i]);
                r
            })
            .collect();
        WellTable::new(specs, rows).unwrap()
    }

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn duplicated_column_drops_the_second() {
        let a = some(&[1.0, 2.0, 3.0, 5.0, 4.0]);
        let b = some(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        let t = table(&[("a", a.clone()), ("b", b), ("a_copy", a)], some(&[1.0, 2.0, 3.0, 4.0, 5.0]));
        let (out, rep) = preprocess(&t, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.feature_names(), vec!["a", "b"]);
        assert_eq!(rep.dropped_features.len(), 1);
        assert_eq!(rep.dropped_features[0].name, "a_copy");
        match &rep.dropped_features[0].reason {
            FeatureDropReason::Redundancy { correlated_with, r } => {
                assert_eq!(correlated_with, "a");
                assert!((r - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sparse_column_dropped_by_missing_ratio() {
        let sparse = vec![Some(1.0), None, None, Some(2.0), None];
        let ok = some(&[1.0, 2.0, 3.0, 5.0, 4.0]);
        let t = table(&[("ok", ok), ("sparse", sparse)], some(&[1.0, 2.0, 3.0, 4.0, 5.0]));
        let cfg = PreprocessConfig { missing_ratio_max: 0.5, ..Default::default() };
        let (out, rep) = preprocess(&t, &cfg).unwrap();
        assert_eq!(out.feature_names(), vec!["ok"]);
        assert_eq!(out.n_rows(), 5);
        assert!(matches!(
            rep.dropped_features[0].reason,
            FeatureDropReason::MissingRatio { ratio } if (ratio - 0.6).abs() < 1e-12
        ));
    }

    #[test]
    fn highly_correlated_proppant_columns() {
        // "mesh sand" = 0.85 × total + small perturbation: r > 0.9 by construction
        let total: Vec<f64> = (0..30).map(|i| 1000.0 + 37.0 * i as f64).collect();
        let wiggle = [3.0, -2.0, 5.0, -4.0, 1.0];
        let mesh: Vec<f64> =
            total.iter().enumerate().map(|(i, t)| 0.85 * t + wiggle[i % 5]).collect();
        let r = pearson(&total, &mesh).unwrap();
        assert!(r > 0.9);
        let y: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let t = table(&[("total_proppant", some(&total)), ("mesh_40_70", some(&mesh))], some(&y));
        let (out, rep) = preprocess(&t, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.feature_names(), vec!["total_proppant"]);
        assert_eq!(rep.dropped_features[0].name, "mesh_40_70");
    }

    #[test]
    fn missing_values_and_outliers_drop_rows() {
        let mut a: Vec<Option<f64>> = (0..40).map(|i| Some((i % 7) as f64)).collect();
        a[3] = Some(1000.0);
        let mut b: Vec<Option<f64>> = (0..40).map(|i| Some((i % 5) as f64)).collect();
        b[10] = None;
        let mut y: Vec<Option<f64>> = (0..40).map(|i| Some((i % 3) as f64)).collect();
        y[20] = None;
        let t = table(&[("a", a), ("b", b)], y);
        let (out, rep) = preprocess(&t, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.n_rows(), 37);
        let reasons: Vec<(usize, &RowDropReason)> =
            rep.dropped_rows.iter().map(|d| (d.row, &d.reason)).collect();
        assert!(reasons.contains(&(20, &RowDropReason::MissingTarget)));
        assert!(reasons.contains(&(10, &RowDropReason::MissingValue { column: "b".into() })));
        assert!(reasons
            .iter()
            .any(|(r, why)| *r == 3 && matches!(why, RowDropReason::Outlier { .. })));
    }

    #[test]
    fn all_rows_dropped_is_an_error() {
        let t = table(&[("a", some(&[1.0, 2.0]))], vec![None, None]);
        assert!(matches!(
            preprocess(&t, &PreprocessConfig::default()),
            Err(Error::EmptyAfterPreprocessing)
        ));
    }

    #[test]
    fn intensity_arithmetic() {
        let t = table(
            &[("fluid", some(&[30000.0, 45000.0])), ("length", some(&[1500.0, 1800.0]))],
            some(&[1.0, 2.0]),
        );
        let d = derive_intensity(&t, "fluid", "length", "fluid_intensity", true).unwrap();
        let c = d.index_of("fluid_intensity").unwrap();
        assert_eq!(d.rows()[0][c], Some(20.0));
        assert_eq!(d.rows()[1][c], Some(25.0));
        assert_eq!(d.target_index(), d.n_columns() - 1);

        let dropped = derive_intensity(&t, "fluid", "length", "fluid_intensity", false).unwrap();
        assert_eq!(dropped.feature_names(), vec!["fluid_intensity"]);
    }

    #[test]
    fn zero_denominator_names_the_row() {
        let t = table(
            &[("proppant", some(&[2000.0, 2500.0])), ("length", some(&[1500.0, 0.0]))],
            some(&[1.0, 2.0]),
        );
        let err = derive_intensity(&t, "proppant", "length", "pi", true).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDenominator { row: 1, .. }));
    }

    #[test]
    fn intensity_is_not_perfectly_correlated_with_numerator() {
        let fluid = [30000.0, 42000.0, 35000.0, 50000.0, 28000.0];
        let length = [1500.0, 1900.0, 1200.0, 2000.0, 1600.0];
        let t = table(&[("fluid", some(&fluid)), ("length", some(&length))], some(&[1.0; 5]));
        let d = derive_intensity(&t, "fluid", "length", "fi", true).unwrap();
        let fi: Vec<f64> = fluid.iter().zip(&length).map(|(f, l)| f / l).collect();
        let r = pearson(&fluid, &fi).unwrap();
        assert!(r.abs() < 1.0);
        let col: Vec<f64> = d.column(d.index_of("fi").unwrap()).into_iter().flatten().collect();
        assert_eq!(col, fi);

        let constant = [1500.0; 5];
        let fi_const: Vec<f64> = fluid.iter().zip(&constant).map(|(f, l)| f / l).collect();
        assert!((pearson(&fluid, &fi_const).unwrap() - 1.0).abs() < 1e-12);
    }
}
