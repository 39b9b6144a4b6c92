//! Well tables: schema, ingest, cleaning and synthetic generation.

mod io;
mod preprocess;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_csv, load_schema, read_csv, unit_warnings, write_csv, KNOWN_UNITS};
pub use preprocess::{
    derive_intensity, preprocess, DerivedFeature, DroppedFeature, DroppedRow, FeatureDropReason,
    PreprocessConfig, PreprocessReport, RowDropReason,
};
pub use synth::{
    ground_truth, synthesize, synthetic_schema, GroundTruthModel, SyntheticFactor, PROPPANT_KNOT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Geologic,
    Drilling,
    Completion,
    Production,
}

/// One column of a well table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub unit: String,
    pub category: Category,
    #[serde(default)]
    pub optimizable: bool,
    /// Integer-valued factor (e.g. stage count). Optimizers round it at evaluation.
    #[serde(default)]
    pub integer: bool,
}

impl FactorSpec {
    pub fn new(name: &str, unit: &str, category: Category, optimizable: bool) -> Self {
        Self {
            name: name.to_string(),
            unit: unit.to_string(),
            category,
            optimizable,
            integer: false,
        }
    }

    pub fn integer(mut self) -> Self {
        self.integer = true;
        self
    }
}

/// Checks unique names and exactly one production (target) factor.
pub fn validate_schema(specs: &[FactorSpec]) -> Result<()> {
    for (i, spec) in specs.iter().enumerate() {
        if spec.name.trim().is_empty() {
            return Err(Error::Schema(format!("factor {i} has an empty name")));
        }
        if specs[..i].iter().any(|s| s.name == spec.name) {
            return Err(Error::Schema(format!("duplicate factor name `{}`", spec.name)));
        }
    }
    let targets = specs.iter().filter(|s| s.category == Category::Production).count();
    if targets != 1 {
        return Err(Error::Schema(format!(
            "exactly one production factor required, found {targets}"
        )));
    }
    Ok(())
}

/// Rectangular well dataset. Cells may be missing (`None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellTable {
    specs: Vec<FactorSpec>,
    rows: Vec<Vec<Option<f64>>>,
}

impl WellTable {
    pub fn new(specs: Vec<FactorSpec>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        validate_schema(&specs)?;
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != specs.len()) {
            return Err(Error::MalformedRow {
                row: i,
                reason: format!("expected {} cells, found {}", specs.len(), row.len()),
            });
        }
        Ok(Self { specs, rows })
    }

    /// Build a complete table from feature rows and a target vector.
    pub fn from_xy(
        specs: Vec<FactorSpec>,
        features: &[Vec<f64>],
        target: &[f64],
    ) -> Result<Self> {
        validate_schema(&specs)?;
        let t = specs.iter().position(|s| s.category == Category::Production).unwrap();
        if features.len() != target.len() {
            return Err(Error::invalid("feature and target row counts differ"));
        }
        let rows = features
            .iter()
            .zip(target)
            .map(|(f, &y)| {
                let mut row: Vec<Option<f64>> = f.iter().copied().map(Some).collect();
                row.insert(t.min(row.len()), Some(y));
                row
            })
            .collect();
        Self::new(specs, rows)
    }

    pub fn specs(&self) -> &[FactorSpec] {
        &self.specs
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.specs.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.specs
            .iter()
            .position(|s| s.category == Category::Production)
            .expect("validated schema has a target")
    }

    pub fn target_spec(&self) -> &FactorSpec {
        &self.specs[self.target_index()]
    }

    /// Column indices of the input factors, in declaration order.
    pub fn feature_indices(&self) -> Vec<usize> {
        let t = self.target_index();
        (0..self.specs.len()).filter(|&i| i != t).collect()
    }

    pub fn feature_specs(&self) -> Vec<FactorSpec> {
        self.feature_indices().into_iter().map(|i| self.specs[i].clone()).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_indices().into_iter().map(|i| self.specs[i].name.clone()).collect()
    }

    pub fn column(&self, idx: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Rows whose target cell is missing.
    pub fn missing_target_rows(&self) -> Vec<usize> {
        let t = self.target_index();
        (0..self.rows.len()).filter(|&i| self.rows[i][t].is_none()).collect()
    }

    /// Split into a feature matrix (rows × features) and target vector.
    pub fn to_xy(&self) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let t = self.target_index();
        let feats = self.feature_indices();
        let mut x = Vec::with_capacity(self.rows.len());
        let mut y = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut xr = Vec::with_capacity(feats.len());
            for &f in &feats {
                xr.push(row[f].ok_or(Error::MissingValues)?);
            }
            x.push(xr);
            y.push(row[t].ok_or(Error::MissingValues)?);
        }
        Ok((x, y))
    }

    /// Sub-table with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> WellTable {
        WellTable {
            specs: self.specs.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Sub-table keeping only the listed columns, in declaration order.
    pub(crate) fn keep_columns(&self, keep: &[bool]) -> WellTable {
        let specs = self
            .specs
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(s, _)| s.clone())
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().zip(keep).filter(|(_, &k)| k).map(|(c, _)| *c).collect())
            .collect();
        WellTable { specs, rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<FactorSpec> {
        vec![
            FactorSpec::new("a", "m", Category::Geologic, false),
            FactorSpec::new("eur", "10⁸m³", Category::Production, false),
        ]
    }

    #[test]
    fn rejects_duplicate_names() {
        let mut s = specs();
        s.push(FactorSpec::new("a", "m", Category::Drilling, true));
        assert!(matches!(validate_schema(&s), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_missing_or_extra_target() {
        let s = vec![FactorSpec::new("a", "m", Category::Geologic, false)];
        assert!(validate_schema(&s).is_err());
        let mut s = specs();
        s.push(FactorSpec::new("b", "10⁸m³", Category::Production, false));
        assert!(validate_schema(&s).is_err());
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = WellTable::new(specs(), vec![vec![Some(1.0)]]).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { row: 0, .. }));
    }

    #[test]
    fn to_xy_requires_complete_rows() {
        let t = WellTable::new(specs(), vec![vec![Some(1.0), None]]).unwrap();
        assert_eq!(t.missing_target_rows(), vec![0]);
        assert!(matches!(t.to_xy(), Err(Error::MissingValues)));
    }

    #[test]
    fn from_xy_places_target() {
        let s = vec![
            FactorSpec::new("eur", "10⁸m³", Category::Production, false),
            FactorSpec::new("a", "m", Category::Geologic, false),
        ];
        let t = WellTable::from_xy(s, &[vec![3.0]], &[7.0]).unwrap();
        assert_eq!(t.rows()[0], vec![Some(7.0), Some(3.0)]);
        assert_eq!(t.to_xy().unwrap(), (vec![vec![3.0]], vec![7.0]));
    }
}
