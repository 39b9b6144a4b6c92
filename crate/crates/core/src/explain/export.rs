//! CSV forms of attribution results for external plotting.

use std::io::Write;

use super::attribution::{AttributionMatrix, FactorImportance, InteractionTensor};
use crate::error::{Error, Result};

/// One row per sample: `sample, base_value, <feature>...`.
pub fn write_attribution_csv<W: Write>(attr: &AttributionMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sample".to_string(), "base_value".to_string()];
    header.extend(attr.feature_names.iter().cloned());
    w.write_record(&header)?;
    for (n, row) in attr.values.iter().enumerate() {
        let mut rec = vec![n.to_string(), attr.base_value.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long form: `sample, feature_i, feature_j, value`.
pub fn write_interactions_csv<W: Write>(tensor: &InteractionTensor, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sample", "feature_i", "feature_j", "value"])?;
    for (n, t) in tensor.values.iter().enumerate() {
        for (i, row) in t.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([
                    n.to_string(),
                    tensor.feature_names[i].clone(),
                    tensor.feature_names[j].clone(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn check_shape(n: usize, m: usize, x: &[Vec<f64>]) -> Result<()> {
    if x.len() != n {
        return Err(Error::invalid(format!("{} feature rows for {n} samples", x.len())));
    }
    if let Some(bad) = x.iter().find(|r| r.len() != m) {
        return Err(Error::Arity { expected: m, found: bad.len() });
    }
    Ok(())
}

/// Summary-plot data: `feature, sample, feature_value, shap`.
pub fn write_summary_csv<W: Write>(
    attr: &AttributionMatrix,
    x: &[Vec<f64>],
    writer: W,
) -> Result<()> {
    check_shape(attr.n_samples(), attr.n_features(), x)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "sample", "feature_value", "shap"])?;
    for (i, name) in attr.feature_names.iter().enumerate() {
        for (n, row) in attr.values.iter().enumerate() {
            w.write_record([name.clone(), n.to_string(), x[n][i].to_string(), row[i].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Dependence-plot data: `feature, sample, feature_value, main_effect`.
pub fn write_dependence_csv<W: Write>(
    tensor: &InteractionTensor,
    x: &[Vec<f64>],
    writer: W,
) -> Result<()> {
    check_shape(tensor.values.len(), tensor.feature_names.len(), x)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "sample", "feature_value", "main_effect"])?;
    for (i, name) in tensor.feature_names.iter().enumerate() {
        for n in 0..tensor.values.len() {
            w.write_record([
                name.clone(),
                n.to_string(),
                x[n][i].to_string(),
                tensor.main_effect(n, i).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `rank, feature, mean_abs_shap`.
pub fn write_ranking_csv<W: Write>(ranking: &[FactorImportance], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "feature", "mean_abs_shap"])?;
    for (r, f) in ranking.iter().enumerate() {
        w.write_record([(r + 1).to_string(), f.name.clone(), f.mean_abs.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
