use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    bayes_opt, de, pso, write_trace, BoParams, DeParams, OptimResult, PsoParams, SearchProblem,
    Trace, Variable,
};
use crate::data::FactorSpec;
use crate::error::{Error, Result};
use crate::predictor::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pso,
    De,
    Bo,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pso, Method::De, Method::Bo];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pso => "pso",
            Method::De => "de",
            Method::Bo => "bo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pso" => Ok(Method::Pso),
            "de" => Ok(Method::De),
            "bo" | "bayes" => Ok(Method::Bo),
            other => Err(Error::invalid(format!("unknown optimization method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodSettings {
    pub pso: PsoParams,
    pub de: DeParams,
    pub bo: BoParams,
}

/// A variable to optimize; missing bounds default to the observed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRequest {
    pub name: String,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl VariableRequest {
    pub fn named(name: &str) -> Self {
        VariableRequest { name: name.to_string(), lower: None, upper: None }
    }

    pub fn bounded(name: &str, lower: f64, upper: f64) -> Self {
        VariableRequest { name: name.to_string(), lower: Some(lower), upper: Some(upper) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub unit: String,
    pub original: f64,
    pub optimized: f64,
    pub absolute_change: f64,
    /// `None` when the original value is zero.
    pub relative_change: Option<f64>,
}

/// Original and optimized values scaled to `[0, 1]` by the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub name: String,
    pub original: f64,
    pub optimized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellOptimization {
    pub method: Method,
    pub variables: Vec<Variable>,
    /// Incumbent design as evaluated (integers rounded).
    pub original_u: Vec<f64>,
    pub optimized_u: Vec<f64>,
    pub original_eur: f64,
    pub optimized_eur: f64,
    pub comparison: Vec<ComparisonRow>,
    pub radar: Vec<RadarPoint>,
    pub trace: Trace,
}

fn resolve_variables(
    specs: &[FactorSpec],
    observed: &[Vec<f64>],
    requests: &[VariableRequest],
) -> Result<(Vec<usize>, Vec<Variable>)> {
    if requests.is_empty() {
        return Err(Error::invalid("no optimizable variables requested"));
    }
    let mut indices = Vec::with_capacity(requests.len());
    let mut vars = Vec::with_capacity(requests.len());
    for req in requests {
        let idx = specs
            .iter()
            .position(|s| s.name == req.name)
            .ok_or_else(|| Error::MissingColumn(req.name.clone()))?;
        if !specs[idx].optimizable {
            return Err(Error::invalid(format!("factor {} is not optimizable", req.name)));
        }
        if indices.contains(&idx) {
            return Err(Error::invalid(format!("variable {} requested twice", req.name)));
        }
        let observed_range = || -> Result<(f64, f64)> {
            if observed.is_empty() {
                return Err(Error::invalid(format!("no bounds and no data for {}", req.name)));
            }
            Ok(observed.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[idx]), hi.max(r[idx]))
            }))
        };
        let (lower, upper) = match (req.lower, req.upper) {
            (Some(l), Some(u)) => (l, u),
            (l, u) => {
                let (lo, hi) = observed_range()?;
                (l.unwrap_or(lo), u.unwrap_or(hi))
            }
        };
        let mut var = Variable::new(&req.name, lower, upper);
        var.integer = specs[idx].integer;
        var.validate()?;
        indices.push(idx);
        vars.push(var);
    }
    Ok((indices, vars))
}

/// Maximize predicted EUR of one well over the requested variables, all
/// other factors held at the well's values. The well's own design is the
/// first point evaluated, so the result never falls below it.
#[allow(clippy::too_many_arguments)]
pub fn optimize_well(
    model: &impl Predictor,
    feature_specs: &[FactorSpec],
    observed: &[Vec<f64>],
    well_row: &[f64],
    requests: &[VariableRequest],
    method: Method,
    settings: &MethodSettings,
    budget: usize,
    seed: u64,
) -> Result<WellOptimization> {
    if feature_specs.len() != model.n_features() {
        return Err(Error::Arity { expected: model.n_features(), found: feature_specs.len() });
    }
    if well_row.len() != model.n_features() {
        return Err(Error::Arity { expected: model.n_features(), found: well_row.len() });
    }
    let (indices, variables) = resolve_variables(feature_specs, observed, requests)?;
    let incumbent: Vec<f64> = indices.iter().map(|&i| well_row[i]).collect();
    let objective = |u: &[f64]| {
        let mut row = well_row.to_vec();
        for (&i, &v) in indices.iter().zip(u) {
            row[i] = v;
        }
        model.predict_row(&row)
    };
    let problem = SearchProblem::new(variables.clone(), &objective, budget)?;
    let OptimResult { best_u, best_value, trace } = match method {
        Method::Pso => pso(&problem, settings.pso, Some(&incumbent), seed)?,
        Method::De => de(&problem, settings.de, Some(&incumbent), seed)?,
        Method::Bo => bayes_opt(&problem, settings.bo, Some(&incumbent), seed)?,
    };
    let first = &trace.records[0];
    let (original_u, original_eur) = (first.u.clone(), first.value);

    let comparison = variables
        .iter()
        .zip(&indices)
        .enumerate()
        .map(|(d, (var, &i))| ComparisonRow {
            name: var.name.clone(),
            unit: feature_specs[i].unit.clone(),
            original: original_u[d],
            optimized: best_u[d],
            absolute_change: best_u[d] - original_u[d],
            relative_change: (original_u[d] != 0.0)
                .then(|| (best_u[d] - original_u[d]) / original_u[d].abs()),
        })
        .collect();
    let radar = variables
        .iter()
        .enumerate()
        .map(|(d, var)| RadarPoint {
            name: var.name.clone(),
            original: (original_u[d] - var.lower) / var.width(),
            optimized: (best_u[d] - var.lower) / var.width(),
        })
        .collect();
    Ok(WellOptimization {
        method,
        variables,
        original_u,
        optimized_u: best_u,
        original_eur,
        optimized_eur: best_value,
        comparison,
        radar,
        trace,
    })
}

/// Trace CSV: `eval,<variables>,objective,best_so_far`.
pub fn write_trace_csv(result: &WellOptimization, out: impl Write) -> Result<()> {
    let names: Vec<String> = result.variables.iter().map(|v| v.name.clone()).collect();
    write_trace(&result.trace, &names, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Category;

    struct Bowl;
    impl Predictor for Bowl {
        fn n_features(&self) -> usize {
            3
        }
        fn predict_row(&self, x: &[f64]) -> f64 {
            x[0] - (x[1] - 2.0).powi(2) - (x[2] - 7.0).powi(2)
        }
    }

    fn specs() -> Vec<FactorSpec> {
        vec![
            FactorSpec::new("porosity", "%", Category::Geologic, false),
            FactorSpec::new("length", "m", Category::Completion, true),
            FactorSpec::new("stages", "count", Category::Completion, true).integer(),
        ]
    }

    #[test]
    fn rejects_non_optimizable_and_empty_requests() {
        let row = [1.0, 1.0, 5.0];
        let s = MethodSettings::default();
        let bad = [VariableRequest::bounded("porosity", 0.0, 2.0)];
        assert!(optimize_well(&Bowl, &specs(), &[], &row, &bad, Method::Pso, &s, 50, 0).is_err());
        assert!(optimize_well(&Bowl, &specs(), &[], &row, &[], Method::Pso, &s, 50, 0).is_err());
        let unknown = [VariableRequest::bounded("nope", 0.0, 2.0)];
        assert!(optimize_well(&Bowl, &specs(), &[], &row, &unknown, Method::De, &s, 50, 0).is_err());
        let outside = [VariableRequest::bounded("length", 3.0, 4.0)];
        assert!(optimize_well(&Bowl, &specs(), &[], &row, &outside, Method::Bo, &s, 50, 0).is_err());
    }

    #[test]
    fn budget_one_keeps_original_design() {
        let row = [1.0, 1.0, 5.0];
        let req = [VariableRequest::bounded("length", 0.0, 4.0), VariableRequest::bounded("stages", 3.0, 10.0)];
        for method in Method::ALL {
            let r = optimize_well(&Bowl, &specs(), &[], &row, &req, method, &MethodSettings::default(), 1, 0)
                .unwrap();
            assert_eq!(r.optimized_u, vec![1.0, 5.0]);
            assert_eq!(r.optimized_eur, r.original_eur);
        }
    }

    #[test]
    fn finds_interior_optimum_with_integer_stage_count() {
        let row = [1.0, 1.0, 5.0];
        let req = [VariableRequest::bounded("length", 0.0, 4.0), VariableRequest::bounded("stages", 3.0, 10.0)];
        for method in Method::ALL {
            let r = optimize_well(&Bowl, &specs(), &[], &row, &req, method, &MethodSettings::default(), 60, 1)
                .unwrap();
            assert_eq!(r.optimized_u[1], 7.0, "{method}");
            assert!((r.optimized_u[0] - 2.0).abs() < 0.05, "{method}: {:?}", r.optimized_u);
            assert!(r.optimized_eur >= r.original_eur);
            assert!(r.trace.len() <= 60);
            assert_eq!(r.radar[1].optimized, 4.0 / 7.0);
        }
    }

    #[test]
    fn observed_range_supplies_missing_bounds() {
        let observed = vec![vec![0.0, 0.5, 4.0], vec![0.0, 3.0, 9.0]];
        let (_, vars) = resolve_variables(&specs(), &observed, &[VariableRequest::named("length")]).unwrap();
        assert_eq!((vars[0].lower, vars[0].upper), (0.5, 3.0));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("sgd".parse::<Method>().is_err());
    }
}
