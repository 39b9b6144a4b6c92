//! Derivative-free maximization of a black-box objective over a box.
//!
//! All optimizers go through [`Evaluator`], which enforces bounds, rounds
//! integer variables, counts evaluations against the budget and records the
//! [`Trace`].

mod bo;
mod de;
pub mod gp;
mod pso;
mod well;

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bo::{bayes_opt, expected_improvement, BoParams};
pub use de::{de, de_mutant, de_trial, pick_donors, DeParams, DeState};
pub use pso::{pso, pso_velocity, PsoParams, SwarmState};
pub use well::{
    optimize_well, write_trace_csv, ComparisonRow, Method, MethodSettings, RadarPoint,
    VariableRequest, WellOptimization,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub integer: bool,
}

impl Variable {
    pub fn new(name: &str, lower: f64, upper: f64) -> Self {
        Variable { name: name.to_string(), lower, upper, integer: false }
    }

    pub fn integer(mut self) -> Self {
        self.integer = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::invalid(format!(
                "variable {}: need finite lower < upper, got [{}, {}]",
                self.name, self.lower, self.upper
            )));
        }
        if self.integer && self.lower.ceil() > self.upper.floor() {
            return Err(Error::invalid(format!("variable {} has no integer in its bounds", self.name)));
        }
        Ok(())
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    /// Value actually passed to the objective.
    pub fn snap(&self, v: f64) -> f64 {
        if self.integer {
            v.round().clamp(self.lower.ceil(), self.upper.floor())
        } else {
            v
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

pub struct SearchProblem<'a> {
    pub variables: Vec<Variable>,
    pub objective: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub budget: usize,
}

impl<'a> SearchProblem<'a> {
    pub fn new(
        variables: Vec<Variable>,
        objective: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        budget: usize,
    ) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::invalid("search problem has no variables"));
        }
        for v in &variables {
            v.validate()?;
        }
        if budget == 0 {
            return Err(Error::invalid("evaluation budget must be at least 1"));
        }
        Ok(SearchProblem { variables, objective, budget })
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn clamp(&self, u: &mut [f64]) {
        for (x, v) in u.iter_mut().zip(&self.variables) {
            *x = v.clamp(*x);
        }
    }

    pub fn random_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.variables.iter().map(|v| rng.random_range(v.lower..=v.upper)).collect()
    }

    fn check_incumbent(&self, incumbent: Option<&[f64]>) -> Result<()> {
        if let Some(u) = incumbent {
            if u.len() != self.dim() {
                return Err(Error::Arity { expected: self.dim(), found: u.len() });
            }
            for (x, v) in u.iter().zip(&self.variables) {
                if !(v.lower..=v.upper).contains(x) {
                    return Err(Error::invalid(format!(
                        "incumbent {} = {x} lies outside [{}, {}]",
                        v.name, v.lower, v.upper
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub eval: usize,
    pub u: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Set when the budget ran out in the middle of an iteration.
    pub truncated: bool,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_so_far).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub best_u: Vec<f64>,
    pub best_value: f64,
    pub trace: Trace,
}

/// Budgeted, bound-checked access to the objective.
pub struct Evaluator<'p, 'a> {
    problem: &'p SearchProblem<'a>,
    trace: Trace,
    best: Option<(Vec<f64>, f64)>,
}

impl<'p, 'a> Evaluator<'p, 'a> {
    pub fn new(problem: &'p SearchProblem<'a>) -> Self {
        Evaluator { problem, trace: Trace::default(), best: None }
    }

    pub fn remaining(&self) -> usize {
        self.problem.budget - self.trace.len()
    }

    pub fn exhausted(&self) -> bool {
        self.remaining() == 0
    }

    /// The point the objective sees for `u`: integers rounded.
    pub fn snap(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.problem.variables).map(|(x, v)| v.snap(*x)).collect()
    }

    fn record(&mut self, u: Vec<f64>, value: f64) {
        let better = self.best.as_ref().is_none_or(|(_, b)| value > *b);
        if better {
            self.best = Some((u.clone(), value));
        }
        let best_so_far = self.best.as_ref().map_or(value, |(_, b)| *b);
        self.trace.records.push(TraceRecord { eval: self.trace.len(), u, value, best_so_far });
    }

    fn check_bounds(&self, u: &[f64]) {
        assert_eq!(u.len(), self.problem.dim(), "point has wrong dimension");
        for (x, v) in u.iter().zip(&self.problem.variables) {
            assert!(
                *x >= v.lower && *x <= v.upper,
                "{} = {x} evaluated outside [{}, {}]",
                v.name,
                v.lower,
                v.upper
            );
        }
    }

    /// Evaluate one point, or `None` once the budget is spent.
    pub fn eval(&mut self, u: &[f64]) -> Option<f64> {
        self.eval_batch(&[u.to_vec()]).pop().flatten()
    }

    /// Evaluate points in parallel; points beyond the remaining budget get
    /// `None` and mark the trace truncated. Records keep input order.
    pub fn eval_batch(&mut self, points: &[Vec<f64>]) -> Vec<Option<f64>> {
        let take = points.len().min(self.remaining());
        let snapped: Vec<Vec<f64>> = points[..take].iter().map(|u| self.snap(u)).collect();
        for u in &snapped {
            self.check_bounds(u);
        }
        let objective = self.problem.objective;
        let values: Vec<f64> = snapped.par_iter().map(|u| objective(u)).collect();
        let mut out = Vec::with_capacity(points.len());
        for (u, value) in snapped.into_iter().zip(values) {
            self.record(u, value);
            out.push(Some(value));
        }
        if take < points.len() {
            self.trace.truncated = true;
            out.resize(points.len(), None);
        }
        out
    }

    pub fn finish(self) -> Result<OptimResult> {
        let (best_u, best_value) =
            self.best.ok_or_else(|| Error::invalid("no point was evaluated"))?;
        Ok(OptimResult { best_u, best_value, trace: self.trace })
    }
}

/// Source of the uniform draws used by the population methods. Replaceable
/// so single iterations can be checked by hand.
pub trait UnitSampler {
    /// Uniform on [0, 1).
    fn unit(&mut self) -> f64;

    /// Uniform on `0..n`.
    fn index(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }
}

impl UnitSampler for ChaCha8Rng {
    fn unit(&mut self) -> f64 {
        self.random::<f64>()
    }

    fn index(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }
}

/// Replays a fixed cycle of unit draws.
#[derive(Debug, Clone)]
pub struct FixedSampler {
    values: Vec<f64>,
    pos: usize,
}

impl FixedSampler {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "FixedSampler needs at least one value");
        FixedSampler { values, pos: 0 }
    }
}

impl UnitSampler for FixedSampler {
    fn unit(&mut self) -> f64 {
        let v = self.values[self.pos % self.values.len()];
        self.pos += 1;
        v
    }
}

/// Write a trace as `eval,<variables>,objective,best_so_far`.
pub(crate) fn write_trace(trace: &Trace, names: &[String], mut out: impl Write) -> Result<()> {
    writeln!(out, "eval,{},objective,best_so_far", names.join(","))?;
    for r in &trace.records {
        let u: Vec<String> = r.u.iter().map(f64::to_string).collect();
        writeln!(out, "{},{},{},{}", r.eval, u.join(","), r.value, r.best_so_far)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluator_enforces_budget_and_tracks_best() {
        let f = |u: &[f64]| -(u[0] - 1.0).powi(2);
        let p = SearchProblem::new(vec![Variable::new("x", 0.0, 2.0)], &f, 3).unwrap();
        let mut ev = Evaluator::new(&p);
        assert_eq!(ev.eval(&[0.0]), Some(-1.0));
        let out = ev.eval_batch(&[vec![1.0], vec![2.0], vec![0.5]]);
        assert_eq!(out, vec![Some(0.0), Some(-1.0), None]);
        assert!(ev.exhausted());
        let r = ev.finish().unwrap();
        assert!(r.trace.truncated);
        assert_eq!(r.best_u, vec![1.0]);
        assert_eq!(r.trace.best_so_far(), vec![-1.0, 0.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "outside")]
    fn out_of_bounds_evaluation_panics() {
        let f = |u: &[f64]| u[0];
        let p = SearchProblem::new(vec![Variable::new("x", 0.0, 1.0)], &f, 3).unwrap();
        Evaluator::new(&p).eval(&[1.5]);
    }

    #[test]
    fn integer_variables_are_rounded_into_bounds() {
        let v = Variable::new("n", 11.6, 20.2).integer();
        assert_eq!(v.snap(11.6), 12.0);
        assert_eq!(v.snap(14.5), 15.0);
        assert_eq!(v.snap(20.2), 20.0);
        assert!(Variable::new("n", 1.2, 1.8).integer().validate().is_err());
    }

    #[test]
    fn problem_rejects_bad_bounds() {
        let f = |u: &[f64]| u[0];
        assert!(SearchProblem::new(vec![Variable::new("x", 1.0, 1.0)], &f, 3).is_err());
        assert!(SearchProblem::new(vec![], &f, 3).is_err());
        assert!(SearchProblem::new(vec![Variable::new("x", 0.0, 1.0)], &f, 0).is_err());
    }

    #[test]
    fn fixed_sampler_cycles() {
        let mut s = FixedSampler::new(vec![0.0, 0.5, 0.99]);
        assert_eq!(s.index(4), 0);
        assert_eq!(s.index(4), 2);
        assert_eq!(s.index(4), 3);
        assert_eq!(s.unit(), 0.0);
    }
}
