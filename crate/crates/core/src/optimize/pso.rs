use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Evaluator, OptimResult, SearchProblem, UnitSampler};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub omega: f64,
    pub c1: f64,
    pub c2: f64,
    pub iterations: usize,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams { swarm_size: 10, omega: 0.729, c1: 1.494, c2: 1.494, iterations: 1000 }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::invalid("PSO swarm size must be >= 2"));
        }
        if ![self.omega, self.c1, self.c2].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("PSO coefficients must be finite"));
        }
        Ok(())
    }
}

/// `ω v + c₁ D₁ (pbest − u) + c₂ D₂ (gbest − u)` with `D₁`, `D₂` given by
/// their diagonals.
#[allow(clippy::too_many_arguments)]
pub fn pso_velocity(
    v: &[f64],
    u: &[f64],
    pbest: &[f64],
    gbest: &[f64],
    omega: f64,
    c1: f64,
    c2: f64,
    d1: &[f64],
    d2: &[f64],
) -> Vec<f64> {
    (0..u.len())
        .map(|d| omega * v[d] + c1 * d1[d] * (pbest[d] - u[d]) + c2 * d2[d] * (gbest[d] - u[d]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub params: PsoParams,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub pbest: Vec<Vec<f64>>,
    /// `-inf` for a particle that was never evaluated.
    pub pbest_values: Vec<f64>,
    pub gbest: Vec<f64>,
    pub gbest_value: f64,
}

impl SwarmState {
    /// Random positions, zero velocities, particle 0 at `incumbent` if given.
    pub fn init(
        problem: &SearchProblem,
        params: PsoParams,
        incumbent: Option<&[f64]>,
        rng: &mut ChaCha8Rng,
        eval: &mut Evaluator,
    ) -> Self {
        let mut positions: Vec<Vec<f64>> =
            (0..params.swarm_size).map(|_| problem.random_point(rng)).collect();
        if let Some(u) = incumbent {
            positions[0] = u.to_vec();
        }
        let values = eval.eval_batch(&positions);
        let pbest_values: Vec<f64> = values.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect();
        let mut state = SwarmState {
            params,
            velocities: vec![vec![0.0; problem.dim()]; params.swarm_size],
            pbest: positions.clone(),
            positions,
            pbest_values,
            gbest: Vec::new(),
            gbest_value: f64::NEG_INFINITY,
        };
        state.refresh_gbest();
        state
    }

    fn refresh_gbest(&mut self) {
        for (p, &value) in self.pbest_values.iter().enumerate() {
            if value > self.gbest_value || self.gbest.is_empty() {
                self.gbest_value = value;
                self.gbest = self.pbest[p].clone();
            }
        }
    }

    /// One synchronous iteration. Returns false if the budget ran out.
    pub fn step(
        &mut self,
        problem: &SearchProblem,
        sampler: &mut impl UnitSampler,
        eval: &mut Evaluator,
    ) -> bool {
        let dim = problem.dim();
        let PsoParams { omega, c1, c2, .. } = self.params;
        for p in 0..self.positions.len() {
            let d1: Vec<f64> = (0..dim).map(|_| sampler.unit()).collect();
            let d2: Vec<f64> = (0..dim).map(|_| sampler.unit()).collect();
            let v = pso_velocity(
                &self.velocities[p],
                &self.positions[p],
                &self.pbest[p],
                &self.gbest,
                omega,
                c1,
                c2,
                &d1,
                &d2,
            );
            let mut u: Vec<f64> = self.positions[p].iter().zip(&v).map(|(x, dv)| x + dv).collect();
            problem.clamp(&mut u);
            self.velocities[p] = v;
            self.positions[p] = u;
        }
        let values = eval.eval_batch(&self.positions);
        let complete = values.iter().all(Option::is_some);
        for (p, value) in values.into_iter().enumerate() {
            if let Some(value) = value {
                if value > self.pbest_values[p] {
                    self.pbest_values[p] = value;
                    self.pbest[p] = self.positions[p].clone();
                }
            }
        }
        self.refresh_gbest();
        complete
    }
}

/// Particle swarm maximization. `incumbent` becomes particle 0.
pub fn pso(
    problem: &SearchProblem,
    params: PsoParams,
    incumbent: Option<&[f64]>,
    seed: u64,
) -> Result<OptimResult> {
    params.validate()?;
    problem.check_incumbent(incumbent)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator::new(problem);
    let mut state = SwarmState::init(problem, params, incumbent, &mut rng, &mut eval);
    for _ in 0..params.iterations {
        if eval.exhausted() || !state.step(problem, &mut rng, &mut eval) {
            break;
        }
    }
    eval.finish()
}
