use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Evaluator, OptimResult, SearchProblem, UnitSampler};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeParams {
    pub population: usize,
    /// Amplification `J` of the difference vector.
    pub amplification: f64,
    pub crossover: f64,
    pub iterations: usize,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams { population: 10, amplification: 0.8, crossover: 0.7, iterations: 1000 }
    }
}

impl DeParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::invalid("DE population must be >= 4"));
        }
        if !(0.0..=2.0).contains(&self.amplification) {
            return Err(Error::invalid("DE amplification must lie in [0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::invalid("DE crossover probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Three distinct member indices, none equal to `target`.
pub fn pick_donors(target: usize, population: usize, sampler: &mut impl UnitSampler) -> [usize; 3] {
    let mut pool: Vec<usize> = (0..population).filter(|&i| i != target).collect();
    let mut pick = || pool.remove(sampler.index(pool.len()));
    [pick(), pick(), pick()]
}

/// `u₁ + J (u₂ − u₃)`.
pub fn de_mutant(u1: &[f64], u2: &[f64], u3: &[f64], amplification: f64) -> Vec<f64> {
    (0..u1.len()).map(|d| u1[d] + amplification * (u2[d] - u3[d])).collect()
}

/// Take the mutant's coordinate where `draws[d] <= CR`, else the target's.
pub fn de_trial(target: &[f64], mutant: &[f64], draws: &[f64], crossover: f64) -> Vec<f64> {
    (0..target.len()).map(|d| if draws[d] <= crossover { mutant[d] } else { target[d] }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeState {
    pub params: DeParams,
    pub members: Vec<Vec<f64>>,
    /// `-inf` for a member that was never evaluated.
    pub values: Vec<f64>,
}

impl DeState {
    pub fn init(
        problem: &SearchProblem,
        params: DeParams,
        incumbent: Option<&[f64]>,
        rng: &mut ChaCha8Rng,
        eval: &mut Evaluator,
    ) -> Self {
        let mut members: Vec<Vec<f64>> =
            (0..params.population).map(|_| problem.random_point(rng)).collect();
        if let Some(u) = incumbent {
            members[0] = u.to_vec();
        }
        let values = eval
            .eval_batch(&members)
            .into_iter()
            .map(|v| v.unwrap_or(f64::NEG_INFINITY))
            .collect();
        DeState { params, members, values }
    }

    /// Trial vectors for one generation, built from the current snapshot.
    pub fn trials(&self, problem: &SearchProblem, sampler: &mut impl UnitSampler) -> Vec<Vec<f64>> {
        let n = self.members.len();
        (0..n)
            .map(|p| {
                let [a, b, c] = pick_donors(p, n, sampler);
                let mut mutant = de_mutant(
                    &self.members[a],
                    &self.members[b],
                    &self.members[c],
                    self.params.amplification,
                );
                problem.clamp(&mut mutant);
                let draws: Vec<f64> = (0..problem.dim()).map(|_| sampler.unit()).collect();
                de_trial(&self.members[p], &mutant, &draws, self.params.crossover)
            })
            .collect()
    }

    /// Mutation, crossover and greedy selection. Returns false if the
    /// budget ran out.
    pub fn step(
        &mut self,
        problem: &SearchProblem,
        sampler: &mut impl UnitSampler,
        eval: &mut Evaluator,
    ) -> bool {
        let trials = self.trials(problem, sampler);
        let values = eval.eval_batch(&trials);
        let complete = values.iter().all(Option::is_some);
        for (p, (trial, value)) in trials.into_iter().zip(values).enumerate() {
            if let Some(value) = value {
                if value > self.values[p] {
                    self.members[p] = trial;
                    self.values[p] = value;
                }
            }
        }
        complete
    }
}

/// Differential evolution maximization. `incumbent` becomes member 0.
pub fn de(
    problem: &SearchProblem,
    params: DeParams,
    incumbent: Option<&[f64]>,
    seed: u64,
) -> Result<OptimResult> {
    params.validate()?;
    problem.check_incumbent(incumbent)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator::new(problem);
    let mut state = DeState::init(problem, params, incumbent, &mut rng, &mut eval);
    for _ in 0..params.iterations {
        if eval.exhausted() || !state.step(problem, &mut rng, &mut eval) {
            break;
        }
    }
    eval.finish()
}
