use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::gp::Gp;
use super::{Evaluator, OptimResult, SearchProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoParams {
    /// Latin-hypercube starting points, including the incumbent.
    pub n_init: usize,
    pub iterations: usize,
    /// Random acquisition candidates per iteration.
    pub candidates: usize,
    /// Best candidates refined by local search.
    pub polish: usize,
}

impl Default for BoParams {
    fn default() -> Self {
        BoParams { n_init: 5, iterations: 1000, candidates: 512, polish: 4 }
    }
}

impl BoParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::invalid("BO needs n_init >= 2"));
        }
        if self.candidates == 0 {
            return Err(Error::invalid("BO needs at least one acquisition candidate"));
        }
        Ok(())
    }
}

/// `σ [γ Φ(γ) + φ(γ)]` with `γ = (μ − f_best)/σ`; the improvement itself
/// when `σ = 0`.
pub fn expected_improvement(mu: f64, sigma: f64, f_best: f64) -> f64 {
    if sigma <= 0.0 {
        return (mu - f_best).max(0.0);
    }
    let n = Normal::standard();
    let g = (mu - f_best) / sigma;
    (sigma * (g * n.cdf(g) + n.pdf(g))).max(0.0)
}

fn latin_hypercube(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(strata.as_mut_slice(), rng);
        for (i, s) in strata.into_iter().enumerate() {
            pts[i][d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

/// Compass search on the unit cube, maximizing `f`.
fn polish(start: Vec<f64>, f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut p = start;
    let mut best = f(&p);
    let mut step = 0.05;
    while step > 1e-4 {
        let mut moved = false;
        for d in 0..p.len() {
            for sign in [1.0, -1.0] {
                let mut q = p.clone();
                q[d] = (q[d] + sign * step).clamp(0.0, 1.0);
                let v = f(&q);
                if v > best {
                    best = v;
                    p = q;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (p, best)
}

/// Bayesian optimization with a GP surrogate and expected improvement.
/// `incumbent` replaces the first space-filling start.
pub fn bayes_opt(
    problem: &SearchProblem,
    params: BoParams,
    incumbent: Option<&[f64]>,
    seed: u64,
) -> Result<OptimResult> {
    params.validate()?;
    problem.check_incumbent(incumbent)?;
    let vars = &problem.variables;
    let to_unit = |u: &[f64]| -> Vec<f64> {
        u.iter().zip(vars).map(|(x, v)| (x - v.lower) / v.width()).collect()
    };
    let from_unit = |z: &[f64]| -> Vec<f64> {
        z.iter().zip(vars).map(|(t, v)| v.clamp(v.lower + t * v.width())).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator::new(problem);
    let mut init: Vec<Vec<f64>> =
        latin_hypercube(params.n_init, problem.dim(), &mut rng).iter().map(|z| from_unit(z)).collect();
    if let Some(u) = incumbent {
        init[0] = u.to_vec();
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (u, value) in init.iter().zip(eval.eval_batch(&init)) {
        if let Some(value) = value {
            xs.push(to_unit(&eval.snap(u)));
            ys.push(value);
        }
    }

    for _ in 0..params.iterations {
        if eval.exhausted() {
            break;
        }
        let gp = Gp::fit_tuned(&xs, &ys)?;
        let f_best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let acq = |z: &[f64]| {
            let (m, s) = gp.predict(z);
            expected_improvement(m, s, f_best)
        };
        let mut scored: Vec<(f64, Vec<f64>)> = (0..params.candidates)
            .map(|_| {
                let z: Vec<f64> = (0..problem.dim()).map(|_| rng.random::<f64>()).collect();
                (acq(&z), z)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut next = scored[0].1.clone();
        let mut next_ei = scored[0].0;
        for (_, z) in scored.into_iter().take(params.polish) {
            let (z, ei) = polish(z, acq);
            if ei > next_ei {
                next = z;
                next_ei = ei;
            }
        }
        let u = from_unit(&next);
        let Some(value) = eval.eval(&u) else { break };
        xs.push(to_unit(&eval.snap(&u)));
        ys.push(value);
    }
    eval.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::Variable;

    #[test]
    fn ei_is_nonnegative_and_vanishes_without_uncertainty() {
        assert_eq!(expected_improvement(1.0, 0.0, 2.0), 0.0);
        assert_eq!(expected_improvement(3.0, 0.0, 2.0), 1.0);
        assert!(expected_improvement(1.0, 1e-9, 2.0) < 1e-12);
        for mu in [-3.0, 0.0, 0.5, 4.0] {
            for s in [1e-3, 0.1, 1.0, 10.0] {
                assert!(expected_improvement(mu, s, 0.7) >= 0.0);
            }
        }
        // at γ = 0 the improvement is σ φ(0)
        let e = expected_improvement(2.0, 0.5, 2.0);
        assert!((e - 0.5 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lhs_covers_every_stratum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = latin_hypercube(6, 2, &mut rng);
        for d in 0..2 {
            let mut strata: Vec<usize> = pts.iter().map(|p| (p[d] * 6.0) as usize).collect();
            strata.sort_unstable();
            assert_eq!(strata, vec![0, 1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn finds_quadratic_maximum() {
        let f = |u: &[f64]| -(u[0] - 0.37).powi(2);
        let problem = SearchProblem::new(vec![Variable::new("x", 0.0, 1.0)], &f, 18).unwrap();
        let params = BoParams { n_init: 3, iterations: 15, ..BoParams::default() };
        let r = bayes_opt(&problem, params, None, 4).unwrap();
        assert!((r.best_u[0] - 0.37).abs() < 0.02, "{:?}", r.best_u);
        assert!(r.trace.len() <= 18);
    }
}
