//! Gaussian-process regression with an isotropic Matérn-5/2 kernel.
//!
//! Targets are standardized internally; inputs are used as given (the
//! optimizer feeds points scaled to the unit cube).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::stats::mean;

/// Observation noise standard deviation on the standardized scale.
pub const NOISE_FLOOR: f64 = 1e-6;
/// Extra diagonal tried, in order, when the Gram matrix will not factor.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-8, 1e-6, 1e-4];

const LOG_LENGTH_BOUNDS: (f64, f64) = (-4.6, 1.6); // about 0.01 to 5
const LOG_SIGNAL_BOUNDS: (f64, f64) = (-3.0, 3.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    pub length_scale: f64,
    pub signal_var: f64,
    /// Noise variance.
    pub noise: f64,
}

pub fn matern52(r: f64, hyper: &GpHyper) -> f64 {
    let s = 5f64.sqrt() * r / hyper.length_scale;
    hyper.signal_var * (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn factor(x: &[Vec<f64>], hyper: &GpHyper) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = x.len();
    let gram = DMatrix::from_fn(n, n, |i, j| matern52(distance(&x[i], &x[j]), hyper));
    for jitter in JITTER_LADDER {
        let mut k = gram.clone();
        for i in 0..n {
            k[(i, i)] += hyper.noise + jitter;
        }
        if let Some(chol) = k.cholesky() {
            return Ok((chol, jitter));
        }
    }
    Err(Error::SurrogateIllConditioned)
}

#[derive(Debug, Clone)]
pub struct Gp {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    hyper: GpHyper,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    /// Diagonal jitter that was needed beyond the noise.
    pub jitter: f64,
    pub log_likelihood: f64,
}

fn standardize(y: &[f64]) -> (f64, f64, DVector<f64>) {
    let m = mean(y);
    let var = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / y.len() as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    (m, scale, DVector::from_iterator(y.len(), y.iter().map(|v| (v - m) / scale)))
}

impl Gp {
    pub fn fit(x: &[Vec<f64>], y: &[f64], hyper: GpHyper) -> Result<Gp> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::invalid("GP needs matching, non-empty inputs and targets"));
        }
        let (y_mean, y_scale, ys) = standardize(y);
        let (chol, jitter) = factor(x, &hyper)?;
        let alpha = chol.solve(&ys);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        let n = y.len() as f64;
        let log_likelihood =
            -0.5 * ys.dot(&alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        Ok(Gp { x: x.to_vec(), y_mean, y_scale, hyper, chol, alpha, jitter, log_likelihood })
    }

    /// Fit with length scale and signal variance chosen by maximizing the
    /// log marginal likelihood (compass search from several starts).
    pub fn fit_tuned(x: &[Vec<f64>], y: &[f64]) -> Result<Gp> {
        let lml = |p: [f64; 2]| -> Option<Gp> {
            let hyper = GpHyper { length_scale: p[0].exp(), signal_var: p[1].exp(), noise: NOISE_FLOOR * NOISE_FLOOR };
            Gp::fit(x, y, hyper).ok()
        };
        let bounds = [LOG_LENGTH_BOUNDS, LOG_SIGNAL_BOUNDS];
        let mut best: Option<Gp> = None;
        for start in [[-2.3, 0.0], [-1.2, 0.0], [0.0, 0.0]] {
            let Some(mut current) = lml(start) else { continue };
            let mut p = start;
            let mut step = 1.0;
            while step > 1e-3 {
                let mut moved = false;
                for d in 0..2 {
                    for sign in [1.0, -1.0] {
                        let mut q = p;
                        q[d] = (q[d] + sign * step).clamp(bounds[d].0, bounds[d].1);
                        if q == p {
                            continue;
                        }
                        if let Some(gp) = lml(q) {
                            if gp.log_likelihood > current.log_likelihood {
                                current = gp;
                                p = q;
                                moved = true;
                            }
                        }
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            if best.as_ref().is_none_or(|b| current.log_likelihood > b.log_likelihood) {
                best = Some(current);
            }
        }
        best.ok_or(Error::SurrogateIllConditioned)
    }

    pub fn hyper(&self) -> GpHyper {
        self.hyper
    }

    /// Posterior mean and standard deviation in target units.
    pub fn predict(&self, u: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| matern52(distance(xi, u), &self.hyper)));
        let mu = k.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .expect("cholesky factor is invertible");
        let var = (self.hyper.signal_var - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mu, self.y_scale * var.sqrt())
    }
}
