//! Synthetic well generator with a documented ground-truth EUR response.
//!
//! Factors follow the usual shale-gas well schema: seven geologic factors,
//! two drilling factors, four completion factors, and EUR in 10⁸ m³.
//!
//! Ground truth (all terms additive except one interaction):
//!
//! ```text
//! EUR = 1.6
//!     - 1.2 · logistic((depth - 2900) / 150)              deeper → lower past ~2900 m
//!     + 0.25 · t  + 0.30 · c  + 0.20 · t · c              t = (toc - 3.5)/1.5, c = (pc - 1.25)/0.35
//!     + 0.20 · (porosity - 5)/2 + 0.15 · (saturation - 65)/10
//!     + 0.10 · (curvature - 0.5)/0.5 - 0.15 · (breakdown - 80)/20
//!     + 0.15 · (1 - exp(-(penetration - 40)/15))          saturating
//!     - 0.10 · angle/90
//!     + 0.50 · exp(-((length - 1750)/400)²)               interior optimum
//!     + 0.25 · exp(-((stages - 24)/7)²)                   interior optimum
//!     + 0.25 · exp(-((fluid - 30)/6)²)                    interior optimum
//!     + 0.50 · (ramp(proppant) - ramp(0.8)) / 0.7         plateau past 1.5 m³/m
//! ```
//!
//! with `ramp(p) = p - w·ln(1 + exp((p - 1.5)/w))`, `w = 0.04`, a smooth
//! `min(p, 1.5)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Category, FactorSpec, WellTable};
use crate::error::{Error, Result};
use crate::predictor::Predictor;

/// Proppant-intensity knot where the response plateaus, in m³/m.
pub const PROPPANT_KNOT: f64 = 1.5;
const RAMP_WIDTH: f64 = 0.04;

/// Column order of the synthetic feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum SyntheticFactor {
    FormationDepth = 0,
    Toc,
    Porosity,
    HydrocarbonSaturation,
    TectonicCurvature,
    PressureCoefficient,
    BreakdownPressure,
    TargetLayerPenetration,
    AngleToHmin,
    StimulatedLength,
    StageCount,
    FluidIntensity,
    ProppantIntensity,
}

impl SyntheticFactor {
    pub const COUNT: usize = 13;

    pub const ALL: [SyntheticFactor; 13] = {
        use SyntheticFactor::*;
        [
            FormationDepth,
            Toc,
            Porosity,
            HydrocarbonSaturation,
            TectonicCurvature,
            PressureCoefficient,
            BreakdownPressure,
            TargetLayerPenetration,
            AngleToHmin,
            StimulatedLength,
            StageCount,
            FluidIntensity,
            ProppantIntensity,
        ]
    };

    pub fn index(self) -> usize {
        self as usize
    }

    /// Sampling range of the generator.
    pub fn range(self) -> (f64, f64) {
        use SyntheticFactor::*;
        match self {
            FormationDepth => (2300.0, 3500.0),
            Toc => (2.0, 5.0),
            Porosity => (3.0, 7.0),
            HydrocarbonSaturation => (55.0, 75.0),
            TectonicCurvature => (0.0, 1.0),
            PressureCoefficient => (0.9, 1.6),
            BreakdownPressure => (60.0, 100.0),
            TargetLayerPenetration => (40.0, 100.0),
            AngleToHmin => (0.0, 90.0),
            StimulatedLength => (1000.0, 2100.0),
            StageCount => (12.0, 32.0),
            FluidIntensity => (20.0, 40.0),
            ProppantIntensity => (0.8, 2.2),
        }
    }

    /// Location of the interior maximum of the ground truth, for factors
    /// that have one.
    pub fn optimum(self) -> Option<f64> {
        match self {
            SyntheticFactor::StimulatedLength => Some(1750.0),
            SyntheticFactor::StageCount => Some(24.0),
            SyntheticFactor::FluidIntensity => Some(30.0),
            _ => None,
        }
    }
}

pub fn synthetic_schema() -> Vec<FactorSpec> {
    use Category::*;
    vec![
        FactorSpec::new("formation_depth", "m", Geologic, false),
        FactorSpec::new("toc", "%", Geologic, false),
        FactorSpec::new("porosity", "%", Geologic, false),
        FactorSpec::new("hydrocarbon_saturation", "%", Geologic, false),
        FactorSpec::new("tectonic_curvature", "-", Geologic, false),
        FactorSpec::new("pressure_coefficient", "-", Geologic, false),
        FactorSpec::new("breakdown_pressure", "MPa", Geologic, false),
        FactorSpec::new("target_layer_penetration", "%", Drilling, true),
        FactorSpec::new("angle_to_hmin", "°", Drilling, true),
        FactorSpec::new("stimulated_length", "m", Completion, true),
        FactorSpec::new("stage_count", "-", Completion, true).integer(),
        FactorSpec::new("fluid_intensity", "m³/m", Completion, true),
        FactorSpec::new("proppant_intensity", "m³/m", Completion, true),
        FactorSpec::new("eur", "10⁸m³", Production, false),
    ]
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn ramp(p: f64) -> f64 {
    p - RAMP_WIDTH * softplus((p - PROPPANT_KNOT) / RAMP_WIDTH)
}

/// Noise-free EUR for one synthetic feature row (13 values, in
/// [`SyntheticFactor`] order).
pub fn ground_truth(x: &[f64]) -> f64 {
    assert_eq!(x.len(), SyntheticFactor::COUNT, "ground_truth expects 13 factors");
    let depth = x[0];
    let t = (x[1] - 3.5) / 1.5;
    let c = (x[5] - 1.25) / 0.35;
    1.6 - 1.2 * logistic((depth - 2900.0) / 150.0)
        + 0.25 * t
        + 0.30 * c
        + 0.20 * t * c
        + 0.20 * (x[2] - 5.0) / 2.0
        + 0.15 * (x[3] - 65.0) / 10.0
        + 0.10 * (x[4] - 0.5) / 0.5
        - 0.15 * (x[6] - 80.0) / 20.0
        + 0.15 * (1.0 - (-(x[7] - 40.0) / 15.0).exp())
        - 0.10 * x[8] / 90.0
        + 0.50 * (-((x[9] - 1750.0) / 400.0).powi(2)).exp()
        + 0.25 * (-((x[10] - 24.0) / 7.0).powi(2)).exp()
        + 0.25 * (-((x[11] - 30.0) / 6.0).powi(2)).exp()
        + 0.50 * (ramp(x[12]) - ramp(0.8)) / 0.7
}

/// The ground truth as a [`Predictor`], for oracle tests and demos.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthModel;

impl Predictor for GroundTruthModel {
    fn n_features(&self) -> usize {
        SyntheticFactor::COUNT
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        ground_truth(row)
    }
}

/// Generate `n` synthetic wells. Factors are uniform on their ranges except
/// the stage count, which tracks stimulated length (about one stage per
/// 68 m, jittered, rounded, clipped to 12–32). EUR is the ground truth plus
/// Gaussian noise with standard deviation `noise_sd`.
pub fn synthesize(seed: u64, n: usize, noise_sd: f64) -> Result<WellTable> {
    if n < 20 {
        return Err(Error::invalid(format!("synthesize needs n >= 20, got {n}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid("noise_sd must be finite and non-negative"));
    }
    use SyntheticFactor::{StageCount, StimulatedLength};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 2.5).expect("valid normal");
    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut features = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = [0.0; SyntheticFactor::COUNT];
        for f in SyntheticFactor::ALL {
            let (lo, hi) = f.range();
            x[f.index()] = rng.random_range(lo..=hi);
        }
        let (slo, shi) = StageCount.range();
        x[StageCount.index()] =
            (x[StimulatedLength.index()] / 68.0 + jitter.sample(&mut rng)).round().clamp(slo, shi);
        let eps = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        target.push(ground_truth(&x) + eps);
        features.push(x.to_vec());
    }
    WellTable::from_xy(synthetic_schema(), &features, &target)
}
