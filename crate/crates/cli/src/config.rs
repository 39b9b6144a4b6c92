//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"            # overridden by SHALEKIT_OUT, then --out
//!
//! [data.synthesize]             # or: [data] csv = "..." schema = "..."
//! n = 120
//! noise_sd = 0.1
//!
//! [preprocess]
//! outlier_z = 4.0
//! [[preprocess.derive]]
//! numerator = "fluid_volume"
//! denominator = "stimulated_length"
//! name = "fluid_intensity"
//!
//! [models]
//! kinds = ["rf", "gbdt", "xgb"]
//! [models.gbdt]
//! n_trees = 200
//!
//! [stack]
//! k = 5
//!
//! [explain]
//! interactions = true
//! cluster_k = 3
//! wells = [0, 4]
//!
//! [[ice]]
//! factors = [{ name = "stimulated_length", steps = 25 }]
//!
//! [[optimize]]
//! wells = [0]
//! methods = ["pso", "de", "bo"]
//! budget = 200
//! variables = [{ name = "stimulated_length", lower = 1000.0, upper = 2100.0 }]
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shalekit::data::{load_schema, synthetic_schema, FactorSpec, PreprocessConfig};
use shalekit::ice::MAX_AXES;
use shalekit::optimize::{Method, MethodSettings, VariableRequest};
use shalekit::trees::{EnsembleKind, HyperParams, SearchSpace};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    pub models: Option<ModelsConfig>,
    #[serde(default)]
    pub stack: StackConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub ice: Vec<IceRequest>,
    #[serde(default)]
    pub optimize: Vec<OptimizeRequest>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub synthesize: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
}

fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub missing_ratio_max: f64,
    pub outlier_z: f64,
    pub redundancy_r: f64,
    pub derive: Vec<DeriveSpec>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let d = PreprocessConfig::default();
        PreprocessSection {
            missing_ratio_max: d.missing_ratio_max,
            outlier_z: d.outlier_z,
            redundancy_r: d.redundancy_r,
            derive: Vec::new(),
        }
    }
}

impl PreprocessSection {
    pub fn knobs(&self) -> PreprocessConfig {
        PreprocessConfig {
            missing_ratio_max: self.missing_ratio_max,
            outlier_z: self.outlier_z,
            redundancy_r: self.redundancy_r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveSpec {
    pub numerator: String,
    pub denominator: String,
    pub name: String,
    #[serde(default)]
    pub keep_sources: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    pub kinds: Vec<EnsembleKind>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Reuse saved models when their cache key matches.
    #[serde(default)]
    pub cache: bool,
    pub rf: Option<HyperParams>,
    pub gbdt: Option<HyperParams>,
    pub xgb: Option<HyperParams>,
    pub tune: Option<TuneConfig>,
}

fn default_test_fraction() -> f64 {
    0.2
}

impl ModelsConfig {
    pub fn hyper_params(&self, kind: EnsembleKind) -> HyperParams {
        let hp = match kind {
            EnsembleKind::Rf => &self.rf,
            EnsembleKind::Gbdt => &self.gbdt,
            EnsembleKind::Xgb => &self.xgb,
        };
        hp.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub budget: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub space: SearchSpace,
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackConfig {
    pub enabled: bool,
    pub k: usize,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig { enabled: true, k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub enabled: bool,
    /// Base model to explain; defaults to the first configured kind.
    pub model: Option<EnsembleKind>,
    pub interactions: bool,
    pub cluster_k: Option<usize>,
    /// Rows of the cleaned table that get a waterfall.
    pub wells: Vec<usize>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { enabled: true, model: None, interactions: false, cluster_k: None, wells: vec![0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IceFactor {
    pub name: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub steps: Option<usize>,
    /// Explicit grid; overrides min/max/steps.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IceSlices {
    pub axis: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IceRequest {
    pub factors: Vec<IceFactor>,
    /// Subsample this many anchor rows.
    pub sample: Option<usize>,
    pub slices: Option<IceSlices>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRequest {
    pub wells: Vec<usize>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    pub budget: usize,
    pub variables: Vec<VariableRequest>,
    #[serde(default)]
    pub settings: MethodSettings,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Make data paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(data) = &mut self.data {
            for p in [&mut data.csv, &mut data.schema].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    /// Schema of the input table before preprocessing.
    pub fn input_schema(&self) -> Result<Vec<FactorSpec>, String> {
        let data = self.data.as_ref().ok_or("data: required")?;
        if data.synthesize.is_some() {
            return Ok(synthetic_schema());
        }
        let path = data.schema.as_ref().ok_or("data.schema: required with data.csv")?;
        load_schema(path).map_err(|e| format!("data.schema: {e}"))
    }

    /// Schema after the configured derived features are added.
    pub fn derived_schema(&self) -> Result<Vec<FactorSpec>, String> {
        let mut specs = self.input_schema()?;
        for d in &self.preprocess.derive {
            let num = specs.iter().find(|s| s.name == d.numerator).cloned();
            let has_den = specs.iter().any(|s| s.name == d.denominator);
            match (num, has_den) {
                (Some(num), true) => {
                    let mut spec = num.clone();
                    spec.name = d.name.clone();
                    spec.integer = false;
                    if !d.keep_sources {
                        specs.retain(|s| s.name != d.numerator && s.name != d.denominator);
                    }
                    specs.push(spec);
                }
                _ => {
                    return Err(format!(
                        "preprocess.derive {}: unknown source {} or {}",
                        d.name, d.numerator, d.denominator
                    ))
                }
            }
        }
        Ok(specs)
    }

    /// Every problem found without touching the data or training anything.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.seed.is_none() {
            problems.push("seed: required".to_string());
        }
        match &self.data {
            None => problems.push("data: required (csv + schema, or synthesize)".to_string()),
            Some(d) => match (&d.csv, &d.synthesize) {
                (Some(_), Some(_)) => problems.push("data: give either csv or synthesize, not both".into()),
                (None, None) => problems.push("data: one of csv or synthesize is required".into()),
                (Some(_), None) if d.schema.is_none() => {
                    problems.push("data.schema: required with data.csv".into())
                }
                (None, Some(s)) if s.n < 20 => {
                    problems.push(format!("data.synthesize.n: must be >= 20, got {}", s.n))
                }
                (None, Some(s)) if !(s.noise_sd >= 0.0 && s.noise_sd.is_finite()) => {
                    problems.push("data.synthesize.noise_sd: must be finite and >= 0".into())
                }
                _ => {}
            },
        }
        if let Err(e) = self.preprocess.knobs().validate() {
            problems.push(format!("preprocess: {e}"));
        }

        let schema = match self.data.as_ref().map(|_| self.derived_schema()) {
            Some(Ok(s)) => Some(s),
            Some(Err(e)) => {
                if self.data.as_ref().is_some_and(|d| d.csv.is_some() != d.synthesize.is_some()) {
                    problems.push(e);
                }
                None
            }
            None => None,
        };
        let target = schema.as_ref().and_then(|s| {
            s.iter().find(|f| f.category == shalekit::data::Category::Production).map(|f| f.name.clone())
        });
        let factor = |name: &str| -> Option<&FactorSpec> {
            schema.as_ref().and_then(|s| s.iter().find(|f| f.name == name))
        };
        let check_factor = |problems: &mut Vec<String>, ctx: &str, name: &str| -> bool {
            if schema.is_none() {
                return true;
            }
            if factor(name).is_none() {
                problems.push(format!("{ctx}: unknown factor {name}"));
                return false;
            }
            if target.as_deref() == Some(name) {
                problems.push(format!("{ctx}: {name} is the target, not a factor"));
                return false;
            }
            true
        };

        match &self.models {
            None => problems.push("models: required (at least models.kinds)".to_string()),
            Some(m) => {
                if m.kinds.is_empty() {
                    problems.push("models.kinds: at least one model kind is required".into());
                }
                let unique: BTreeSet<_> = m.kinds.iter().map(|k| k.name()).collect();
                if unique.len() != m.kinds.len() {
                    problems.push("models.kinds: duplicate kind".into());
                }
                if !(0.0..0.5).contains(&m.test_fraction) {
                    problems.push(format!("models.test_fraction: must lie in [0, 0.5), got {}", m.test_fraction));
                }
                for kind in EnsembleKind::ALL {
                    if let Err(e) = m.hyper_params(kind).validate() {
                        problems.push(format!("models.{kind}: {e}"));
                    }
                }
                if let Some(t) = &m.tune {
                    if t.budget == 0 {
                        problems.push("models.tune.budget: must be >= 1".into());
                    }
                    if t.folds < 2 {
                        problems.push("models.tune.folds: must be >= 2".into());
                    }
                    if let Err(e) = t.space.validate() {
                        problems.push(format!("models.tune.space: {e}"));
                    }
                }
                if let Some(kind) = self.explain.model {
                    if !m.kinds.contains(&kind) {
                        problems.push(format!("explain.model: {kind} is not among models.kinds"));
                    }
                }
            }
        }
        if self.stack.enabled && self.stack.k < 2 {
            problems.push(format!("stack.k: must be >= 2, got {}", self.stack.k));
        }
        if self.explain.cluster_k == Some(0) {
            problems.push("explain.cluster_k: must be >= 1".into());
        }

        for (i, req) in self.ice.iter().enumerate() {
            let ctx = format!("ice[{i}]");
            if req.factors.is_empty() || req.factors.len() > MAX_AXES {
                problems.push(format!(
                    "{ctx}.factors: ICE varies 1 to {MAX_AXES} factors, got {}",
                    req.factors.len()
                ));
            }
            let mut seen = BTreeSet::new();
            for f in &req.factors {
                check_factor(&mut problems, &format!("{ctx}.factors"), &f.name);
                if !seen.insert(f.name.as_str()) {
                    problems.push(format!("{ctx}.factors: {} listed twice", f.name));
                }
                if let Some(v) = &f.values {
                    if v.len() < 2 || v.windows(2).any(|w| !(w[0] < w[1])) {
                        problems.push(format!("{ctx}.{}: values must be >= 2 strictly increasing numbers", f.name));
                    }
                } else {
                    if f.steps.is_some_and(|s| s < 2) {
                        problems.push(format!("{ctx}.{}: steps must be >= 2", f.name));
                    }
                    if let (Some(lo), Some(hi)) = (f.min, f.max) {
                        if !(lo < hi) {
                            problems.push(format!("{ctx}.{}: need min < max, got {lo} and {hi}", f.name));
                        }
                    }
                }
            }
            if req.sample == Some(0) {
                problems.push(format!("{ctx}.sample: must be >= 1"));
            }
            if let Some(s) = &req.slices {
                if s.axis >= req.factors.len() {
                    problems.push(format!("{ctx}.slices.axis: {} out of range", s.axis));
                } else if req.factors.len() < 2 {
                    problems.push(format!("{ctx}.slices: projection needs at least 2 factors"));
                }
            }
        }

        for (i, req) in self.optimize.iter().enumerate() {
            let ctx = format!("optimize[{i}]");
            if req.wells.is_empty() {
                problems.push(format!("{ctx}.wells: at least one well is required"));
            }
            if req.methods.is_empty() {
                problems.push(format!("{ctx}.methods: at least one method is required"));
            }
            if req.budget == 0 {
                problems.push(format!("{ctx}.budget: must be >= 1"));
            }
            if req.variables.is_empty() {
                problems.push(format!("{ctx}.variables: at least one variable is required"));
            }
            for v in &req.variables {
                if check_factor(&mut problems, &format!("{ctx}.variables"), &v.name) {
                    if let Some(spec) = factor(&v.name) {
                        if !spec.optimizable {
                            problems.push(format!("{ctx}.variables: {} is not optimizable", v.name));
                        }
                    }
                }
                if let (Some(lo), Some(hi)) = (v.lower, v.upper) {
                    if !(lo < hi) {
                        problems.push(format!("{ctx}.{}: need lower < upper, got {lo} and {hi}", v.name));
                    }
                }
            }
            if let Err(e) = req.settings.pso.validate() {
                problems.push(format!("{ctx}.settings.pso: {e}"));
            }
            if let Err(e) = req.settings.de.validate() {
                problems.push(format!("{ctx}.settings.de: {e}"));
            }
            if let Err(e) = req.settings.bo.validate() {
                problems.push(format!("{ctx}.settings.bo: {e}"));
            }
        }
        let mut seen = BTreeSet::new();
        problems.retain(|p| seen.insert(p.clone()));
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 1
        [data.synthesize]
        n = 60
        [models]
        kinds = ["rf"]
    "#;

    #[test]
    fn minimal_config_is_valid() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.validate(), Vec::<String>::new());
        assert!(cfg.stack.enabled);
    }

    #[test]
    fn empty_config_reports_every_required_field() {
        let problems = RunConfig::from_toml("").unwrap().validate();
        for field in ["seed", "data", "models"] {
            assert!(problems.iter().any(|p| p.starts_with(field)), "{field}: {problems:?}");
        }
    }

    #[test]
    fn inverted_bounds_and_non_optimizable_factor_reported() {
        let text = format!(
            "{MINIMAL}\n[[optimize]]\nwells = [0]\nbudget = 10\nvariables = [\
             {{ name = \"stimulated_length\", lower = 2000.0, upper = 1000.0 }}, {{ name = \"porosity\" }}]\n"
        );
        let problems = RunConfig::from_toml(&text).unwrap().validate();
        assert!(problems.iter().any(|p| p.contains("lower < upper")), "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("porosity is not optimizable")), "{problems:?}");
    }

    #[test]
    fn four_factor_ice_is_rejected() {
        let text = format!(
            "{MINIMAL}\n[[ice]]\nfactors = [{{ name = \"toc\" }}, {{ name = \"porosity\" }}, \
             {{ name = \"stage_count\" }}, {{ name = \"fluid_intensity\" }}]\n"
        );
        let problems = RunConfig::from_toml(&text).unwrap().validate();
        assert!(problems.iter().any(|p| p.contains("1 to 3 factors")), "{problems:?}");
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        assert!(RunConfig::from_toml("seed = 1\nsede = 2\n").is_err());
    }

    #[test]
    fn unknown_factor_names_reported() {
        let text = format!("{MINIMAL}\n[[ice]]\nfactors = [{{ name = \"nope\" }}]\n");
        let problems = RunConfig::from_toml(&text).unwrap().validate();
        assert!(problems.iter().any(|p| p.contains("unknown factor nope")));
    }
}
