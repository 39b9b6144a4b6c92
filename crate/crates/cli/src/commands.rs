//! Standalone subcommands that work from saved models and CSV files.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use shalekit::data::{load_csv, load_schema, synthesize, synthetic_schema, write_csv, FactorSpec};
use shalekit::explain::{
    explain_well, export, rank_factors, shap_interactions, supervised_cluster, tree_shap,
};
use shalekit::ice::{ice, select_anchors, write_ice_csv, Axis, DEFAULT_STEPS};
use shalekit::optimize::{optimize_well, write_trace_csv, Method, MethodSettings, VariableRequest};
use shalekit::stack::StackedModel;
use shalekit::trees::TreeEnsemble;

use crate::manifest::{sha256_hex, Artifacts, Manifest, StageRecord, StageStatus};
use crate::pipeline::FinalModel;

pub enum LoadedModel {
    Tree(TreeEnsemble),
    Stacked(StackedModel),
}

impl LoadedModel {
    /// A directory is a stacked model, a file a single ensemble.
    pub fn load(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Ok(LoadedModel::Stacked(StackedModel::load_dir(path).with_context(|| format!("loading {}", path.display()))?))
        } else {
            Ok(LoadedModel::Tree(TreeEnsemble::load_json(path).with_context(|| format!("loading {}", path.display()))?))
        }
    }

    pub fn as_final(&self) -> FinalModel<'_> {
        match self {
            LoadedModel::Tree(m) => FinalModel::Base(m),
            LoadedModel::Stacked(m) => FinalModel::Stacked(m),
        }
    }

    fn feature_names(&self) -> &[String] {
        match self {
            LoadedModel::Tree(m) => &m.feature_names,
            LoadedModel::Stacked(m) => &m.feature_names,
        }
    }
}

pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub names: Vec<String>,
    pub specs: Vec<FactorSpec>,
}

pub fn load_dataset(data: &Path, schema: &Path) -> Result<Dataset> {
    let specs = load_schema(schema).with_context(|| format!("loading {}", schema.display()))?;
    let table = load_csv(data, &specs).with_context(|| format!("loading {}", data.display()))?;
    let (x, y) = table.to_xy()?;
    Ok(Dataset { x, y, names: table.feature_names(), specs: table.feature_specs() })
}

fn check_match(model: &LoadedModel, data: &Dataset) -> Result<()> {
    if model.feature_names() != data.names.as_slice() {
        bail!(
            "model features {:?} do not match data features {:?}",
            model.feature_names(),
            data.names
        );
    }
    Ok(())
}

fn finish(art: Artifacts, name: &str, args: &str, seed: u64) -> Result<Manifest> {
    let stage = StageRecord { name: name.to_string(), status: StageStatus::Ok, error: None };
    art.finish(seed, sha256_hex(args.as_bytes()), vec![stage])
}

pub fn synthesize_cmd(n: usize, noise_sd: f64, seed: u64, out: &Path, schema_out: Option<&Path>) -> Result<()> {
    let table = synthesize(seed, n, noise_sd)?;
    let mut file = std::fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(&table, &mut file)?;
    if let Some(path) = schema_out {
        std::fs::write(path, serde_json::to_vec_pretty(&synthetic_schema())?)?;
    }
    Ok(())
}

pub struct ExplainArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
    pub interactions: bool,
    pub cluster_k: Option<usize>,
    pub wells: Vec<usize>,
    pub seed: u64,
}

pub fn explain_cmd(a: &ExplainArgs) -> Result<Manifest> {
    let model = match LoadedModel::load(&a.model)? {
        LoadedModel::Tree(m) => m,
        LoadedModel::Stacked(_) => bail!("explain needs a single tree-ensemble file, not a stacked model"),
    };
    let data = load_dataset(&a.data, &a.schema)?;
    check_match(&LoadedModel::Tree(model.clone()), &data)?;
    let mut art = Artifacts::new(&a.out);
    let attr = tree_shap(&model, &data.x)?;
    art.write_with("shap_values.csv", |w| export::write_attribution_csv(&attr, w))?;
    art.write_with("summary.csv", |w| export::write_summary_csv(&attr, &data.x, w))?;
    art.write_with("ranking.csv", |w| export::write_ranking_csv(&rank_factors(&attr)?, w))?;
    if a.interactions {
        let tensor = shap_interactions(&model, &data.x)?;
        art.write_with("interactions.csv", |w| export::write_interactions_csv(&tensor, w))?;
        art.write_with("dependence.csv", |w| export::write_dependence_csv(&tensor, &data.x, w))?;
    }
    if let Some(k) = a.cluster_k {
        let labels = supervised_cluster(&attr, k, a.seed)?;
        let text: String = std::iter::once("sample,cluster\n".to_string())
            .chain(labels.iter().enumerate().map(|(i, l)| format!("{i},{l}\n")))
            .collect();
        art.write_bytes("clusters.csv", text.as_bytes())?;
    }
    for &w in &a.wells {
        art.write_json(&format!("waterfall_well_{w}.json"), &explain_well(&attr, w)?)?;
    }
    let args = format!("{:?}", (&a.model, &a.data, a.interactions, a.cluster_k, &a.wells, a.seed));
    finish(art, "explain", &args, a.seed)
}

/// `name` or `name=min:max[:steps]`.
pub fn parse_factor(spec: &str, data: &Dataset) -> Result<Axis> {
    let (name, range) = match spec.split_once('=') {
        Some((n, r)) => (n, Some(r)),
        None => (spec, None),
    };
    let idx = data.names.iter().position(|n| n == name).ok_or_else(|| anyhow!("unknown factor {name}"))?;
    match range {
        None => Ok(Axis::observed(name, &data.x, idx, DEFAULT_STEPS)?),
        Some(r) => {
            let parts: Vec<&str> = r.split(':').collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| anyhow!("bad number {s:?} in {spec}"));
            match parts.as_slice() {
                [lo, hi] => Ok(Axis::linspace(name, num(lo)?, num(hi)?, DEFAULT_STEPS)?),
                [lo, hi, steps] => Ok(Axis::linspace(name, num(lo)?, num(hi)?, steps.parse().context("steps")?)?),
                _ => bail!("factor spec {spec:?}: expected name=min:max[:steps]"),
            }
        }
    }
}

pub struct IceArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
    pub factors: Vec<String>,
    pub sample: Option<usize>,
    pub seed: u64,
}

pub fn ice_cmd(a: &IceArgs) -> Result<Manifest> {
    if a.factors.is_empty() || a.factors.len() > shalekit::ice::MAX_AXES {
        bail!("ICE varies 1 to {} factors, got {}", shalekit::ice::MAX_AXES, a.factors.len());
    }
    let model = LoadedModel::load(&a.model)?;
    let data = load_dataset(&a.data, &a.schema)?;
    check_match(&model, &data)?;
    let axes = a.factors.iter().map(|f| parse_factor(f, &data)).collect::<Result<Vec<_>>>()?;
    let anchors = select_anchors(data.x.len(), a.sample, a.seed);
    let grid = ice(&model.as_final(), &data.x, &data.names, axes, Some(&anchors))?;
    let mut art = Artifacts::new(&a.out);
    art.write_with("ice.csv", |w| write_ice_csv(&grid, w))?;
    art.write_json("ice.json", &grid.metadata())?;
    let args = format!("{:?}", (&a.model, &a.data, &a.factors, a.sample, a.seed));
    finish(art, "ice", &args, a.seed)
}

/// `name` or `name=lower:upper`.
pub fn parse_variable(spec: &str) -> Result<VariableRequest> {
    match spec.split_once('=') {
        None => Ok(VariableRequest::named(spec)),
        Some((name, r)) => {
            let (lo, hi) = r.split_once(':').ok_or_else(|| anyhow!("variable spec {spec:?}: expected name=lower:upper"))?;
            Ok(VariableRequest::bounded(name, lo.parse().context("lower bound")?, hi.parse().context("upper bound")?))
        }
    }
}

pub struct OptimizeArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
    pub well: usize,
    pub variables: Vec<String>,
    pub method: Method,
    pub budget: usize,
    pub seed: u64,
}

pub fn optimize_cmd(a: &OptimizeArgs) -> Result<Manifest> {
    let model = LoadedModel::load(&a.model)?;
    let data = load_dataset(&a.data, &a.schema)?;
    check_match(&model, &data)?;
    let vars = a.variables.iter().map(|v| parse_variable(v)).collect::<Result<Vec<_>>>()?;
    let row = data.x.get(a.well).ok_or_else(|| anyhow!("well {} out of range ({} rows)", a.well, data.x.len()))?;
    let result = optimize_well(
        &model.as_final(),
        &data.specs,
        &data.x,
        row,
        &vars,
        a.method,
        &MethodSettings::default(),
        a.budget,
        a.seed,
    )?;
    let mut art = Artifacts::new(&a.out);
    let stem = format!("well{}_{}", a.well, a.method);
    art.write_json(&format!("{stem}.json"), &result)?;
    art.write_with(&format!("{stem}_trace.csv"), |w| write_trace_csv(&result, w))?;
    println!(
        "well {}: {} -> {} ({} evaluations)",
        a.well,
        result.original_eur,
        result.optimized_eur,
        result.trace.len()
    );
    let args = format!("{:?}", (&a.model, &a.data, a.well, &a.variables, a.method, a.budget, a.seed));
    finish(art, "optimize", &args, a.seed)
}
