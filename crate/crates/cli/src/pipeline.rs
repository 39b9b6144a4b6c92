//! The `run` pipeline: ingest → train → explain → stack → evaluate → ICE →
//! optimize, every output registered in the manifest.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use shalekit::data::{
    derive_intensity, load_csv, load_schema, preprocess, synthesize, write_csv, FactorSpec, WellTable,
};
use shalekit::explain::{
    baseline_correlations, explain_well, export, rank_factors, shap_interactions, supervised_cluster,
    tree_shap,
};
use shalekit::folds::holdout_split;
use shalekit::ice::{ice, project, select_anchors, write_ice_csv, Axis, DEFAULT_STEPS};
use shalekit::optimize::{optimize_well, write_trace_csv};
use shalekit::stack::{fit_stacked, metrics, BaseLearner, StackedModel};
use shalekit::trees::{tune_random_search, EnsembleKind, HyperParams, TreeEnsemble};
use shalekit::Predictor;

use crate::config::{IceRequest, RunConfig};
use crate::manifest::{clean_previous, sha256_hex, Artifacts, Manifest, StageRecord, StageStatus};

pub const STAGES: [&str; 7] = ["ingest", "train", "explain", "stack", "evaluate", "ice", "optimize"];
const CACHE_KEY: &str = "models/cache_key.txt";

#[derive(Debug)]
pub enum RunError {
    /// Config problems; nothing was computed.
    Invalid(Vec<String>),
    /// A stage failed; the manifest records which.
    Stage { manifest: Manifest, stage: String, error: anyhow::Error },
    /// Setup or manifest I/O failed.
    Other(anyhow::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(p) => write!(f, "invalid config:\n  {}", p.join("\n  ")),
            RunError::Stage { stage, error, .. } => write!(f, "stage {stage} failed: {error:#}"),
            RunError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Model used by the ICE and optimize stages.
pub enum FinalModel<'a> {
    Base(&'a TreeEnsemble),
    Stacked(&'a StackedModel),
}

impl Predictor for FinalModel<'_> {
    fn n_features(&self) -> usize {
        match self {
            FinalModel::Base(m) => m.n_features(),
            FinalModel::Stacked(m) => m.n_features(),
        }
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            FinalModel::Base(m) => m.predict_row(row),
            FinalModel::Stacked(m) => m.predict_row(row),
        }
    }
}

struct Data {
    table: WellTable,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    names: Vec<String>,
    specs: Vec<FactorSpec>,
    clean_sha: String,
}

struct Trained {
    train: Vec<usize>,
    test: Vec<usize>,
    models: Vec<(EnsembleKind, TreeEnsemble)>,
    params: Vec<(EnsembleKind, HyperParams)>,
    cached: bool,
}

fn rows(x: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| x[i].clone()).collect()
}

fn values(y: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| y[i]).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_line(fields: &[String]) -> String {
    let quoted: Vec<String> = fields
        .iter()
        .map(|f| if f.contains([',', '"', '\n']) { format!("\"{}\"", f.replace('"', "\"\"")) } else { f.clone() })
        .collect();
    quoted.join(",") + "\n"
}

fn ingest(cfg: &RunConfig, seed: u64, art: &mut Artifacts) -> Result<Data> {
    let data = cfg.data.as_ref().ok_or_else(|| anyhow!("data: required"))?;
    let mut table = match (&data.synthesize, &data.csv, &data.schema) {
        (Some(s), _, _) => synthesize(seed, s.n, s.noise_sd)?,
        (None, Some(csv), Some(schema)) => {
            let specs = load_schema(schema)?;
            load_csv(csv, &specs).with_context(|| format!("loading {}", csv.display()))?
        }
        _ => bail!("data: need synthesize, or csv with schema"),
    };
    art.write_with("data/raw.csv", |w| write_csv(&table, w))?;
    for d in &cfg.preprocess.derive {
        table = derive_intensity(&table, &d.numerator, &d.denominator, &d.name, d.keep_sources)?;
    }
    let (clean, mut report) = preprocess(&table, &cfg.preprocess.knobs())?;
    for d in &cfg.preprocess.derive {
        report.record_derived(&d.name, &format!("{} / {}", d.numerator, d.denominator));
    }
    let clean_path = art.write_with("data/clean.csv", |w| write_csv(&clean, w))?;
    let clean_sha = sha256_hex(&fs::read(clean_path)?);
    art.write_json("data/schema.json", &clean.specs())?;
    art.write_json("preprocess/report.json", &report)?;

    let mut corr = csv_line(&std::iter::once("column".to_string()).chain(report.columns.clone()).collect::<Vec<_>>());
    for (name, row) in report.columns.iter().zip(&report.pearson_matrix) {
        let mut fields = vec![name.clone()];
        fields.extend(row.iter().map(|v| opt(*v)));
        corr.push_str(&csv_line(&fields));
    }
    art.write_bytes("preprocess/correlation_matrix.csv", corr.as_bytes())?;

    let baseline = baseline_correlations(&clean)?;
    let mut text = csv_line(&["feature", "pearson", "spearman", "gra", "pearson_rank", "gra_rank"].map(String::from));
    for f in &baseline.factors {
        let rank = |list: &[String]| list.iter().position(|n| *n == f.name).map_or(String::new(), |p| (p + 1).to_string());
        text.push_str(&csv_line(&[
            f.name.clone(),
            opt(f.pearson),
            opt(f.spearman),
            opt(f.gra),
            rank(&baseline.pearson_rank),
            rank(&baseline.gra_rank),
        ]));
    }
    art.write_bytes("preprocess/baseline_correlations.csv", text.as_bytes())?;

    let (x, y) = clean.to_xy()?;
    Ok(Data { names: clean.feature_names(), specs: clean.feature_specs(), table: clean, x, y, clean_sha })
}

fn cache_key(cfg: &RunConfig, seed: u64, data: &Data) -> Result<String> {
    #[derive(Serialize)]
    struct Key<'a> {
        seed: u64,
        models: &'a Option<crate::config::ModelsConfig>,
        stack: &'a crate::config::StackConfig,
        clean_sha: &'a str,
    }
    let key = Key { seed, models: &cfg.models, stack: &cfg.stack, clean_sha: &data.clean_sha };
    Ok(sha256_hex(&serde_json::to_vec(&key)?))
}

fn model_path(kind: EnsembleKind) -> String {
    format!("models/{kind}.json")
}

fn try_cached(cfg: &RunConfig, key: &str, art: &Artifacts, kinds: &[EnsembleKind]) -> Option<Vec<(EnsembleKind, TreeEnsemble)>> {
    let models = cfg.models.as_ref()?;
    if !models.cache || fs::read_to_string(art.path(CACHE_KEY)).ok()? != key {
        return None;
    }
    kinds.iter().map(|&k| TreeEnsemble::load_json(art.path(&model_path(k))).ok().map(|m| (k, m))).collect()
}

fn train(cfg: &RunConfig, seed: u64, data: &Data, kept: &[String], art: &mut Artifacts) -> Result<Trained> {
    let models_cfg = cfg.models.as_ref().ok_or_else(|| anyhow!("models: required"))?;
    let (train, test) = holdout_split(data.x.len(), models_cfg.test_fraction, seed)?;
    if train.len() < 2 {
        bail!("only {} training rows after preprocessing", train.len());
    }
    art.write_json("models/split.json", &serde_json::json!({ "train": train, "test": test }))?;
    let key = cache_key(cfg, seed, data)?;
    let kinds = &models_cfg.kinds;

    if let Some(models) = try_cached(cfg, &key, art, kinds) {
        let params = kinds.iter().map(|&k| (k, models_cfg.hyper_params(k))).collect();
        let params = fs::read(art.path("models/hyperparams.json"))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .unwrap_or(params);
        return Ok(Trained { train, test, models, params, cached: true });
    }
    for rel in kept {
        let path = art.path(rel);
        if path.exists() {
            fs::remove_file(&path)?;
        }
        art.forget(rel);
    }

    let (xt, yt) = (rows(&data.x, &train), values(&data.y, &train));
    let mut params = Vec::new();
    let mut models = Vec::new();
    let mut tuning = Vec::new();
    for &kind in kinds {
        let hp = match &models_cfg.tune {
            Some(t) => {
                let result = tune_random_search(kind, &xt, &yt, &t.space, t.budget, t.folds, seed)?;
                let best = result.best.clone();
                tuning.push((kind, result));
                best
            }
            None => models_cfg.hyper_params(kind),
        };
        let model = TreeEnsemble::fit(kind, &xt, &yt, &hp)?.with_feature_names(data.names.clone())?;
        art.write_json(&model_path(kind), &model)?;
        params.push((kind, hp));
        models.push((kind, model));
    }
    art.write_json("models/hyperparams.json", &params)?;
    if !tuning.is_empty() {
        let mut text = csv_line(&["model", "candidate", "cv_mse", "hyperparams"].map(String::from));
        for (kind, result) in &tuning {
            for (i, (hp, score)) in result.candidates.iter().enumerate() {
                text.push_str(&csv_line(&[kind.to_string(), i.to_string(), score.to_string(), serde_json::to_string(hp)?]));
            }
        }
        art.write_bytes("models/tuning.csv", text.as_bytes())?;
    }
    art.write_bytes(CACHE_KEY, key.as_bytes())?;
    Ok(Trained { train, test, models, params, cached: false })
}

fn explain(cfg: &RunConfig, seed: u64, data: &Data, trained: &Trained, art: &mut Artifacts) -> Result<()> {
    let kind = cfg.explain.model.unwrap_or(trained.models[0].0);
    let model = &trained.models.iter().find(|(k, _)| *k == kind).ok_or_else(|| anyhow!("no {kind} model"))?.1;
    let attr = tree_shap(model, &data.x)?;
    art.write_with("explain/shap_values.csv", |w| export::write_attribution_csv(&attr, w))?;
    art.write_with("explain/summary.csv", |w| export::write_summary_csv(&attr, &data.x, w))?;
    let ranking = rank_factors(&attr)?;
    art.write_with("explain/ranking.csv", |w| export::write_ranking_csv(&ranking, w))?;
    if cfg.explain.interactions {
        let tensor = shap_interactions(model, &data.x)?;
        art.write_with("explain/interactions.csv", |w| export::write_interactions_csv(&tensor, w))?;
        art.write_with("explain/dependence.csv", |w| export::write_dependence_csv(&tensor, &data.x, w))?;
    }
    if let Some(k) = cfg.explain.cluster_k {
        let labels = supervised_cluster(&attr, k, seed)?;
        let mut text = csv_line(&["sample", "cluster", "target"].map(String::from));
        for (i, label) in labels.iter().enumerate() {
            text.push_str(&csv_line(&[i.to_string(), label.to_string(), data.y[i].to_string()]));
        }
        art.write_bytes("explain/clusters.csv", text.as_bytes())?;
    }
    for &well in &cfg.explain.wells {
        let waterfall = explain_well(&attr, well)?;
        art.write_json(&format!("explain/waterfall_well_{well}.json"), &waterfall)?;
    }
    Ok(())
}

fn stack(cfg: &RunConfig, seed: u64, data: &Data, trained: &Trained, art: &mut Artifacts) -> Result<StackedModel> {
    let dir = art.path("models/stacked");
    if trained.cached {
        if let Ok(model) = StackedModel::load_dir(&dir) {
            return Ok(model);
        }
    }
    let learners: Vec<BaseLearner> =
        trained.params.iter().map(|(kind, hp)| BaseLearner { kind: *kind, hp: hp.clone() }).collect();
    let model = fit_stacked(&rows(&data.x, &trained.train), &values(&data.y, &trained.train), &learners, cfg.stack.k, seed)?
        .with_feature_names(data.names.clone())?;
    for path in model.save_dir(&dir)? {
        art.adopt(&path)?;
    }
    Ok(model)
}

fn evaluate(data: &Data, trained: &Trained, stacked: Option<&StackedModel>, art: &mut Artifacts) -> Result<()> {
    let mut entries: Vec<(String, FinalModel)> =
        trained.models.iter().map(|(k, m)| (k.to_string(), FinalModel::Base(m))).collect();
    if let Some(s) = stacked {
        entries.push(("stacked".to_string(), FinalModel::Stacked(s)));
    }
    let mut text = csv_line(&["model", "split", "n", "r2", "mse", "mae"].map(String::from));
    for (name, model) in &entries {
        for (split, idx) in [("train", &trained.train), ("test", &trained.test)] {
            if idx.is_empty() {
                continue;
            }
            let pred = model.predict(&rows(&data.x, idx))?;
            let m = metrics(&pred, &values(&data.y, idx))?;
            text.push_str(&csv_line(&[
                name.clone(),
                split.to_string(),
                idx.len().to_string(),
                m.r2.to_string(),
                m.mse.to_string(),
                m.mae.to_string(),
            ]));
        }
    }
    art.write_bytes("evaluate/metrics.csv", text.as_bytes())?;

    let (name, model) = entries.last().ok_or_else(|| anyhow!("no model to evaluate"))?;
    let mut parity = csv_line(&["sample", "split", "actual", "predicted", "model"].map(String::from));
    let mut split = vec!["train"; data.x.len()];
    for &i in &trained.test {
        split[i] = "test";
    }
    for (i, row) in data.x.iter().enumerate() {
        parity.push_str(&csv_line(&[
            i.to_string(),
            split[i].to_string(),
            data.y[i].to_string(),
            model.predict_row(row).to_string(),
            name.clone(),
        ]));
    }
    art.write_bytes("evaluate/parity.csv", parity.as_bytes())?;
    Ok(())
}

fn ice_axes(req: &IceRequest, data: &Data, train: &[usize]) -> Result<Vec<Axis>> {
    req.factors
        .iter()
        .map(|f| {
            let idx = data
                .names
                .iter()
                .position(|n| *n == f.name)
                .ok_or_else(|| anyhow!("ICE factor {} is not in the cleaned table", f.name))?;
            if let Some(v) = &f.values {
                return Ok(Axis::new(&f.name, v.clone())?);
            }
            let observed = rows(&data.x, train);
            let lo = observed.iter().map(|r| r[idx]).fold(f64::INFINITY, f64::min);
            let hi = observed.iter().map(|r| r[idx]).fold(f64::NEG_INFINITY, f64::max);
            Ok(Axis::linspace(&f.name, f.min.unwrap_or(lo), f.max.unwrap_or(hi), f.steps.unwrap_or(DEFAULT_STEPS))?)
        })
        .collect()
}

fn ice_stage(cfg: &RunConfig, seed: u64, data: &Data, train: &[usize], model: &FinalModel, art: &mut Artifacts) -> Result<()> {
    for (i, req) in cfg.ice.iter().enumerate() {
        let axes = ice_axes(req, data, train)?;
        let anchors: Vec<usize> =
            select_anchors(train.len(), req.sample, seed.wrapping_add(i as u64)).into_iter().map(|a| train[a]).collect();
        let grid = ice(model, &data.x, &data.names, axes, Some(&anchors))?;
        art.write_with(&format!("ice/ice_{i}.csv"), |w| write_ice_csv(&grid, w))?;
        let mut slices = Vec::new();
        if let Some(s) = &req.slices {
            for (j, section) in project(&grid, s.axis, &s.values)?.into_iter().enumerate() {
                let file = format!("ice/ice_{i}_slice_{j}.csv");
                art.write_with(&file, |w| write_ice_csv(&section.grid, w))?;
                slices.push(serde_json::json!({
                    "file": file,
                    "fixed_axis": section.fixed_axis,
                    "fixed_value": section.fixed_value,
                }));
            }
        }
        art.write_json(
            &format!("ice/ice_{i}.json"),
            &serde_json::json!({ "grid": grid.metadata(), "slices": slices }),
        )?;
    }
    Ok(())
}

fn optimize_stage(cfg: &RunConfig, seed: u64, data: &Data, train: &[usize], model: &FinalModel, art: &mut Artifacts) -> Result<()> {
    let observed = rows(&data.x, train);
    let target = data.table.target_spec().clone();
    let mut table = csv_line(
        &["request", "well", "method", "variable", "unit", "original", "optimized", "absolute_change", "relative_change"]
            .map(String::from),
    );
    for (r, req) in cfg.optimize.iter().enumerate() {
        for &well in &req.wells {
            let row = data.x.get(well).ok_or_else(|| anyhow!("optimize[{r}]: well {well} out of range ({} rows)", data.x.len()))?;
            for &method in &req.methods {
                let result = optimize_well(
                    model, &data.specs, &observed, row, &req.variables, method, &req.settings, req.budget, seed,
                )
                .with_context(|| format!("optimize[{r}] well {well} {method}"))?;
                let stem = format!("optimize/r{r}_well{well}_{method}");
                art.write_json(&format!("{stem}.json"), &result)?;
                art.write_with(&format!("{stem}_trace.csv"), |w| write_trace_csv(&result, w))?;
                for c in &result.comparison {
                    table.push_str(&csv_line(&[
                        r.to_string(),
                        well.to_string(),
                        method.to_string(),
                        c.name.clone(),
                        c.unit.clone(),
                        c.original.to_string(),
                        c.optimized.to_string(),
                        c.absolute_change.to_string(),
                        opt(c.relative_change),
                    ]));
                }
                let (a, b) = (result.original_eur, result.optimized_eur);
                table.push_str(&csv_line(&[
                    r.to_string(),
                    well.to_string(),
                    method.to_string(),
                    target.name.clone(),
                    target.unit.clone(),
                    a.to_string(),
                    b.to_string(),
                    (b - a).to_string(),
                    opt((a != 0.0).then(|| (b - a) / a.abs())),
                ]));
            }
        }
    }
    art.write_bytes("optimize/comparison.csv", table.as_bytes())?;
    Ok(())
}

fn record<T>(stages: &mut Vec<StageRecord>, name: &str, result: Result<T>, status: impl Fn(&T) -> StageStatus) -> Result<T> {
    match result {
        Ok(v) => {
            let status = status(&v);
            log::info!("stage {name}: {status:?}");
            stages.push(StageRecord { name: name.to_string(), status, error: None });
            Ok(v)
        }
        Err(e) => {
            log::error!("stage {name} failed: {e:#}");
            stages.push(StageRecord { name: name.to_string(), status: StageStatus::Failed, error: Some(format!("{e:#}")) });
            Err(e)
        }
    }
}

fn ok<T>(_: &T) -> StageStatus {
    StageStatus::Ok
}

fn skip(stages: &mut Vec<StageRecord>, name: &str) {
    stages.push(StageRecord { name: name.to_string(), status: StageStatus::Skipped, error: None });
}

/// Hash of the effective config, independent of where output goes.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
}

fn stages_body(cfg: &RunConfig, seed: u64, kept: &[String], art: &mut Artifacts, stages: &mut Vec<StageRecord>) -> Result<()> {
    let data = record(stages, "ingest", ingest(cfg, seed, art), ok)?;
    let trained = record(stages, "train", train(cfg, seed, &data, kept, art), |t: &Trained| {
        if t.cached { StageStatus::Cached } else { StageStatus::Ok }
    })?;
    if cfg.explain.enabled {
        record(stages, "explain", explain(cfg, seed, &data, &trained, art), ok)?;
    } else {
        skip(stages, "explain");
    }
    let stacked = if cfg.stack.enabled {
        Some(record(stages, "stack", stack(cfg, seed, &data, &trained, art), |_| {
            if trained.cached { StageStatus::Cached } else { StageStatus::Ok }
        })?)
    } else {
        skip(stages, "stack");
        None
    };
    record(stages, "evaluate", evaluate(&data, &trained, stacked.as_ref(), art), ok)?;
    let model = match &stacked {
        Some(s) => FinalModel::Stacked(s),
        None => FinalModel::Base(&trained.models[0].1),
    };
    if cfg.ice.is_empty() {
        skip(stages, "ice");
    } else {
        record(stages, "ice", ice_stage(cfg, seed, &data, &trained.train, &model, art), ok)?;
    }
    if cfg.optimize.is_empty() {
        skip(stages, "optimize");
    } else {
        record(stages, "optimize", optimize_stage(cfg, seed, &data, &trained.train, &model, art), ok)?;
    }
    Ok(())
}

/// Run every stage into `out_dir`. On a stage failure the manifest is still
/// written, marking the failed stage and skipping the rest.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, RunError> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(RunError::Invalid(problems));
    }
    let seed = cfg.seed.ok_or_else(|| RunError::Invalid(vec!["seed: required".into()]))?;
    let cache = cfg.models.as_ref().is_some_and(|m| m.cache);
    let kept = clean_previous(out_dir, |p| cache && p.starts_with("models/")).map_err(RunError::Other)?;
    fs::create_dir_all(out_dir).map_err(|e| RunError::Other(e.into()))?;

    let mut art = Artifacts::new(out_dir);
    for rel in &kept {
        art.adopt(&out_dir.join(rel)).map_err(RunError::Other)?;
    }
    let mut stages = Vec::new();
    let outcome = stages_body(cfg, seed, &kept, &mut art, &mut stages);
    for name in STAGES {
        if !stages.iter().any(|s| s.name == name) {
            skip(&mut stages, name);
        }
    }
    let manifest = art.finish(seed, config_hash(cfg), stages).map_err(RunError::Other)?;
    match outcome {
        Ok(()) => Ok(manifest),
        Err(error) => {
            let stage = manifest
                .stages
                .iter()
                .find(|s| s.status == StageStatus::Failed)
                .map_or_else(|| "unknown".to_string(), |s| s.name.clone());
            Err(RunError::Stage { manifest, stage, error })
        }
    }
}
