use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shalekit_cli::manifest::{files_on_disk, sha256_hex, Manifest, StageStatus};

const MINIMAL: &str = r#"
seed = 3
[data.synthesize]
n = 60
[models]
kinds = ["rf"]
[models.rf]
n_trees = 20
[stack]
enabled = false
"#;

fn shalekit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shalekit"))
        .args(args)
        .current_dir(dir)
        .env_remove("SHALEKIT_OUT")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn reconcile(out: &Path) -> Manifest {
    let manifest = Manifest::load(out).unwrap();
    let mut on_disk = files_on_disk(out).unwrap();
    on_disk.retain(|f| f != "manifest.json");
    let listed: Vec<String> = manifest.artifacts.iter().map(|a| a.path.clone()).collect();
    assert_eq!(listed, on_disk);
    for a in &manifest.artifacts {
        let bytes = std::fs::read(out.join(&a.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), a.sha256, "{}", a.path);
        assert_eq!(bytes.len() as u64, a.bytes);
    }
    manifest
}

#[test]
fn minimal_run_succeeds_and_manifest_matches_disk() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.toml", MINIMAL);
    let o = shalekit(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = reconcile(&dir.path().join("out"));
    assert!(manifest.artifacts.len() >= 4);
    assert!(manifest.succeeded());
    let status = |name: &str| manifest.stages.iter().find(|s| s.name == name).unwrap().status;
    assert_eq!(status("stack"), StageStatus::Skipped);
    assert_eq!(status("optimize"), StageStatus::Skipped);
    assert_eq!(status("explain"), StageStatus::Ok);
}

#[test]
fn four_factor_ice_fails_validation_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{MINIMAL}\n[[ice]]\nfactors = [{{ name = \"toc\" }}, {{ name = \"porosity\" }}, {{ name = \"stage_count\" }}, {{ name = \"stimulated_length\" }}]\n"
    );
    write_config(dir.path(), "c.toml", &body);
    let o = shalekit(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ice[0]"));
    assert!(!dir.path().join("out").exists());
    assert_eq!(shalekit(&["validate", "--config", "c.toml"], dir.path()).status.code(), Some(1));
}

#[test]
fn unknown_keys_and_missing_output_dir_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "bad.toml", &format!("{MINIMAL}\nlearning_rate = 0.1\n"));
    assert_eq!(shalekit(&["validate", "--config", "bad.toml"], dir.path()).status.code(), Some(1));
    write_config(dir.path(), "c.toml", MINIMAL);
    assert_eq!(shalekit(&["validate", "--config", "c.toml"], dir.path()).status.code(), Some(0));
    let o = shalekit(&["run", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("output_dir"));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.toml", &format!("output_dir = \"from_config\"\n{MINIMAL}"));
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_shalekit"));
        cmd.args(["run", "--config", "c.toml"]).current_dir(dir.path()).env_remove("SHALEKIT_OUT");
        if let Some(e) = env {
            cmd.env("SHALEKIT_OUT", e);
        }
        if let Some(f) = flag {
            cmd.args(["--out", f]);
        }
        assert!(cmd.status().unwrap().success());
    };
    run(None, None);
    assert!(dir.path().join("from_config/manifest.json").exists());
    run(Some("from_env"), None);
    assert!(dir.path().join("from_env/manifest.json").exists());
    run(Some("from_env2"), Some("from_flag"));
    assert!(dir.path().join("from_flag/manifest.json").exists());
    assert!(!dir.path().join("from_env2").exists());
}

#[test]
fn seed_override_changes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.toml", MINIMAL);
    assert!(shalekit(&["run", "--config", "c.toml", "--out", "a"], dir.path()).status.success());
    assert!(shalekit(&["run", "--config", "c.toml", "--out", "b", "--seed", "4"], dir.path()).status.success());
    let a = Manifest::load(&dir.path().join("a")).unwrap();
    let b = Manifest::load(&dir.path().join("b")).unwrap();
    assert_eq!(b.seed, 4);
    assert_ne!(a.artifacts, b.artifacts);
}

#[test]
fn cached_models_are_reused_and_rerun_replaces_old_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let body = MINIMAL.replace("[stack]\nenabled = false", "[stack]\nk = 3");
    write_config(dir.path(), "c.toml", &body);
    let args = ["run", "--config", "c.toml", "--out", "out", "--cached-models"];
    assert!(shalekit(&args, dir.path()).status.success());
    let first = reconcile(&dir.path().join("out"));
    assert!(shalekit(&args, dir.path()).status.success());
    let second = reconcile(&dir.path().join("out"));
    let status = |m: &Manifest, name: &str| m.stages.iter().find(|s| s.name == name).unwrap().status;
    assert_eq!(status(&first, "train"), StageStatus::Ok);
    assert_eq!(status(&second, "train"), StageStatus::Cached);
    assert_eq!(status(&second, "stack"), StageStatus::Cached);
    assert_eq!(first.artifacts, second.artifacts);

    // without caching, and without explain, the stale explain outputs go away
    write_config(dir.path(), "c.toml", &format!("{body}\n[explain]\nenabled = false\n"));
    assert!(shalekit(&["run", "--config", "c.toml", "--out", "out"], dir.path()).status.success());
    let third = reconcile(&dir.path().join("out"));
    assert_eq!(status(&third, "train"), StageStatus::Ok);
    assert!(!dir.path().join("out/explain").exists());
}

#[test]
fn foreign_files_block_the_run() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c.toml", MINIMAL);
    assert!(shalekit(&["run", "--config", "c.toml", "--out", "out"], dir.path()).status.success());
    std::fs::write(dir.path().join("out/notes.txt"), "mine").unwrap();
    let o = shalekit(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.path().join("out/notes.txt").exists());
}

#[test]
fn failed_stage_is_recorded_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    // slice value not on the grid: caught only while computing
    let body = format!(
        "{MINIMAL}\n[[ice]]\nfactors = [{{ name = \"stimulated_length\", values = [1000.0, 1500.0] }}, {{ name = \"toc\", steps = 3 }}]\nslices = {{ axis = 0, values = [1234.0] }}\n"
    );
    write_config(dir.path(), "c.toml", &body);
    let o = shalekit(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let manifest = reconcile(&dir.path().join("out"));
    assert!(!manifest.succeeded());
    let ice = manifest.stages.iter().find(|s| s.name == "ice").unwrap();
    assert_eq!(ice.status, StageStatus::Failed);
    assert!(ice.error.as_deref().unwrap().contains("1234"));
}

#[test]
fn standalone_commands_work_from_run_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = shalekit(&["synthesize", "--n", "70", "--seed", "5", "--out", "wells.csv", "--schema-out", "schema.json"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body = r#"
seed = 5
[data]
csv = "wells.csv"
schema = "schema.json"
[models]
kinds = ["gbdt"]
[models.gbdt]
n_trees = 30
[stack]
k = 3
"#;
    write_config(d, "c.toml", body);
    assert!(shalekit(&["run", "--config", "c.toml", "--out", "out"], d).status.success());
    let common = ["--data", "out/data/clean.csv", "--schema", "out/data/schema.json"];

    let mut args = vec!["explain", "--model", "out/models/gbdt.json", "--out", "ex", "--interactions", "--well", "1"];
    args.extend(common);
    let o = shalekit(&args, d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    reconcile(&d.join("ex"));
    assert!(d.join("ex/waterfall_well_1.json").exists());

    let mut args = vec!["ice", "--model", "out/models/stacked", "--out", "ic", "--factor", "toc", "--factor", "stimulated_length=1000:2000:5"];
    args.extend(common);
    let o = shalekit(&args, d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("ic/ice.csv").exists());

    let mut args = vec!["ice", "--model", "out/models/gbdt.json", "--out", "ic4"];
    for f in ["toc", "porosity", "stage_count", "stimulated_length"] {
        args.extend(["--factor", f]);
    }
    args.extend(common);
    assert_eq!(shalekit(&args, d).status.code(), Some(1));

    let mut args = vec![
        "optimize", "--model", "out/models/stacked", "--out", "op", "--well", "2", "--var", "fluid_intensity", "--var",
        "stimulated_length=1000:2100", "--method", "de", "--budget", "50",
    ];
    args.extend(common);
    let o = shalekit(&args, d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("op/well2_de_trace.csv").exists());

    let mut args = vec!["optimize", "--model", "out/models/gbdt.json", "--out", "op2", "--well", "0", "--var", "toc"];
    args.extend(common);
    assert_eq!(shalekit(&args, d).status.code(), Some(2));
}
