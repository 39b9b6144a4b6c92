use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shalekit::optimize::Method;
use shalekit_cli::commands::{self, ExplainArgs, IceArgs, OptimizeArgs};
use shalekit_cli::config::RunConfig;
use shalekit_cli::pipeline::{run, RunError};
use shalekit_cli::{resolve_out_dir, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, OUT_ENV};

#[derive(Parser)]
#[command(name = "shalekit", version, about = "Train, explain, stack, diagnose and optimize well-production models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; beats SHALEKIT_OUT and the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reuse saved models whose cache key matches.
        #[arg(long)]
        cached_models: bool,
    },
    /// Check a config without computing anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic well table with a known response.
    Synthesize {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        noise_sd: f64,
        #[arg(long)]
        seed: u64,
        /// CSV file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
    /// SHAP values, ranking and waterfalls for a saved ensemble.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        interactions: bool,
        #[arg(long)]
        cluster_k: Option<usize>,
        #[arg(long = "well")]
        wells: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// ICE grid over 1 to 3 factors (`name` or `name=min:max[:steps]`).
    Ice {
        /// Ensemble JSON file or stacked-model directory.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "factor", required = true)]
        factors: Vec<String>,
        /// Subsample this many anchor rows.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Optimize one well's design (`--var name` or `--var name=lower:upper`).
    Optimize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        well: usize,
        #[arg(long = "var", required = true)]
        variables: Vec<String>,
        #[arg(long, default_value = "pso")]
        method: Method,
        #[arg(long, default_value_t = 200)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: &std::path::Path) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path).map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn runtime(result: anyhow::Result<impl Sized>) -> ExitCode {
    match result {
        Ok(_) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out, cached_models } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if seed.is_some() {
                cfg.seed = seed;
            }
            if cached_models {
                if let Some(m) = cfg.models.as_mut() {
                    m.cache = true;
                }
            }
            let mut problems = cfg.validate();
            let out_dir = resolve_out_dir(out.as_deref(), cfg.output_dir.as_deref());
            if out_dir.is_none() {
                problems.push(format!("output_dir: required (or --out, or {OUT_ENV})"));
            }
            if !problems.is_empty() {
                eprintln!("invalid config:");
                for p in &problems {
                    eprintln!("  {p}");
                }
                return ExitCode::from(EXIT_VALIDATION);
            }
            let out_dir = out_dir.expect("checked above");
            match run(&cfg, &out_dir) {
                Ok(m) => {
                    println!("{} artifacts written to {}", m.artifacts.len(), out_dir.display());
                    ExitCode::from(EXIT_OK)
                }
                Err(RunError::Invalid(problems)) => {
                    eprintln!("invalid config:\n  {}", problems.join("\n  "));
                    ExitCode::from(EXIT_VALIDATION)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::Validate { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let problems = cfg.validate();
            if problems.is_empty() {
                println!("config ok");
                ExitCode::from(EXIT_OK)
            } else {
                for p in &problems {
                    println!("{p}");
                }
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        Command::Synthesize { n, noise_sd, seed, out, schema_out } => {
            runtime(commands::synthesize_cmd(n, noise_sd, seed, &out, schema_out.as_deref()))
        }
        Command::Explain { model, data, schema, out, interactions, cluster_k, wells, seed } => {
            runtime(commands::explain_cmd(&ExplainArgs { model, data, schema, out, interactions, cluster_k, wells, seed }))
        }
        Command::Ice { model, data, schema, out, factors, sample, seed } => {
            if factors.len() > shalekit::ice::MAX_AXES {
                eprintln!("ICE varies 1 to {} factors, got {}", shalekit::ice::MAX_AXES, factors.len());
                return ExitCode::from(EXIT_VALIDATION);
            }
            runtime(commands::ice_cmd(&IceArgs { model, data, schema, out, factors, sample, seed }))
        }
        Command::Optimize { model, data, schema, out, well, variables, method, budget, seed } => runtime(
            commands::optimize_cmd(&OptimizeArgs { model, data, schema, out, well, variables, method, budget, seed }),
        ),
    }
}
