use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use glmsel::cli::{
    cmd_compare, cmd_fit, cmd_infer, cmd_simulate, ingest_csv, load_scenario, parse_grid,
    parse_methods, write_report_csv, InferConfig, THREADS_ENV,
};
use glmsel::glm::Family;
use glmsel::report::LambdaMode;
use glmsel::{Error, Result};

#[derive(Parser)]
#[command(
    name = "glmsel",
    version,
    about = "Selective inference for Lasso-selected GLM coefficients"
)]
struct Cli {
    /// Worker threads for simulations (defaults to all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum-likelihood fit of the full model.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select covariates with the Lasso and report selective CIs and p-values.
    Infer(InferArgs),
    /// Like `infer`, with every method side by side.
    Compare(InferArgs),
    /// Run a Monte Carlo scenario and write summary CSVs.
    Simulate {
        /// Scenario file (flat TOML).
        scenario: PathBuf,
        /// Directory for summary.csv, curves.csv, pivots.csv and scenario.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override the replicate count.
        #[arg(long)]
        replicates: Option<usize>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the methods (same syntax as `infer --method`).
        #[arg(long)]
        method: Option<String>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    csv: PathBuf,
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// logistic, poisson or beta.
    #[arg(long)]
    family: Option<String>,
    /// Name of the response column.
    #[arg(long)]
    response: Option<String>,
    /// Categorical column to expand into indicators (repeatable).
    #[arg(long = "one-hot")]
    one_hot: Vec<String>,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Fixed penalty on the sum-of-squares scale.
    #[arg(long)]
    lambda: Option<f64>,
    /// Grid for data-driven selection as lo,hi,k.
    #[arg(long = "lambda-grid")]
    lambda_grid: Option<String>,
    /// fixed or datadriven.
    #[arg(long = "lambda-mode")]
    lambda_mode: Option<String>,
    /// Miscoverage level of the intervals (default 0.05).
    #[arg(long)]
    alpha: Option<f64>,
    /// Seed for the train/test split.
    #[arg(long)]
    seed: Option<u64>,
    /// ppl, polyhedral, naive, all, or a comma-separated list.
    #[arg(long)]
    method: Option<String>,
    /// Fraction of rows used to fit the Lasso when choosing the penalty.
    #[arg(long = "split-frac")]
    split_frac: Option<f64>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Coefficient table as CSV.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

fn base_config(d: &DataArgs) -> Result<InferConfig> {
    let mut cfg = match &d.config {
        Some(p) => InferConfig::from_file(p)?,
        None => InferConfig::default(),
    };
    if let Some(f) = &d.family {
        cfg.family = Some(f.parse()?);
    }
    if let Some(r) = &d.response {
        cfg.response = Some(r.clone());
    }
    cfg.one_hot.extend(d.one_hot.iter().cloned());
    Ok(cfg)
}

fn infer_config(a: &InferArgs) -> Result<InferConfig> {
    let mut cfg = base_config(&a.data)?;
    if let Some(m) = &a.lambda_mode {
        cfg.lambda_mode = m.parse()?;
    } else if a.lambda.is_some() && a.lambda_grid.is_none() {
        cfg.lambda_mode = LambdaMode::Fixed;
    }
    if let Some(l) = a.lambda {
        cfg.lambda = Some(l);
    }
    if let Some(g) = &a.lambda_grid {
        cfg.lambda_grid = Some(parse_grid(g)?);
    }
    if let Some(x) = a.alpha {
        cfg.alpha = x;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = &a.method {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(f) = a.split_frac {
        cfg.split_frac = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(cfg: &InferConfig, path: &Path) -> Result<(glmsel::glm::Dataset, Family)> {
    let family = cfg.family()?;
    let data = ingest_csv(path, cfg.response()?, family, &cfg.one_hot)?;
    eprintln!("read {} rows, {} covariates", data.n(), data.p());
    Ok((data, family))
}

fn emit(json: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{json}\n"))?,
        None => writeln!(std::io::stdout().lock(), "{json}")?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Fit { data, out } => {
            let cfg = base_config(&data)?;
            let (d, family) = load(&cfg, &data.csv)?;
            let rep = cmd_fit(&d, family)?;
            emit(
                &serde_json::to_string_pretty(&rep).expect("report serializes"),
                out.as_deref(),
            )
        }
        Command::Infer(a) => infer_like(&a, false),
        Command::Compare(a) => infer_like(&a, true),
        Command::Simulate {
            scenario,
            out_dir,
            replicates,
            seed,
            method,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(r) = replicates {
                s.replicates = r;
            }
            if let Some(x) = seed {
                s.seed = x;
            }
            if let Some(m) = method {
                s.methods = parse_methods(&m)?;
            }
            if s.family == Family::Beta {
                eprintln!("note: beta responses drawn with phi = {} (set `phi` in the scenario to change)", s.phi);
            }
            let (table, files) = cmd_simulate(&s, &out_dir)?;
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            if !table.replicate_errors.is_empty() {
                eprintln!("{} replicate(s) failed", table.replicate_errors.len());
            }
            Ok(())
        }
    }
}

fn infer_like(a: &InferArgs, compare: bool) -> Result<()> {
    let cfg = infer_config(a)?;
    let (d, _) = load(&cfg, &a.data.csv)?;
    let out = if compare {
        cmd_compare(&d, &cfg)?
    } else {
        cmd_infer(&d, &cfg)?
    };
    if let Some(p) = &a.csv_out {
        write_report_csv(&out.report, std::fs::File::create(p)?)?;
    }
    emit(
        &serde_json::to_string_pretty(&out).expect("report serializes"),
        a.out.as_deref(),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
