//! Command-line front end: `estimate`, `diagnose`, `simulate`, `version`.
//!
//! Machine-readable output goes to stdout or files, human-readable output to
//! stderr. Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::crossfit::{cross_ppboot_ci, cross_ppi_estimate, BootConfig, LearnerSpec, DEFAULT_FOLDS};
use crate::data::BootstrapMeta;
use crate::data::{ingest_csv, CsvSchema, Dataset, EstimateReport, IngestOptions, LossTarget, PredictionSet};
use crate::diagnostics::{build_report, recommend, Thresholds};
use crate::error::{Error, Result};
use crate::estimators::{cc_estimate, ppi_estimate, ppipp_estimate, LambdaPolicy};
use crate::par::{with_workers, Execution};
use crate::simlab::{render_table, run_scenario_with, write_audit_log, ScenarioConfig};

pub const SEED_ENV: &str = "PPIKIT_SEED";

#[derive(Parser, Debug)]
#[command(name = "ppikit", about = "Prediction-powered inference toolkit", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate a mean or regression coefficients from a CSV file.
    Estimate(EstimateArgs),
    /// Check labeling and model-independence assumptions on a CSV file.
    Diagnose(DiagnoseArgs),
    /// Run a Monte Carlo coverage study from a JSON config.
    Simulate(SimulateArgs),
    /// Print the version.
    Version,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Classical,
    Ppi,
    Ppipp,
    CrossPpi,
    CrossPpboot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    Mean,
    Ols,
    OlsNoIntercept,
}

impl TargetArg {
    fn target(self) -> LossTarget {
        match self {
            TargetArg::Mean => LossTarget::Mean,
            TargetArg::Ols => LossTarget::LinearRegression { include_intercept: true },
            TargetArg::OlsNoIntercept => LossTarget::LinearRegression { include_intercept: false },
        }
    }
}

#[derive(clap::Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON column mapping; defaults to `id, x1..xp, y, s, yhat`.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "mean")]
    target: TargetArg,
    #[arg(long, default_value_t = crate::data::DEFAULT_LEVEL)]
    level: f64,
    /// Fixed PPI++ weight in [0, 1]; optimized when absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// `ridge[:penalty]` or `stumps[:rounds,learning_rate,min_leaf]`.
    #[arg(long, default_value = "ridge")]
    learner: LearnerSpec,
    #[arg(long = "folds", short = 'K', alias = "k", default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    /// Bootstrap replicates for cross-ppboot.
    #[arg(long, alias = "boot-reps", default_value_t = 1000)]
    boot: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Drop rows with missing covariates instead of rejecting the file.
    #[arg(long)]
    drop_incomplete: bool,
}

#[derive(clap::Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// The prediction column comes from a model trained on independent data.
    #[arg(long)]
    pretrained: bool,
    /// JSON thresholds file.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[arg(long)]
    drop_incomplete: bool,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write one JSON line per replication to this file.
    #[arg(long)]
    audit: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Simulate(a) => simulate(a),
        Command::Version => {
            println!("ppikit {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Flag, then `PPIKIT_SEED`, then the fallback.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(fallback),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io(format!("{}: no such file", path.display())))
    }
}

fn load(input: &Path, schema: Option<&Path>, drop: bool) -> Result<(Dataset, Option<PredictionSet>)> {
    require_file(input)?;
    let schema = match schema {
        Some(p) => {
            require_file(p)?;
            Some(CsvSchema::from_json_file(p)?)
        }
        None => None,
    };
    ingest_csv(input, schema.as_ref(), IngestOptions { drop_incomplete_rows: drop })
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let (d, preds) = load(&a.input, a.schema.as_deref(), a.drop_incomplete)?;
    let target = a.target.target();
    let seed = resolve_seed(a.seed, 0)?;
    let need_preds =
        || preds.as_ref().ok_or_else(|| Error::MissingPredictions("input has no prediction column".into()));
    let mut bootstrap = None;
    let (est, ci) = match a.method {
        MethodArg::Classical => wald(cc_estimate(&d, target)?, a.level)?,
        MethodArg::Ppi => wald(ppi_estimate(&d, need_preds()?, target)?, a.level)?,
        MethodArg::Ppipp => {
            let policy = a.lambda.map_or(LambdaPolicy::Optimized, LambdaPolicy::Fixed);
            wald(ppipp_estimate(&d, need_preds()?, target, policy)?, a.level)?
        }
        MethodArg::CrossPpi => wald(cross_ppi_estimate(&d, &a.learner, a.folds, seed, target)?, a.level)?,
        MethodArg::CrossPpboot => {
            let boot = BootConfig { replicates: a.boot, seed, level: a.level };
            let r = cross_ppboot_ci(&d, &a.learner, a.folds, seed, target, &boot)?;
            bootstrap = Some(BootstrapMeta { replicates: a.boot, seed, predictions: "frozen".into() });
            (r.estimate, r.interval)
        }
    };
    let mut report = EstimateReport::new(&est, &ci, target.coefficient_names(d.covariate_names()));
    report.interval = Some(if bootstrap.is_some() { "percentile" } else { "wald" }.into());
    report.bootstrap = bootstrap;
    println!("{}", report.to_json());
    Ok(())
}

fn wald(e: crate::data::Estimate, level: f64) -> Result<(crate::data::Estimate, crate::data::ConfidenceInterval)> {
    let ci = e.confidence_interval(level)?;
    Ok((e, ci))
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let mut thresholds = match &a.thresholds {
        Some(p) => {
            require_file(p)?;
            serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Config(format!("thresholds: {e}")))?
        }
        None => Thresholds::default(),
    };
    thresholds.seed = resolve_seed(None, thresholds.seed)?;
    let (d, preds) = load(&a.input, a.schema.as_deref(), a.drop_incomplete)?;
    let preds = if a.pretrained { preds } else { None };
    let report = build_report(&d, preds.as_ref(), a.pretrained, &thresholds)?;
    let rec = recommend(&report, a.pretrained);
    let out = serde_json::json!({ "report": report, "recommendation": rec });
    println!("{}", serde_json::to_string_pretty(&out).expect("report serializes"));
    let mut err = std::io::stderr().lock();
    let _ = write!(err, "{}", report.render_table());
    let variant = serde_json::to_string(&rec.variant).expect("variant serializes");
    let _ = writeln!(err, "recommended: {}", variant.trim_matches('"'));
    for r in &rec.reasons {
        let _ = writeln!(err, "  - {r}");
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    require_file(&a.config)?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !dir.is_dir() {
            return Err(Error::Io(format!("{}: output directory does not exist", dir.display())));
        }
    }
    let mut cfg = ScenarioConfig::from_path(&a.config)?;
    cfg.scenario.mc.seed = resolve_seed(a.seed, cfg.scenario.mc.seed)?;
    if a.jobs == Some(0) {
        return Err(Error::Config("--jobs must be positive".into()));
    }
    let exec = if a.jobs == Some(1) { Execution::Sequential } else { Execution::default() };
    let outcome = with_workers(a.jobs, || run_scenario_with(&cfg.dgp, &cfg.mechanism, &cfg.scenario, exec))?;
    std::fs::write(&a.out, render_table(&outcome.table))?;
    if let Some(path) = &a.audit {
        write_audit_log(&outcome.records, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "{} replications, seed {}, table written to {}",
        cfg.scenario.mc.reps,
        cfg.scenario.mc.seed,
        a.out.display()
    );
    for row in &outcome.table.rows {
        let _ = writeln!(
            err,
            "{:<12} {:<10} coverage {:.3}  width {:.4}  bias {:+.4}",
            row.method, row.coefficient, row.coverage, row.mean_width, row.mean_bias
        );
    }
    for (m, n) in outcome.table.failed.iter().filter(|(_, &n)| n > 0) {
        let _ = writeln!(err, "{m}: {n} failed replications excluded");
    }
    Ok(())
}
