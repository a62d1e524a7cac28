//! `mlocrisk` command-line runner.
//!
//! Each experiment command reads a flat JSON config, runs it, and writes a
//! `manifest.json` holding the resolved config plus provenance, together with
//! one CSV per metrics table. A manifest is itself a valid config: re-running
//! it reproduces the CSVs byte for byte.

pub mod config;
pub mod diagnose;
pub mod error;

use clap::{Args, Parser, Subcommand};
use diagnose::{run_diagnose, DiagnoseConfig};
pub use error::{CliError, EXIT_CONFIG, EXIT_DIVERGED, EXIT_OTHER};
use mlocrisk_core::experiments::{
    run_classify, run_linreg, run_riskcurve, run_toy, ExperimentConfig, ExperimentKind, MetricsTable, Provenance,
};
use mlocrisk_core::risk_eval::{m_location, solve_theta};
use mlocrisk_core::riskfn::default_eta;
use mlocrisk_core::{Error, RiskParams, Sample, Sigma};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MLOCRISK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mlocrisk", version, about = "Location-deviation risk experiments and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-distribution toy problem over a grid of eta.
    Toy(RunArgs),
    /// Linear regression under normal and log-normal noise.
    Linreg(RunArgs),
    /// Multiclass logistic classification against an ERM baseline.
    Classify(RunArgs),
    /// Classification followed by test-set risk curves.
    Riskcurve(RunArgs),
    /// Stationarity bound check and weak-convexity probe.
    Diagnose(RunArgs),
    /// Risk of a column of loss values, printed as JSON.
    RiskEval(RiskEvalArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the root seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args)]
pub struct RiskEvalArgs {
    /// CSV with one numeric column; a non-numeric first row is a header.
    #[arg(long)]
    pub input: PathBuf,
    /// Nonnegative number or `inf`.
    #[arg(long)]
    pub sigma: Sigma<f64>,
    /// Defaults to the recommended eta for `sigma`.
    #[arg(long)]
    pub eta: Option<f64>,
}

/// Builds the global worker pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

/// Runs one command; `stdout` receives the risk-eval JSON.
pub fn execute<W: Write>(cli: &Cli, stdout: &mut W) -> Result<(), CliError> {
    match &cli.command {
        Command::Toy(a) => cmd_experiment(ExperimentKind::Toy, a),
        Command::Linreg(a) => cmd_experiment(ExperimentKind::Linreg, a),
        Command::Classify(a) => cmd_experiment(ExperimentKind::Classify, a),
        Command::Riskcurve(a) => cmd_experiment(ExperimentKind::Riskcurve, a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::RiskEval(a) => cmd_risk_eval(a, stdout),
    }
}

fn provenance(command: &str, trial_seeds: Vec<u64>) -> Provenance {
    Provenance {
        library_version: mlocrisk_core::VERSION.to_string(),
        command: format!("mlocrisk {command}"),
        trial_seeds,
        notes: Vec::new(),
    }
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_tables(dir: &Path, tables: &[MetricsTable]) -> Result<(), CliError> {
    for t in tables {
        let path = dir.join(t.file_name());
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        t.write_csv(std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Loads an experiment config, checks its kind and applies the seed override.
pub fn load_experiment_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = config::read_json(&args.config)?;
    if cfg.kind != kind {
        return Err(CliError::Config {
            file: args.config.display().to_string(),
            message: format!("field `kind`: config is for `{}` but the command is `{kind}`", cfg.kind),
        });
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    // A relative dataset path is taken relative to the config file, and the
    // manifest records it absolute so it stays valid from the output directory.
    if let Some(p) = &cfg.csv_path {
        let base = args.config.parent().unwrap_or(Path::new("."));
        let joined = base.join(p);
        let abs = joined.canonicalize().map_err(|e| CliError::io(&joined, e))?;
        cfg.csv_path = Some(abs.display().to_string());
    }
    Ok(cfg.resolved()?)
}

fn cmd_experiment(kind: ExperimentKind, args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_experiment_config(kind, args)?;
    let tables = match kind {
        ExperimentKind::Toy => {
            let out = run_toy(&cfg)?;
            if args.verbose > 0 {
                for s in &out.settings {
                    let (m, se) = s.mean_final_h();
                    eprintln!("sigma={} eta={}: mean final h {m:.4} (se {se:.4})", s.params.sigma(), s.params.eta());
                }
            }
            out.tables()
        }
        ExperimentKind::Linreg => {
            let out = run_linreg(&cfg)?;
            if args.verbose > 0 {
                for s in &out.settings {
                    let ((w0, se0), (w1, se1)) = s.line();
                    eprintln!("{:?} sigma={}: w0 {w0:.4} ({se0:.4}) w1 {w1:.4} ({se1:.4})", s.noise, s.params.sigma());
                }
            }
            out.tables()
        }
        ExperimentKind::Classify => {
            let out = run_classify(&cfg)?;
            if args.verbose > 0 {
                for m in &out.methods {
                    eprintln!("{}: mean test-loss variance {:.5}", m.method.label(), m.mean_test_loss_variance());
                }
            }
            out.tables()
        }
        ExperimentKind::Riskcurve => run_riskcurve(&cfg)?.tables(),
    };
    create_out_dir(&args.out)?;
    write_tables(&args.out, &tables)?;
    let mut manifest = cfg.clone();
    manifest.provenance = Some(provenance(&kind.to_string(), cfg.trial_seeds()));
    write_json(&args.out, "manifest.json", &manifest)?;
    if args.verbose > 0 {
        eprintln!("wrote {} tables to {}", tables.len(), args.out.display());
    }
    Ok(())
}

fn cmd_diagnose(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg: DiagnoseConfig = config::read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let cfg = cfg.resolved()?;
    let out = run_diagnose(&cfg)?;
    let seeds = cfg.trial_seeds();
    create_out_dir(&args.out)?;
    write_json(&args.out, "stationarity_report.json", &out.stationarity)?;
    write_json(&args.out, "probe_report.json", &out.probe)?;
    write_tables(&args.out, &out.tables(&seeds))?;
    let mut manifest = cfg;
    manifest.provenance = Some(provenance("diagnose", seeds));
    write_json(&args.out, "manifest.json", &manifest)?;
    if args.verbose > 0 {
        let s = &out.stationarity;
        eprintln!(
            "mean |grad|^2 {:.4e} (se {:.1e}); bound {:.4e}; probe violations {}",
            s.env_grad_norm_sq_mean, s.env_grad_norm_sq_std_error, s.theorem_bound, out.probe.violations
        );
    }
    Ok(())
}

/// Output of `risk-eval`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiskEvalReport {
    pub sigma: Sigma<f64>,
    pub eta: f64,
    pub theta_star: f64,
    pub risk: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_location: Option<f64>,
}

/// Reads one numeric column. A first row that does not parse is a header.
pub fn read_loss_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let parse_err = |row: usize, message: String| CliError::Core(Error::Parse { row, column: "0".into(), message });
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path).map_err(|e| {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => CliError::io(path, io),
                other => parse_err(0, format!("{other:?}")),
            }
        })?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != 1 {
            return Err(parse_err(line, format!("expected one column, found {}", record.len())));
        }
        match record[0].parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(parse_err(line, format!("non-finite loss {v}"))),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(parse_err(line, format!("cannot parse {:?} as a number", &record[0]))),
        }
    }
    if values.is_empty() {
        return Err(parse_err(0, "no loss values".into()));
    }
    Ok(values)
}

/// Risk, minimizing location and M-location of a loss sample.
pub fn risk_eval(values: Vec<f64>, sigma: Sigma<f64>, eta: Option<f64>) -> Result<RiskEvalReport, CliError> {
    let eta = eta.unwrap_or_else(|| default_eta(sigma));
    let params = RiskParams::new(sigma, eta)?;
    let sample = Sample::new(values)?;
    let sol = solve_theta(&sample, &params)?;
    let m_location = match sigma {
        Sigma::Finite(s) => Some(m_location(&sample, s)?),
        _ => None,
    };
    Ok(RiskEvalReport { sigma, eta, theta_star: sol.theta_star, risk: sol.risk_value, m_location })
}

fn cmd_risk_eval<W: Write>(args: &RiskEvalArgs, stdout: &mut W) -> Result<(), CliError> {
    let values = read_loss_column(&args.input)?;
    let report = risk_eval(values, args.sigma, args.eta)?;
    serde_json::to_writer(&mut *stdout, &report)?;
    writeln!(stdout).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_eval_two_point_mean_variance() {
        let r = risk_eval(vec![0.0, 2.0], Sigma::Infinite, Some(1.0)).unwrap();
        assert!((r.risk - 1.75).abs() < 1e-12);
        assert!(r.m_location.is_none());
    }

    #[test]
    fn risk_eval_constant_sample() {
        let r = risk_eval(vec![3.0; 5], Sigma::Infinite, Some(1.0)).unwrap();
        assert!((r.risk - 2.75).abs() < 1e-12);
    }

    #[test]
    fn risk_eval_default_eta_echoed() {
        let r = risk_eval(vec![0.0, 1.0, 5.0], Sigma::Finite(2.0), None).unwrap();
        assert_eq!(r.eta, 8.0);
        assert!(r.m_location.is_some());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Core(Error::DivergedState { step: 3 }).exit_code(), EXIT_DIVERGED);
        assert_eq!(CliError::Core(Error::InvalidConfig("x".into())).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::Core(Error::EmptyDataset).exit_code(), EXIT_OTHER);
    }
}
