use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gravanom_cli::{explain::explain, run, ExperimentConfig, RunOptions, Suite, DEFAULT_CONFIG, OUT_DIR_VAR};

#[derive(Parser)]
#[command(name = "gravanom", version, about = "Chern–Simons counterterm and anomaly-ledger checks on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Background-shift identity of the Chern–Simons action.
    CsAction(RunArgs),
    /// Metric independence, additivity and isotopy invariance of δ_φ.
    Delta(RunArgs),
    /// δ_φ against the 4-d characteristic number of the mapping torus.
    MappingTorus(RunArgs),
    /// Lie directions and the Cotton tensor.
    Cotton(RunArgs),
    /// Path integrals of σ and flat-holonomy verdicts.
    Holonomy(RunArgs),
    /// Exact anomaly-cancellation ledger.
    Ledger(RunArgs),
    /// Every experiment in the config.
    VerifyAll(RunArgs),
    /// Describe what a check computes.
    Explain {
        /// Check id, with or without its `/…` suffix.
        id: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config; the built-in default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path. Relative paths go under $GRAVANOM_OUT_DIR when set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every floating-point tolerance.
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, suites, args) = match cli.command {
        Command::Explain { id } => {
            return match explain(&id) {
                Ok(text) => {
                    println!("{id}\n\n{text}");
                    ExitCode::SUCCESS
                }
                Err(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(2)
                }
            };
        }
        Command::CsAction(a) => ("cs-action", vec![Suite::CsAction], a),
        Command::Delta(a) => ("delta", vec![Suite::Delta], a),
        Command::MappingTorus(a) => ("mapping-torus", vec![Suite::MappingTorus], a),
        Command::Cotton(a) => ("cotton", vec![Suite::Cotton], a),
        Command::Holonomy(a) => ("holonomy", vec![Suite::Holonomy], a),
        Command::Ledger(a) => ("ledger", vec![Suite::Ledger], a),
        Command::VerifyAll(a) => ("verify-all", Suite::ALL.to_vec(), a),
    };
    match execute(name, &suites, &args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(name: &str, suites: &[Suite], args: &RunArgs) -> Result<bool, String> {
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path),
        None => ExperimentConfig::parse(DEFAULT_CONFIG),
    }
    .map_err(|e| e.to_string())?;
    let out = output_path(args.out.clone().or_else(|| cfg.output.clone()));
    let opts = RunOptions { seed: args.seed, tolerance_scale: args.tolerance_scale };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| format!("--jobs: {e}"))?;
    let report = pool.install(|| run(&cfg, name, suites, &opts)).map_err(|e| e.to_string())?;
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        match (&c.error, c.residual) {
            (Some(err), _) => println!("{verdict}  {}  error: {err}", c.id),
            (None, Some(r)) => println!("{verdict}  {}  residual {r:.3e}  tolerance {:.1e}", c.id, c.tolerance),
            (None, None) => println!("{verdict}  {}", c.id),
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(&out, report.to_json()).map_err(|e| format!("{}: {e}", out.display()))?;
    println!(
        "{}/{} checks passed; report written to {}",
        report.summary.passed,
        report.summary.total,
        out.display()
    );
    Ok(report.all_pass())
}

fn output_path(requested: Option<PathBuf>) -> PathBuf {
    let path = requested.unwrap_or_else(|| PathBuf::from("report.json"));
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path,
    }
}
