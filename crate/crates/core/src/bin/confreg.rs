use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use conformal_regret::auditors::{Status, Theorem};
use conformal_regret::harness::{
    self, audit, read_trace, sweep_eta, trace_norms, write_audit, write_convergence, write_norms,
    AuditConfig, AuditReport, LearnerState, RunConfig,
};
use conformal_regret::{Error, Rate, Result};

#[derive(Parser)]
#[command(name = "confreg", version, about = "Online conformal prediction runs and transcript audits")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Exit with status 3 when any bound check fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a config template with every default spelled out.
    Init {
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a learner on a stream, then audit the transcript.
    Run(RunArgs),
    /// Audit an existing transcript CSV.
    Audit(AuditArgs),
    /// Convergence time per group for several step sizes.
    SweepEta(SweepArgs),
    /// Sup-norm trace of a run next to the proven envelope.
    Trace(TraceArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AuditArgs {
    /// Transcript CSV with a `tau_hat` column.
    #[arg(long)]
    transcript: PathBuf,
    /// Config supplying q, group names and audit settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target coverage; required without `--config`.
    #[arg(long)]
    q: Option<f64>,
    /// Learner state for identity checks; defaults to `state.json` next to the transcript.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Grid resolution, overriding the config.
    #[arg(long)]
    grid: Option<usize>,
    /// Smoothness resolution, overriding the config.
    #[arg(long)]
    r: Option<usize>,
    /// Bound checks to run (repeatable), overriding the config.
    #[arg(long = "theorem")]
    theorems: Vec<String>,
    /// Output directory; defaults to the transcript's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Step sizes to try (repeatable or comma separated).
    #[arg(long = "eta", value_delimiter = ',', required = true)]
    etas: Vec<f64>,
    /// Convergence tolerance; defaults to `audit.convergence_epsilon`.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TraceArgs {
    /// Directory written by `run`.
    #[arg(long)]
    run: PathBuf,
    /// Output CSV; defaults to `norms.csv` in the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Ok,
    BoundFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::BoundFailure) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Init { out } => {
            let text = RunConfig::template().to_json()?;
            match out {
                Some(path) => std::fs::write(path, text + "\n").map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?,
                None => println!("{text}"),
            }
            Ok(Outcome::Ok)
        }
        Command::Run(args) => cmd_run(cli, args),
        Command::Audit(args) => cmd_audit(cli, args),
        Command::SweepEta(args) => cmd_sweep(cli, args),
        Command::Trace(args) => cmd_trace(cli, args),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn finish(cli: &Cli, report: &AuditReport, dir: &Path) -> Result<Outcome> {
    write_audit(report, dir)?;
    let failed = report.failed_checks();
    if !cli.quiet {
        println!("marginal coverage {:.4} over {} rounds", report.marginal_coverage, report.rounds);
        for b in &report.bounds {
            let status = match b.status() {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::Vacuous => "vacuous",
            };
            let slack = b.min_slack().map_or_else(|| "-".to_string(), |s| format!("{s:.3e}"));
            println!("  {:<28} {status:<8} min slack {slack}", b.theorem.name());
        }
        println!("reports written to {}", dir.display());
    }
    if cli.strict && !failed.is_empty() {
        eprintln!("bound checks failed: {failed:?}");
        return Ok(Outcome::BoundFailure);
    }
    Ok(Outcome::Ok)
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> Result<Outcome> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let out = harness::run(&cfg, &dir)?;
    if !cli.quiet {
        println!("{} rounds of {} written to {}", out.summary.rounds, out.summary.algorithm, dir.display());
        if let Some(m) = out.summary.max_theta_inf {
            println!("max ||theta||_inf {m:.4}");
        }
    }
    let names: Vec<String> = out.groups.iter().map(|g| g.name.clone()).collect();
    let membership = harness::membership_for(&out.transcript, Some(&names))?;
    let report = audit(&out.transcript, &membership, &cfg.audit, Some(&out.state))?;
    finish(cli, &report, &dir)
}

fn cmd_audit(cli: &Cli, args: &AuditArgs) -> Result<Outcome> {
    let cfg = args.config.as_ref().map(RunConfig::load).transpose()?;
    let q = match (args.q, &cfg) {
        (Some(q), _) => q,
        (None, Some(c)) => c.learner.q,
        (None, None) => return Err(Error::Config("audit needs --q or --config".into())),
    };
    let q = Rate::new(q).map_err(|e| Error::Config(e.to_string()))?;
    let mut audit_cfg = cfg.as_ref().map_or_else(AuditConfig::default, |c| c.audit.clone());
    if let Some(n) = args.grid {
        audit_cfg.grid = n;
    }
    if let Some(r) = args.r {
        audit_cfg.r = r;
    }
    if !args.theorems.is_empty() {
        audit_cfg.theorems = args.theorems.iter().map(|t| t.parse::<Theorem>()).collect::<Result<_>>()?;
    }
    let tr = harness::load_transcript(&args.transcript, q)?;
    let names = match &cfg {
        Some(c) => Some(c.resolved_groups()?.into_iter().map(|g| g.name).collect::<Vec<_>>()),
        None => None,
    };
    let membership = harness::membership_for(&tr, names.as_deref())?;
    let parent = args.transcript.parent().map(Path::to_path_buf).unwrap_or_default();
    let state_path = args.state.clone().unwrap_or_else(|| parent.join("state.json"));
    let state = if args.state.is_some() || state_path.exists() {
        Some(LearnerState::load(&state_path)?)
    } else {
        None
    };
    let report = audit(&tr, &membership, &audit_cfg, state.as_ref())?;
    finish(cli, &report, args.out.as_deref().unwrap_or(&parent))
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<Outcome> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let eps = args.epsilon.unwrap_or(cfg.audit.convergence_epsilon);
    if let Some(bad) = args.etas.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(Error::Config(format!("eta = {bad} must lie in (0, 1]")));
    }
    let rows = sweep_eta(&cfg, &args.etas, eps)?;
    match &args.out {
        Some(path) => {
            write_convergence(&rows, create(path)?)?;
            if !cli.quiet {
                println!("{} rows written to {}", rows.len(), path.display());
            }
        }
        None => write_convergence(&rows, io::stdout().lock())?,
    }
    Ok(Outcome::Ok)
}

fn cmd_trace(cli: &Cli, args: &TraceArgs) -> Result<Outcome> {
    let state = LearnerState::load(args.run.join("state.json"))?;
    let eta = state
        .eta
        .ok_or_else(|| Error::Config(format!("the {} run has no step size, so no envelope", state.algorithm)))?;
    let q = Rate::new(state.q)?;
    let trace = read_trace(args.run.join("trace.csv"))?;
    let rows = trace_norms(&trace, eta, state.k, q);
    let path = args.out.clone().unwrap_or_else(|| args.run.join("norms.csv"));
    let mut w = create(&path)?;
    write_norms(&rows, &mut w)?;
    w.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
    if !cli.quiet {
        let max = rows.iter().map(|r| r.theta_inf).fold(0.0f64, f64::max);
        let above = rows.iter().filter(|r| r.theta_inf > r.envelope).count();
        println!("max ||theta||_inf {max:.4}; {above} rounds above the envelope; written to {}", path.display());
    }
    Ok(Outcome::Ok)
}
