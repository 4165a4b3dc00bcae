use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acidfront::integrator::{run_with, RunOptions};
use acidfront::io::{read_config, read_run, read_snapshot, write_run};
use acidfront::props::{run_props, PropsConfig};
use acidfront::theta::verify_n_field;
use acidfront::{Error, ScenarioConfig, ScenarioPreset};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "acidfront", version, about = "Acid-mediated tumor invasion simulator")]
struct Cli {
    /// Cap on worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write snapshots, midline sections and a manifest.
    Run(RunArgs),
    /// Check a recorded run's N field against the closed-form operator.
    Verify(VerifyArgs),
    /// Run the seeded property sweeps.
    Props(PropsArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_parser = clap::value_parser!(ScenarioPreset), conflicts_with = "config", required_unless_present = "config")]
    scenario: Option<ScenarioPreset>,

    /// Config file in key=value format.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, env = "ACIDFRONT_OUT")]
    out: PathBuf,

    /// Nodes per side.
    #[arg(long)]
    grid: Option<usize>,

    #[arg(long)]
    t_end: Option<f64>,

    /// Record A/H after every step at the 3x3 default nodes.
    #[arg(long)]
    record_trajectories: bool,

    /// Report invariant violations instead of aborting.
    #[arg(long)]
    warn_only: bool,

    /// Start from a snapshot, given as `<dir>/<label>` (reads `<label>_{N,A,H}.csv`).
    #[arg(long)]
    init_snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Run directory containing manifest.txt.
    #[arg(long)]
    run: PathBuf,

    #[arg(long, default_value_t = 1e-3)]
    max_rel_err: f64,
}

#[derive(Debug, Args)]
struct PropsArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 1000)]
    cases: usize,
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::ToleranceExceeded { .. } | Error::NonFiniteState { .. } => EXIT_INVARIANT,
        _ => EXIT_USAGE,
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_for(&err))
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = match (&args.scenario, &args.config) {
        (Some(preset), _) => preset.config(),
        (None, Some(path)) => read_config(path)?,
        (None, None) => unreachable!("clap enforces one source"),
    };
    if let Some(n) = args.grid {
        cfg = cfg.with_nodes(n)?;
    }
    if let Some(t) = args.t_end {
        cfg = cfg.with_t_end(t);
    }
    cfg.monitor.fatal = !args.warn_only;
    cfg.validate()?;
    Ok(cfg)
}

fn load_initial(spec: &Path) -> Result<acidfront::SimState, Error> {
    let dir = spec.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let label = spec
        .file_name()
        .map(|l| l.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_snapshot(dir, &label, 0.0)
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let cfg = match load_config(&args) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let mut opts = RunOptions::default();
    if args.record_trajectories {
        opts.record_nodes = Some(Vec::new());
    }
    if let Some(spec) = &args.init_snapshot {
        match load_initial(spec) {
            Ok(s) => opts.initial_state = Some(s),
            Err(e) => return fail(e),
        }
    }
    let result = match run_with(&cfg, opts) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let manifest = match write_run(&result, &cfg, &args.out) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    println!(
        "steps={} dt={:e} snapshots={} trajectories={}",
        result.step_count,
        result.dt_used,
        manifest.snapshots.len(),
        manifest.trajectories.len()
    );
    let report = &result.invariant_report;
    if !report.is_clean() {
        eprintln!(
            "warning: {} invariant violations, first at t = {}",
            report.violation_count,
            report.first_violation_time.unwrap_or(f64::NAN)
        );
    }
    ExitCode::SUCCESS
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    let (cfg, result) = match read_run(&args.run) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let report = match verify_n_field(&result, &cfg.params, None) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!(
        "max_rel_err={:.6e} comparisons={} worst_node={},{} worst_time={}",
        report.max_rel_err, report.comparisons, report.worst_node.0, report.worst_node.1, report.worst_time
    );
    if report.max_rel_err <= args.max_rel_err {
        ExitCode::SUCCESS
    } else {
        eprintln!("verification failed: {:.6e} > {:e}", report.max_rel_err, args.max_rel_err);
        ExitCode::from(EXIT_VERIFY)
    }
}

fn cmd_props(args: PropsArgs) -> ExitCode {
    let cfg = PropsConfig {
        seed: args.seed,
        cases: args.cases,
        c1_scale: 1.0,
    };
    let report = run_props(&cfg);
    println!("{report}");
    if report.total_violations() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Props(args) => cmd_props(args),
    }
}
