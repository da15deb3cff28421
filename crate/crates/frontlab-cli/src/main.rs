//! Command-line driver: run experiments from config files, list scenarios,
//! compare finished bundles, and resume checkpointed runs.
//!
//! Exit codes: 0 success (including clean early stops), 2 config problem,
//! 3 solver abort, 4 front-tracking ansatz failure.

use clap::{Parser, Subcommand};
use frontlab::config::{parse_config, RunConfig};
use frontlab::experiment::{
    compare_runs, resume_experiment, run_experiment_with, AbortKind, ExperimentOptions,
    ExperimentOutcome,
};
use frontlab::scenario::builtin_scenarios;
use frontlab::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER_ABORT: u8 = 3;
const EXIT_FRONT_ABORT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "frontlab",
    version,
    about = "Pseudo-spectral transport experiments with front-collapse diagnostics",
    after_help = "Set FRONTLAB_THREADS=<n> to cap the worker thread count."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment described by a config file
    Run {
        /// Path to a key = value config document
        config: PathBuf,
        /// Also dump every modulus probe pair to pairs.csv
        #[arg(long)]
        pairs: bool,
    },
    /// List the built-in scenarios and their parameters
    Scenarios,
    /// Summarize finished bundles side by side
    Compare {
        /// Bundle directories, compared in the given order
        #[arg(num_args = 1..)]
        dirs: Vec<PathBuf>,
    },
    /// Continue a checkpointed run toward its config's t_end
    Resume {
        /// A .ckpt file from a bundle's checkpoints directory
        checkpoint: PathBuf,
        /// Config to resume under; defaults to the bundle's own config.txt
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the target time
        #[arg(long)]
        t_end: Option<f64>,
        /// Where to write the resumed bundle; defaults to the original
        /// output directory with a "-resumed" suffix
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    frontlab::par::init_threads();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            match e {
                Error::Config(_) | Error::BundleMismatch(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn report_error(e: &Error) {
    match e {
        Error::Config(problems) => {
            eprintln!("config error:");
            for p in problems {
                eprintln!("  - {p}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

fn dispatch(cmd: Cmd) -> frontlab::Result<ExitCode> {
    match cmd {
        Cmd::Run { config, pairs } => {
            let cfg = load_config(&config)?;
            let outcome = run_experiment_with(&cfg, &ExperimentOptions { pair_dump: pairs })?;
            Ok(summarize(&outcome))
        }
        Cmd::Scenarios => {
            for s in builtin_scenarios() {
                println!("{}", s.name);
                println!("    {}", s.summary);
                for p in s.params {
                    println!("    {} = {} ({})", p.name, p.default, p.doc);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Compare { dirs } => {
            let cmp = compare_runs(&dirs)?;
            print!("{cmp}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Resume {
            checkpoint,
            config,
            t_end,
            output_dir,
        } => {
            let config_path = match config {
                Some(p) => p,
                None => bundle_config_for(&checkpoint)?,
            };
            let mut cfg = load_config(&config_path)?;
            if let Some(t) = t_end {
                cfg.solver.t_end = t;
            }
            cfg.output_dir = output_dir.unwrap_or_else(|| {
                let mut name = cfg.output_dir.as_os_str().to_os_string();
                name.push("-resumed");
                PathBuf::from(name)
            });
            let outcome = resume_experiment(&cfg, &checkpoint, &ExperimentOptions::default())?;
            Ok(summarize(&outcome))
        }
    }
}

fn load_config(path: &Path) -> frontlab::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config(&text)
}

/// The config.txt of the bundle a checkpoint belongs to
/// (<bundle>/checkpoints/<name>.ckpt).
fn bundle_config_for(checkpoint: &Path) -> frontlab::Result<PathBuf> {
    let candidate = checkpoint
        .parent()
        .and_then(Path::parent)
        .map(|d| d.join("config.txt"));
    match candidate {
        Some(p) if p.exists() => Ok(p),
        _ => Err(Error::Config(vec![format!(
            "no config.txt found next to {}; pass --config",
            checkpoint.display()
        )])),
    }
}

fn summarize(outcome: &ExperimentOutcome) -> ExitCode {
    println!("bundle: {}", outcome.bundle_dir.display());
    println!(
        "stop: {:?} at t = {} after {} steps, {} snapshots",
        outcome.stop,
        outcome.final_t,
        outcome.steps,
        outcome.rows.len()
    );
    if let Some(fit) = &outcome.fit {
        println!(
            "fit: {:?} a_hat = {:.4e} b_hat = {:.4e} max_violation = {:.3e} slope = {:.3e}{}",
            fit.model,
            fit.a_hat,
            fit.b_hat,
            fit.max_violation,
            fit.empirical_slope,
            match fit.slope_bound {
                Some(b) => format!(" bound = {b:.3e}"),
                None => String::new(),
            }
        );
    }
    match &outcome.abort {
        None => ExitCode::SUCCESS,
        Some(a) => {
            eprintln!("abort ({}) at t = {}: {}", a.kind, a.t, a.detail);
            match a.kind {
                AbortKind::Solver => ExitCode::from(EXIT_SOLVER_ABORT),
                AbortKind::Front => ExitCode::from(EXIT_FRONT_ABORT),
            }
        }
    }
}
