//! `oblique`: run scenario files against the oblique library.
//!
//! Exit codes: 0 when every scenario passes its gates, 1 when any scenario
//! fails or errors, 2 for unreadable or invalid configs and bad arguments.

mod config;
mod output;
mod presets;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Config, Scenario, Task, DEFAULT_SEED};
use tasks::Report;

#[derive(Parser)]
#[command(name = "oblique", version, about = "Moving non-orthogonal basis simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario in a config file.
    Run {
        config: PathBuf,
        /// Run scenarios on separate threads.
        #[arg(long)]
        parallel: bool,
    },
    /// Run the connection identity suite on a built-in family and print JSON.
    Verify {
        /// One of rotating2d, breathing2d, overlap_pair_symmetric,
        /// overlap_pair_pinned, gaussian_chain, two_level_sphere.
        family: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// Run the dt_sweep scenarios of a config with a given number of halvings.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        halvings: usize,
    },
}

fn load(path: &Path) -> Result<Config, ExitCode> {
    Config::load(path).map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(2)
    })
}

fn execute(config: &Config, config_path: &Path, selected: &[&Scenario], halvings: Option<usize>, parallel: bool) -> ExitCode {
    let dir = output::resolve_dir(config_path, config.output_dir.as_deref());
    let run_one = |s: &Scenario| tasks::run(s, config.seed_for(s), halvings);
    let results: Vec<oblique::Result<Report>> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = selected.iter().map(|s| scope.spawn(move || run_one(s))).collect();
            handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
        })
    } else {
        selected.iter().map(|s| run_one(s)).collect()
    };

    let mut failures = Vec::new();
    for (scenario, result) in selected.iter().zip(results) {
        match result {
            Ok(report) => {
                let path = dir.join(scenario.output_path());
                let status = if report.passed { "PASS" } else { "FAIL" };
                println!("{} [{status}] {}: {}", scenario.name, scenario.task.name(), report.summary);
                if let Err(e) = output::write(&report, scenario.format(), &path) {
                    eprintln!("{}: cannot write {}: {e}", scenario.name, path.display());
                    failures.push(format!("{}: io error", scenario.name));
                } else if !report.passed {
                    failures.push(format!("{}: {}", scenario.name, report.summary));
                }
            }
            Err(e) => {
                println!("{} [ERROR] {}: {e}", scenario.name, scenario.task.name());
                failures.push(format!("{}: {e}", scenario.name));
            }
        }
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} of {} scenarios failed:", failures.len(), selected.len());
        for f in &failures {
            eprintln!("  {f}");
        }
        ExitCode::from(1)
    }
}

fn verify(name: &str, seed: u64, points: usize) -> ExitCode {
    let Some(family) = presets::family(name) else {
        eprintln!("unknown family `{name}`; expected one of {}", presets::NAMES.join(", "));
        return ExitCode::from(2);
    };
    if points == 0 {
        eprintln!("--points must be at least 1");
        return ExitCode::from(2);
    }
    let scenario = Scenario {
        name: format!("verify-{name}"),
        family,
        task: Task::VerifyIdentities {
            points,
            fd_step: 1e-4,
            tolerance: 1e-10,
            fd_tolerance: 1e-6,
        },
        seed: Some(seed),
        trajectory: None,
        hamiltonian: None,
        output: None,
    };
    match tasks::run(&scenario, seed, None) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.json).expect("json"));
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, parallel } => match load(&config) {
            Ok(cfg) => {
                let all: Vec<&Scenario> = cfg.scenarios.iter().collect();
                execute(&cfg, &config, &all, None, parallel)
            }
            Err(code) => code,
        },
        Command::Sweep { config, halvings } => {
            if halvings == 0 {
                eprintln!("--halvings must be at least 1");
                return ExitCode::from(2);
            }
            match load(&config) {
                Ok(cfg) => {
                    let sweeps: Vec<&Scenario> = cfg
                        .scenarios
                        .iter()
                        .filter(|s| matches!(s.task, Task::DtSweep { .. }))
                        .collect();
                    if sweeps.is_empty() {
                        eprintln!("{} has no dt_sweep scenarios", config.display());
                        return ExitCode::from(2);
                    }
                    execute(&cfg, &config, &sweeps, Some(halvings), false)
                }
                Err(code) => code,
            }
        }
        Command::Verify { family, seed, points } => verify(&family, seed, points),
    }
}
