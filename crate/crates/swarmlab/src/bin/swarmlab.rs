//! Command-line front end: run experiment configs, re-check existing traces,
//! and execute the built-in suites.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use swarmlab::config::ExperimentConfig;
use swarmlab::runner::{self, RunContext};

#[derive(Parser)]
#[command(
    name = "swarmlab",
    version,
    about = "p-alignment simulation laboratory"
)]
struct Cli {
    /// Output directory (default: config's output.dir, else $SWARMLAB_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rayon thread count (default: all cores). Traces are bitwise identical
    /// for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and evaluate its checks.
    Simulate { config: PathBuf },
    /// Evaluate checks against an existing trace CSV (no simulation).
    Analyze { trace: PathBuf, config: PathBuf },
    /// Run a built-in battery: paper-props, conservation, decay-rates.
    Suite { name: String },
}

fn load_config(path: &PathBuf) -> Result<(ExperimentConfig, PathBuf), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
    let cfg = ExperimentConfig::parse(&text).map_err(|e| e.to_string())?;
    let base = path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, base))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut ctx = RunContext {
        out_dir: cli.out,
        threads: cli.threads,
        seed_override: cli.seed,
        base_dir: PathBuf::from("."),
    };

    let result: Result<bool, String> = match &cli.command {
        Command::Simulate { config } => load_config(config).and_then(|(cfg, base)| {
            ctx.base_dir = base;
            let summary = runner::run_experiment(&cfg, &ctx).map_err(|e| e.to_string())?;
            for c in &summary.report.checks {
                println!(
                    "{:5} {:35} margin {:+.3e}{}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.margin,
                    match (c.fitted, c.predicted) {
                        (Some(f), Some(p)) => format!("  fitted {f:+.4} vs {p:+.4}"),
                        (Some(f), None) => format!("  fitted {f:+.4}"),
                        _ => String::new(),
                    }
                );
            }
            println!("artifacts: {}", summary.out_dir.display());
            Ok(summary.ok)
        }),
        Command::Analyze { trace, config } => load_config(config).and_then(|(cfg, base)| {
            ctx.base_dir = base;
            let summary = runner::analyze_trace(trace, &cfg, &ctx).map_err(|e| e.to_string())?;
            for c in &summary.report.checks {
                println!(
                    "{:5} {:35} margin {:+.3e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.margin
                );
            }
            Ok(summary.ok)
        }),
        Command::Suite { name } => runner::run_suite(name, &ctx)
            .map_err(|e| e.to_string())
            .map(|summary| {
                for m in &summary.members {
                    println!(
                        "{:5} {}{}",
                        if m.ok { "PASS" } else { "FAIL" },
                        m.name,
                        if m.failed_checks.is_empty() {
                            String::new()
                        } else {
                            format!("  [{}]", m.failed_checks.join(", "))
                        }
                    );
                }
                summary.all_pass
            }),
    };

    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
