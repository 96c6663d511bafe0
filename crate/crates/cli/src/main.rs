//! `edlab` — batch experiment runner.
//!
//! Exit status: 0 all selected invariants pass; 2 config parse/validation
//! error; 3 capacity error; 4 numerical failure or failed invariants.

use anyhow::Result;
use clap::{Parser, Subcommand};
use edlab_cli::config::ExperimentConfig;
use edlab_cli::recipes;
use edlab_cli::report::RunReport;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "edlab", version, about = "Finite-lattice laboratory experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available experiments.
    List,
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for (name, desc) in recipes::EXPERIMENTS {
                println!("{name:22} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match validate(&config) {
            Ok(k) => {
                println!("ok: configuration space K = {k}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(classify(&e))
            }
        },
        Command::Run { config, seed, out } => match run(&config, seed, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => {
                eprintln!("error: one or more invariants failed");
                ExitCode::from(4)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(classify(&e))
            }
        },
    }
}

fn validate(path: &PathBuf) -> Result<u128> {
    let (cfg, _text) = ExperimentConfig::from_path(path)?;
    let spec = cfg.lattice.to_spec();
    let k = spec.config_count();
    // experiments that enumerate the space must fit the cap; the coulomb
    // suite works on the spatial lattice only
    if cfg.experiment != "coulomb" && k > spec.max_configs as u128 {
        anyhow::bail!("{}", edlab_core::EdError::Capacity { configs: k, cap: spec.max_configs });
    }
    Ok(k)
}

fn run(path: &PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<bool> {
    let (mut cfg, text) = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.experiment != "coulomb" {
        let spec = cfg.lattice.to_spec();
        let k = spec.config_count();
        if k > spec.max_configs as u128 {
            anyhow::bail!("{}", edlab_core::EdError::Capacity { configs: k, cap: spec.max_configs });
        }
    }
    let out_dir = out
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}", cfg.experiment)));
    let hash = ExperimentConfig::content_hash(&text);
    let mut report = RunReport::new(&out_dir, &cfg.experiment, cfg.seed, &hash)?;
    let summary = recipes::run(&cfg, &mut report)?;
    report.finish(&summary)?;
    for check in &summary.checks {
        println!(
            "{} {:40} value {:.6e} threshold {:.6e} ({})",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.value,
            check.threshold,
            check.cmp,
        );
    }
    println!(
        "{}: {} in {:.2}s -> {}",
        cfg.experiment,
        if summary.passed { "ok" } else { "FAILED" },
        summary.elapsed_seconds,
        out_dir.display()
    );
    Ok(summary.passed)
}

/// Map an error chain to the documented exit codes.
fn classify(e: &anyhow::Error) -> u8 {
    let msg = format!("{e:#}");
    if msg.contains("config parse error")
        || msg.contains("unknown experiment")
        || msg.contains("invalid spec")
        || msg.contains("unknown initial state")
    {
        2
    } else if msg.contains("exceeds max_configs") {
        3
    } else {
        4
    }
}
