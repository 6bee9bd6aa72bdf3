//! `fockmarket run <config>` and `fockmarket verify <config>`.
//!
//! Exit codes: 0 success, 1 runtime or model error (or a fixture mismatch),
//! 2 configuration error.

mod config;
mod plot;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use config::{parse_config, ConfigError, ScenarioConfig};
use run::{run_scenario, Outputs};

#[derive(Parser)]
#[command(name = "fockmarket", version, about = "Fock-space market scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (or its sweep) and write CSV, reports and a manifest.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render SVG plots of every CSV written.
        #[arg(long)]
        plots: bool,
        /// Worker threads for sweeps.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-run a scenario in memory and compare against its fixtures.
    Verify {
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs every sweep point (or the single configuration) and returns all
/// outputs keyed by path relative to the output directory.
fn execute(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<Outputs, CliError> {
    if cfg.sweep.is_empty() {
        return run_scenario(cfg).map_err(|e| CliError::Model(format!("{}: {e}", cfg.name)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Model(e.to_string()))?;
    let results: Vec<_> = pool.install(|| {
        cfg.sweep
            .par_iter()
            .map(|r| {
                run_scenario(&r.config)
                    .map(|out| (r, out))
                    .map_err(|e| CliError::Model(format!("{} ({}): {e}", r.dir, r.label)))
            })
            .collect()
    });
    let mut all = Outputs::new();
    let mut index = String::new();
    for result in results {
        let (r, out) = result?;
        index.push_str(&format!("{}={}\n", r.dir, r.label));
        for (name, content) in out {
            all.insert(format!("{}/{name}", r.dir), content);
        }
    }
    all.insert("sweep.txt".into(), index);
    Ok(all)
}

fn add_plots(outputs: &mut Outputs) {
    let plots: Vec<(String, String)> = outputs
        .iter()
        .filter_map(|(name, content)| {
            let stem = name.strip_suffix(".csv")?;
            plot::svg_from_csv(content, stem).map(|svg| (format!("{stem}.svg"), svg))
        })
        .collect();
    outputs.extend(plots);
}

fn manifest(outputs: &Outputs) -> String {
    outputs
        .iter()
        .map(|(name, content)| format!("{name}={}\n", hex::encode(Sha256::digest(content))))
        .collect()
}

fn cmd_run(
    path: &Path,
    out: Option<PathBuf>,
    plots: bool,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let cfg = parse_config(path)?;
    let dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("fockmarket-out"));
    let mut outputs = execute(&cfg, jobs)?;
    if plots || cfg.plots {
        add_plots(&mut outputs);
    }
    let manifest = manifest(&outputs);
    for (name, content) in &outputs {
        let file = dir.join(name);
        if let Some(parent) = file.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        std::fs::write(&file, content).map_err(io_err(&file))?;
    }
    let file = dir.join("manifest.txt");
    std::fs::write(&file, manifest).map_err(io_err(&file))?;
    println!("wrote {} files to {}", outputs.len() + 1, dir.display());
    Ok(())
}

fn cmd_verify(path: &Path, jobs: Option<usize>) -> Result<(), CliError> {
    let cfg = parse_config(path)?;
    let Some(fixtures) = &cfg.fixtures else {
        return Err(ConfigError::Invalid(vec!["output.fixtures: required by verify".into()]).into());
    };
    let outputs = execute(&cfg, jobs)?;
    let mut problems = Vec::new();
    for (name, content) in &outputs {
        let file = fixtures.join(name);
        match std::fs::read_to_string(&file) {
            Ok(expected) if expected == *content => {}
            Ok(expected) => problems.push(first_difference(name, &expected, content)),
            Err(_) => problems.push(format!("{name}: no fixture at {}", file.display())),
        }
    }
    if problems.is_empty() {
        println!("{} outputs match fixtures", outputs.len());
        Ok(())
    } else {
        Err(CliError::Mismatch(problems.join("\n")))
    }
}

fn first_difference(name: &str, expected: &str, actual: &str) -> String {
    let mut e = expected.lines();
    let mut a = actual.lines();
    for line in 1.. {
        match (e.next(), a.next()) {
            (Some(x), Some(y)) if x == y => continue,
            (x, y) => {
                return format!(
                    "{name}: line {line} differs\n  fixture: {}\n  run:     {}",
                    x.unwrap_or("<end>"),
                    y.unwrap_or("<end>")
                )
            }
        }
    }
    unreachable!()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            plots,
            jobs,
        } => cmd_run(&config, out, plots, jobs),
        Command::Verify { config, jobs } => cmd_verify(&config, jobs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
