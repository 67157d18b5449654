//! `shelab` - experiment runner for the stochastic heat equation
//! Monte Carlo laboratory.
//!
//! Exit codes: 0 all verdicts pass, 1 any verdict failed or incomplete,
//! 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shelab_core::harness::{self, ExperimentConfig, OracleCache};
use shelab_core::Error;

#[derive(Parser)]
#[command(name = "shelab", version, about = "Monte Carlo lab for the stochastic heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Grid override "n_time x n_space x y_max", e.g. "512x512x7.0".
    #[arg(long)]
    grid: Option<String>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Render CSV + Markdown from a persisted record.
    Report { record: PathBuf },
    /// Print a registered oracle value (cached in <out>/oracle_cache.json).
    Oracle {
        name: String,
        params: Vec<f64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Fast internal consistency checks.
    Selftest,
}

fn parse_grid(text: &str) -> Result<(usize, usize, f64), String> {
    let parts: Vec<&str> = text.split('x').collect();
    if parts.len() != 3 {
        return Err(format!("expected n_time x n_space x y_max, got '{text}'"));
    }
    let n_time = parts[0].trim().parse().map_err(|e| format!("n_time: {e}"))?;
    let n_space = parts[1].trim().parse().map_err(|e| format!("n_space: {e}"))?;
    let y_max = parts[2].trim().parse().map_err(|e| format!("y_max: {e}"))?;
    Ok((n_time, n_space, y_max))
}

fn apply_overrides(config: &mut ExperimentConfig, ov: &Overrides) -> Result<(), String> {
    if let Some(seed) = ov.seed {
        config.master_seed = seed;
    }
    if let Some(workers) = ov.workers {
        config.workers = workers;
    }
    if let Some(grid) = &ov.grid {
        let (n_time, n_space, y_max) = parse_grid(grid)?;
        config.grid = harness::GridConfig { n_time, n_space, y_max };
    }
    if let Some(out) = &ov.out {
        config.out_dir = out.clone();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = apply_overrides(&mut cfg, &overrides) {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
            if let Err(e) = cfg.validate() {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
            match harness::run(&cfg) {
                Ok(record) => {
                    let record_path = cfg.out_dir.join("record.json");
                    println!(
                        "experiment {} finished in {:.1}s; record at {}",
                        record.experiment,
                        record.wall_clock_s,
                        record_path.display()
                    );
                    match harness::report(&record_path) {
                        Ok(true) => ExitCode::SUCCESS,
                        Ok(false) => ExitCode::from(1),
                        Err(e) => {
                            eprintln!("report error: {e}");
                            ExitCode::from(1)
                        }
                    }
                }
                Err(e @ Error::Config(_)) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Report { record } => match harness::report(&record) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("report error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Oracle { name, params, out } => {
            let mut cache = OracleCache::open(&out.join("oracle_cache.json"));
            match cache.compute_registered(&name, &params) {
                Ok(v) => {
                    let hit = if cache.last_was_hit { " (cached)" } else { "" };
                    println!("{name}({params:?}) = {v:.12e}{hit}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!(
                        "oracle error: {e}\nregistered: {}",
                        OracleCache::registered_names().join(", ")
                    );
                    ExitCode::from(2)
                }
            }
        }
        Command::Selftest => match selftest() {
            Ok(()) => {
                println!("selftest: ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("selftest failed: {e}");
                ExitCode::from(1)
            }
        },
    }
}

/// Small deterministic checks that the install is sound.
fn selftest() -> Result<(), Error> {
    use shelab_core::{heat_kernel, sample_sheet, sheet_covariance, GridSpec};

    let hk = heat_kernel(1.0, 0.0)?;
    if (hk - 0.3989422804014327).abs() > 1e-12 {
        return Err(Error::Domain(format!("heat kernel off: {hk}")));
    }
    if sheet_covariance(1.0, 2.0, 3.0, 1.0) != 1.0 {
        return Err(Error::Domain("sheet covariance off".into()));
    }
    let grid = GridSpec::new(16, 16, 4.0)?;
    let a = sample_sheet(grid, 42)?;
    let b = sample_sheet(grid, 42)?;
    if a.value(8, 20) != b.value(8, 20) {
        return Err(Error::Domain("sheet sampling not deterministic".into()));
    }
    let el = shelab_core::local_time::expected_local_time(0.5)?;
    if !(el > 0.0 && el < shelab_core::local_time::expected_local_time(1.0)?) {
        return Err(Error::Domain("local-time oracle not monotone".into()));
    }
    Ok(())
}
