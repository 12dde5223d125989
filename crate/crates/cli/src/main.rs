//! `resonances`: validation, simulation, Σ estimation, twist sweeps, cover
//! spectra, density studies and the acceptance suite for Sinai billiards on
//! Abelian covers.
//!
//! Exit status: 0 on success, 1 on domain errors or failed checks, 2 on
//! configuration errors.

mod config;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{config_error, ConfigError, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "resonances", version, about = "Ruelle resonances of Sinai billiards on Abelian covers via twisted Ulam operators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Experiment config (TOML); built-in reference defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Refuse partitions with more cells than this.
    #[arg(long, global = true)]
    max_cells: Option<usize>,
    /// Abort long sweeps once this much wall time has passed.
    #[arg(long, global = true)]
    budget_minutes: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Geometry checks: overlaps, finite horizon, τ bounds.
    Validate,
    /// Trajectory dump to orbit.csv.
    Orbit {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Green–Kubo and CLT estimates of Σ.
    Sigma,
    /// Leading eigenvalue λ_w along a line or over a torus grid.
    Curve {
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Cover spectrum for one lattice, given as a,b,c,d (rows).
    Cover {
        #[arg(long, value_delimiter = ',')]
        lattice: Option<Vec<i64>>,
    },
    /// Family sweep of window counts and densities.
    Density {
        #[arg(long)]
        family: Option<u8>,
        #[arg(long = "N", value_delimiter = ',')]
        n: Option<Vec<i64>>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Runs the acceptance suite and prints PASS/FAIL per criterion.
    Check {
        /// Only these criteria (comma separated ids).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u8>>,
    },
}

fn resolve(global: &Global) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &global.out {
        cfg.out = o.clone();
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = resolve(&cli.global).and_then(|mut cfg| {
        match cli.command {
            Command::Validate => run::validate(&cfg, &cli.global),
            Command::Orbit { steps } => {
                if let Some(s) = steps {
                    cfg.orbit.steps = s;
                }
                run::orbit(&cfg, &cli.global)
            }
            Command::Sigma => run::sigma(&cfg, &cli.global),
            Command::Curve { grid } => {
                if grid.is_some() {
                    cfg.curve.grid = grid;
                }
                run::curve(&cfg, &cli.global)
            }
            Command::Cover { lattice } => {
                if let Some(l) = lattice {
                    if l.len() != 4 {
                        return Err(config_error(format!("--lattice takes four integers a,b,c,d, got {}", l.len())));
                    }
                    cfg.lattice = [[l[0], l[1]], [l[2], l[3]]];
                }
                run::cover(&cfg, &cli.global)
            }
            Command::Density { family, n, bins } => {
                if let Some(f) = family {
                    cfg.family = f;
                }
                if let Some(n) = n {
                    cfg.n_list = n;
                }
                if let Some(b) = bins {
                    cfg.bins = b;
                }
                cfg.check()?;
                run::density(&cfg, &cli.global)
            }
            Command::Check { only } => run::check(&cfg, &cli.global, only.as_deref()),
        }
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
