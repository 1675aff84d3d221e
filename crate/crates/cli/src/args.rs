//! Command-line surface. Flags override the fields of `--config`; the
//! resolved job is what gets stored in the output manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mesoshrink_core::Scenario;

use crate::config::{JobConfig, Net, Preset};
use crate::{run_job, CliError, Report};

#[derive(Debug, Parser)]
#[command(
    name = "mesoshrink",
    version,
    about = "Shrinkage damage datasets, surrogates and statistics"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `uniform` or `nonuniform`.
    #[arg(long, global = true)]
    pub scenario: Option<Scenario>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MESOSHRINK_WORKERS")]
    pub workers: Option<usize>,
    /// Job configuration JSON; a stored manifest works too.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Cap on the number of samples (0 = all).
    #[arg(short = 'n', long, global = true)]
    pub count: Option<usize>,
    /// Microstructure dataset.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Simulated trajectories of `--data`.
    #[arg(long, global = true)]
    pub sims: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate microstructures.
    Gen,
    /// Run the damage solver on every sample of a dataset.
    Simulate {
        /// Also simulate an aggregate-free control cell.
        #[arg(long)]
        control: bool,
    },
    /// Train the damage U-Net or the property CNN.
    Train {
        #[arg(long, value_enum)]
        net: Option<Net>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Predict damage trajectories (and properties) with trained networks.
    Rollout {
        #[arg(long)]
        unet: Option<PathBuf>,
        #[arg(long)]
        cnn: Option<PathBuf>,
    },
    /// Compare predictions against reference simulations.
    Eval {
        #[arg(long)]
        pred: Option<PathBuf>,
    },
    /// Derived datasets and dataset statistics.
    Explore {
        #[command(subcommand)]
        mode: Explore,
    },
}

#[derive(Debug, Subcommand)]
pub enum Explore {
    /// Radially smooth the particles of a sampled subset.
    Smooth {
        #[arg(long)]
        subset: Option<usize>,
        /// Fixed threshold instead of a draw from [0.1, 0.5].
        #[arg(long)]
        s_bar: Option<f64>,
    },
    /// Replace the aggregate of a cover layer with mortar.
    EraseLayer {
        #[arg(long)]
        subset: Option<usize>,
        /// Fixed thickness in pixels instead of a draw from {5, 10, 15, 25, 30}.
        #[arg(long)]
        thickness: Option<usize>,
    },
    /// Scatter, cluster, binned and row-profile tables.
    Stats {
        #[arg(long)]
        compare_data: Option<PathBuf>,
        #[arg(long)]
        compare_sims: Option<PathBuf>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl Cli {
    /// Merges flags into the configuration file (or the defaults).
    pub fn resolve(self) -> Result<JobConfig, CliError> {
        let c = self.common;
        let mut job = match &c.config {
            Some(path) => load_config(path)?,
            None => JobConfig::default(),
        };
        set(&mut job.scenario, c.scenario);
        set(&mut job.seed, c.seed);
        set(&mut job.count, c.count);
        set_opt(&mut job.data, c.data);
        set_opt(&mut job.sims, c.sims);
        job.out = c.out;
        job.workers = c
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if job.workers == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        job.command = match self.command {
            Command::Gen => "gen".into(),
            Command::Simulate { control } => {
                job.control |= control;
                "simulate".into()
            }
            Command::Train {
                net,
                preset,
                epochs,
                batch_size,
                lr,
            } => {
                set_opt(&mut job.net, net);
                set(&mut job.preset, preset);
                set(&mut job.train.epochs, epochs);
                set(&mut job.train.batch_size, batch_size);
                set(&mut job.train.learning_rate, lr);
                "train".into()
            }
            Command::Rollout { unet, cnn } => {
                set_opt(&mut job.unet, unet);
                set_opt(&mut job.cnn, cnn);
                "rollout".into()
            }
            Command::Eval { pred } => {
                set_opt(&mut job.pred, pred);
                "eval".into()
            }
            Command::Explore { mode } => match mode {
                Explore::Smooth { subset, s_bar } => {
                    set(&mut job.explore.subset, subset);
                    set_opt(&mut job.explore.s_bar, s_bar);
                    "explore-smooth".into()
                }
                Explore::EraseLayer { subset, thickness } => {
                    set(&mut job.explore.subset, subset);
                    set_opt(&mut job.explore.thickness, thickness);
                    "explore-erase-layer".into()
                }
                Explore::Stats {
                    compare_data,
                    compare_sims,
                } => {
                    set_opt(&mut job.compare_data, compare_data);
                    set_opt(&mut job.compare_sims, compare_sims);
                    "explore-stats".into()
                }
            },
        };
        Ok(job)
    }
}

/// Reads a job file, accepting either a bare configuration or a manifest
/// that embeds one.
fn load_config(path: &std::path::Path) -> Result<JobConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value = match value.get("config") {
        Some(inner) if value.get("entries").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parses `argv`, runs the job and maps the outcome to an exit code.
pub fn run_cli<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = cli.resolve().and_then(|job| {
        log::info!("{} ({} workers)", job.command, job.workers);
        run_job(&job)
    });
    match outcome {
        Ok(Report {
            written,
            skipped,
            failed,
        }) => {
            println!("done: {written} written, {skipped} already present, {failed} failed");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
