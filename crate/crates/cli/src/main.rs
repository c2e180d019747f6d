//! `privtraj`: corpus synthesis/ingestion, privacy perturbation, attack
//! injection, anomaly detection and the full evaluation grid, as composable
//! file-to-file stages.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 refused
//! budget (pairwise-distance work would exceed the configured cap).

mod commands;
mod config;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use privtraj_core::attack::OdMode;
use privtraj_core::eval::DetectorKind;
use privtraj_core::seq::SeqModelConfig;
use privtraj_core::synth::SynthParams;
use privtraj_core::Error;

use commands::{AttackArgs, DetectArgs, PerturbArgs};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "privtraj",
    about = "Quantify the tradeoff between location privacy and trajectory anomaly detection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOut {
    /// Output file or directory.
    #[arg(long, env = "PRIVTRAJ_OUT")]
    out: PathBuf,
    #[arg(long, default_value_t = 42, env = "PRIVTRAJ_SEED")]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trip corpus in the Porto CSV schema.
    Synth {
        #[command(flatten)]
        common: CommonOut,
        #[arg(long, default_value_t = 2000)]
        n_trips: usize,
        #[arg(long, default_value_t = 50)]
        n_od_pairs: usize,
        #[arg(long, default_value_t = 4000.0)]
        grid_extent_m: f64,
        #[arg(long, default_value_t = 10.0)]
        speed_mps: f64,
        #[arg(long, default_value_t = 15.0)]
        sample_period_s: f64,
        #[arg(long, default_value_t = 12.0)]
        jitter_m: f64,
        #[arg(long, default_value_t = 200.0)]
        cell_side_m: f64,
    },
    /// Ingest a Porto-format CSV, applying the quality filters.
    Ingest {
        /// Source CSV.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOut,
        /// Keep trajectories with strictly more points than this.
        #[arg(long, default_value_t = 25)]
        min_points: usize,
        #[arg(long, default_value_t = 200.0)]
        cell_side_m: f64,
    },
    /// Obfuscate a corpus with an epsilon-geo-indistinguishable mechanism.
    Perturb {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOut,
        /// none | location | trajectory
        #[arg(long, env = "PRIVTRAJ_PRIVACY")]
        privacy: String,
        /// Per-point privacy parameter, 1/meters.
        #[arg(long, env = "PRIVTRAJ_EPSILON")]
        epsilon: Option<f64>,
        /// Predictive threshold as a multiple of 1/epsilon.
        #[arg(long, default_value_t = 2.0)]
        threshold_factor: f64,
        /// Budget fraction spent on the predictive test.
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
    },
    /// Inject malicious counterparts of test trips into a corpus.
    Attack {
        #[arg(long)]
        input: PathBuf,
        /// Output directory (attacked.csv, manifest.csv, split.csv).
        #[arg(long, env = "PRIVTRAJ_OUT")]
        out: PathBuf,
        #[arg(long, default_value_t = 42, env = "PRIVTRAJ_SEED")]
        seed: u64,
        /// Per-point displacement, meters.
        #[arg(long, default_value_t = 300.0, env = "PRIVTRAJ_C")]
        c: f64,
        /// Tampered-point fraction.
        #[arg(long, default_value_t = 0.5, env = "PRIVTRAJ_Q")]
        q: f64,
        /// same | shifted
        #[arg(long, default_value = "same", env = "PRIVTRAJ_OD")]
        od: String,
        /// Fraction of test trips that get a malicious counterpart.
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,
        #[arg(long, default_value_t = 5)]
        per_group: usize,
        #[arg(long, default_value_t = 200.0)]
        cell_side_m: f64,
    },
    /// Score test trips with one detector.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: CommonOut,
        /// dbscan | seq
        #[arg(long, env = "PRIVTRAJ_DETECTOR")]
        detector: String,
        #[arg(long, default_value_t = 200.0)]
        cell_side_m: f64,
        #[arg(long, default_value_t = 3)]
        min_pts: usize,
        /// Pairwise-distance budget; exceeding it refuses with exit code 3.
        #[arg(long, default_value_t = 2_000_000)]
        max_pairs: u64,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        /// Load a sequence-model checkpoint instead of training.
        #[arg(long)]
        model_in: Option<PathBuf>,
        /// Save the trained sequence model.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Run the full privacy x intent x detector grid from a config file.
    Experiment {
        /// JSON run configuration; defaults apply when omitted.
        #[arg(long, env = "PRIVTRAJ_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "PRIVTRAJ_SEED")]
        seed: Option<u64>,
        #[arg(long, env = "PRIVTRAJ_OUT")]
        out: Option<PathBuf>,
        /// Worker threads for parallel stages.
        #[arg(long, env = "PRIVTRAJ_JOBS")]
        jobs: Option<usize>,
    },
    /// Re-render summary and plots from an existing results directory.
    Report {
        /// Results directory produced by `experiment`.
        #[arg(long)]
        results: PathBuf,
        #[arg(long, env = "PRIVTRAJ_OUT")]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 1,
        Error::PairBudgetExceeded { .. } | Error::BruteForceTooLarge { .. } => 3,
        _ => 2,
    }
}

fn run() -> privtraj_core::Result<()> {
    match Cli::parse().command {
        Command::Synth {
            common,
            n_trips,
            n_od_pairs,
            grid_extent_m,
            speed_mps,
            sample_period_s,
            jitter_m,
            cell_side_m,
        } => {
            let params = SynthParams {
                n_trips,
                n_od_pairs,
                grid_extent_m,
                speed_mps,
                sample_period_s,
                jitter_m,
                seed: common.seed,
            };
            commands::cmd_synth(&params, &common.out, cell_side_m)
        }
        Command::Ingest {
            input,
            common,
            min_points,
            cell_side_m,
        } => commands::cmd_ingest(&input, &common.out, min_points, cell_side_m),
        Command::Perturb {
            input,
            common,
            privacy,
            epsilon,
            threshold_factor,
            test_fraction,
        } => {
            let args = PerturbArgs {
                privacy,
                epsilon,
                threshold_factor,
                test_fraction,
                seed: common.seed,
            };
            commands::cmd_perturb(&input, &common.out, &args)
        }
        Command::Attack {
            input,
            out,
            seed,
            c,
            q,
            od,
            fraction,
            per_group,
            cell_side_m,
        } => {
            let args = AttackArgs {
                c_m: c,
                q,
                od: OdMode::parse(&od)?,
                fraction,
                per_group,
                cell_side_m,
                seed,
            };
            commands::cmd_attack(&input, &out, &args)
        }
        Command::Detect {
            input,
            split,
            manifest,
            common,
            detector,
            cell_side_m,
            min_pts,
            max_pairs,
            epochs,
            model_in,
            model_out,
        } => {
            let args = DetectArgs {
                detector: DetectorKind::parse(&detector)?,
                cell_side_m,
                min_pts,
                max_pairs,
                seq: SeqModelConfig {
                    epochs,
                    ..Default::default()
                },
                model_in,
                model_out,
                seed: common.seed,
            };
            commands::cmd_detect(&input, &split, &manifest, &common.out, &args)
        }
        Command::Experiment {
            config,
            seed,
            out,
            jobs,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.out_dir = out.display().to_string();
            }
            if let Some(jobs) = jobs {
                cfg.jobs = Some(jobs);
            }
            cfg.validate()?;
            cfg.resolve_seeds();
            if let Some(jobs) = cfg.jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global()
                    .map_err(|e| Error::invalid(format!("cannot size thread pool: {e}")))?;
            }
            commands::cmd_experiment(&cfg)
        }
        Command::Report { results, out } => commands::cmd_report(&results, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
