//! `pcd`: a single binary over the density-aware point-cloud pipeline.
//!
//! Every subcommand is deterministic given `--seed`, writes machine-readable
//! JSON to stdout, and logs to stderr. The `PCD_THREADS` environment
//! variable caps worker parallelism. Exit codes: 0 success, 2 usage,
//! 3 i/o, 4 parse/format, 5 validation, 6 infeasible or undefined, 1 other.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcd_core::PipelineConfig;

#[derive(Parser)]
#[command(name = "pcd", version, about = "Density-aware point-cloud pipeline kernels")]
struct Cli {
    /// Pipeline configuration file (JSON); defaults are built in.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Forward,
    Euclidean,
}

impl From<MetricArg> for pcd_core::partition::RangeMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Forward => Self::Forward,
            MetricArg::Euclidean => Self::Euclidean,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Natural,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    R11,
    R40,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    #[value(name = "3d")]
    ThreeD,
    Bev,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StageArg {
    Partition,
    Budget,
    Fps,
    BallQuery,
    Iou,
    Pipeline,
}

#[derive(Args)]
struct RegionArgs {
    /// Region boundaries b1,b2 in meters.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    boundaries: Option<Vec<f64>>,

    #[arg(long)]
    max_range: Option<f64>,

    /// Overlap in meters past each region's upper boundary.
    #[arg(long)]
    overlap: Option<f64>,

    #[arg(long, value_enum, default_value = "forward")]
    metric: MetricArg,
}

#[derive(Subcommand)]
enum Command {
    /// Per-region density statistics and a range histogram over a scan directory.
    Stats {
        /// Directory of velodyne .bin scans.
        #[arg(long)]
        input: PathBuf,

        #[command(flatten)]
        region: RegionArgs,

        /// Histogram bin width in meters.
        #[arg(long, default_value_t = 5.0)]
        bin_width: f64,

        /// Also write the histogram as CSV (bin_start,mean_count).
        #[arg(long)]
        csv: Option<PathBuf>,
    },

    /// Partition one scan into near/mid/far index sets.
    Partition {
        /// A velodyne .bin scan.
        #[arg(long)]
        input: PathBuf,

        #[command(flatten)]
        region: RegionArgs,

        /// Include the full index lists in the JSON output.
        #[arg(long)]
        emit_indices: bool,
    },

    /// Budget allocation plus the three-branch sampling and grouping pipeline.
    Sample {
        /// A velodyne .bin scan; omitted, a synthetic scene is generated.
        #[arg(long)]
        input: Option<PathBuf>,

        #[arg(long, value_enum, default_value = "4")]
        strategy: StrategyArg,

        #[arg(long)]
        total: Option<usize>,

        #[arg(long)]
        overlap: Option<f64>,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Use multi-scale (paired-radius) grouping instead of single-scale.
        #[arg(long)]
        msg: bool,

        /// JSON file with measured density statistics (from `pcd stats`).
        #[arg(long)]
        stats: Option<PathBuf>,
    },

    /// Flip/scale/rotation augmentation and ground-truth insertion.
    Augment {
        /// A velodyne .bin scan, or a dataset root with --build-db.
        #[arg(long)]
        input: PathBuf,

        /// KITTI label file for the scan.
        #[arg(long)]
        labels: Option<PathBuf>,

        /// KITTI calibration file for the scan.
        #[arg(long)]
        calib: Option<PathBuf>,

        #[arg(long)]
        flip_prob: Option<f64>,

        /// Scale range lo,hi.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        scale: Option<Vec<f64>>,

        /// Rotation range in radians (uniform in [-rot, rot]).
        #[arg(long)]
        rot: Option<f64>,

        /// Maximum ground-truth insertions from the database.
        #[arg(long)]
        gtaug: Option<usize>,

        /// Ground-truth database directory (read, or written with --build-db).
        #[arg(long)]
        db: Option<PathBuf>,

        /// Treat --input as a dataset root (velodyne/, label_2/, calib/) and
        /// build the database at --db instead of augmenting.
        #[arg(long)]
        build_db: bool,

        /// Minimum interior points for a database entry.
        #[arg(long, default_value_t = 5)]
        min_points: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Write the augmented scan here (velodyne .bin).
        #[arg(long)]
        output: Option<PathBuf>,
    },

    /// Average precision of detections against KITTI-style ground truth.
    Eval {
        /// Directory of per-frame detection files (score x y z l w h yaw).
        #[arg(long)]
        dets: PathBuf,

        /// Ground-truth root containing label_2/ and calib/.
        #[arg(long)]
        gts: PathBuf,

        #[arg(long, default_value_t = 0.7)]
        iou: f64,

        #[arg(long, value_enum, default_value = "r11")]
        mode: ModeArg,

        #[arg(long, value_enum, default_value = "3d")]
        kind: KindArg,
    },

    /// Wall-clock timing of a pipeline stage.
    Bench {
        #[arg(long, value_enum, default_value = "pipeline")]
        stage: StageArg,

        /// A velodyne .bin scan; omitted, a synthetic scene is generated.
        #[arg(long)]
        input: Option<PathBuf>,

        #[arg(long, default_value_t = 10)]
        reps: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Generate a synthetic scene (scan plus optional labels and calibration).
    Synth {
        /// Output velodyne .bin path.
        #[arg(long)]
        output: PathBuf,

        /// Also write a KITTI label file.
        #[arg(long)]
        labels: Option<PathBuf>,

        /// Also write the nominal KITTI calibration file.
        #[arg(long)]
        calib: Option<PathBuf>,

        /// Cars per region: near,mid,far.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        cars: Option<Vec<usize>>,

        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_thread_pool() {
    if let Ok(threads) = std::env::var("PCD_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("pcd: could not set thread pool: {e}");
                }
            }
            _ => eprintln!("pcd: ignoring invalid PCD_THREADS value {threads:?}"),
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use pcd_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Io { .. }) => 3,
        Some(E::MalformedFile { .. } | E::Parse { .. } | E::MissingField { .. }) => 4,
        Some(E::Validation(_) | E::Domain(_)) => 5,
        Some(
            E::InfeasibleStrategy(_)
            | E::InsufficientData(_)
            | E::UndefinedMetric(_)
            | E::Placement(_),
        ) => 6,
        None => {
            if err.downcast_ref::<std::io::Error>().is_some() {
                3
            } else {
                1
            }
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_thread_pool();
    let result = (|| -> anyhow::Result<()> {
        let config = load_config(&cli.config)?;
        match cli.command {
            Command::Stats {
                input,
                region,
                bin_width,
                csv,
            } => commands::stats::run(&config, &input, &region, bin_width, csv.as_deref()),
            Command::Partition {
                input,
                region,
                emit_indices,
            } => commands::partition::run(&config, &input, &region, emit_indices),
            Command::Sample {
                input,
                strategy,
                total,
                overlap,
                seed,
                msg,
                stats,
            } => commands::sample::run(
                &config,
                input.as_deref(),
                strategy,
                total,
                overlap,
                seed,
                msg,
                stats.as_deref(),
            ),
            Command::Augment {
                input,
                labels,
                calib,
                flip_prob,
                scale,
                rot,
                gtaug,
                db,
                build_db,
                min_points,
                seed,
                output,
            } => commands::augment::run(commands::augment::Request {
                config: &config,
                input: &input,
                labels: labels.as_deref(),
                calib: calib.as_deref(),
                flip_prob,
                scale: scale.map(|v| (v[0], v[1])),
                rot,
                gtaug,
                db: db.as_deref(),
                build_db,
                min_points,
                seed,
                output: output.as_deref(),
            }),
            Command::Eval {
                dets,
                gts,
                iou,
                mode,
                kind,
            } => commands::eval::run(&config, &dets, &gts, iou, mode, kind),
            Command::Bench {
                stage,
                input,
                reps,
                seed,
            } => commands::bench::run(&config, stage, input.as_deref(), reps, seed),
            Command::Synth {
                output,
                labels,
                calib,
                cars,
                seed,
            } => commands::synth::run(
                &output,
                labels.as_deref(),
                calib.as_deref(),
                cars.map(|v| [v[0], v[1], v[2]]),
                seed,
            ),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("pcd: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
