use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fast3r_cli::commands;
use fast3r_cli::commands::export_ply::CloudSource;
use fast3r_cli::config::RunConfig;
use fast3r_cli::error::{exit_code_for, ConfigError, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "fast3r",
    about = "Single-pass multi-view pointmap reconstruction at desk scale",
    version
)]
struct Cli {
    /// JSON run configuration (model/train/ransac/loss/data sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed derived from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Force fully serialized execution.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset.
    GenData {
        /// Output dataset file.
        #[arg(long)]
        out: PathBuf,
        /// Scene count override.
        #[arg(long)]
        scenes: Option<usize>,
        /// Views per scene override.
        #[arg(long)]
        views: Option<usize>,
    },
    /// Train a model on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory (checkpoints + train.log).
        #[arg(long)]
        out: PathBuf,
        /// Resume from a checkpoint that carries optimizer state.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Total step override.
        #[arg(long)]
        steps: Option<u64>,
        /// Re-run training once per views-per-sample value, e.g. 2,4,8.
        #[arg(long, value_delimiter = ',')]
        views_sweep: Vec<usize>,
    },
    /// Run inference over a dataset's images.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Output prediction file.
        #[arg(long)]
        out: PathBuf,
        /// Use only this many views per sample.
        #[arg(long)]
        views: Option<usize>,
        /// Assign consecutive slots 1..=N instead of pool sampling.
        #[arg(long)]
        consecutive_indices: bool,
    },
    /// Camera-pose metrics from predicted (or ground-truth) pointmaps.
    EvalPose {
        /// Prediction bundle file, or a dataset file to use ground truth as
        /// the prediction.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Directory for the metrics report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Estimate an independent focal per view instead of sharing view
        /// 1's estimate.
        #[arg(long)]
        per_view_focal: bool,
        /// Also write the estimated camera list here.
        #[arg(long)]
        poses_out: Option<PathBuf>,
    },
    /// Reconstruction and depth metrics.
    EvalRecon {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward-pass timing and memory across view counts.
    Benchmark {
        #[arg(long)]
        checkpoint: PathBuf,
        /// View counts, e.g. 2,4,8,16,32.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        views: Vec<usize>,
        /// Square image side used for the synthetic benchmark inputs.
        #[arg(long, default_value_t = 32)]
        size: usize,
        /// Activation-memory cap before a row is marked failed.
        #[arg(long, default_value_t = 2.0)]
        mem_limit_gb: f64,
        /// Output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a colored point cloud as binary PLY.
    ExportPly {
        /// Dataset file (provides images, masks, and the fallback cloud).
        #[arg(long)]
        dataset: PathBuf,
        /// Optional prediction file; without it the ground truth is exported.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Sample index within the files.
        #[arg(long, default_value_t = 0)]
        sample: usize,
        /// Cloud source: global or local-aligned.
        #[arg(long, default_value = "global")]
        source: String,
        /// Keep only points with raw confidence at or above this value.
        #[arg(long)]
        conf_threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let jobs = if cli.deterministic { 1 } else { cli.jobs };
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }

    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.data.seed = seed;
        cfg.train.seed = seed;
        cfg.ransac.seed = seed;
    }

    match cli.command {
        Command::GenData { out, scenes, views } => {
            let mut data = cfg.data;
            if let Some(s) = scenes {
                data.n_scenes = s;
            }
            if let Some(v) = views {
                data.views_per_scene = v;
            }
            commands::gen_data::run(&data, &out)
        }
        Command::Train {
            dataset,
            out,
            resume,
            steps,
            views_sweep,
        } => {
            let mut train = cfg.train;
            if let Some(s) = steps {
                train.total_steps = s;
            }
            commands::train::run(
                &cfg.model,
                &train,
                &dataset,
                &out,
                resume.as_deref(),
                &views_sweep,
            )
        }
        Command::Infer {
            checkpoint,
            dataset,
            out,
            views,
            consecutive_indices,
        } => commands::infer::run(
            &checkpoint,
            &dataset,
            &out,
            views,
            consecutive_indices,
            cli.seed.unwrap_or(0),
        ),
        Command::EvalPose {
            predictions,
            ground_truth,
            out,
            per_view_focal,
            poses_out,
        } => commands::eval_pose::run(
            &predictions,
            &ground_truth,
            &cfg.ransac,
            !per_view_focal,
            out.as_deref(),
            poses_out.as_deref(),
        ),
        Command::EvalRecon {
            predictions,
            ground_truth,
            out,
        } => commands::eval_recon::run(&predictions, &ground_truth, out.as_deref()),
        Command::Benchmark {
            checkpoint,
            views,
            size,
            mem_limit_gb,
            out,
        } => commands::benchmark::run(
            &checkpoint,
            views,
            size,
            mem_limit_gb,
            cli.seed.unwrap_or(0),
            out.as_deref(),
        )
        .map(|_| ()),
        Command::ExportPly {
            dataset,
            predictions,
            sample,
            source,
            conf_threshold,
            out,
        } => {
            let source = match source.as_str() {
                "global" => CloudSource::Global,
                "local-aligned" => CloudSource::LocalAligned,
                other => {
                    return Err(ConfigError(format!(
                        "unknown --source {other}; expected global or local-aligned"
                    ))
                    .into())
                }
            };
            commands::export_ply::run(
                &dataset,
                predictions.as_deref(),
                sample,
                source,
                conf_threshold,
                &out,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep clap's rendered help/usage text, but pin the exit code to
            // the documented usage value (help/version still exit 0).
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
