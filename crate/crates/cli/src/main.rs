use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gwkae::commands;
use gwkae::{CliError, PipelineConfig};

#[derive(Parser)]
#[command(name = "gwkae", version, about = "Baseline-free guided-wave damage detection and localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate baseline and damaged datasets.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the autoencoder on the baseline dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Calibrate per-region thresholds on held-out baselines.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Write a health report per region.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Exit with status 4 when any region is damaged.
        #[arg(long)]
        fail_on_damage: bool,
    },
    /// Image damaged regions and merge their peaks.
    Localize {
        #[command(flatten)]
        common: Common,
        /// Pixel pitch, mm.
        #[arg(long)]
        grid_res: Option<f64>,
        /// Image with the k highest-DI paths of each region.
        #[arg(long)]
        top_k: Option<usize>,
        /// Tent width on the ellipse-excess axis.
        #[arg(long)]
        r: Option<f64>,
        /// Merge distance, mm.
        #[arg(long)]
        merge_threshold: Option<f64>,
    },
    /// Score final damages against the truth manifest.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Characteristic length of the relative error, mm.
        #[arg(long = "L")]
        length: Option<f64>,
    },
}

fn load(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli, log: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, seed } => {
            let mut cfg = load(&common)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            commands::cmd_simulate(&cfg, log)
        }
        Command::Train {
            common,
            seed,
            epochs,
            lr,
            batch,
        } => {
            let mut cfg = load(&common)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.train.epochs = epochs.unwrap_or(cfg.train.epochs);
            cfg.train.learning_rate = lr.unwrap_or(cfg.train.learning_rate);
            cfg.train.batch_size = batch.unwrap_or(cfg.train.batch_size);
            commands::cmd_train(&cfg, log)
        }
        Command::Calibrate { common } => commands::cmd_calibrate(&load(&common)?, log),
        Command::Detect { common, fail_on_damage } => {
            commands::cmd_detect(&load(&common)?, fail_on_damage, log).map(drop)
        }
        Command::Localize {
            common,
            grid_res,
            top_k,
            r,
            merge_threshold,
        } => {
            let mut cfg = load(&common)?;
            cfg.imaging.resolution = grid_res.unwrap_or(cfg.imaging.resolution);
            cfg.imaging.top_k = top_k.or(cfg.imaging.top_k);
            cfg.imaging.r = r.unwrap_or(cfg.imaging.r);
            cfg.merge.distance_threshold = merge_threshold.unwrap_or(cfg.merge.distance_threshold);
            commands::cmd_localize(&cfg, log).map(drop)
        }
        Command::Evaluate { common, length } => {
            let mut cfg = load(&common)?;
            cfg.metrics.length_mm = length.unwrap_or(cfg.metrics.length_mm);
            commands::cmd_evaluate(&cfg, log).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
