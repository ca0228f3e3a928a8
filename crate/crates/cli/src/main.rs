//! `motionbias`: phantom generation, motion corruption, arm training and
//! reporting from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use motionbias_core::experiment::import::import_slice;
use motionbias_core::experiment::pipeline::MANIFEST_FILE;
use motionbias_core::experiment::{
    corrupt_manifest, report_runs, run_arms, split_manifest, write_cohort, ExperimentArm, PipelineConfig,
};
use motionbias_core::segmenter::train::TrainConfig;
use motionbias_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "motionbias", version, about = "Simulated MRI motion artifacts and segmentation bias experiments")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// JSON file with phantom, skull, train and split settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic phantom cohort and its manifest.
    Phantom {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign motion categories and train/val/test splits.
    Split {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Add the skull and apply sampled motion to every case.
    Corrupt {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Train and evaluate experiment arms (all five by default).
    Run {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long = "arm")]
        arms: Vec<ExperimentArm>,
    },
    /// Train and evaluate a single arm.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        arm: ExperimentArm,
    },
    /// Summarise the five arm runs into tables and figures.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an external slice (csv, txt, pgm, raw f32) to a tensor file.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Store as a binary mask (non-zero becomes 1).
        #[arg(long)]
        mask: bool,
        /// Rows, for raw input.
        #[arg(long)]
        height: Option<usize>,
        /// Columns, for raw input.
        #[arg(long)]
        width: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    augment_prob: Option<f64>,
}

impl TrainArgs {
    fn config(&self, base: &TrainConfig, seed: u64, threads: usize) -> TrainConfig {
        TrainConfig {
            lr: self.lr.unwrap_or(base.lr),
            max_epochs: self.epochs.unwrap_or(base.max_epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            patience: self.patience.unwrap_or(base.patience),
            augment_prob: self.augment_prob.unwrap_or(base.augment_prob),
            seed,
            threads,
            ..base.clone()
        }
    }
}

fn train_and_print(args: &TrainArgs, arms: &[ExperimentArm], cfg: &PipelineConfig, seed: u64, threads: usize) -> Result<()> {
    let train = args.config(&cfg.train, seed, threads);
    let runs = run_arms(&args.manifest, arms, &train, &args.out)?;
    for r in &runs {
        let mean = r.dice.iter().map(|d| d.dice).sum::<f64>() / r.dice.len() as f64;
        println!(
            "{:<32} mean dice {:.4} over {} test cases (best epoch {}, stopped {})",
            r.arm.slug(),
            mean,
            r.dice.len(),
            r.log.best_epoch,
            r.log.stopped_epoch
        );
    }
    Ok(())
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}

fn execute(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::Validation("--threads must be at least 1".into()));
    }
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Phantom { count, size, out } => {
            let mut phantom = cfg.phantom;
            if let Some(s) = size {
                phantom.size = s;
            }
            if phantom.size % 4 != 0 {
                eprintln!(
                    "warning: size {} is not divisible by 4; the segmenter needs divisible-by-4 inputs, so images will be zero-padded to {} for training",
                    phantom.size,
                    phantom.size.div_ceil(4) * 4
                );
            }
            let path = write_cohort(&out, count, &phantom, cli.seed)?;
            println!("wrote {count} cases and {}", path.display());
        }
        Command::Split { manifest } => {
            let m = split_manifest(&manifest_path(&manifest), cli.seed, cfg.split.as_ref())?;
            println!("assigned categories and splits for {} cases", m.cases.len());
        }
        Command::Corrupt { manifest } => {
            let m = corrupt_manifest(&manifest_path(&manifest), cli.seed, &cfg.skull, cli.threads)?;
            println!("wrote skull and motion images for {} cases", m.cases.len());
        }
        Command::Run { train, arms } => {
            let arms = if arms.is_empty() { ExperimentArm::ALL.to_vec() } else { arms };
            let args = TrainArgs {
                manifest: manifest_path(&train.manifest),
                ..train
            };
            train_and_print(&args, &arms, &cfg, cli.seed, cli.threads)?;
        }
        Command::Train { train, arm } => {
            let args = TrainArgs {
                manifest: manifest_path(&train.manifest),
                ..train
            };
            train_and_print(&args, &[arm], &cfg, cli.seed, cli.threads)?;
        }
        Command::Report { runs, out } => {
            let report = report_runs(&runs, &out)?;
            for a in &report.arms {
                println!("{:<8} {:.4} ± {:.4} (n = {})", a.label, a.mean, a.std, a.n);
            }
            for p in &report.pairwise {
                println!("{:<16} F = {:.4}, p = {:.4}", p.label, p.test.statistic, p.test.p_value);
            }
            for c in &report.per_category {
                match &c.test {
                    Some(t) => println!("{:<9} {} p = {:.4} (n = {})", c.category.name(), t.test_name, t.p_value, c.n),
                    None => println!("{:<9} no test: {}", c.category.name(), c.note.as_deref().unwrap_or("")),
                }
            }
            println!("wrote report to {}", out.display());
        }
        Command::Import {
            input,
            output,
            mask,
            height,
            width,
        } => {
            let dims = match (height, width) {
                (Some(h), Some(w)) => Some((h, w)),
                (None, None) => None,
                _ => return Err(Error::Validation("--height and --width go together".into())),
            };
            let t = import_slice(&input, &output, mask, dims)?;
            let (h, w) = t.shape();
            println!("wrote {h}x{w} {:?} tensor to {}", t.dtype(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
