use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use meip::pipeline::{self, PipelineConfig, Split};

#[derive(Parser)]
#[command(name = "meip", version, about = "Mutual-energy feature axes and a Gaussian classifier for digit images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Grow axis forests and write axes.txt
    TrainAxes {
        #[command(flatten)]
        common: Common,
        /// Worker threads for independent forests
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Fit the classifier on features of the training split
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score the saved model on one split
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Render an axes, fields or model file as PGM and CSV
    Inspect {
        path: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// train-axes, train and eval on both splits
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn prepare(common: &Common) -> meip::Result<PipelineConfig> {
    let cfg = PipelineConfig::load(&common.config).map_err(|e| e.in_stage("config"))?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| meip::Error::Io { path: common.out.clone(), source: e }.in_stage("config"))?;
    Ok(cfg)
}

fn run(cli: Cli) -> meip::Result<()> {
    match cli.command {
        Command::TrainAxes { common, jobs } => {
            let cfg = prepare(&common)?;
            let t = pipeline::train_axes(&cfg, &common.out, jobs)?;
            println!(
                "{} axes generated{}, {} written to {}",
                t.forest.len(),
                if t.forest.exhausted { " (pool exhausted)" } else { "" },
                t.axes.len(),
                common.out.join("axes.txt").display()
            );
        }
        Command::Train { common } => {
            let cfg = prepare(&common)?;
            let m = pipeline::train(&cfg, &common.out)?;
            println!("{} classes over {} features", m.classifier.n_classes(), m.classifier.dim());
        }
        Command::Eval { common, split } => {
            let cfg = prepare(&common)?;
            let r = pipeline::eval(&cfg, &common.out, split.into())?;
            println!("{} accuracy {:.4} ({} samples)", r.split, r.accuracy, r.samples);
        }
        Command::Inspect { path, out } => {
            std::fs::create_dir_all(&out)
                .map_err(|e| meip::Error::Io { path: out.clone(), source: e }.in_stage("inspect"))?;
            let files = pipeline::inspect(&path, &out)?;
            println!("{} images written to {}", files.len(), out.display());
        }
        Command::Pipeline { common, jobs } => {
            let cfg = prepare(&common)?;
            let r = pipeline::pipeline(&cfg, &common.out, jobs)?;
            println!(
                "{} axes, {} features; train {:.4}, test {:.4}",
                r.axes_generated, r.feature_dim, r.train.accuracy, r.test.accuracy
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
