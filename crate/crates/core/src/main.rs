use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ctnd::bnb::HeuristicEmphasis;
use ctnd::config::PipelineConfig;
use ctnd::gcnn::LossMode;
use ctnd::pipeline::{
    cmd_collect, cmd_evaluate, cmd_generate, cmd_gridsearch, cmd_train, PipelineError,
};

/// Learned variable fixing for MILPs: generate, collect, train, gridsearch, evaluate.
#[derive(Debug, Parser)]
#[command(name = "ctnd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write generated instances to <outdir>/instances.
    Generate(Common),
    /// Solve training instances and write solution pools.
    Collect(Common),
    /// Train the model on the collected pools.
    Train(Common),
    /// Score the threshold grid on the validation split.
    Gridsearch(Common),
    /// Compare plain solving with diving on the test split.
    Evaluate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// key = value config file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "PATH")]
    outdir: Option<PathBuf>,
    /// Seed for instance generation, initialisation and shuffling
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Diving threshold for evaluate (default: best from gridsearch)
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
    /// Loss normalisation for train
    #[arg(long, value_name = "minibatch|fullbatch")]
    loss_mode: Option<LossMode>,
    /// Heuristic emphasis for gridsearch and evaluate runs
    #[arg(long, value_name = "off|aggressive")]
    emphasis: Option<HeuristicEmphasis>,
}

impl Common {
    fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.outdir {
            cfg.outdir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = Some(v);
        }
        if let Some(v) = self.loss_mode {
            cfg.loss_mode = v;
        }
        if let Some(v) = self.emphasis {
            cfg.emphasis = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Generate(c) => {
            let cfg = c.resolve()?;
            let written = cmd_generate(&cfg)?;
            println!(
                "wrote {} instances to {}",
                written.len(),
                cfg.outdir.join("instances").display()
            );
        }
        Command::Collect(c) => {
            let cfg = c.resolve()?;
            let summary = cmd_collect(&cfg)?;
            println!(
                "wrote {} pools, skipped {}",
                summary.pools_written,
                summary.skipped.len()
            );
        }
        Command::Train(c) => {
            let cfg = c.resolve()?;
            let (_, curve) = cmd_train(&cfg)?;
            if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
                println!("trained {} epochs, loss {first:.6} -> {last:.6}", curve.len());
            }
        }
        Command::Gridsearch(c) => {
            let cfg = c.resolve()?;
            let report = cmd_gridsearch(&cfg)?;
            print!("{}", report.to_csv());
        }
        Command::Evaluate(c) => {
            let cfg = c.resolve()?;
            let eval = cmd_evaluate(&cfg)?;
            print!("{}", ctnd::eval::summary_to_csv(&eval.comparison.summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
