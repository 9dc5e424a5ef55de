use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gnss_setnet::dataset_io::AndroidColumns;
use gnss_setnet::harness::{self, RunConfig};
use gnss_setnet::Error;

/// Set-transformer GNSS position correction experiments.
#[derive(Debug, Parser)]
#[command(name = "gnss-setnet", version, about)]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configuration's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Run single-threaded.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a dataset of pseudorange epochs.
    Simulate,
    /// Train a correction network on a dataset's training split.
    Train {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Evaluate a trained network (and the WLS baseline) on the test split.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train and evaluate one network per initialization range.
    SweepEta {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated ranges in meters; defaults to the configuration's list.
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
    },
    /// Convert an Android derived-measurement CSV into a dataset.
    IngestAndroid {
        #[arg(long)]
        input: PathBuf,
        /// JSON column-name mapping replacing the bundled one.
        #[arg(long)]
        columns: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.deterministic |= cli.deterministic;
    let out = cli.out.as_path();

    match cli.command {
        Command::Simulate => {
            let r = harness::simulate(&cfg, out)?;
            println!("{} epochs -> {}", r.epochs, r.dataset.display());
        }
        Command::Train { dataset } => {
            let r = harness::train(&cfg, &dataset, out)?;
            if let Some(last) = r.records.last() {
                println!(
                    "{} epochs, final train MSE {:.4} m^2, validation MSE {}",
                    r.records.len(),
                    last.train_loss,
                    last.val_loss.map_or("-".into(), |v| format!("{v:.4} m^2"))
                );
            }
            println!("model -> {}", r.checkpoint.display());
        }
        Command::Evaluate { dataset, model } => {
            let r = harness::evaluate(&cfg, &dataset, &model, out)?;
            println!("{:<16} {:>8} {:>8} {:>8} {:>7}", "method", "north", "east", "down", "count");
            for (m, s) in &r.stats {
                println!(
                    "{m:<16} {:>8.3} {:>8.3} {:>8.3} {:>7}",
                    s.mae[0], s.mae[1], s.mae[2], s.count
                );
            }
            println!("report -> {}", r.report.summary.display());
        }
        Command::SweepEta { dataset, etas } => {
            let etas = etas.unwrap_or_else(|| cfg.sweep.etas.clone());
            let r = harness::sweep_eta(&cfg, &dataset, &etas, out)?;
            println!("{:>6} {:>8} {:>8} {:>8}", "eta", "north", "east", "down");
            for row in &r.rows {
                let m = row.dnn.mae;
                println!("{:>6} {:>8.3} {:>8.3} {:>8.3}", row.eta, m[0], m[1], m[2]);
            }
            println!("table -> {}", r.table.display());
        }
        Command::IngestAndroid { input, columns } => {
            if let Some(path) = columns {
                cfg.ingest.columns = AndroidColumns::from_path(&path)?;
            }
            let r = harness::ingest_android(&cfg, &input, out)?;
            println!("{} epochs -> {}", r.epochs, r.dataset.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
