//! File-level drivers behind the CLI subcommands.
//!
//! Every command validates its configuration before touching the filesystem, writes
//! only below its output directory, and records the resolved configuration in a
//! `manifest.json` next to its outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset_io::{
    ingest_android_derived, read_dataset, split_dataset, write_dataset, Split,
};
use crate::error::{Error, Result};
use crate::evaluation::{compare_report, mae_stats, ErrorStats, ReportFiles};
use crate::nn::{
    load_checkpoint, save_checkpoint, train as train_network, Checkpoint, EpochRecord,
};
use crate::sim::{simulate_dataset, MeasurementEpoch};

use super::config::{EvalSubset, RunConfig};
use super::experiments::{evaluate_model, METHOD_DNN};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MODEL_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    inputs: Vec<String>,
    outputs: T,
}

fn write_manifest<T: Serialize>(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    inputs: &[&Path],
    outputs: T,
) -> Result<PathBuf> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs,
    };
    let path = out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<RunConfig> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Ok(cfg.resolved())
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub dataset: PathBuf,
    pub manifest: PathBuf,
    pub epochs: usize,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateOutput> {
    let cfg = prepare(cfg, out)?;
    let data = simulate_dataset(
        &cfg.dataset,
        &cfg.noise,
        &cfg.constellation.build(),
        cfg.simulation_seed(),
        cfg.mode(),
    )?;
    let dataset = out.join(DATASET_FILE);
    write_dataset(&data, &dataset)?;
    #[derive(Serialize)]
    struct Out {
        dataset: String,
        epochs: usize,
    }
    let manifest = write_manifest(
        out,
        "simulate",
        &cfg,
        &[],
        Out {
            dataset: DATASET_FILE.into(),
            epochs: data.len(),
        },
    )?;
    log::info!("wrote {} epochs to {}", data.len(), dataset.display());
    Ok(SimulateOutput {
        dataset,
        manifest,
        epochs: data.len(),
    })
}

fn load_split(cfg: &RunConfig, dataset: &Path) -> Result<(Vec<MeasurementEpoch>, Split)> {
    let data = read_dataset(dataset)?;
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let split = split_dataset(&data, &cfg.split)?;
    Ok((data, split))
}

fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut text = String::from("epoch,train_mse,val_mse\n");
    for r in history {
        let val = r.val_loss.map_or(String::new(), |v| v.to_string());
        text.push_str(&format!("{},{},{}\n", r.epoch + 1, r.train_loss, val));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub manifest: PathBuf,
    pub records: Vec<EpochRecord>,
}

pub fn train(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<TrainOutput> {
    let cfg = prepare(cfg, out)?;
    let (_, split) = load_split(&cfg, dataset)?;
    log::info!(
        "training on {} epochs, validating on {}, holding out {} test epochs",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let outcome = train_network(&split.train, &split.val, &cfg.net, &cfg.train, cfg.mode())?;

    let checkpoint = out.join(MODEL_FILE);
    save_checkpoint(
        &checkpoint,
        &Checkpoint {
            params: outcome.params,
            features: cfg.train.features,
            adam: Some(outcome.adam),
            history: outcome.history.clone(),
        },
    )?;
    let history = out.join(HISTORY_FILE);
    write_history(&history, &outcome.history)?;
    let split_path = out.join(SPLIT_FILE);
    let split_json = serde_json::to_string_pretty(&split.manifest(&cfg.split)).expect("serializes");
    std::fs::write(&split_path, split_json).map_err(|e| Error::io(&split_path, e))?;

    #[derive(Serialize)]
    struct Out {
        checkpoint: &'static str,
        history: &'static str,
        split: &'static str,
        final_train_mse: Option<f64>,
        final_val_mse: Option<f64>,
    }
    let last = outcome.history.last();
    let manifest = write_manifest(
        out,
        "train",
        &cfg,
        &[dataset],
        Out {
            checkpoint: MODEL_FILE,
            history: HISTORY_FILE,
            split: SPLIT_FILE,
            final_train_mse: last.map(|r| r.train_loss),
            final_val_mse: last.and_then(|r| r.val_loss),
        },
    )?;
    Ok(TrainOutput {
        checkpoint,
        history,
        manifest,
        records: outcome.history,
    })
}

#[derive(Debug, Clone)]
pub struct EvaluateOutput {
    pub report: ReportFiles,
    pub manifest: PathBuf,
    pub stats: Vec<(String, ErrorStats)>,
    pub wls_failed: usize,
}

pub fn evaluate(cfg: &RunConfig, dataset: &Path, model: &Path, out: &Path) -> Result<EvaluateOutput> {
    let cfg = prepare(cfg, out)?;
    let ckpt = load_checkpoint(model)?;
    let (data, split) = load_split(&cfg, dataset)?;
    let epochs = match cfg.evaluate.subset {
        EvalSubset::Test => split.test,
        EvalSubset::All => data,
    };
    let eval = evaluate_model(&ckpt.params, ckpt.features, &epochs, &cfg)?;
    let report = compare_report(&eval.runs, out)?;
    let stats = eval
        .runs
        .iter()
        .map(|(m, r)| mae_stats(r).map(|s| (m.clone(), s)))
        .collect::<Result<Vec<_>>>()?;
    for (m, s) in &stats {
        log::info!(
            "{m:>15}: MAE N {:.3} E {:.3} D {:.3} m over {} epochs",
            s.mae[0],
            s.mae[1],
            s.mae[2],
            s.count
        );
    }
    #[derive(Serialize)]
    struct Out<'a> {
        summary: &'static str,
        quantiles: &'static str,
        stats: &'a [(String, ErrorStats)],
        wls_unsolvable: usize,
    }
    let manifest = write_manifest(
        out,
        "evaluate",
        &cfg,
        &[dataset, model],
        Out {
            summary: "summary.csv",
            quantiles: "quantiles.json",
            stats: &stats,
            wls_unsolvable: eval.wls_failed,
        },
    )?;
    Ok(EvaluateOutput {
        report,
        manifest,
        stats,
        wls_failed: eval.wls_failed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub dnn: ErrorStats,
    pub initialization: ErrorStats,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub table: PathBuf,
    pub manifest: PathBuf,
    pub rows: Vec<SweepRow>,
}

/// Trains and evaluates one model per `eta` (training and evaluation box alike).
pub fn sweep_eta(cfg: &RunConfig, dataset: &Path, etas: &[f64], out: &Path) -> Result<SweepOutput> {
    let mut base = cfg.clone();
    base.sweep.etas = etas.to_vec();
    if etas.is_empty() {
        return Err(Error::Config("sweep needs at least one eta".into()));
    }
    let base = prepare(&base, out)?;
    let mut rows = Vec::with_capacity(etas.len());
    for &eta in etas {
        let mut c = base.clone();
        c.train.augment.eta = eta;
        c.evaluate.eta = eta;
        let dir = out.join(format!("eta_{eta}"));
        let t = train(&c, dataset, &dir)?;
        let e = evaluate(&c, dataset, &t.checkpoint, &dir)?;
        let find = |m: &str| {
            e.stats
                .iter()
                .find(|(n, _)| n == m)
                .map(|(_, s)| *s)
                .ok_or(Error::Empty("missing method in evaluation"))
        };
        rows.push(SweepRow {
            eta,
            dnn: find(METHOD_DNN)?,
            initialization: find(super::experiments::METHOD_INIT)?,
        });
    }
    let table = out.join("sweep.csv");
    let mut text = String::from("eta,north_mae,north_std,east_mae,east_std,down_mae,down_std,init_north_mae,init_east_mae,init_down_mae\n");
    for r in &rows {
        let d = &r.dnn;
        let i = &r.initialization;
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.eta, d.mae[0], d.std[0], d.mae[1], d.std[1], d.mae[2], d.std[2], i.mae[0], i.mae[1], i.mae[2]
        ));
    }
    std::fs::write(&table, text).map_err(|e| Error::io(&table, e))?;
    let manifest = write_manifest(out, "sweep-eta", &base, &[dataset], &rows)?;
    Ok(SweepOutput {
        table,
        manifest,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub dataset: PathBuf,
    pub manifest: PathBuf,
    pub epochs: usize,
}

pub fn ingest_android(cfg: &RunConfig, csv: &Path, out: &Path) -> Result<IngestOutput> {
    cfg.validate()?;
    // parse before creating anything so a bad file leaves no partial output
    let report = ingest_android_derived(csv, &cfg.ingest)?;
    let cfg = prepare(cfg, out)?;
    let dataset = out.join(DATASET_FILE);
    write_dataset(&report.epochs, &dataset)?;
    #[derive(Serialize)]
    struct Out {
        dataset: &'static str,
        epochs: usize,
        rows_read: usize,
        excluded_signal: usize,
        excluded_unit: usize,
        excluded_duplicate: usize,
    }
    let manifest = write_manifest(
        out,
        "ingest-android",
        &cfg,
        &[csv],
        Out {
            dataset: DATASET_FILE,
            epochs: report.epochs.len(),
            rows_read: report.rows_read,
            excluded_signal: report.excluded_signal,
            excluded_unit: report.excluded_unit,
            excluded_duplicate: report.excluded_duplicate,
        },
    )?;
    Ok(IngestOutput {
        dataset,
        manifest,
        epochs: report.epochs.len(),
    })
}
