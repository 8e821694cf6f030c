//! The six subcommands. Each one resolves its config, echoes the resolved
//! document into the output directory before any compute, then writes its
//! artifacts. All outputs are plain JSON/JSONL/CSV so re-runs with the same
//! config are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use disent_core::data::{generate, read_csv, write_csv, DatasetSplit, SynthSpec};
use disent_core::eval::{correlation_analysis, evaluate, ProbeConfig};
use disent_core::model::{load_checkpoint, save_checkpoint, ModelParams};
use disent_core::numerics::derive_seed;
use disent_core::stats::LabeledBatch;
use disent_core::training::{run_training, Measure, RunRecord, TrainConfig};
use disent_core::{Error, Result};

use crate::config::{required_out_dir, resolve, CommonOpts, ExperimentConfig};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<DatasetSplit> {
    match &cfg.data_dir {
        Some(dir) => Ok(DatasetSplit {
            train: read_csv(&dir.join("train.csv"))?,
            test: read_csv(&dir.join("test.csv"))?,
            aux: read_csv(&dir.join("aux.csv"))?,
        }),
        None => generate(&cfg.data),
    }
}

#[derive(Serialize)]
struct ManifestRows {
    train: usize,
    test: usize,
    aux: usize,
}

#[derive(Serialize)]
struct Manifest {
    schema_version: u32,
    seed: u64,
    spec: SynthSpec,
    rows: ManifestRows,
    files: Vec<String>,
}

/// `generate`: sample the synthetic dataset and write the three split CSVs
/// plus a manifest echoing the generator parameters and seed.
pub fn cmd_generate(opts: &CommonOpts) -> Result<()> {
    let cfg = resolve(opts)?;
    let out = required_out_dir(&cfg)?;
    fs::create_dir_all(&out)?;
    write_json(&out.join("config.json"), &cfg)?;

    let split = generate(&cfg.data)?;
    write_csv(&split.train, &out.join("train.csv"))?;
    write_csv(&split.test, &out.join("test.csv"))?;
    write_csv(&split.aux, &out.join("aux.csv"))?;
    let manifest = Manifest {
        schema_version: cfg.schema_version,
        seed: cfg.data.seed,
        spec: cfg.data.clone(),
        rows: ManifestRows {
            train: split.train.len(),
            test: split.test.len(),
            aux: split.aux.len(),
        },
        files: vec!["train.csv".into(), "test.csv".into(), "aux.csv".into()],
    };
    write_json(&out.join("manifest.json"), &manifest)
}

#[derive(Serialize)]
struct TrainSummary {
    measure: Measure,
    lambda: f64,
    steps: usize,
    processed: usize,
    skipped: usize,
    outer_updates: usize,
    inner_updates: usize,
    main_acc: f64,
    sensitive_acc: f64,
    /// Final recorded regularizer value; null when no regularizer ran.
    reg_value: Option<f64>,
    n_eval: usize,
}

struct RunArtifacts {
    main_acc: f64,
    sensitive_acc: f64,
}

/// Train once and write records.jsonl, periodic + final checkpoints, and
/// summary.json into `dir`. The caller has already echoed the config.
fn run_and_write(
    dir: &Path,
    data: &DatasetSplit,
    train_cfg: &TrainConfig,
    probe_cfg: &ProbeConfig,
) -> Result<RunArtifacts> {
    let outcome = run_training(data, train_cfg)?;
    fs::create_dir_all(dir.join("checkpoints"))?;

    let mut records = outcome.records.clone();
    for entry in &outcome.checkpoints {
        let rel = format!("checkpoints/step_{:06}.ckpt", entry.step);
        save_checkpoint(&entry.params, &dir.join(&rel))?;
        if let Some(record) = records.iter_mut().find(|r| r.step == entry.step) {
            record.checkpoint_path = Some(rel.clone());
        }
    }
    save_checkpoint(&outcome.params, &dir.join("checkpoints").join("final.ckpt"))?;

    let mut lines = String::new();
    for record in &records {
        lines.push_str(&serde_json::to_string(record)?);
        lines.push('\n');
    }
    fs::write(dir.join("records.jsonl"), lines)?;

    let report = evaluate(&outcome.params, &data.test, probe_cfg)?;
    let summary = TrainSummary {
        measure: train_cfg.measure,
        lambda: train_cfg.lambda,
        steps: train_cfg.steps,
        processed: outcome.processed,
        skipped: outcome.skipped,
        outer_updates: outcome.counters.outer_updates,
        inner_updates: outcome.counters.inner_updates,
        main_acc: report.main_acc,
        sensitive_acc: report.sensitive_acc,
        reg_value: records.last().and_then(|r| r.reg_value),
        n_eval: report.n_eval,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(RunArtifacts {
        main_acc: report.main_acc,
        sensitive_acc: report.sensitive_acc,
    })
}

/// `train`: one run into the output directory.
pub fn cmd_train(opts: &CommonOpts) -> Result<()> {
    let mut cfg = resolve(opts)?;
    match opts.lambdas.len() {
        0 => {}
        1 => cfg.train.lambda = opts.lambdas[0],
        n => {
            return Err(Error::Config(format!(
                "train takes a single --lambda, got {n}; use sweep for grids"
            )))
        }
    }
    cfg.validate()?;
    let out = required_out_dir(&cfg)?;
    fs::create_dir_all(&out)?;
    write_json(&out.join("config.json"), &cfg)?;

    let data = load_dataset(&cfg)?;
    run_and_write(&out, &data, &cfg.train, &cfg.probe)?;
    Ok(())
}

struct SweepTask {
    index: usize,
    subdir: PathBuf,
    run_cfg: ExperimentConfig,
}

#[derive(Clone)]
struct SweepRow {
    measure: Measure,
    lambda: f64,
    main_acc: f64,
    sensitive_acc: f64,
}

/// `sweep`: train each configured measure across the λ grid, one
/// subdirectory per run, then write an aggregate CSV sorted by
/// (measure, λ). Runs execute in parallel up to `--jobs`.
pub fn cmd_sweep(opts: &CommonOpts) -> Result<()> {
    let cfg = resolve(opts)?;
    if cfg.measures.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one measure: set `measures` in the config or pass --measure"
                .into(),
        ));
    }
    if cfg.lambdas.is_empty() {
        return Err(Error::Config("sweep λ grid is empty".into()));
    }
    let out = required_out_dir(&cfg)?;
    fs::create_dir_all(&out)?;
    write_json(&out.join("config.json"), &cfg)?;

    let data = load_dataset(&cfg)?;
    let mut tasks = Vec::new();
    for measure in &cfg.measures {
        for (li, lambda) in cfg.lambdas.iter().enumerate() {
            let subdir = out.join(format!("{measure}_lambda{lambda}"));
            let mut run_cfg = cfg.clone();
            run_cfg.train.measure = *measure;
            run_cfg.train.lambda = *lambda;
            // Same per-λ seed derivation as the library sweep, so each grid
            // point is reproducible in isolation.
            run_cfg.train.seed = derive_seed(cfg.train.seed, li as u64);
            run_cfg.out_dir = Some(subdir.clone());
            run_cfg.train.validate()?;
            tasks.push(SweepTask {
                index: tasks.len(),
                subdir,
                run_cfg,
            });
        }
    }

    let jobs = opts.jobs.unwrap_or(1).max(1).min(tasks.len());
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<SweepRow>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let row = run_sweep_task(task, &data);
                results.lock().expect("no poisoned sweep worker").push((task.index, row));
            });
        }
    });

    let mut results = results.into_inner().expect("workers finished");
    results.sort_by_key(|(index, _)| *index);
    let mut rows = Vec::with_capacity(results.len());
    for (_, row) in results {
        rows.push(row?);
    }
    rows.sort_by(|a, b| {
        a.measure
            .as_str()
            .cmp(b.measure.as_str())
            .then(a.lambda.total_cmp(&b.lambda))
    });

    let mut table = String::from("measure,lambda,main_acc,sensitive_acc\n");
    for row in &rows {
        table.push_str(&format!(
            "{},{},{},{}\n",
            row.measure, row.lambda, row.main_acc, row.sensitive_acc
        ));
    }
    fs::write(out.join("sweep.csv"), table)?;
    Ok(())
}

fn run_sweep_task(task: &SweepTask, data: &DatasetSplit) -> Result<SweepRow> {
    fs::create_dir_all(&task.subdir)?;
    write_json(&task.subdir.join("config.json"), &task.run_cfg)?;
    let artifacts = run_and_write(
        &task.subdir,
        data,
        &task.run_cfg.train,
        &task.run_cfg.probe,
    )?;
    Ok(SweepRow {
        measure: task.run_cfg.train.measure,
        lambda: task.run_cfg.train.lambda,
        main_acc: artifacts.main_acc,
        sensitive_acc: artifacts.sensitive_acc,
    })
}

/// Resolve a command that operates on an existing run directory: flags
/// still win, but the run's own echoed config is the default.
fn resolve_for_run(run_dir: &Path, opts: &CommonOpts) -> Result<ExperimentConfig> {
    let mut opts = opts.clone();
    if opts.config.is_none() {
        opts.config = Some(run_dir.join("config.json"));
    }
    resolve(&opts)
}

fn read_records(run_dir: &Path) -> Result<Vec<RunRecord>> {
    let path = run_dir.join("records.jsonl");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line)?);
    }
    Ok(records)
}

/// `evaluate`: score a finished run's final checkpoint with a freshly
/// trained probe and write probe_report.json.
pub fn cmd_evaluate(run_dir: &Path, opts: &CommonOpts) -> Result<()> {
    let cfg = resolve_for_run(run_dir, opts)?;
    let out = opts.out.clone().unwrap_or_else(|| run_dir.to_path_buf());
    fs::create_dir_all(&out)?;
    write_json(&out.join("evaluate_config.json"), &cfg)?;

    let params = load_checkpoint(&run_dir.join("checkpoints").join("final.ckpt"))?;
    let data = load_dataset(&cfg)?;
    let report = evaluate(&params, &data.test, &cfg.probe)?;
    write_json(&out.join("probe_report.json"), &report)
}

/// `correlate`: pair each recorded checkpoint's regularizer value with a
/// fresh probe's sensitive accuracy and report their Pearson correlation.
pub fn cmd_correlate(run_dir: &Path, opts: &CommonOpts) -> Result<()> {
    let cfg = resolve_for_run(run_dir, opts)?;
    let out = opts.out.clone().unwrap_or_else(|| run_dir.to_path_buf());
    fs::create_dir_all(&out)?;
    write_json(&out.join("correlate_config.json"), &cfg)?;

    let records = read_records(run_dir)?;
    let mut checkpoints: Vec<(ModelParams, f64)> = Vec::new();
    for record in &records {
        if let (Some(path), Some(reg)) = (&record.checkpoint_path, record.reg_value) {
            checkpoints.push((load_checkpoint(&run_dir.join(path))?, reg));
        }
    }
    let data = load_dataset(&cfg)?;
    let report = correlation_analysis(&checkpoints, &data.test, &cfg.probe)?;
    write_json(&out.join("correlation.json"), &report)
}

/// `export-embeddings`: run a checkpoint's encoder over a CSV dataset and
/// write the embeddings with both labels, in the same CSV dialect the
/// loader reads.
pub fn cmd_export_embeddings(checkpoint: &Path, data_path: &Path, opts: &CommonOpts) -> Result<()> {
    let cfg = resolve(opts)?;
    let out = required_out_dir(&cfg)?;
    fs::create_dir_all(&out)?;
    write_json(&out.join("export_config.json"), &cfg)?;

    let params = load_checkpoint(checkpoint)?;
    let batch = read_csv(data_path)?;
    let (z, _) = params.encode(&batch.samples)?;
    let embedded = LabeledBatch::new(z, batch.main, batch.sensitive)?;
    write_csv(&embedded, &out.join("embeddings.csv"))
}
