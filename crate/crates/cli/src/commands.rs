use std::fs;
use std::path::{Path, PathBuf};

use proxylab::data::{load_dataset, make_two_moons, make_zero_shot_gaussians, LabeledDataset};
use proxylab::embedder::{embed_pooled, Checkpoint};
use proxylab::evalkit::{evaluate, recall_at_1, Protocol, RetrievalResult, NMI_SEEDS};
use proxylab::pooling::PoolMode;
use proxylab::training::{
    feature_width, fit, lattice_probabilities, pooled_features, train_toy_classifier, two_stage_fit, EpochRecord,
    Model, Schedule, TrainSpec,
};
use proxylab::Matrix;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{DatasetSpec, Enhancements, ProtocolKind, RunConfig, SweepAxis, SweepSpec, ENHANCEMENT_NAMES};
use crate::error::{CliError, Result};
use crate::stats::{mean, std_dev};

/// Train and test splits for `seed`.
pub fn load_splits(spec: &DatasetSpec, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    match spec {
        DatasetSpec::ZeroShot(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            Ok(make_zero_shot_gaussians(&cfg)?)
        }
        DatasetSpec::Files { train, test } => Ok((load_dataset(train)?, load_dataset(test)?)),
    }
}

fn spatial_of(data: &LabeledDataset) -> usize {
    data.map_shape().map_or(1, |(spatial, _)| spatial)
}

/// Outcome of one training run followed by test evaluation.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub spec: TrainSpec,
    /// Log of the run that produced `model` (stage 2 for the two-stage protocol).
    pub log: Vec<EpochRecord>,
    pub stage1_log: Option<Vec<EpochRecord>>,
    pub stopping_epoch: usize,
    pub decay_epochs: Vec<usize>,
    /// Hash of the full-length batch schedule (stage 1 for the two-stage
    /// protocol), comparable across variants with equal sampling settings.
    pub schedule_hash: String,
    pub batches_per_epoch: usize,
    pub model: Model,
    pub test_r1: f64,
}

pub fn embed_dataset(data: &LabeledDataset, model: &Model) -> Result<Matrix> {
    let pooled = pooled_features(data, model.embedder.pool_k)?;
    Ok(embed_pooled(&pooled, &model.embedder)?.value)
}

/// Trains on the train split of `seed` and reports test Recall@1.
pub fn run_once(cfg: &RunConfig, seed: u64) -> Result<RunOutcome> {
    let (train, test) = load_splits(&cfg.dataset, seed)?;
    run_on(cfg, seed, &train, &test)
}

pub fn run_on(cfg: &RunConfig, seed: u64, train: &LabeledDataset, test: &LabeledDataset) -> Result<RunOutcome> {
    let spec = cfg.train_spec(spatial_of(train))?;
    let batches_per_epoch = spec.sampler.batches_per_epoch(train.len());
    let mut out = match cfg.protocol {
        ProtocolKind::TwoStage => {
            let r = two_stage_fit(train, &spec, seed)?;
            RunOutcome {
                seed,
                spec: spec.clone(),
                stopping_epoch: r.stopping_epoch(),
                log: r.stage2.log,
                stage1_log: Some(r.stage1.log),
                decay_epochs: r.stage2.decay_epochs,
                schedule_hash: r.stage1.schedule_hash,
                batches_per_epoch,
                model: r.stage2.model,
                test_r1: f64::NAN,
            }
        }
        ProtocolKind::Single => {
            let model = Model::init(&spec, feature_width(train), &train.classes(), seed)?;
            // The test split is only logged; a fixed schedule keeps it out of training decisions.
            let r = fit(train, Some(test), model, &spec, seed, &Schedule::Replay(Vec::new()))?;
            RunOutcome {
                seed,
                spec: spec.clone(),
                stopping_epoch: spec.optim.epochs,
                log: r.log,
                stage1_log: None,
                decay_epochs: r.decay_epochs,
                schedule_hash: r.schedule_hash,
                batches_per_epoch,
                model: r.model,
                test_r1: f64::NAN,
            }
        }
    };
    out.test_r1 = recall_at_1(&embed_dataset(test, &out.model)?, &test.labels)?;
    Ok(out)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_csv<S: Serialize>(path: PathBuf, rows: impl IntoIterator<Item = S>) -> Result<()> {
    let mut w = csv::Writer::from_path(&path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn echo(command: &str, cfg: &RunConfig, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "resolved": extra,
    })
}

/// `train`: one run with `cfg.seed`; writes checkpoint, logs, config echo and a test summary.
pub fn cmd_train(cfg: &RunConfig) -> Result<serde_json::Value> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let (train, test) = load_splits(&cfg.dataset, cfg.seed)?;
    let run = run_on(cfg, cfg.seed, &train, &test)?;
    let resolved = json!({
        "seed": cfg.seed,
        "train_spec": run.spec,
        "batches_per_epoch": run.batches_per_epoch,
        "stopping_epoch": run.stopping_epoch,
        "decay_epochs": run.decay_epochs,
    });
    let config_echo = echo("train", cfg, resolved);
    write_json(dir.join("resolved_config.json"), &config_echo)?;
    Checkpoint::new(cfg.seed, config_echo, run.model.embedder.clone(), run.model.bank.clone())
        .save(dir.join("checkpoint.json"))?;
    write_csv(dir.join("train_log.csv"), &run.log)?;
    if let Some(log) = &run.stage1_log {
        write_csv(dir.join("stage1_log.csv"), log)?;
    }
    let result = evaluate(
        &embed_dataset(&test, &run.model)?,
        &test.labels,
        &cfg.ks,
        Protocol::SameSet,
        &NMI_SEEDS,
    )?;
    let summary = json!({
        "seed": cfg.seed,
        "stopping_epoch": run.stopping_epoch,
        "schedule_hash": run.schedule_hash,
        "test_recall_at": result.recall_at,
        "test_nmi": result.nmi,
    });
    write_json(dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// `eval`: embeds a dataset with a saved checkpoint and writes `eval.json`.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, dataset: Option<&Path>) -> Result<RetrievalResult> {
    cfg.validate()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let data = match dataset {
        Some(path) => load_dataset(path)?,
        None => load_splits(&cfg.dataset, cfg.seed)?.1,
    };
    let width = feature_width(&data);
    if width != ckpt.embedder.channels() {
        return Err(proxylab::Error::Shape {
            op: "eval",
            left: (data.len(), width),
            right: ckpt.embedder.embed_weights.shape(),
        }
        .into());
    }
    let model = Model {
        embedder: ckpt.embedder,
        bank: ckpt.proxies,
    };
    let result = evaluate(&embed_dataset(&data, &model)?, &data.labels, &cfg.ks, Protocol::SameSet, &NMI_SEEDS)?;
    prepare_dir(&cfg.output_dir)?;
    write_json(cfg.output_dir.join("eval.json"), &result)?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_r1: f64,
    pub std_r1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub value: f64,
    pub seed: u64,
    pub r1: f64,
}

/// Copy of `cfg` with the swept field set to `value`.
pub fn apply_sweep(cfg: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig> {
    let mut out = cfg.clone();
    match axis {
        SweepAxis::Temperature => {
            if !cfg.enhancements.scale {
                return Err(CliError::config("sweep", "a temperature sweep needs enhancements.scale on"));
            }
            out.temperature = value;
        }
        SweepAxis::Kmax => {
            if !cfg.enhancements.max {
                return Err(CliError::config("sweep", "a kmax sweep needs enhancements.max on"));
            }
            if value.fract() != 0.0 || value < 1.0 {
                return Err(CliError::config("sweep", format!("k = {value} is not a positive integer")));
            }
            out.pool.mode = PoolMode::Kmax;
            out.pool.k = Some(value as usize);
        }
        SweepAxis::ProxyLr => {
            if !cfg.enhancements.fast {
                return Err(CliError::config("sweep", "a proxy_lr sweep needs enhancements.fast on"));
            }
            out.proxy_lr = value;
        }
    }
    out.validate()?;
    Ok(out)
}

/// `sweep`: mean and standard deviation of test R@1 over the seeds at each grid point.
pub fn cmd_sweep(cfg: &RunConfig, sweep: &SweepSpec) -> Result<(Vec<SweepRow>, Vec<SweepRun>)> {
    cfg.validate()?;
    if sweep.grid.is_empty() {
        return Err(CliError::config("sweep", "grid must not be empty"));
    }
    if cfg.seeds.len() < 3 {
        return Err(CliError::config("seeds", "a sweep needs >= 3 seeds"));
    }
    prepare_dir(&cfg.output_dir)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &value in &sweep.grid {
        let point = apply_sweep(cfg, sweep.axis, value)?;
        let r1: Vec<f64> = cfg
            .seeds
            .iter()
            .map(|&seed| run_once(&point, seed).map(|r| r.test_r1))
            .collect::<Result<_>>()?;
        for (&seed, &r) in cfg.seeds.iter().zip(&r1) {
            runs.push(SweepRun { value, seed, r1: r });
        }
        rows.push(SweepRow {
            value,
            mean_r1: mean(&r1),
            std_r1: std_dev(&r1),
        });
    }
    let name = sweep.axis.name();
    write_csv(cfg.output_dir.join(format!("sweep_{name}.csv")), &rows)?;
    write_csv(cfg.output_dir.join(format!("sweep_{name}_runs.csv")), &runs)?;
    write_json(cfg.output_dir.join(format!("sweep_{name}_config.json")), &echo("sweep", cfg, json!(sweep)))?;
    Ok((rows, runs))
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub mean_r1: f64,
    pub std_r1: f64,
    /// Hash over the per-seed batch schedules.
    pub schedule_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRun {
    pub variant: String,
    pub seed: u64,
    pub r1: f64,
    pub schedule_hash: String,
}

/// `full` followed by one variant per enhancement switched off.
pub fn ablation_variants(base: &Enhancements) -> Result<Vec<(String, Enhancements)>> {
    let mut out = vec![("full".to_string(), *base)];
    for name in ENHANCEMENT_NAMES {
        let mut e = *base;
        e.set(name, false)?;
        out.push((format!("-{name}"), e));
    }
    Ok(out)
}

/// `ablate`: full ProxyNCA++ and each single-enhancement removal on paired seeds.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<(Vec<AblationRow>, Vec<AblationRun>)> {
    cfg.validate()?;
    prepare_dir(&cfg.output_dir)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (variant, enhancements) in ablation_variants(&Enhancements::all(true))? {
        let mut vcfg = cfg.clone();
        vcfg.enhancements = enhancements;
        let mut r1 = Vec::new();
        let mut hasher = Sha256::new();
        for &seed in &cfg.seeds {
            let run = run_once(&vcfg, seed)?;
            hasher.update(run.schedule_hash.as_bytes());
            r1.push(run.test_r1);
            runs.push(AblationRun {
                variant: variant.clone(),
                seed,
                r1: run.test_r1,
                schedule_hash: run.schedule_hash,
            });
        }
        rows.push(AblationRow {
            variant,
            mean_r1: mean(&r1),
            std_r1: std_dev(&r1),
            schedule_hash: format!("{:x}", hasher.finalize()),
        });
    }
    write_csv(cfg.output_dir.join("ablation.csv"), &rows)?;
    write_csv(cfg.output_dir.join("ablation_runs.csv"), &runs)?;
    write_json(cfg.output_dir.join("ablation_config.json"), &echo("ablate", cfg, json!(null)))?;
    Ok((rows, runs))
}

#[derive(Debug, Clone, Serialize)]
pub struct MoonsRow {
    pub temperature: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MoonsRun {
    pub temperature: f64,
    pub seed: u64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
struct LatticeRow {
    x: f64,
    y: f64,
    p0: f64,
    p1: f64,
}

/// `moons`: the 2→100→2 classifier at each temperature. Lattice dumps use the
/// first seed and are numbered in grid order (`moons_lattice_0.csv`, ...).
pub fn cmd_moons(cfg: &RunConfig) -> Result<(Vec<MoonsRow>, Vec<MoonsRun>)> {
    let spec = &cfg.moons;
    if spec.temperatures.is_empty() {
        return Err(CliError::config("moons", "temperatures must not be empty"));
    }
    if let Some(t) = spec.temperatures.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(CliError::config("moons", format!("temperature {t} must be > 0")));
    }
    if cfg.seeds.is_empty() {
        return Err(CliError::config("seeds", "must not be empty"));
    }
    prepare_dir(&cfg.output_dir)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (i, &t) in spec.temperatures.iter().enumerate() {
        let mut acc = Vec::new();
        for (j, &seed) in cfg.seeds.iter().enumerate() {
            let data = make_two_moons(spec.samples, spec.noise, seed)?;
            let fitted = train_toy_classifier(&data, t, &spec.train, seed)?;
            if j == 0 {
                let probs = lattice_probabilities(&fitted.net, t, &spec.lattice)?;
                let rows = probs.iter_rows().map(|r| LatticeRow {
                    x: r[0],
                    y: r[1],
                    p0: r[2],
                    p1: r[3],
                });
                write_csv(cfg.output_dir.join(format!("moons_lattice_{i}.csv")), rows)?;
            }
            acc.push(fitted.train_accuracy);
            runs.push(MoonsRun {
                temperature: t,
                seed,
                train_accuracy: fitted.train_accuracy,
            });
        }
        rows.push(MoonsRow {
            temperature: t,
            mean_accuracy: mean(&acc),
            std_accuracy: std_dev(&acc),
        });
    }
    write_csv(cfg.output_dir.join("moons_accuracy.csv"), &rows)?;
    write_csv(cfg.output_dir.join("moons_runs.csv"), &runs)?;
    write_json(cfg.output_dir.join("moons_config.json"), &echo("moons", cfg, json!(null)))?;
    Ok((rows, runs))
}
