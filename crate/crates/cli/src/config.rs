use std::path::{Path, PathBuf};

use proxylab::data::ZeroShotConfig;
use proxylab::losses::LossKind;
use proxylab::pooling::{pool_mode, PoolMode};
use proxylab::training::{
    BatchSampler, Lattice, OptimConfig, ToyTrainConfig, TrainSpec, DEFAULT_DECAY_FACTOR, DEFAULT_PATIENCE,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// The six switchable parts of ProxyNCA++. Each defaults to on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Enhancements {
    /// Proxy assignment probability: `proxynca` becomes `proxynca_pp`.
    pub prob: bool,
    /// Low temperature; off forces `T = 1`.
    pub scale: bool,
    /// Class-balanced batches; off samples uniformly.
    pub cbs: bool,
    /// Layer norm before L2 normalisation.
    pub norm: bool,
    /// Max-style pooling; off forces average pooling.
    pub max: bool,
    /// Separate proxy learning rate; off uses `base_lr` for proxies.
    pub fast: bool,
}

impl Default for Enhancements {
    fn default() -> Self {
        Self::all(true)
    }
}

pub const ENHANCEMENT_NAMES: [&str; 6] = ["prob", "scale", "cbs", "norm", "max", "fast"];

impl Enhancements {
    pub fn all(on: bool) -> Self {
        Self {
            prob: on,
            scale: on,
            cbs: on,
            norm: on,
            max: on,
            fast: on,
        }
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        Some(match name {
            "prob" => self.prob,
            "scale" => self.scale,
            "cbs" => self.cbs,
            "norm" => self.norm,
            "max" => self.max,
            "fast" => self.fast,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, on: bool) -> Result<()> {
        let slot = match name {
            "prob" => &mut self.prob,
            "scale" => &mut self.scale,
            "cbs" => &mut self.cbs,
            "norm" => &mut self.norm,
            "max" => &mut self.max,
            "fast" => &mut self.fast,
            _ => return Err(CliError::config("enhancements", format!("unknown enhancement `{name}`"))),
        };
        *slot = on;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSpec {
    pub mode: PoolMode,
    /// Required for `kmax`.
    pub k: Option<usize>,
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self {
            mode: PoolMode::Gmp,
            k: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Early-stop on a class-disjoint half, then retrain on all classes.
    TwoStage,
    /// A fixed number of epochs on all training classes.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Synthetic benchmark; the seed field is replaced by the run seed.
    ZeroShot(ZeroShotConfig),
    /// Dataset files in the proxylab text format.
    Files { train: PathBuf, test: PathBuf },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::ZeroShot(ZeroShotConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Temperature,
    Kmax,
    ProxyLr,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Temperature => "temperature",
            SweepAxis::Kmax => "kmax",
            SweepAxis::ProxyLr => "proxy_lr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoonsSpec {
    pub samples: usize,
    pub noise: f64,
    pub temperatures: Vec<f64>,
    pub train: ToyTrainConfig,
    pub lattice: Lattice,
}

impl Default for MoonsSpec {
    fn default() -> Self {
        Self {
            samples: 600,
            noise: 0.3,
            temperatures: vec![1.0, 1.0 / 3.0, 1.0 / 9.0],
            train: ToyTrainConfig::default(),
            lattice: Lattice::default(),
        }
    }
}

/// One JSON document describing a run. Missing fields take the defaults
/// below; command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub loss: LossKind,
    pub enhancements: Enhancements,
    pub temperature: f64,
    pub pool: PoolSpec,
    pub emb_dim: usize,
    pub base_lr: f64,
    pub proxy_lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub classes_per_batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub decay_factor: f64,
    pub protocol: ProtocolKind,
    /// Seed of `train` and of the lattice dumps of `moons`.
    pub seed: u64,
    /// Paired seeds of `sweep`, `ablate` and `moons`.
    pub seeds: Vec<u64>,
    pub ks: Vec<usize>,
    pub dataset: DatasetSpec,
    pub sweep: Option<SweepSpec>,
    pub moons: MoonsSpec,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::ProxyNcaPp,
            enhancements: Enhancements::default(),
            temperature: 1.0 / 9.0,
            pool: PoolSpec::default(),
            emb_dim: 64,
            base_lr: 4e-3,
            proxy_lr: 4e2,
            momentum: 0.0,
            batch_size: 32,
            classes_per_batch: 4,
            epochs: 30,
            patience: DEFAULT_PATIENCE,
            decay_factor: DEFAULT_DECAY_FACTOR,
            protocol: ProtocolKind::TwoStage,
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            ks: vec![1, 2, 4, 8],
            dataset: DatasetSpec::default(),
            sweep: None,
            moons: MoonsSpec::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(field, format!("must be a finite value > 0, got {v}")))
    }
}

fn at_least_one(field: &'static str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(CliError::config(field, "must be >= 1"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(cfg)
    }

    /// Field-level checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        positive("temperature", self.temperature)?;
        positive("base_lr", self.base_lr)?;
        positive("proxy_lr", self.proxy_lr)?;
        positive("decay_factor", self.decay_factor)?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(CliError::config("momentum", "must be in [0, 1)"));
        }
        at_least_one("emb_dim", self.emb_dim)?;
        at_least_one("batch_size", self.batch_size)?;
        at_least_one("classes_per_batch", self.classes_per_batch)?;
        if self.enhancements.cbs && self.batch_size < self.classes_per_batch {
            return Err(CliError::config(
                "classes_per_batch",
                format!("{} classes do not fit in a batch of {}", self.classes_per_batch, self.batch_size),
            ));
        }
        if self.emb_dim < 2 && self.enhancements.norm {
            return Err(CliError::config("emb_dim", "layer norm needs emb_dim >= 2"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds", "must not be empty"));
        }
        if self.ks.is_empty() || self.ks.windows(2).any(|w| w[0] >= w[1]) || self.ks[0] == 0 {
            return Err(CliError::config("ks", "must be non-empty, >= 1 and strictly ascending"));
        }
        if self.pool.mode == PoolMode::Kmax && self.pool.k.is_none_or(|k| k == 0) {
            return Err(CliError::config("pool", "kmax needs k >= 1"));
        }
        Ok(())
    }

    pub fn effective_loss(&self) -> LossKind {
        match self.loss {
            LossKind::ProxyNcaPp if !self.enhancements.prob => LossKind::ProxyNca,
            other => other,
        }
    }

    pub fn effective_temperature(&self) -> f64 {
        if self.enhancements.scale {
            self.temperature
        } else {
            1.0
        }
    }

    pub fn effective_proxy_lr(&self) -> f64 {
        if self.enhancements.fast {
            self.proxy_lr
        } else {
            self.base_lr
        }
    }

    /// Pooling `k` for feature maps of side `spatial`.
    pub fn effective_pool_k(&self, spatial: usize) -> Result<usize> {
        let positions = spatial * spatial;
        if !self.enhancements.max {
            return Ok(positions);
        }
        let k = pool_mode(self.pool.mode, self.pool.k, spatial).map_err(|e| CliError::config("pool", e.to_string()))?;
        if k == 0 || k > positions {
            return Err(CliError::config("pool", format!("k = {k} outside 1..={positions}")));
        }
        Ok(k)
    }

    pub fn sampler(&self) -> BatchSampler {
        if self.enhancements.cbs {
            BatchSampler::ClassBalanced {
                batch_size: self.batch_size,
                classes_per_batch: self.classes_per_batch,
            }
        } else {
            BatchSampler::Uniform {
                batch_size: self.batch_size,
            }
        }
    }

    /// Applies the enhancement switches and produces the training recipe.
    pub fn train_spec(&self, spatial: usize) -> Result<TrainSpec> {
        self.validate()?;
        Ok(TrainSpec {
            loss: self.effective_loss(),
            emb_dim: self.emb_dim,
            pool_k: self.effective_pool_k(spatial)?,
            use_layer_norm: self.enhancements.norm,
            sampler: self.sampler(),
            optim: OptimConfig {
                base_lr: self.base_lr,
                proxy_lr: self.effective_proxy_lr(),
                momentum: self.momentum,
                epochs: self.epochs,
                temperature: self.effective_temperature(),
            },
            patience: self.patience,
            decay_factor: self.decay_factor,
        })
    }
}
