//! Experiment configuration, read from TOML.
//!
//! ```toml
//! master_seed = 7
//! epochs = 60
//! batch_size = 32
//! alpha = 1.0          # optional, default 1
//! repeats = 3          # optional, default 1
//! workers = 4          # optional, default: all cores
//!
//! [[datasets]]
//! id = "blobs-k2"
//! kind = "blobs"       # blobs | spirals | idx | csv
//! class_count = 2
//! per_class = 250
//! spread = 0.5
//!
//! [[datasets]]
//! id = "digits"
//! kind = "idx"
//! images = "train-images.idx3-ubyte"
//! labels = "train-labels.idx1-ubyte"
//! classes = [3, 7]     # optional class subset, relabelled densely
//! per_class_cap = 500  # optional
//!
//! [[models]]
//! id = "mlp"
//! hidden = [16]
//! precision = "full"   # full | binarized
//! activation = "relu"  # relu | tanh
//!
//! [[optimizers]]
//! id = "sgd"
//! kind = "sgd"         # sgd | adam | adamw
//! learning_rate = 0.01
//! momentum = 0.9
//! ```
//!
//! Unknown keys are rejected. Relative paths resolve against the config file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::measure::DEFAULT_ALPHA;
use crate::nn::{Activation, OptimizerConfig, OptimizerKind, Precision};

/// Learning rate used when an optimizer entry leaves it out.
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Worker threads for cell execution. Does not affect results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub datasets: Vec<DatasetConfig>,
    pub models: Vec<ModelConfig>,
    pub optimizers: Vec<OptimizerEntry>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_repeats() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Blobs,
    Spirals,
    Idx,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub kind: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class_cap: Option<usize>,
    /// Generator seed; derived from the master seed and `id` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Spread of blob clusters when a config leaves it out.
pub const DEFAULT_BLOB_SPREAD: f64 = 0.5;
/// Spiral noise when a config leaves it out.
pub const DEFAULT_SPIRAL_NOISE: f64 = 0.05;

impl DatasetConfig {
    pub fn blobs(id: impl Into<String>, class_count: usize, per_class: usize, spread: f64) -> Self {
        Self {
            class_count: Some(class_count),
            per_class: Some(per_class),
            spread: Some(spread),
            ..Self::empty(id, DatasetKind::Blobs)
        }
    }

    pub fn spirals(id: impl Into<String>, per_class: usize, noise: f64) -> Self {
        Self {
            per_class: Some(per_class),
            noise: Some(noise),
            ..Self::empty(id, DatasetKind::Spirals)
        }
    }

    pub fn idx(id: impl Into<String>, images: impl Into<PathBuf>, labels: impl Into<PathBuf>) -> Self {
        Self {
            images: Some(images.into()),
            labels: Some(labels.into()),
            ..Self::empty(id, DatasetKind::Idx)
        }
    }

    fn empty(id: impl Into<String>, kind: DatasetKind) -> Self {
        Self {
            id: id.into(),
            kind,
            class_count: None,
            per_class: None,
            spread: None,
            noise: None,
            images: None,
            labels: None,
            path: None,
            classes: None,
            per_class_cap: None,
            seed: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let id = &self.id;
        let unused = |key: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::config(format!("dataset `{id}`: key `{key}` does not apply to kind {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        let needs = |key: &str, present: bool| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(Error::config(format!("dataset `{id}`: kind {:?} requires key `{key}`", self.kind)))
            }
        };
        let generated = matches!(self.kind, DatasetKind::Blobs | DatasetKind::Spirals);
        let file_based = !generated;
        unused("images", generated && self.images.is_some())?;
        unused("labels", generated && self.labels.is_some())?;
        unused("path", self.kind != DatasetKind::Csv && self.path.is_some())?;
        unused("class_count", self.kind != DatasetKind::Blobs && self.class_count.is_some())?;
        unused("spread", self.kind != DatasetKind::Blobs && self.spread.is_some())?;
        unused("noise", self.kind != DatasetKind::Spirals && self.noise.is_some())?;
        unused("per_class", file_based && self.per_class.is_some())?;
        unused("seed", file_based && self.seed.is_some())?;
        match self.kind {
            DatasetKind::Blobs => {
                needs("class_count", self.class_count.is_some())?;
                needs("per_class", self.per_class.is_some())?;
            }
            DatasetKind::Spirals => needs("per_class", self.per_class.is_some())?,
            DatasetKind::Idx => {
                needs("images", self.images.is_some())?;
                needs("labels", self.labels.is_some())?;
            }
            DatasetKind::Csv => needs("path", self.path.is_some())?,
        }
        Ok(())
    }

    /// Materializes the dataset. `data_seed` feeds the generators; file paths
    /// resolve against `base_dir`.
    pub fn build(&self, data_seed: u64, base_dir: &Path) -> Result<Dataset> {
        self.validate()?;
        let seed = self.seed.unwrap_or(data_seed);
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base_dir.join(p) };
        let ds = match self.kind {
            DatasetKind::Blobs => data::make_blobs(
                self.class_count.unwrap_or_default(),
                self.per_class.unwrap_or_default(),
                self.spread.unwrap_or(DEFAULT_BLOB_SPREAD),
                seed,
            )?,
            DatasetKind::Spirals => data::make_spirals(
                self.per_class.unwrap_or_default(),
                self.noise.unwrap_or(DEFAULT_SPIRAL_NOISE),
                seed,
            )?,
            DatasetKind::Idx => data::load_idx(
                resolve(self.images.as_ref().expect("validated")),
                resolve(self.labels.as_ref().expect("validated")),
            )?,
            DatasetKind::Csv => {
                let path = resolve(self.path.as_ref().expect("validated"));
                let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                data::read_csv(file, &path, &self.id)?
            }
        };
        let ds = match (&self.classes, self.per_class_cap) {
            (Some(classes), cap) => data::subset_classes(&ds, classes, cap)?,
            (None, Some(cap)) => {
                let all: Vec<usize> = (0..ds.class_count()).collect();
                data::subset_classes(&ds, &all, Some(cap))?
            }
            (None, None) => ds,
        };
        Ok(ds.with_name(self.id.clone()))
    }
}

/// A model family; the input width and class count come from each dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub activation: Activation,
}

impl ModelConfig {
    pub fn new(id: impl Into<String>, hidden: Vec<usize>) -> Self {
        Self {
            id: id.into(),
            hidden,
            precision: Precision::Full,
            activation: Activation::Relu,
        }
    }

    pub fn layer_sizes(&self, input_dim: usize, class_count: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(class_count))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerEntry {
    pub id: String,
    pub kind: OptimizerKind,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_learning_rate() -> f64 {
    DEFAULT_LEARNING_RATE
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl OptimizerEntry {
    pub fn new(id: impl Into<String>, cfg: &OptimizerConfig) -> Self {
        Self {
            id: id.into(),
            kind: cfg.kind,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.kind,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }
}

fn unique_ids<'a>(what: &str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(Error::config(format!("{what} id must not be empty")));
        }
        if id.contains('/') {
            return Err(Error::config(format!("{what} id `{id}` must not contain `/`")));
        }
        if !seen.insert(id) {
            return Err(Error::config(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::config("`datasets` must list at least one dataset"));
        }
        if self.models.is_empty() {
            return Err(Error::config("`models` must list at least one model"));
        }
        if self.optimizers.is_empty() {
            return Err(Error::config("`optimizers` must list at least one optimizer"));
        }
        if self.epochs == 0 {
            return Err(Error::config("`epochs` must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("`batch_size` must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(Error::config("`repeats` must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("`workers` must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("`alpha` must be positive, got {}", self.alpha)));
        }
        unique_ids("dataset", self.datasets.iter().map(|d| d.id.as_str()))?;
        unique_ids("model", self.models.iter().map(|m| m.id.as_str()))?;
        unique_ids("optimizer", self.optimizers.iter().map(|o| o.id.as_str()))?;
        for d in &self.datasets {
            d.validate()?;
        }
        for m in &self.models {
            if let Some(i) = m.hidden.iter().position(|&h| h == 0) {
                return Err(Error::config(format!("model `{}`: hidden[{i}] is zero", m.id)));
            }
        }
        for o in &self.optimizers {
            o.config()
                .validate()
                .map_err(|e| Error::config(format!("optimizer `{}`: {e}", o.id)))?;
        }
        Ok(())
    }
}
