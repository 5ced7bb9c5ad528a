use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DatasetConfig, ExperimentConfig, ModelConfig, OptimizerEntry};
use crate::data::{corrupt_half, Dataset};
use crate::error::{Error, Result};
use crate::measure::{empirical_risk, CdMeasurement, EpochRisk, TrainRun};
use crate::nn::{self, Network, NetworkSpec, OptimizerState};

/// Seed for one purpose derived from the master seed: the first eight bytes
/// (little-endian) of SHA-256 over the master seed and length-prefixed parts.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

/// Hex SHA-256 of the config's canonical JSON form (worker count excluded).
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.workers = None;
    let bytes = serde_json::to_vec(&canonical).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Rankings compare models within a setting: one dataset under one optimizer.
pub fn setting_id(dataset_id: &str, optimizer_id: &str) -> String {
    format!("{dataset_id}/{optimizer_id}")
}

/// Coordinates of one training run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub index: usize,
    pub dataset_id: String,
    pub model_id: String,
    pub optimizer_id: String,
    pub repeat: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok { run: TrainRun, measurement: CdMeasurement },
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(flatten)]
    pub key: CellKey,
    pub setting_id: String,
    pub seed: u64,
    pub split_seed: u64,
    pub outcome: CellOutcome,
}

impl CellRecord {
    pub fn measurement(&self) -> Option<&CdMeasurement> {
        match &self.outcome {
            CellOutcome::Ok { measurement, .. } => Some(measurement),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Repeats of one (dataset, model, optimizer) combination, averaged.
///
/// `measurement.p`, `.delta` and `.err` are means over successful repeats;
/// `measurement.cd` is `min(1, p + delta)` of those means (the mean CD when no
/// repeat was clamped) and `measurement.bound_prob` uses the mean error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset_id: String,
    pub model_id: String,
    pub optimizer_id: String,
    pub setting_id: String,
    pub measurement: CdMeasurement,
    pub p_min: f64,
    pub p_max: f64,
    pub cd_min: f64,
    pub cd_max: f64,
    pub repeats_ok: usize,
    pub repeats_failed: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub toolkit_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellRecord>,
    pub aggregates: Vec<Aggregate>,
    /// Wall-clock milliseconds per cell, by cell index. Ignored by equality.
    pub durations_ms: Vec<f64>,
}

impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.toolkit_version == other.toolkit_version
            && self.config_hash == other.config_hash
            && self.config == other.config
            && self.cells == other.cells
            && self.aggregates == other.aggregates
    }
}

impl RunRecord {
    pub fn successful_cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| c.measurement().is_some())
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| c.measurement().is_none())
    }

    /// Setting ids in config order (dataset-major, then optimizer).
    pub fn setting_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in &self.aggregates {
            if !out.contains(&a.setting_id) {
                out.push(a.setting_id.clone());
            }
        }
        out
    }

    /// Averaged measurements grouped by setting.
    pub fn measurements_by_setting(&self) -> Vec<(String, Vec<CdMeasurement>)> {
        self.setting_ids()
            .into_iter()
            .map(|s| {
                let ms = self
                    .aggregates
                    .iter()
                    .filter(|a| a.setting_id == s)
                    .map(|a| a.measurement.clone())
                    .collect();
                (s, ms)
            })
            .collect()
    }

    /// JSON with durations zeroed; equal runs give identical bytes.
    pub fn measurement_bytes(&self) -> Vec<u8> {
        let mut r = self.clone();
        r.durations_ms.iter_mut().for_each(|d| *d = 0.0);
        serde_json::to_vec_pretty(&r).expect("record serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::argument(format!("invalid run record: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// A validated config with its datasets materialized and cells enumerated.
///
/// Cell `i` is independent of every other cell: its seeds depend only on the
/// master seed and the cell's coordinates, so cells may run in any order.
pub struct ExperimentPlan {
    cfg: ExperimentConfig,
    datasets: Vec<std::result::Result<Dataset, String>>,
    cells: Vec<CellKey>,
}

impl ExperimentPlan {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        Self::with_base_dir(cfg, Path::new("."))
    }

    /// Relative dataset paths resolve against `base_dir`. A dataset that fails
    /// to build fails only its own cells.
    pub fn with_base_dir(cfg: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        cfg.validate()?;
        let base: PathBuf = base_dir.to_path_buf();
        let datasets = cfg
            .datasets
            .iter()
            .map(|d| {
                let seed = derive_seed(cfg.master_seed, &["data", &d.id]);
                d.build(seed, &base).map_err(|e| e.to_string())
            })
            .collect();
        let mut cells = Vec::new();
        for d in &cfg.datasets {
            for m in &cfg.models {
                for o in &cfg.optimizers {
                    for repeat in 0..cfg.repeats {
                        cells.push(CellKey {
                            index: cells.len(),
                            dataset_id: d.id.clone(),
                            model_id: m.id.clone(),
                            optimizer_id: o.id.clone(),
                            repeat,
                        });
                    }
                }
            }
        }
        Ok(Self { cfg, datasets, cells })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn cells(&self) -> &[CellKey] {
        &self.cells
    }

    /// Runs cell `index`; failures are captured in the record.
    pub fn run_cell(&self, index: usize) -> (CellRecord, f64) {
        let key = self.cells[index].clone();
        let master = self.cfg.master_seed;
        let rep = key.repeat.to_string();
        let seed = derive_seed(master, &["cell", &key.dataset_id, &key.model_id, &key.optimizer_id, &rep]);
        let split_seed = derive_seed(master, &["split", &key.dataset_id, &rep]);
        let setting = setting_id(&key.dataset_id, &key.optimizer_id);
        let start = Instant::now();
        let outcome = match self.execute(&key, &setting, seed, split_seed) {
            Ok((run, measurement)) => CellOutcome::Ok { run, measurement },
            Err(e) => CellOutcome::Failed { error: e.to_string() },
        };
        let ms = start.elapsed().as_secs_f64() * 1e3;
        (
            CellRecord {
                key,
                setting_id: setting,
                seed,
                split_seed,
                outcome,
            },
            ms,
        )
    }

    fn dataset_config(&self, id: &str) -> (usize, &DatasetConfig) {
        self.cfg
            .datasets
            .iter()
            .enumerate()
            .find(|(_, d)| d.id == id)
            .expect("cell refers to a configured dataset")
    }

    fn model(&self, id: &str) -> &ModelConfig {
        self.cfg.models.iter().find(|m| m.id == id).expect("configured model")
    }

    fn optimizer(&self, id: &str) -> &OptimizerEntry {
        self.cfg.optimizers.iter().find(|o| o.id == id).expect("configured optimizer")
    }

    fn execute(&self, key: &CellKey, setting: &str, seed: u64, split_seed: u64) -> Result<(TrainRun, CdMeasurement)> {
        let (di, _) = self.dataset_config(&key.dataset_id);
        let dataset = self.datasets[di]
            .as_ref()
            .map_err(|e| Error::config(format!("dataset `{}` unavailable: {e}", key.dataset_id)))?;
        let model = self.model(&key.model_id);
        let opt = self.optimizer(&key.optimizer_id).config();

        let pair = corrupt_half(dataset, split_seed)?;
        let (x, targets) = pair.training_set();
        let spec = NetworkSpec::new(
            model.layer_sizes(dataset.dim(), dataset.class_count()),
            model.precision,
            model.activation,
            derive_seed(seed, &["init"]),
        );
        let mut net = Network::init(spec)?;
        let mut state = OptimizerState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..targets.len()).collect();
        let mut risks = Vec::with_capacity(self.cfg.epochs);
        for epoch in 0..self.cfg.epochs {
            order.shuffle(&mut rng);
            nn::train_epoch(&mut net, x.view(), &targets, &order, self.cfg.batch_size, &opt, &mut state, epoch)?;
            risks.push(half_risks(&net, &pair)?);
        }
        let last = *risks.last().expect("epochs >= 1");
        let run = TrainRun {
            epoch_risks: risks,
            final_err: last.combined(),
            m: pair.m,
            model_id: key.model_id.clone(),
            setting_id: setting.to_string(),
            seed,
        };
        let measurement = CdMeasurement::from_run(&run, self.cfg.alpha)?;
        Ok((run, measurement))
    }

    /// Assembles a record from per-cell results given in any order.
    pub fn assemble(&self, mut results: Vec<(CellRecord, f64)>) -> Result<RunRecord> {
        results.sort_by_key(|(c, _)| c.key.index);
        if results.len() != self.cells.len() || results.iter().enumerate().any(|(i, (c, _))| c.key.index != i) {
            return Err(Error::argument("cell results do not cover the plan exactly once"));
        }
        let (cells, durations_ms): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let aggregates = aggregate(&self.cfg, &cells)?;
        Ok(RunRecord {
            toolkit_version: crate::VERSION.to_string(),
            config_hash: config_hash(&self.cfg),
            config: self.cfg.clone(),
            cells,
            aggregates,
            durations_ms,
        })
    }

    /// Runs the cells in the given order, one after another.
    pub fn run_in_order(&self, order: &[usize]) -> Result<RunRecord> {
        let results = order.iter().map(|&i| self.run_cell(i)).collect();
        self.assemble(results)
    }

    /// Runs every cell on the rayon pool (or `workers` threads when configured).
    pub fn run(&self) -> Result<RunRecord> {
        let work = || -> Vec<(CellRecord, f64)> { (0..self.cells.len()).into_par_iter().map(|i| self.run_cell(i)).collect() };
        let results = match self.cfg.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?
                .install(work),
            None => work(),
        };
        self.assemble(results)
    }
}

fn half_risks(net: &Network, pair: &crate::data::DatasetPair) -> Result<EpochRisk> {
    let v1 = empirical_risk(&net.predict_labels(pair.half_one.features())?, pair.half_one.labels())?;
    let v2 = empirical_risk(&net.predict_labels(pair.half_two.features())?, pair.half_two.labels())?;
    Ok(EpochRisk { v1, v2 })
}

fn aggregate(cfg: &ExperimentConfig, cells: &[CellRecord]) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    for d in &cfg.datasets {
        for m in &cfg.models {
            for o in &cfg.optimizers {
                let group: Vec<&CellRecord> = cells
                    .iter()
                    .filter(|c| c.key.dataset_id == d.id && c.key.model_id == m.id && c.key.optimizer_id == o.id)
                    .collect();
                let ok: Vec<&CdMeasurement> = group.iter().filter_map(|c| c.measurement()).collect();
                if ok.is_empty() {
                    continue;
                }
                let n = ok.len() as f64;
                let mean = |f: fn(&CdMeasurement) -> f64| ok.iter().map(|x| f(x)).sum::<f64>() / n;
                let (p, delta, err) = (mean(|x| x.p), mean(|x| x.delta), mean(|x| x.err));
                let setting = setting_id(&d.id, &o.id);
                let first = ok[0];
                let measurement = CdMeasurement {
                    p,
                    delta,
                    cd: crate::measure::confidence_dimension(p, delta)?,
                    bound_prob: crate::measure::bound_probability(err)?,
                    alpha: cfg.alpha,
                    m: first.m,
                    err,
                    model_id: m.id.clone(),
                    setting_id: setting.clone(),
                    seed: cfg.master_seed,
                };
                let fold = |f: fn(&CdMeasurement) -> f64, pick: fn(f64, f64) -> f64, init: f64| {
                    ok.iter().map(|x| f(x)).fold(init, pick)
                };
                out.push(Aggregate {
                    dataset_id: d.id.clone(),
                    model_id: m.id.clone(),
                    optimizer_id: o.id.clone(),
                    setting_id: setting,
                    measurement,
                    p_min: fold(|x| x.p, f64::min, f64::INFINITY),
                    p_max: fold(|x| x.p, f64::max, f64::NEG_INFINITY),
                    cd_min: fold(|x| x.cd, f64::min, f64::INFINITY),
                    cd_max: fold(|x| x.cd, f64::max, f64::NEG_INFINITY),
                    repeats_ok: ok.len(),
                    repeats_failed: group.len() - ok.len(),
                });
            }
        }
    }
    Ok(out)
}

/// Runs a whole experiment: plan, execute every cell, assemble.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    ExperimentPlan::new(cfg.clone())?.run()
}
