use ndarray::{Array1, Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    #[serde(rename = "adamw")]
    AdamW,
}

/// Hyper-parameters for one of the three supported update rules.
///
/// Fields that do not apply to `kind` are ignored (`momentum` only affects
/// SGD, `beta1`/`beta2`/`epsilon` only Adam and AdamW, `weight_decay` only AdamW).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
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

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64, momentum: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            momentum,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            weight_decay: 0.0,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::sgd(learning_rate, 0.0)
        }
    }

    pub fn adamw(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            kind: OptimizerKind::AdamW,
            weight_decay,
            ..Self::sgd(learning_rate, 0.0)
        }
    }

    /// Checks the configuration for use in an experiment (strictly positive learning rate).
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        self.validate_rule()
    }

    /// Constraints needed for a well-defined update. A zero learning rate is allowed here.
    fn validate_rule(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                if !(0.0..1.0).contains(&self.momentum) {
                    return Err(Error::config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
                }
            }
            OptimizerKind::Adam | OptimizerKind::AdamW => {
                if !(0.0 <= self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0) {
                    return Err(Error::config(format!(
                        "need 0 <= beta1 < beta2 < 1, got beta1 = {}, beta2 = {}",
                        self.beta1, self.beta2
                    )));
                }
                if self.epsilon.is_nan() || self.epsilon <= 0.0 {
                    return Err(Error::config(format!("epsilon must be positive, got {}", self.epsilon)));
                }
                if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
                    return Err(Error::config(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
                }
            }
        }
        Ok(())
    }
}

/// Per-parameter optimizer memory. Starts zeroed and is bound to one
/// optimizer kind on the first step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState {
    kind: Option<OptimizerKind>,
    step: u64,
    /// SGD velocity, or Adam's first moment.
    first: Option<Gradients>,
    /// Adam's second moment.
    second: Option<Gradients>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update with precomputed gradients.
    pub fn apply(&mut self, net: &mut Network, grads: &Gradients, cfg: &OptimizerConfig) -> Result<()> {
        cfg.validate_rule()?;
        match self.kind {
            None => self.kind = Some(cfg.kind),
            Some(k) if k != cfg.kind => {
                return Err(Error::config(format!("optimizer state was built for {k:?}, not {:?}", cfg.kind)));
            }
            Some(_) => {}
        }
        self.step += 1;
        let lr = cfg.learning_rate;
        let first = self.first.get_or_insert_with(|| Gradients::zeros_like(net));
        match cfg.kind {
            OptimizerKind::Sgd => {
                let mu = cfg.momentum;
                let sgd2 = |w: &mut Array2<f64>, v: &mut Array2<f64>, g: &Array2<f64>| {
                    Zip::from(w).and(v).and(g).for_each(|w, v, &g| {
                        *v = mu * *v + g;
                        *w -= lr * *v;
                    })
                };
                let sgd1 = |w: &mut Array1<f64>, v: &mut Array1<f64>, g: &Array1<f64>| {
                    Zip::from(w).and(v).and(g).for_each(|w, v, &g| {
                        *v = mu * *v + g;
                        *w -= lr * *v;
                    })
                };
                for l in 0..grads.weights.len() {
                    sgd2(&mut net.weights[l], &mut first.weights[l], &grads.weights[l]);
                    sgd1(&mut net.biases[l], &mut first.biases[l], &grads.biases[l]);
                }
            }
            OptimizerKind::Adam | OptimizerKind::AdamW => {
                let second = self.second.get_or_insert_with(|| Gradients::zeros_like(net));
                let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.epsilon);
                let t = self.step as i32;
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                let decay = if cfg.kind == OptimizerKind::AdamW { lr * cfg.weight_decay } else { 0.0 };
                let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *w -= decay * *w;
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                };
                for l in 0..grads.weights.len() {
                    Zip::from(&mut net.weights[l])
                        .and(&mut first.weights[l])
                        .and(&mut second.weights[l])
                        .and(&grads.weights[l])
                        .for_each(|w, m, v, &g| update(w, m, v, g));
                    Zip::from(&mut net.biases[l])
                        .and(&mut first.biases[l])
                        .and(&mut second.biases[l])
                        .and(&grads.biases[l])
                        .for_each(|w, m, v, &g| update(w, m, v, g));
                }
            }
        }
        if !net.all_finite() {
            return Err(Error::Divergence {
                at: None,
                detail: "non-finite parameter after update".into(),
            });
        }
        Ok(())
    }
}

/// One optimizer step on softmax cross-entropy. Returns the pre-update batch loss.
pub fn train_step(
    net: &mut Network,
    batch: ArrayView2<f64>,
    targets: &[usize],
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<f64> {
    let (loss, grads) = net.loss_and_gradients(batch, targets)?;
    if !loss.is_finite() {
        return Err(Error::Divergence {
            at: None,
            detail: format!("loss is {loss}"),
        });
    }
    state.apply(net, &grads, cfg)?;
    Ok(loss)
}
