use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the window in which the straight-through estimator passes
/// gradients: `d sign(x)/dx := 1` for `|x| <= STE_CLIP`, `0` outside.
pub const STE_CLIP: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Full,
    /// Hidden weights and hidden activations go through `sign` in the
    /// forward pass; the first and last layers keep real-valued weights.
    Binarized,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

/// Topology and initialization recipe of a feed-forward classifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Input dimension, hidden widths, class count.
    pub layer_sizes: Vec<usize>,
    pub precision: Precision,
    /// Hidden nonlinearity in full precision. Binarized networks use `sign`.
    pub activation: Activation,
    pub init_seed: u64,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, precision: Precision, activation: Activation, init_seed: u64) -> Self {
        Self {
            layer_sizes,
            precision,
            activation,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config(format!(
                "layer_sizes needs an input and an output entry, got {:?}",
                self.layer_sizes
            )));
        }
        if let Some(i) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::config(format!("layer_sizes[{i}] is zero in {:?}", self.layer_sizes)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    /// Number of dense layers (weight matrices).
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Whether layer `index` uses sign-binarized weights.
    pub fn binarizes_weights(&self, index: usize) -> bool {
        self.precision == Precision::Binarized && index > 0 && index + 1 < self.depth()
    }
}

/// `sign` with the convention `sign(0) = +1`.
#[inline]
pub fn binarize(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Straight-through gradient mask for `binarize`.
#[inline]
pub fn ste_mask(x: f64) -> f64 {
    if x.abs() <= STE_CLIP {
        1.0
    } else {
        0.0
    }
}

/// Parameter gradients, laid out exactly like the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }
}

/// A dense feed-forward classifier. Weight `l` has shape `(layer_sizes[l], layer_sizes[l + 1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
}

struct Trace {
    /// Effective input of every layer (after activation/binarization).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer; the last entry holds the logits.
    pre: Vec<Array2<f64>>,
}

impl Network {
    /// Uniform initialization on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and
    /// biases, drawn layer by layer (weights row-major, then biases) from a
    /// ChaCha8 stream keyed by `init_seed`.
    pub fn init(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
        let mut weights = Vec::with_capacity(spec.depth());
        let mut biases = Vec::with_capacity(spec.depth());
        for pair in spec.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound));
            let b = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..=bound));
            weights.push(w);
            biases.push(b);
        }
        Ok(Self { spec, weights, biases })
    }

    /// Builds a network from explicit parameters, checking their shapes against `spec`.
    pub fn from_parts(spec: NetworkSpec, weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.depth() || biases.len() != spec.depth() {
            return Err(Error::shape(format!(
                "expected {} layers, got {} weights and {} biases",
                spec.depth(),
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in spec.layer_sizes.windows(2).enumerate() {
            if weights[l].dim() != (pair[0], pair[1]) || biases[l].len() != pair[1] {
                return Err(Error::shape(format!(
                    "layer {l}: expected weight {:?} and bias ({}), got {:?} and ({})",
                    (pair[0], pair[1]),
                    pair[1],
                    weights[l].dim(),
                    biases[l].len()
                )));
            }
        }
        Ok(Self { spec, weights, biases })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    /// Mutable access for callers that perturb parameters (e.g. gradient checks).
    pub fn params_mut(&mut self) -> (&mut [Array2<f64>], &mut [Array1<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Weight matrix layer `l` actually multiplies with in the forward pass.
    pub fn effective_weight(&self, l: usize) -> Array2<f64> {
        if self.spec.binarizes_weights(l) {
            self.weights[l].mapv(binarize)
        } else {
            self.weights[l].clone()
        }
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.spec.input_dim() {
            return Err(Error::shape(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.spec.input_dim()
            )));
        }
        Ok(())
    }

    fn activate(&self, z: &Array2<f64>) -> Array2<f64> {
        match (self.spec.precision, self.spec.activation) {
            (Precision::Binarized, _) => z.mapv(binarize),
            (Precision::Full, Activation::Relu) => z.mapv(|v| v.max(0.0)),
            (Precision::Full, Activation::Tanh) => z.mapv(f64::tanh),
        }
    }

    /// Derivative of the hidden activation evaluated at the pre-activation `z`.
    fn activation_grad(&self, z: &Array2<f64>) -> Array2<f64> {
        match (self.spec.precision, self.spec.activation) {
            (Precision::Binarized, _) => z.mapv(ste_mask),
            (Precision::Full, Activation::Relu) => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            (Precision::Full, Activation::Tanh) => z.mapv(|v| {
                let t = v.tanh();
                1.0 - t * t
            }),
        }
    }

    fn trace(&self, batch: ArrayView2<f64>) -> Trace {
        let depth = self.spec.depth();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        let mut a = batch.to_owned();
        for l in 0..depth {
            let z = if self.spec.binarizes_weights(l) {
                a.dot(&self.effective_weight(l)) + &self.biases[l]
            } else {
                a.dot(&self.weights[l]) + &self.biases[l]
            };
            let next = if l + 1 < depth { Some(self.activate(&z)) } else { None };
            inputs.push(a);
            pre.push(z);
            if let Some(n) = next {
                a = n;
            } else {
                break;
            }
        }
        Trace { inputs, pre }
    }

    /// Raw class scores before softmax.
    pub fn logits(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        let mut t = self.trace(batch);
        Ok(t.pre.pop().expect("depth >= 1"))
    }

    /// Class probabilities, one row per sample.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = self.logits(batch)?;
        softmax_rows_in_place(&mut z);
        Ok(z)
    }

    /// Arg-max labels; ties resolve to the lowest class index.
    pub fn predict_labels(&self, batch: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.forward(batch)?.view()))
    }

    /// Mean softmax cross-entropy over the batch and its parameter gradients.
    /// Binarized layers propagate through the straight-through estimator.
    pub fn loss_and_gradients(&self, batch: ArrayView2<f64>, targets: &[usize]) -> Result<(f64, Gradients)> {
        self.check_batch(&batch)?;
        if targets.len() != batch.nrows() {
            return Err(Error::shape(format!(
                "{} targets for a batch of {} rows",
                targets.len(),
                batch.nrows()
            )));
        }
        let k = self.spec.class_count();
        if let Some(&t) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::shape(format!("target {t} outside {k} classes")));
        }
        if batch.nrows() == 0 {
            return Err(Error::shape("empty batch"));
        }

        let trace = self.trace(batch);
        let depth = self.spec.depth();
        let n = batch.nrows() as f64;

        let mut delta = trace.pre[depth - 1].clone();
        let mut loss = 0.0;
        for (mut row, &t) in delta.axis_iter_mut(Axis(0)).zip(targets) {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let log_sum = row.fold(0.0, |s, &v| s + (v - max).exp()).ln() + max;
            loss += log_sum - row[t];
            row.mapv_inplace(|v| (v - log_sum).exp());
            row[t] -= 1.0;
        }
        loss /= n;
        delta /= n;

        let mut grads = Gradients::zeros_like(self);
        for l in (0..depth).rev() {
            let mut gw = trace.inputs[l].t().dot(&delta);
            if self.spec.binarizes_weights(l) {
                Zip::from(&mut gw).and(&self.weights[l]).for_each(|g, &w| *g *= ste_mask(w));
            }
            grads.weights[l] = gw;
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let upstream = if self.spec.binarizes_weights(l) {
                    delta.dot(&self.effective_weight(l).t())
                } else {
                    delta.dot(&self.weights[l].t())
                };
                delta = upstream * self.activation_grad(&trace.pre[l - 1]);
            }
        }
        Ok((loss, grads))
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows_in_place(z: &mut Array2<f64>) {
    for mut row in z.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Index of the largest entry per row, lowest index on ties.
pub fn argmax_rows(scores: ArrayView2<f64>) -> Vec<usize> {
    scores
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
