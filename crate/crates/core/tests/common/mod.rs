//! Helpers shared by the integration test targets.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use confdim::nn::{Activation, Network, Precision};
use confdim::runner::ExperimentConfig;
use ndarray::{Array1, Array2};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn toy_suite() -> ExperimentConfig {
    ExperimentConfig::load(workspace_root().join("configs/toy_suite.toml")).expect("toy suite config")
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn window(v: f64) -> f64 {
    if v.abs() <= 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Parameters as plain nested vectors, row-major `[fan_in][fan_out]`.
#[derive(Clone)]
pub struct Params {
    pub w: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
}

impl Params {
    pub fn of(net: &Network) -> Self {
        Self {
            w: net.weights().iter().map(|m| m.outer_iter().map(|r| r.to_vec()).collect()).collect(),
            b: net.biases().iter().map(|v| v.to_vec()).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.w.iter().zip(&self.b) {
            out.extend(w.iter().flatten());
            out.extend(b);
        }
        out
    }

    fn set_flat(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        for (w, b) in self.w.iter_mut().zip(self.b.iter_mut()) {
            let cols = b.len();
            let nw = w.len() * cols;
            if i < nw {
                w[i / cols][i % cols] = value;
                return;
            }
            i -= nw;
            if i < cols {
                b[i] = value;
                return;
            }
            i -= cols;
        }
        panic!("parameter index {idx} out of range");
    }
}

/// Flattened backprop gradients in the same order as [`Params::flat`].
pub fn flat_grads(weights: &[Array2<f64>], biases: &[Array1<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in weights.iter().zip(biases) {
        out.extend(w.iter());
        out.extend(b.iter());
    }
    out
}

/// Reference forward pass written with scalar loops.
///
/// In binarized mode every `sign(u)` is replaced by the anchored surrogate
/// `sign(u0) + 1{|u0| <= 1}·(u − u0)`, where `u0` is the value of `u` under
/// `anchor`. The surrogate agrees with the real forward pass at the anchor and
/// its exact derivative there is the straight-through gradient.
pub struct Reference<'a> {
    pub precision: Precision,
    pub activation: Activation,
    pub anchor: &'a Params,
    pub x: &'a [Vec<f64>],
    pub targets: &'a [usize],
}

impl Reference<'_> {
    /// Pre-activations per layer per sample under the anchor, in the real forward pass.
    fn anchor_pre(&self) -> Vec<Vec<Vec<f64>>> {
        let depth = self.anchor.w.len();
        let mut out = vec![Vec::new(); depth];
        for x in self.x {
            let mut a = x.clone();
            for l in 0..depth {
                let z = self.layer(l, &a, self.anchor, false);
                a = z.iter().map(|&v| self.hidden(v, v)).collect();
                out[l].push(z);
            }
        }
        out
    }

    fn binarized_layer(&self, l: usize) -> bool {
        self.precision == Precision::Binarized && l > 0 && l + 1 < self.anchor.w.len()
    }

    fn layer(&self, l: usize, a: &[f64], p: &Params, anchored: bool) -> Vec<f64> {
        let w = &p.w[l];
        let cols = p.b[l].len();
        (0..cols)
            .map(|j| {
                let mut s = p.b[l][j];
                for (i, ai) in a.iter().enumerate() {
                    let wij = if self.binarized_layer(l) {
                        let w0 = self.anchor.w[l][i][j];
                        if anchored {
                            sign(w0) + window(w0) * (w[i][j] - w0)
                        } else {
                            sign(w[i][j])
                        }
                    } else {
                        w[i][j]
                    };
                    s += ai * wij;
                }
                s
            })
            .collect()
    }

    fn hidden(&self, u: f64, u0: f64) -> f64 {
        match (self.precision, self.activation) {
            (Precision::Binarized, _) => sign(u0) + window(u0) * (u - u0),
            (Precision::Full, Activation::Relu) => u.max(0.0),
            (Precision::Full, Activation::Tanh) => u.tanh(),
        }
    }

    /// Mean cross-entropy of the surrogate network at `p`.
    pub fn loss(&self, p: &Params) -> f64 {
        let depth = p.w.len();
        let pre0 = self.anchor_pre();
        let mut total = 0.0;
        for (s, (x, &t)) in self.x.iter().zip(self.targets).enumerate() {
            let mut a = x.clone();
            let mut z = Vec::new();
            for l in 0..depth {
                z = self.layer(l, &a, p, true);
                if l + 1 < depth {
                    a = z.iter().zip(&pre0[l][s]).map(|(&u, &u0)| self.hidden(u, u0)).collect();
                }
            }
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            total += lse - z[t];
        }
        total / self.x.len() as f64
    }

    /// Central differences of [`Self::loss`] around the anchor.
    pub fn numeric_gradient(&self, h: f64) -> Vec<f64> {
        let base = self.anchor.flat();
        let mut p = self.anchor.clone();
        base.iter()
            .enumerate()
            .map(|(i, &v)| {
                p.set_flat(i, v + h);
                let up = self.loss(&p);
                p.set_flat(i, v - h);
                let down = self.loss(&p);
                p.set_flat(i, v);
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Smallest distance of any anchor pre-activation from a relu kink. The
    /// surrogate is linear in binarized mode and tanh is smooth, so both report infinity.
    pub fn kink_margin(&self) -> f64 {
        let pre = self.anchor_pre();
        let depth = self.anchor.w.len();
        let mut margin = f64::INFINITY;
        for layer in pre.iter().take(depth - 1) {
            for v in layer.iter().flatten() {
                let d = match (self.precision, self.activation) {
                    (Precision::Full, Activation::Relu) => v.abs(),
                    _ => f64::INFINITY,
                };
                margin = margin.min(d);
            }
        }
        margin
    }
}

/// Relative error with a floor on the denominator for near-zero gradients.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// A random small network, batch and targets. Odd seeds are binarized. A
/// third of the hidden binarized weights are pushed outside the STE window.
pub fn gradient_case(seed: u64) -> (Network, Vec<Vec<f64>>, Vec<usize>) {
    use confdim::nn::NetworkSpec;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let hidden = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(2..=4)];
    sizes.extend((0..hidden).map(|_| rng.random_range(2..=6)));
    let k = rng.random_range(2..=4);
    sizes.push(k);
    let precision = if seed % 2 == 1 { Precision::Binarized } else { Precision::Full };
    let activation = if seed % 4 < 2 { Activation::Tanh } else { Activation::Relu };
    let spec = NetworkSpec::new(sizes.clone(), precision, activation, rng.random());
    let init = Network::init(spec.clone()).expect("valid spec");
    let mut weights = init.weights().to_vec();
    for (l, w) in weights.iter_mut().enumerate() {
        if spec.binarizes_weights(l) {
            w.mapv_inplace(|v| if rng.random_range(0..3) == 0 { v.signum() * rng.random_range(1.2..2.0) } else { v });
        }
    }
    let biases = init.biases().iter().map(|b| b.mapv(|_| rng.random_range(-0.5..0.5))).collect();
    let net = Network::from_parts(spec, weights, biases).expect("shapes match");
    let n = rng.random_range(1..=6);
    let x = (0..n).map(|_| (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let t = (0..n).map(|_| rng.random_range(0..k)).collect();
    (net, x, t)
}

/// Largest per-parameter relative error between backprop and central
/// differences of the reference; `None` when a relu kink is too close to call.
pub fn max_gradient_error(net: &Network, x: &[Vec<f64>], targets: &[usize]) -> Option<f64> {
    const H: f64 = 1e-5;
    let anchor = Params::of(net);
    let spec = net.spec();
    let reference = Reference {
        precision: spec.precision,
        activation: spec.activation,
        anchor: &anchor,
        x,
        targets,
    };
    if reference.kink_margin() < 1e-3 {
        return None;
    }
    let batch = Array2::from_shape_fn((x.len(), x[0].len()), |(i, j)| x[i][j]);
    let (loss, grads) = net.loss_and_gradients(batch.view(), targets).expect("valid batch");
    assert!((loss - reference.loss(&anchor)).abs() < 1e-12, "reference forward disagrees with the network");
    let analytic = flat_grads(&grads.weights, &grads.biases);
    let numeric = reference.numeric_gradient(H);
    assert_eq!(analytic.len(), numeric.len());
    Some(
        analytic
            .iter()
            .zip(&numeric)
            .map(|(&a, &n)| relative_error(a, n))
            .fold(0.0, f64::max),
    )
}

/// A dataset with labels `0, 1, …, k−1, 0, 1, …` and one feature holding the row index,
/// so rows can be traced through a split.
pub fn cyclic_dataset(n: usize, k: usize) -> confdim::data::Dataset {
    let features = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
    confdim::data::Dataset::new("cyclic", features, (0..n).map(|i| i % k).collect(), k).expect("n >= k")
}

/// Checks one split: the halves and the dropped row partition the input,
/// rows carry their source features, and no corrupted label equals the original.
pub fn check_split(ds: &confdim::data::Dataset, pair: &confdim::data::DatasetPair) -> Result<(), String> {
    let n = ds.len();
    let mut seen = vec![0u8; n];
    for &i in pair.half_one_source.iter().chain(&pair.half_two_source).chain(pair.dropped.iter()) {
        seen[i] += 1;
    }
    if seen.iter().any(|&c| c != 1) {
        return Err(format!("rows not partitioned: {seen:?}"));
    }
    if pair.half_one.len() != n / 2 || pair.half_two.len() != n / 2 || pair.m != n / 2 {
        return Err(format!("half sizes {} / {} for n = {n}", pair.half_one.len(), pair.half_two.len()));
    }
    for (half, src) in [(&pair.half_one, &pair.half_one_source), (&pair.half_two, &pair.half_two_source)] {
        for (r, &s) in src.iter().enumerate() {
            if half.features()[[r, 0]] != ds.features()[[s, 0]] {
                return Err(format!("row {r} does not hold source row {s}"));
            }
        }
    }
    for (r, &s) in pair.half_one_source.iter().enumerate() {
        if pair.half_one_correct[r] != ds.labels()[s] {
            return Err(format!("half_one_correct[{r}] is not the source label"));
        }
        if pair.half_one.labels()[r] == ds.labels()[s] {
            return Err(format!("corrupted label kept at source row {s}"));
        }
    }
    for (r, &s) in pair.half_two_source.iter().enumerate() {
        if pair.half_two.labels()[r] != ds.labels()[s] {
            return Err(format!("half_two label changed at source row {s}"));
        }
    }
    Ok(())
}

/// Chi-square p-value of the corrupted labels against "uniform over the other
/// k − 1 classes", pooled over `trials` splits of a `k`-class dataset (`k >= 3`).
pub fn corrupted_label_uniformity(k: usize, n: usize, trials: u64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let ds = cyclic_dataset(n, k);
    let mut counts = vec![vec![0u64; k]; k];
    for seed in 0..trials {
        let pair = confdim::data::corrupt_half(&ds, seed).expect("split");
        for (&y, &w) in pair.half_one_correct.iter().zip(pair.half_one.labels()) {
            counts[y][w] += 1;
        }
    }
    let mut stat = 0.0;
    for (y, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        let expected = total as f64 / (k - 1) as f64;
        for (w, &c) in row.iter().enumerate() {
            if w != y {
                stat += (c as f64 - expected).powi(2) / expected;
            }
        }
    }
    let dof = (k * (k - 2)) as f64;
    1.0 - ChiSquared::new(dof).expect("dof > 0").cdf(stat)
}
