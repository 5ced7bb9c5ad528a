use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};

/// Angular extent of each spiral arm, in radians.
const SPIRAL_SWEEP: f64 = 3.0 * PI;
/// Radius at which each arm starts.
const SPIRAL_INNER_RADIUS: f64 = 0.1;

fn check_noise(name: &str, value: f64) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::config(format!("{name} must be finite and >= 0, got {value}")));
    }
    Ok(())
}

/// `class_count` isotropic Gaussian clusters of `per_class` points each.
///
/// Class `c` is centered at `(cos 2πc/k, sin 2πc/k)` with standard deviation
/// `spread`. Samples are emitted class by class.
pub fn make_blobs(class_count: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if class_count < 2 {
        return Err(Error::config(format!("blobs need at least 2 classes, got {class_count}")));
    }
    if per_class == 0 {
        return Err(Error::config("per_class must be at least 1"));
    }
    check_noise("spread", spread)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = class_count * per_class;
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for c in 0..class_count {
        let angle = 2.0 * PI * c as f64 / class_count as f64;
        let (cy, cx) = angle.sin_cos();
        for _ in 0..per_class {
            let row = labels.len();
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            features[[row, 0]] = cx + spread * dx;
            features[[row, 1]] = cy + spread * dy;
            labels.push(c);
        }
    }
    Dataset::new(format!("blobs-k{class_count}-n{per_class}"), features, labels, class_count)
}

/// Two interleaved spiral arms, `per_class` points each.
///
/// Point `i` of arm 0 sits at radius `r = 0.1 + 0.9·t` and angle `3π·t` with
/// `t = i / per_class`; arm 1 is arm 0 rotated by π. Gaussian noise with
/// standard deviation `noise` is added to both coordinates.
pub fn make_spirals(per_class: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if per_class == 0 {
        return Err(Error::config("per_class must be at least 1"));
    }
    check_noise("noise", noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((2 * per_class, 2));
    let mut labels = Vec::with_capacity(2 * per_class);
    for arm in 0..2 {
        let offset = PI * arm as f64;
        for i in 0..per_class {
            let t = i as f64 / per_class as f64;
            let r = SPIRAL_INNER_RADIUS + (1.0 - SPIRAL_INNER_RADIUS) * t;
            let (s, c) = (SPIRAL_SWEEP * t + offset).sin_cos();
            let row = labels.len();
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            features[[row, 0]] = r * c + noise * dx;
            features[[row, 1]] = r * s + noise * dy;
            labels.push(arm);
        }
    }
    Dataset::new(format!("spirals-n{per_class}"), features, labels, 2)
}
