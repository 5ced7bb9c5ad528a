//! Feed-forward classifiers with full-precision or sign-binarized hidden
//! layers, softmax cross-entropy, and SGD/Adam/AdamW updates.

mod network;
mod optim;

pub use network::{
    argmax_rows, binarize, softmax_rows_in_place, ste_mask, Activation, Gradients, Network, NetworkSpec, Precision,
    STE_CLIP,
};
pub use optim::{train_step, OptimizerConfig, OptimizerKind, OptimizerState};

use ndarray::{ArrayView2, Axis};

use crate::error::{Error, Result};

/// Runs one pass over `features` in the given sample `order`, in mini-batches
/// of `batch_size`. Returns the mean batch loss. Divergence errors carry the
/// epoch and batch index.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    net: &mut Network,
    features: ArrayView2<f64>,
    targets: &[usize],
    order: &[usize],
    batch_size: usize,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
    epoch: usize,
) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    if targets.len() != features.nrows() {
        return Err(Error::shape(format!(
            "{} targets for {} samples",
            targets.len(),
            features.nrows()
        )));
    }
    let mut total = 0.0;
    let mut batches = 0usize;
    for (b, chunk) in order.chunks(batch_size).enumerate() {
        let x = features.select(Axis(0), chunk);
        let t: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
        total += train_step(net, x.view(), &t, cfg, state).map_err(|e| e.at_step(epoch, b))?;
        batches += 1;
    }
    Ok(if batches == 0 { 0.0 } else { total / batches as f64 })
}
