use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// The two halves of a randomization test.
///
/// `half_one` carries incorrect labels (each differs from the original);
/// `half_two` keeps the correct labels. The halves need not contain every
/// class, so they are built without the presence check of [`Dataset::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetPair {
    pub half_one: Dataset,
    /// Original labels of `half_one`, row-aligned.
    pub half_one_correct: Vec<usize>,
    pub half_two: Dataset,
    /// Source row of every `half_one` row.
    pub half_one_source: Vec<usize>,
    /// Source row of every `half_two` row.
    pub half_two_source: Vec<usize>,
    /// Source row left out when the input has odd length.
    pub dropped: Option<usize>,
    pub split_seed: u64,
    pub m: usize,
}

impl DatasetPair {
    /// Training inputs and targets: `half_one` (incorrect labels) followed by `half_two`.
    pub fn training_set(&self) -> (Array2<f64>, Vec<usize>) {
        let x = concatenate(Axis(0), &[self.half_one.features(), self.half_two.features()]).expect("same width");
        let y = self
            .half_one
            .labels()
            .iter()
            .chain(self.half_two.labels())
            .copied()
            .collect();
        (x, y)
    }
}

/// Splits `ds` into two random halves and relabels the first half.
///
/// A ChaCha8 stream keyed by `seed` shuffles row indices; the first `m = n/2`
/// go to `half_one`, the next `m` to `half_two` (an odd trailing row is
/// dropped and recorded). Within each half, rows keep their source order.
/// Each `half_one` label `y` becomes a draw uniform over the other `k − 1`
/// classes.
pub fn corrupt_half(ds: &Dataset, seed: u64) -> Result<DatasetPair> {
    if ds.len() < 2 {
        return Err(Error::config(format!(
            "dataset `{}` has {} samples; a split needs at least 2",
            ds.name(),
            ds.len()
        )));
    }
    let k = ds.class_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng);
    let m = ds.len() / 2;
    let dropped = (ds.len() % 2 == 1).then(|| order[2 * m]);
    let mut one = order[..m].to_vec();
    let mut two = order[m..2 * m].to_vec();
    one.sort_unstable();
    two.sort_unstable();

    let (x1, correct) = ds.rows(&one);
    let wrong: Vec<usize> = correct
        .iter()
        .map(|&y| {
            let r = rng.random_range(0..k - 1);
            if r >= y {
                r + 1
            } else {
                r
            }
        })
        .collect();
    let (x2, y2) = ds.rows(&two);
    Ok(DatasetPair {
        half_one: Dataset::new_partial(format!("{}/incorrect", ds.name()), x1, wrong, k)?,
        half_one_correct: correct,
        half_two: Dataset::new_partial(format!("{}/correct", ds.name()), x2, y2, k)?,
        half_one_source: one,
        half_two_source: two,
        dropped,
        split_seed: seed,
        m,
    })
}
