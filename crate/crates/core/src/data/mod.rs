//! Datasets for randomization tests.
//!
//! Everything here is a pure function of its arguments; generators and the
//! label corruption draw from ChaCha8 streams keyed by an explicit seed.

mod corrupt;
mod idx;
mod synthetic;
mod tabular;

pub use corrupt::{corrupt_half, DatasetPair};
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synthetic::{make_blobs, make_spirals};
pub use tabular::{read_csv, write_csv};

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Feature rows with class labels in `0..class_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
    name: String,
}

impl Dataset {
    /// Validated constructor: row count matches label count, `class_count >= 2`,
    /// every label is in range and every class occurs at least once.
    pub fn new(name: impl Into<String>, features: Array2<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let ds = Self::new_partial(name, features, labels, class_count)?;
        let counts = ds.class_counts();
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::config(format!(
                "dataset `{}` has no sample of class {c} (class_count {})",
                ds.name, ds.class_count
            )));
        }
        Ok(ds)
    }

    /// Like [`Dataset::new`] but tolerates absent classes. Used for the halves
    /// of a split, where a small dataset can leave a class on one side only.
    pub(crate) fn new_partial(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let name = name.into();
        if features.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "dataset `{name}`: {} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if class_count < 2 {
            return Err(Error::config(format!("dataset `{name}`: class_count must be >= 2, got {class_count}")));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::config(format!(
                "dataset `{name}`: label {bad} outside 0..{class_count}"
            )));
        }
        Ok(Self {
            features,
            labels,
            class_count,
            name,
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Rows at `indices`, in that order, keeping this dataset's labels.
    pub(crate) fn rows(&self, indices: &[usize]) -> (Array2<f64>, Vec<usize>) {
        (
            self.features.select(Axis(0), indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

/// Keeps only samples of `classes`, relabelling `classes[j]` to `j`.
/// Retained samples stay in their original order; with `per_class_cap`, only
/// the first `cap` samples of each class are kept.
pub fn subset_classes(ds: &Dataset, classes: &[usize], per_class_cap: Option<usize>) -> Result<Dataset> {
    let mut remap = vec![None; ds.class_count];
    for (j, &c) in classes.iter().enumerate() {
        if c >= ds.class_count {
            return Err(Error::config(format!(
                "class {c} does not exist in `{}` ({} classes)",
                ds.name, ds.class_count
            )));
        }
        if remap[c].replace(j).is_some() {
            return Err(Error::config(format!("class {c} listed twice")));
        }
    }
    if classes.len() < 2 {
        return Err(Error::config("a class subset needs at least two classes"));
    }
    let mut taken = vec![0usize; classes.len()];
    let mut keep = Vec::new();
    let mut labels = Vec::new();
    for (i, &l) in ds.labels.iter().enumerate() {
        if let Some(j) = remap[l] {
            if per_class_cap.is_some_and(|cap| taken[j] >= cap) {
                continue;
            }
            taken[j] += 1;
            keep.push(i);
            labels.push(j);
        }
    }
    let features = ds.features.select(Axis(0), &keep);
    Dataset::new(ds.name.clone(), features, labels, classes.len())
}

/// Class count for labels read from a file: `max + 1`, every class present.
pub(crate) fn dense_class_count(labels: &[usize]) -> std::result::Result<usize, String> {
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    if k < 2 {
        return Err(format!("need at least two classes, found {k}"));
    }
    let mut seen = vec![false; k];
    labels.iter().for_each(|&l| seen[l] = true);
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(format!("labels are not dense: class {missing} of 0..{k} never occurs"));
    }
    Ok(k)
}
