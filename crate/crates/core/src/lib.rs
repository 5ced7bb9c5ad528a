//! Relative generalization measurement for small neural networks.
//!
//! A model is trained on a dataset whose labels are half replaced by wrong
//! ones. The lowest combined 0/1 risk reached on the two halves gives `p`, a
//! capacity proxy; adding a training-error correction term gives the
//! confidence dimension (CD). Lower CD ranks as better generalization.
//!
//! Modules:
//! - [`nn`]: dense and sign-binarized networks, backprop, optimizers.
//! - [`data`]: generators, IDX/CSV loading, class subsets, label corruption.
//! - [`measure`]: risks, `p`, correction term, CD, bound probabilities.
//! - [`bound`]: Monte Carlo check of the Hoeffding concentration inequality.
//! - [`rank`]: per-setting rankings and Kendall-τ consistency.
//! - [`runner`]: experiment configs, seeded execution, reports.

pub mod bound;
pub mod data;
pub mod error;
pub mod measure;
pub mod nn;
pub mod rank;
pub mod runner;

pub use error::{Error, Result};

/// Version string recorded in every run record.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
