//! Concept-drift detection for chronological commit-level defect data.
//!
//! The crate is organised along the pipeline:
//!
//! - [`stream`]: CSV ingestion, preprocessing and fixed-size grouping.
//! - [`rebalance`]: SMOTE class rebalancing of training windows.
//! - [`forest`] and [`metrics`]: random-forest classifier, repeated
//!   predictions and per-group performance measures.
//! - [`explain`]: IME (sampling Shapley) and BreakDown instance attribution.
//! - [`stats`]: Page-Hinkley, ANOVA/MANOVA, Spearman, Friedman, Wilcoxon.
//! - [`detectors`]: interpretation-, prediction- and performance-based
//!   drift detectors producing [`detectors::DriftReport`]s.
//! - [`evaluate`]: drift matching, CDD scores, ranking and a synthetic
//!   ground-truth stream generator.

pub mod detectors;
pub mod error;
pub mod evaluate;
pub mod explain;
pub mod forest;
pub mod metrics;
pub mod rebalance;
pub mod stats;
pub mod stream;

pub use error::{Error, ErrorKind, Result};

pub(crate) fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
