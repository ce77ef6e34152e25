//! Statistical primitives used by the detectors.

mod anova;
mod page_hinkley;
mod rank;

pub use anova::{anova_oneway, manova_two_group};
pub use page_hinkley::{page_hinkley, PHConfig, PageHinkley};
pub use rank::{friedman_ranks, midranks, spearman_rho, wilcoxon_signed_rank, Direction, FriedmanResult};

use serde::{Deserialize, Serialize};

/// Degrees of freedom attached to a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum DegreesOfFreedom {
    F { num: f64, den: f64 },
    ChiSquare { df: f64 },
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: DegreesOfFreedom,
    /// Set when a degenerate-input convention decided the p-value.
    pub degenerate: bool,
}

impl TestResult {
    pub(crate) fn degenerate(statistic: f64, p_value: f64, df: DegreesOfFreedom) -> Self {
        Self {
            statistic,
            p_value,
            df,
            degenerate: true,
        }
    }
}

pub(crate) fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};
    if !f.is_finite() {
        return if f > 0.0 { 0.0 } else { 1.0 };
    }
    if f <= 0.0 {
        return 1.0;
    }
    let dist = FisherSnedecor::new(d1, d2).expect("positive degrees of freedom");
    dist.sf(f).clamp(0.0, 1.0)
}

pub(crate) fn chi2_sf(x: f64, df: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    dist.sf(x).clamp(0.0, 1.0)
}

pub(crate) fn normal_two_sided(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::standard();
    (2.0 * n.sf(z.abs())).clamp(0.0, 1.0)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
