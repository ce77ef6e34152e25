//! Rank-based statistics: Spearman correlation, Friedman ranking and the
//! Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{chi2_sf, normal_two_sided, DegreesOfFreedom, TestResult};
use crate::error::{Error, Result};

/// 1-based ranks with ties replaced by their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ: Pearson correlation of midranks. A vector with zero rank
/// variance yields 0 (with a warning).
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Sizing(format!(
            "spearman_rho needs equal lengths >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    match pearson(&midranks(x), &midranks(y)) {
        Some(rho) => Ok(rho),
        None => {
            warn!("spearman_rho: constant input, correlation treated as 0");
            Ok(0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    /// Mean rank per method; rank 1 is best.
    pub mean_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    /// Rows (datasets) actually used after dropping rows with NaN cells.
    pub rows_used: usize,
    pub dropped_rows: Vec<usize>,
}

/// Friedman test over an `n_datasets x k_methods` score matrix.
///
/// Methods are ranked within each row (midranks for ties) so that rank 1 is
/// the best score under `direction`. Rows containing NaN are dropped.
pub fn friedman_ranks(scores: &[Vec<f64>], direction: Direction) -> Result<FriedmanResult> {
    let k = scores.first().map(Vec::len).unwrap_or(0);
    if k < 2 {
        return Err(Error::Sizing(format!("friedman_ranks needs k >= 2 methods, got {k}")));
    }
    if scores.iter().any(|row| row.len() != k) {
        return Err(Error::Schema("friedman_ranks: ragged score matrix".into()));
    }
    let mut dropped = Vec::new();
    let mut rank_sums = vec![0.0; k];
    let mut n = 0usize;
    for (i, row) in scores.iter().enumerate() {
        if row.iter().any(|v| v.is_nan()) {
            warn!("friedman_ranks: dropping row {i} with NaN cell");
            dropped.push(i);
            continue;
        }
        let oriented: Vec<f64> = match direction {
            Direction::LowerIsBetter => row.clone(),
            Direction::HigherIsBetter => row.iter().map(|v| -v).collect(),
        };
        for (sum, r) in rank_sums.iter_mut().zip(midranks(&oriented)) {
            *sum += r;
        }
        n += 1;
    }
    if n < 2 {
        return Err(Error::Sizing(format!(
            "friedman_ranks needs n >= 2 complete rows, got {n}"
        )));
    }
    let kf = k as f64;
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / n as f64).collect();
    let centre = (kf + 1.0) / 2.0;
    let statistic = 12.0 * n as f64 / (kf * (kf + 1.0))
        * mean_ranks.iter().map(|r| (r - centre).powi(2)).sum::<f64>();
    Ok(FriedmanResult {
        p_value: chi2_sf(statistic, kf - 1.0),
        mean_ranks,
        statistic,
        rows_used: n,
        dropped_rows: dropped,
    })
}

/// Wilcoxon signed-rank test on paired samples (differences `a - b`).
///
/// The statistic is W+, the rank sum of positive differences. The p-value is
/// two-sided from the normal approximation with tie-corrected variance.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Sizing(format!(
            "wilcoxon_signed_rank needs paired samples, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        warn!("wilcoxon_signed_rank: all differences are zero");
        return Ok(TestResult::degenerate(0.0, 1.0, DegreesOfFreedom::Normal));
    }
    if diffs.len() < 5 {
        return Err(Error::Sizing(format!(
            "wilcoxon_signed_rank needs >= 5 non-zero differences, got {}",
            diffs.len()
        )));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let (mean, var) = signed_rank_null_moments(&abs);
    let z = (w_plus - mean) / var.sqrt();
    Ok(TestResult {
        statistic: w_plus,
        p_value: normal_two_sided(z),
        df: DegreesOfFreedom::Normal,
        degenerate: false,
    })
}

/// Null mean and tie-corrected variance of W+ for the given absolute differences.
pub(crate) fn signed_rank_null_moments(abs_diffs: &[f64]) -> (f64, f64) {
    let n = abs_diffs.len() as f64;
    let mut sorted = abs_diffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let mean = n * (n + 1.0) / 4.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    (mean, var)
}
