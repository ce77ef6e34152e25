//! SMOTE oversampling of the minority class combined with random
//! undersampling of the majority class.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::stream::CommitRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority:majority ratio in the output.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Config("smote.k_neighbors must be >= 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio.is_finite()) {
            return Err(Error::Config(format!("smote.target_ratio must be > 0, got {}", self.target_ratio)));
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest other points to `points[i]`, ties by index.
fn nearest(points: &[&[f64]], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(points[i], points[j]), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Rebalances labeled records.
///
/// The minority class is oversampled by the largest integer multiple `m`
/// with `m * n_min <= target_ratio * n_maj` (at least 1, i.e. no synthetic
/// points when already balanced enough), then the majority is undersampled
/// without replacement to `round(new_min / target_ratio)`. Output keeps the
/// original minority records first, then synthetic ones, then the retained
/// majority records in their original order.
pub fn smote(records: &[CommitRecord], cfg: &SmoteConfig) -> Result<Vec<CommitRecord>> {
    cfg.validate()?;
    let labels = records
        .iter()
        .map(|r| r.label)
        .collect::<Option<Vec<bool>>>()
        .ok_or_else(|| Error::LabelAvailability("smote needs labeled records".into()))?;
    let pos: Vec<usize> = (0..records.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..records.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Class("smote needs both classes present".into()));
    }
    let (min_idx, maj_idx, min_label) = if pos.len() <= neg.len() {
        (pos, neg, true)
    } else {
        (neg, pos, false)
    };
    let (n_min, n_maj) = (min_idx.len(), maj_idx.len());
    if n_min <= cfg.k_neighbors {
        return Err(Error::NeighborCount {
            minority: n_min,
            k: cfg.k_neighbors,
        });
    }
    let current = n_min as f64 / n_maj as f64;
    if cfg.target_ratio < current - 1e-12 {
        return Err(Error::Config(format!(
            "smote.target_ratio {} is below the current minority:majority ratio {current:.4}",
            cfg.target_ratio
        )));
    }

    let multiple = ((cfg.target_ratio * n_maj as f64 / n_min as f64 + 1e-9).floor() as usize).max(1);
    let n_synthetic = (multiple - 1) * n_min;
    let new_min = n_min + n_synthetic;
    let keep_maj = ((new_min as f64 / cfg.target_ratio).round() as usize).clamp(1, n_maj);

    let mut rng = seeded_rng(cfg.seed);
    let points: Vec<&[f64]> = min_idx.iter().map(|&i| records[i].features.as_slice()).collect();
    let neighbors: Vec<Vec<usize>> = (0..n_min).map(|i| nearest(&points, i, cfg.k_neighbors)).collect();

    let mut out: Vec<CommitRecord> = min_idx.iter().map(|&i| records[i].clone()).collect();
    out.reserve(n_synthetic + keep_maj);
    for s in 0..n_synthetic {
        let i = s % n_min;
        let nn = neighbors[i][rng.random_range(0..neighbors[i].len())];
        let u: f64 = rng.random();
        let features = points[i].iter().zip(points[nn]).map(|(x, y)| x + u * (y - x)).collect();
        out.push(CommitRecord {
            seq: None,
            features,
            label: Some(min_label),
        });
    }
    let mut kept: Vec<usize> = sample(&mut rng, n_maj, keep_maj).into_vec();
    kept.sort_unstable();
    out.extend(kept.into_iter().map(|k| records[maj_idx[k]].clone()));
    Ok(out)
}
