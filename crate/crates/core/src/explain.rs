//! Instance attribution: IME (sampling Shapley estimator) and BreakDown
//! (greedy step-down decomposition), both against a background sample.

use std::io::Write;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::seeded_rng;
use crate::stream::{CommitRecord, Group};

/// Anything that maps a feature row to a class-1 probability.
pub trait Predict: Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

impl Predict for ForestModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_row(x)
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predict for F {
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainMethod {
    Ime,
    #[serde(alias = "breakdown")]
    BreakDown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub method: ExplainMethod,
    /// Upper bound on background records; larger windows are subsampled.
    pub reference_cap: usize,
    pub ime_samples_per_feature: usize,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            method: ExplainMethod::Ime,
            reference_cap: 1000,
            ime_samples_per_feature: 100,
            seed: 0,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ime_samples_per_feature == 0 {
            return Err(Error::Config("explain.ime_samples_per_feature must be >= 1".into()));
        }
        if self.reference_cap == 0 {
            return Err(Error::Config("explain.reference_cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// Background distribution for attributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub rows: Vec<Vec<f64>>,
}

impl Background {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("attribution reference set is empty".into()));
        }
        Ok(Self { rows })
    }

    /// Uses all records when at most `cap`, otherwise a uniform subsample
    /// without replacement (kept in stream order).
    pub fn from_records(records: &[CommitRecord], cap: usize, seed: u64) -> Result<Self> {
        let rows = if records.len() <= cap {
            records.iter().map(|r| r.features.clone()).collect()
        } else {
            let mut idx = sample(&mut seeded_rng(seed), records.len(), cap).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| records[i].features.clone()).collect()
        };
        Self::new(rows)
    }

    fn mean_prediction<P: Predict + ?Sized>(&self, model: &P) -> f64 {
        self.rows.iter().map(|z| model.predict(z)).sum::<f64>() / self.rows.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Per-feature contribution, in schema order.
    pub contributions: Vec<f64>,
    /// Mean model output over the background.
    pub base_value: f64,
    pub prediction: f64,
    /// Monte Carlo standard errors (IME only).
    pub std_errors: Option<Vec<f64>>,
}

/// IME sampling estimate of the Shapley values of `x`.
///
/// For each feature `j`, `m` samples each draw a random permutation and a
/// random background row `z`; the contribution is the mean difference
/// between the composite taking `x` on `j` and its predecessors (and `z`
/// elsewhere) and the same composite with `z` on `j`.
pub fn ime_attribute<P: Predict + ?Sized>(model: &P, x: &[f64], background: &Background, m: usize, seed: u64) -> Result<Attribution> {
    if m == 0 {
        return Err(Error::Config("ime needs at least one sample per feature".into()));
    }
    let d = x.len();
    let mut rng = seeded_rng(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    let mut with_j = vec![0.0; d];
    let mut without_j = vec![0.0; d];
    let mut contributions = Vec::with_capacity(d);
    let mut std_errors = Vec::with_capacity(d);
    for j in 0..d {
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..m {
            perm.shuffle(&mut rng);
            let z = &background.rows[rng.random_range(0..background.rows.len())];
            with_j.copy_from_slice(z);
            for &k in &perm {
                if k == j {
                    break;
                }
                with_j[k] = x[k];
            }
            without_j.copy_from_slice(&with_j);
            with_j[j] = x[j];
            let diff = model.predict(&with_j) - model.predict(&without_j);
            sum += diff;
            sum_sq += diff * diff;
        }
        let mean = sum / m as f64;
        let var = if m > 1 {
            ((sum_sq - m as f64 * mean * mean) / (m - 1) as f64).max(0.0)
        } else {
            0.0
        };
        contributions.push(mean);
        std_errors.push((var / m as f64).sqrt());
    }
    Ok(Attribution {
        contributions,
        base_value: background.mean_prediction(model),
        prediction: model.predict(x),
        std_errors: Some(std_errors),
    })
}

/// BreakDown step-down attribution of `x`.
///
/// Starting from the background mean, features are fixed to their instance
/// values one at a time, always choosing the feature whose fixing moves the
/// mean prediction over the background the most (ties to the lower index).
/// Each feature's contribution is the move it caused.
pub fn breakdown_attribute<P: Predict + ?Sized>(model: &P, x: &[f64], background: &Background) -> Result<Attribution> {
    let d = x.len();
    let base_value = background.mean_prediction(model);
    let prediction = model.predict(x);
    let mut fixed = vec![false; d];
    let mut contributions = vec![0.0; d];
    let mut current = base_value;
    let mut buf = vec![0.0; d];
    for step in 0..d {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..d).filter(|&j| !fixed[j]) {
            let value = if step + 1 == d {
                prediction
            } else {
                let mut total = 0.0;
                for z in &background.rows {
                    for k in 0..d {
                        buf[k] = if fixed[k] || k == j { x[k] } else { z[k] };
                    }
                    total += model.predict(&buf);
                }
                total / background.rows.len() as f64
            };
            if best.is_none_or(|(_, v)| (value - current).abs() > (v - current).abs()) {
                best = Some((j, value));
            }
        }
        let (j, value) = best.expect("at least one unfixed feature");
        fixed[j] = true;
        contributions[j] = value - current;
        current = value;
    }
    Ok(Attribution {
        contributions,
        base_value,
        prediction,
        std_errors: None,
    })
}

/// Attributions for every instance of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub group_index: usize,
    pub feature_names: Vec<String>,
    pub seqs: Vec<Option<u64>>,
    pub rows: Vec<Attribution>,
}

impl AttributionMatrix {
    /// Contribution vectors, one per instance.
    pub fn contribution_matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|a| a.contributions.clone()).collect()
    }

    /// CSV with the instance seq followed by one column per feature.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["seq".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for (seq, row) in self.seqs.iter().zip(&self.rows) {
            let mut rec = vec![seq.map(|s| s.to_string()).unwrap_or_default()];
            rec.extend(row.contributions.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<attribution csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Attributes every record in `group`. Instance `i` is seeded with
/// `cfg.seed + seq` (or its stream position when the record has no seq).
pub fn attribute_group(
    model: &ForestModel,
    group: &Group,
    feature_names: &[String],
    background: &Background,
    cfg: &ExplainConfig,
) -> Result<AttributionMatrix> {
    cfg.validate()?;
    model.ensure_schema(feature_names)?;
    if group.records.is_empty() {
        return Err(Error::Sizing(format!("group {} is empty", group.index)));
    }
    let d = feature_names.len();
    if let Some(r) = group.records.iter().find(|r| r.features.len() != d) {
        return Err(Error::Schema(format!("record has {} features, model expects {d}", r.features.len())));
    }
    if background.rows.iter().any(|z| z.len() != d) {
        return Err(Error::Schema(format!("reference rows do not all have {d} features")));
    }
    let first = group.index * group.records.len();
    let rows = group
        .records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let seed = cfg.seed.wrapping_add(r.seq.unwrap_or((first + i) as u64));
            match cfg.method {
                ExplainMethod::Ime => ime_attribute(model, &r.features, background, cfg.ime_samples_per_feature, seed),
                ExplainMethod::BreakDown => breakdown_attribute(model, &r.features, background),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttributionMatrix {
        group_index: group.index,
        feature_names: feature_names.to_vec(),
        seqs: group.records.iter().map(|r| r.seq).collect(),
        rows,
    })
}
