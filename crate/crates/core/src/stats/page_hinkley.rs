//! Page-Hinkley change detection with a fading factor and restart on alarm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PHConfig {
    /// Alarm threshold λ on `m_t - M_t`.
    pub lambda_threshold: f64,
    /// Magnitude of tolerated change δ.
    pub delta: f64,
    /// Fading factor γ applied to the cumulative statistic.
    pub fading: f64,
    /// Alarms may fire once the 0-based position within the current run
    /// (counted from the start or the last alarm) reaches this value.
    pub min_instances: usize,
    /// Min-max scale the whole series to [0, 1] before testing.
    pub normalize: bool,
}

impl Default for PHConfig {
    fn default() -> Self {
        Self {
            lambda_threshold: 0.1,
            delta: 0.001,
            fading: 0.999,
            min_instances: 3,
            normalize: true,
        }
    }
}

impl PHConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_threshold > 0.0 && self.lambda_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "ph.lambda_threshold must be > 0, got {}",
                self.lambda_threshold
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("ph.delta must be >= 0, got {}", self.delta)));
        }
        if !(self.fading > 0.0 && self.fading <= 1.0) {
            return Err(Error::Config(format!("ph.fading must be in (0, 1], got {}", self.fading)));
        }
        Ok(())
    }
}

/// Incremental Page-Hinkley detector for upward shifts in the mean.
#[derive(Debug, Clone)]
pub struct PageHinkley {
    cfg: PHConfig,
    n: usize,
    mean: f64,
    cumulative: f64,
    minimum: f64,
}

impl PageHinkley {
    pub fn new(cfg: PHConfig) -> Self {
        Self {
            cfg,
            n: 0,
            mean: 0.0,
            cumulative: 0.0,
            minimum: 0.0,
        }
    }

    /// Feeds one observation; returns `true` when it raises an alarm. The
    /// detector restarts from scratch after every alarm.
    pub fn update(&mut self, x: f64) -> bool {
        self.n += 1;
        self.mean += (x - self.mean) / self.n as f64;
        self.cumulative = self.cfg.fading * self.cumulative + (x - self.mean - self.cfg.delta);
        self.minimum = self.minimum.min(self.cumulative);
        // `n - 1` is the 0-based position within the current run.
        let alarm = self.n > self.cfg.min_instances && self.statistic() > self.cfg.lambda_threshold;
        if alarm {
            self.reset();
        }
        alarm
    }

    /// Current `m_t - M_t`.
    pub fn statistic(&self) -> f64 {
        self.cumulative - self.minimum
    }

    pub fn reset(&mut self) {
        self.n = 0;
        self.mean = 0.0;
        self.cumulative = 0.0;
        self.minimum = 0.0;
    }
}

/// Runs Page-Hinkley over a complete series and returns 0-based alarm indices.
pub fn page_hinkley(series: &[f64], cfg: &PHConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    if let Some(index) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input {
            index,
            message: format!("non-finite value {} in monitored series", series[index]),
        });
    }
    let scaled: Vec<f64> = if cfg.normalize {
        min_max(series)
    } else {
        series.to_vec()
    };
    let mut detector = PageHinkley::new(cfg.clone());
    Ok(scaled
        .iter()
        .enumerate()
        .filter_map(|(i, &x)| detector.update(x).then_some(i))
        .collect())
}

fn min_max(series: &[f64]) -> Vec<f64> {
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0.0; series.len()];
    }
    series.iter().map(|x| (x - lo) / range).collect()
}
