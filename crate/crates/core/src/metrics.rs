//! Per-group classification measures at the 0.5 decision threshold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::midranks;

/// Probabilities strictly above this are class 1; exactly 0.5 is class 0.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Er,
    Auc,
    Mcc,
    Precision,
    Recall,
    Specificity,
    Gmean,
    Fmeasure,
    Kappa,
}

impl Metric {
    pub const MONITORABLE: [Metric; 9] = [
        Metric::Er,
        Metric::Auc,
        Metric::Gmean,
        Metric::Precision,
        Metric::Recall,
        Metric::Mcc,
        Metric::Fmeasure,
        Metric::Kappa,
        Metric::Accuracy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Er => "er",
            Metric::Auc => "auc",
            Metric::Mcc => "mcc",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Specificity => "specificity",
            Metric::Gmean => "gmean",
            Metric::Fmeasure => "fmeasure",
            Metric::Kappa => "kappa",
        }
    }

    /// Maps the metric to an error value in [0, 1] where larger is worse.
    pub fn error_value(self, value: f64) -> f64 {
        match self {
            Metric::Er => value,
            Metric::Mcc | Metric::Kappa => 1.0 - (value + 1.0) / 2.0,
            _ => 1.0 - value,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s.to_ascii_lowercase().as_str() {
            "accuracy" => Metric::Accuracy,
            "er" => Metric::Er,
            "auc" => Metric::Auc,
            "mcc" => Metric::Mcc,
            "precision" => Metric::Precision,
            "recall" => Metric::Recall,
            "specificity" => Metric::Specificity,
            "gmean" => Metric::Gmean,
            "fmeasure" | "f-measure" | "f1" => Metric::Fmeasure,
            "kappa" => Metric::Kappa,
            other => return Err(Error::Config(format!("unknown metric {other:?}"))),
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub accuracy: f64,
    pub er: f64,
    /// `None` when the labels contain a single class.
    pub auc: Option<f64>,
    /// `None` when the labels contain a single class.
    pub mcc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub gmean: f64,
    pub fmeasure: f64,
    pub kappa: f64,
    /// Metrics set to 0 because their denominator vanished.
    pub zero_denominator: Vec<Metric>,
}

impl MetricVector {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => Some(self.accuracy),
            Metric::Er => Some(self.er),
            Metric::Auc => self.auc,
            Metric::Mcc => self.mcc,
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
            Metric::Specificity => Some(self.specificity),
            Metric::Gmean => Some(self.gmean),
            Metric::Fmeasure => Some(self.fmeasure),
            Metric::Kappa => Some(self.kappa),
        }
    }
}

/// Area under the ROC curve via the Mann-Whitney rank sum with midranks.
/// `None` when either class is absent.
pub fn auc(probabilities: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = midranks(probabilities);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

pub fn group_metrics(probabilities: &[f64], labels: &[bool]) -> Result<MetricVector> {
    if probabilities.len() != labels.len() {
        return Err(Error::Sizing(format!(
            "{} probabilities but {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Sizing("metrics need at least one instance".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &y) in probabilities.iter().zip(labels) {
        match (p > DECISION_THRESHOLD, y) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fn_ += 1.0,
        }
    }
    let n = tp + fp + tn + fn_;
    let mut zero = Vec::new();
    let mut ratio = |num: f64, den: f64, m: Metric| {
        if den == 0.0 {
            zero.push(m);
            0.0
        } else {
            num / den
        }
    };
    let accuracy = (tp + tn) / n;
    let precision = ratio(tp, tp + fp, Metric::Precision);
    let recall = ratio(tp, tp + fn_, Metric::Recall);
    let specificity = ratio(tn, tn + fp, Metric::Specificity);
    let fmeasure = ratio(2.0 * precision * recall, precision + recall, Metric::Fmeasure);
    let expected = ((tp + fp) * (tp + fn_) + (tn + fn_) * (tn + fp)) / (n * n);
    let kappa = ratio(accuracy - expected, 1.0 - expected, Metric::Kappa);
    let single_class = tp + fn_ == 0.0 || tn + fp == 0.0;
    let mcc = if single_class {
        None
    } else {
        let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        Some(ratio(tp * tn - fp * fn_, den, Metric::Mcc))
    };
    Ok(MetricVector {
        accuracy,
        er: 1.0 - accuracy,
        auc: auc(probabilities, labels),
        mcc,
        precision,
        recall,
        specificity,
        gmean: (recall * specificity).sqrt(),
        fmeasure,
        kappa,
        zero_denominator: zero,
    })
}
