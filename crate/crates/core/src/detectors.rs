//! Drift detectors: interpretation-based, repeated-prediction-based and
//! performance-monitoring baselines. All of them reduce a test stream to a
//! per-group series and locate change points on it with Page-Hinkley.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::{debug, warn};

use crate::error::{Error, Result};
use crate::explain::{attribute_group, Background, ExplainConfig, ExplainMethod};
use crate::forest::{predict_proba, ForestConfig, ForestModel, RepeatedForest};
use crate::metrics::{group_metrics, Metric};
use crate::stats::{anova_oneway, manova_two_group, page_hinkley, PHConfig};
use crate::stream::{CommitRecord, GroupedStream};

pub const MULTIVARIATE_COLUMN: &str = "multivariate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableMode {
    PerFeature,
    Multivariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffCountRow {
    pub group_index: usize,
    pub counts: Vec<usize>,
    pub sum: usize,
}

/// For each group, how many earlier groups differ significantly from it,
/// per feature or jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffCountTable {
    pub feature_names: Vec<String>,
    pub mode: TableMode,
    pub alpha: f64,
    pub rows: Vec<DiffCountRow>,
}

impl DiffCountTable {
    pub fn sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sum as f64).collect()
    }

    /// Group rows, one column per feature, then the row sum.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["group".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.push("sum".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.group_index.to_string()];
            rec.extend(row.counts.iter().map(usize::to_string));
            rec.push(row.sum.to_string());
            w.write_record(&rec)?;
        }
        flush(w)
    }
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Io {
        path: "<csv output>".into(),
        source: e,
    })
}

/// Builds the difference-count table over `groups`, given as
/// `(group_index, rows)` in chronological order. Every group is compared
/// with all earlier groups in the list.
pub fn build_diff_count_table(
    groups: &[(usize, Vec<Vec<f64>>)],
    feature_names: &[String],
    alpha: f64,
    mode: TableMode,
) -> Result<DiffCountTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if groups.len() < 2 {
        return Err(Error::Sizing(format!("need >= 2 groups, got {}", groups.len())));
    }
    let d = feature_names.len();
    for (index, rows) in groups {
        if rows.len() < 2 {
            return Err(Error::Sizing(format!("group {index} has {} rows; at least 2 are needed", rows.len())));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Schema(format!("group {index} rows do not all have {d} columns")));
        }
    }
    let columns: Vec<Vec<Vec<f64>>> = match mode {
        TableMode::PerFeature => groups
            .iter()
            .map(|(_, rows)| (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
            .collect(),
        TableMode::Multivariate => Vec::new(),
    };
    let rows = (0..groups.len())
        .into_par_iter()
        .map(|g| {
            let counts = match mode {
                TableMode::PerFeature => (0..d)
                    .map(|j| {
                        (0..g)
                            .map(|h| anova_oneway(&columns[g][j], &columns[h][j]).map(|t| t.p_value < alpha))
                            .try_fold(0, |acc, sig| sig.map(|s| acc + usize::from(s)))
                    })
                    .collect::<Result<Vec<usize>>>()?,
                TableMode::Multivariate => vec![(0..g)
                    .map(|h| manova_two_group(&groups[g].1, &groups[h].1).map(|t| t.p_value < alpha))
                    .try_fold(0, |acc, sig| sig.map(|s| acc + usize::from(s)))?],
            };
            Ok(DiffCountRow {
                group_index: groups[g].0,
                sum: counts.iter().sum(),
                counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiffCountTable {
        feature_names: match mode {
            TableMode::PerFeature => feature_names.to_vec(),
            TableMode::Multivariate => vec![MULTIVARIATE_COLUMN.into()],
        },
        mode,
        alpha,
        rows,
    })
}

/// The detector variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    /// Per-feature difference counts on raw features or attributions.
    Interpretation {
        explainer: Option<ExplainMethod>,
        rebalanced: bool,
    },
    /// Multivariate difference counts on repeated predictions.
    Prediction { with_label: bool, rebalanced: bool },
    /// Page-Hinkley on a per-group error series.
    Performance { metric: Metric },
}

impl Detector {
    pub fn uses_labels(&self) -> bool {
        match self {
            Detector::Interpretation { .. } => false,
            Detector::Prediction { with_label, .. } => *with_label,
            Detector::Performance { .. } => true,
        }
    }

    pub fn rebalanced(&self) -> bool {
        match self {
            Detector::Interpretation { rebalanced, .. } | Detector::Prediction { rebalanced, .. } => *rebalanced,
            Detector::Performance { .. } => false,
        }
    }

    pub fn needs_model(&self) -> bool {
        !matches!(
            self,
            Detector::Interpretation {
                explainer: None,
                ..
            } | Detector::Prediction { .. }
        )
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Detector::Interpretation { explainer, rebalanced } => {
                let r = if rebalanced { "r" } else { "" };
                let name = match explainer {
                    None => "raw",
                    Some(ExplainMethod::Ime) => "IME",
                    Some(ExplainMethod::BreakDown) => "BD",
                };
                write!(f, "{r}{name}_base")
            }
            Detector::Prediction { with_label, rebalanced } => {
                let base = if rebalanced { "Rpred" } else { "Pred" };
                let suffix = if with_label { "_c" } else { "" };
                write!(f, "{base}{suffix}")
            }
            Detector::Performance { metric } => match metric {
                Metric::Er => f.write_str("ER-PH"),
                m => write!(f, "{}-Er-PH", metric_label(m)),
            },
        }
    }
}

fn metric_label(m: Metric) -> &'static str {
    match m {
        Metric::Accuracy => "Accuracy",
        Metric::Er => "ER",
        Metric::Auc => "AUC",
        Metric::Mcc => "MCC",
        Metric::Precision => "Precision",
        Metric::Recall => "Recall",
        Metric::Specificity => "Specificity",
        Metric::Gmean => "Gmean",
        Metric::Fmeasure => "Fmeasure",
        Metric::Kappa => "Kappa",
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let interp = |explainer, rebalanced| Detector::Interpretation { explainer, rebalanced };
        let det = match s {
            "raw_base" => interp(None, false),
            "IME_base" => interp(Some(ExplainMethod::Ime), false),
            "BD_base" => interp(Some(ExplainMethod::BreakDown), false),
            "rIME_base" => interp(Some(ExplainMethod::Ime), true),
            "rBD_base" => interp(Some(ExplainMethod::BreakDown), true),
            "Pred" | "Pred_c" | "Rpred" | "Rpred_c" => Detector::Prediction {
                with_label: s.ends_with("_c"),
                rebalanced: s.starts_with('R'),
            },
            "ER-PH" => Detector::Performance { metric: Metric::Er },
            other => {
                let metric = other
                    .strip_suffix("-Er-PH")
                    .and_then(|m| m.parse::<Metric>().ok())
                    .filter(|m| Metric::MONITORABLE.contains(m) && *m != Metric::Er)
                    .ok_or_else(|| Error::Config(format!("unknown detector id {other:?}")))?;
                Detector::Performance { metric }
            }
        };
        Ok(det)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub detector_id: String,
    pub dataset: String,
    pub group_size: usize,
    /// Commits in the source stream, including any dropped remainder.
    pub series_length: usize,
    pub drift_groups: Vec<usize>,
    pub drift_commits: Vec<usize>,
    pub config_snapshot: serde_json::Value,
}

impl DriftReport {
    fn new(detector: &Detector, grouped: &GroupedStream, drift_groups: Vec<usize>, mut snapshot: serde_json::Value) -> Self {
        snapshot["detector_id"] = json!(detector.to_string());
        snapshot["rebalanced"] = json!(detector.rebalanced());
        snapshot["uses_labels"] = json!(detector.uses_labels());
        snapshot["group_size"] = json!(grouped.group_size);
        snapshot["train_groups"] = json!(grouped.train_groups);
        snapshot["vl_gap_groups"] = json!(grouped.vl_gap_groups);
        Self {
            detector_id: detector.to_string(),
            dataset: grouped.name.clone(),
            group_size: grouped.group_size,
            series_length: grouped.groups.len() * grouped.group_size + grouped.dropped,
            drift_commits: drift_groups.iter().map(|g| g * grouped.group_size).collect(),
            drift_groups,
            config_snapshot: snapshot,
        }
    }
}

/// Per-test-group monitored error values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub metric_name: String,
    pub group_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl MonitorSeries {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", self.metric_name.as_str()])?;
        for (g, v) in self.group_indices.iter().zip(&self.values) {
            w.write_record([g.to_string(), v.to_string()])?;
        }
        flush(w)
    }
}

fn require_test_groups(grouped: &GroupedStream, min: usize) -> Result<()> {
    let n = grouped.test_groups().len();
    if n < min {
        return Err(Error::Sizing(format!("need >= {min} test groups, stream has {n}")));
    }
    Ok(())
}

/// Runs Page-Hinkley on a test-group series and maps alarms to group indices.
fn alarms_to_groups(series: &[f64], group_indices: &[usize], ph: &PHConfig) -> Result<Vec<usize>> {
    let alarms = page_hinkley(series, ph)?;
    debug!(?alarms, "page-hinkley alarms");
    Ok(alarms.into_iter().map(|a| group_indices[a]).collect())
}

/// What the interpretation detector compares between groups.
#[derive(Debug, Clone, Copy)]
pub enum InterpretationSource<'a> {
    /// Preprocessed feature values (raw_base).
    Raw,
    Explained {
        model: &'a ForestModel,
        background: &'a Background,
        cfg: &'a ExplainConfig,
        /// Whether the model and background come from a rebalanced window.
        rebalanced: bool,
    },
}

pub fn detect_interpretation_drift(
    grouped: &GroupedStream,
    source: InterpretationSource<'_>,
    ph: &PHConfig,
    alpha: f64,
) -> Result<(DriftReport, DiffCountTable)> {
    require_test_groups(grouped, 3)?;
    let tests = grouped.test_groups();
    let (detector, vectors, explain_snapshot) = match source {
        InterpretationSource::Raw => (
            Detector::Interpretation {
                explainer: None,
                rebalanced: false,
            },
            tests.iter().map(|g| (g.index, g.feature_matrix())).collect::<Vec<_>>(),
            serde_json::Value::Null,
        ),
        InterpretationSource::Explained {
            model,
            background,
            cfg,
            rebalanced,
        } => {
            let vectors = tests
                .iter()
                .map(|g| {
                    attribute_group(model, g, &grouped.feature_names, background, cfg)
                        .map(|m| (g.index, m.contribution_matrix()))
                })
                .collect::<Result<Vec<_>>>()?;
            (
                Detector::Interpretation {
                    explainer: Some(cfg.method),
                    rebalanced,
                },
                vectors,
                json!({ "explain": cfg, "reference_rows": background.rows.len() }),
            )
        }
    };
    let table = build_diff_count_table(&vectors, &grouped.feature_names, alpha, TableMode::PerFeature)?;
    let indices: Vec<usize> = tests.iter().map(|g| g.index).collect();
    let drift = alarms_to_groups(&table.sums(), &indices, ph)?;
    let mut snapshot = json!({ "alpha": alpha, "ph": ph, "table_mode": TableMode::PerFeature });
    if let serde_json::Value::Object(extra) = explain_snapshot {
        snapshot.as_object_mut().expect("object snapshot").extend(extra);
    }
    Ok((DriftReport::new(&detector, grouped, drift, snapshot), table))
}

/// Options for [`detect_prediction_drift`].
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDriftConfig {
    pub repeats: usize,
    /// Replace each probability `p` with the residual `label - p`.
    pub with_label: bool,
    /// Whether `train` was rebalanced; only affects naming and the snapshot.
    pub rebalanced: bool,
    pub forest: ForestConfig,
}

pub fn detect_prediction_drift(
    grouped: &GroupedStream,
    train: &[CommitRecord],
    cfg: &PredictionDriftConfig,
    ph: &PHConfig,
    alpha: f64,
) -> Result<(DriftReport, DiffCountTable)> {
    if cfg.repeats < 2 {
        return Err(Error::Config(format!("repeated predictions need r >= 2, got {}", cfg.repeats)));
    }
    if cfg.with_label && !grouped.test_groups().iter().all(|g| g.labels().is_some()) {
        return Err(Error::LabelAvailability(
            "label-aware prediction detector needs labels on every test record".into(),
        ));
    }
    require_test_groups(grouped, 3)?;
    let ensemble = RepeatedForest::train(train, &grouped.feature_names, cfg.repeats, &cfg.forest)?;
    let tests = grouped.test_groups();
    let vectors = tests
        .par_iter()
        .map(|g| {
            let set = ensemble.predict(g)?;
            let matrix = match (&set.labels, cfg.with_label) {
                (Some(labels), true) => set
                    .matrix
                    .iter()
                    .zip(labels)
                    .map(|(row, &y)| row.iter().map(|p| f64::from(u8::from(y)) - p).collect())
                    .collect(),
                _ => set.matrix,
            };
            Ok((g.index, matrix))
        })
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<String> = (1..=cfg.repeats).map(|k| format!("pp{k}")).collect();
    let table = build_diff_count_table(&vectors, &columns, alpha, TableMode::Multivariate)?;
    let indices: Vec<usize> = tests.iter().map(|g| g.index).collect();
    let drift = alarms_to_groups(&table.sums(), &indices, ph)?;
    let detector = Detector::Prediction {
        with_label: cfg.with_label,
        rebalanced: cfg.rebalanced,
    };
    let snapshot = json!({
        "alpha": alpha,
        "ph": ph,
        "repeats": cfg.repeats,
        "forest": cfg.forest,
        "table_mode": TableMode::Multivariate,
        "train_records": train.len(),
    });
    Ok((DriftReport::new(&detector, grouped, drift, snapshot), table))
}

/// Fills undefined entries with the previous defined value; leading gaps
/// take the first defined value.
pub fn carry_forward(values: &[Option<f64>]) -> Result<Vec<f64>> {
    let first = values
        .iter()
        .flatten()
        .copied()
        .next()
        .ok_or_else(|| Error::Numeric("monitored metric is undefined on every group".into()))?;
    let mut last = first;
    Ok(values
        .iter()
        .map(|v| {
            if let Some(v) = v {
                last = *v;
            }
            last
        })
        .collect())
}

pub fn detect_performance_drift(
    grouped: &GroupedStream,
    model: &ForestModel,
    metric: Metric,
    ph: &PHConfig,
) -> Result<(DriftReport, MonitorSeries)> {
    if !Metric::MONITORABLE.contains(&metric) {
        return Err(Error::Config(format!("metric {metric} cannot be monitored")));
    }
    model.ensure_schema(&grouped.feature_names)?;
    require_test_groups(grouped, 1)?;
    let tests = grouped.test_groups();
    let raw = tests
        .par_iter()
        .map(|g| {
            let labels = g.labels().ok_or_else(|| {
                Error::LabelAvailability(format!("performance monitoring needs labels (group {})", g.index))
            })?;
            let probs = predict_proba(model, &g.records)?;
            let mv = group_metrics(&probs, &labels)?;
            Ok(mv.get(metric).map(|v| metric.error_value(v)))
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    let undefined = raw.iter().filter(|v| v.is_none()).count();
    if undefined > 0 {
        warn!(metric = %metric, undefined, "metric undefined on some groups; carrying values forward");
    }
    let values = carry_forward(&raw)?;
    let indices: Vec<usize> = tests.iter().map(|g| g.index).collect();
    let drift = alarms_to_groups(&values, &indices, ph)?;
    let detector = Detector::Performance { metric };
    let snapshot = json!({ "ph": ph, "metric": metric, "undefined_groups": undefined });
    let series = MonitorSeries {
        metric_name: format!("{metric}_error"),
        group_indices: indices,
        values,
    };
    Ok((DriftReport::new(&detector, grouped, drift, snapshot), series))
}
