//! Subcommand implementations. Each returns the paths it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use jitdrift::detectors::{
    detect_interpretation_drift, detect_performance_drift, detect_prediction_drift, Detector, DiffCountTable,
    DriftReport, InterpretationSource, MonitorSeries, PredictionDriftConfig,
};
use jitdrift::evaluate::{
    match_drifts, rank_methods, score, synth_stream, write_score_table, DriftSpec, EvalScores, MatchMode, Measure,
    ReferenceDrifts, ReferenceSource,
};
use jitdrift::explain::{Background, ExplainConfig};
use jitdrift::forest::{train_forest, ForestModel};
use jitdrift::rebalance::smote;
use jitdrift::stats::{friedman_ranks, Direction};
use jitdrift::stream::{load_csv, preprocess, CommitRecord, GroupedStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::{info, warn};

use crate::config::{DatasetConfig, RunConfig};
use crate::error::{stage, CliError, Result};
use crate::output::{write_csv_with_snapshot, write_json};

fn run_snapshot(cfg: &RunConfig, dataset: &str, detector: Option<&str>) -> serde_json::Value {
    json!({
        "dataset": dataset,
        "detector_id": detector,
        "seed": cfg.seed,
        "run": cfg,
    })
}

struct Prepared {
    name: String,
    grouped: GroupedStream,
    train: Vec<CommitRecord>,
    model: Option<ForestModel>,
    rebalanced_train: Option<Vec<CommitRecord>>,
    rebalanced_model: Option<ForestModel>,
}

fn prepare(cfg: &RunConfig, ds: &DatasetConfig, detectors: &[Detector], out: &Path) -> Result<Prepared> {
    let name = ds.name.as_str();
    let stream = stage(
        name,
        None,
        "load",
        load_csv(&cfg.resolve(&ds.path), &ds.features, ds.label_column.as_deref()),
    )?;
    let stream = jitdrift::stream::CommitStream {
        name: ds.name.clone(),
        ..stream
    };
    let (grouped, manifest) = stage(
        name,
        None,
        "preprocess",
        preprocess(&stream, &cfg.preprocess, cfg.group_size, cfg.train_groups, cfg.vl_gap_groups),
    )?;
    info!(dataset = name, groups = grouped.groups.len(), "preprocessed");
    let mut manifest_json = serde_json::to_value(&manifest).map_err(jitdrift::Error::from)?;
    manifest_json["config_snapshot"] = run_snapshot(cfg, name, None);
    write_json(&out.join(name).join("preprocess.json"), &manifest_json)?;

    let train = grouped.train_records();
    let needs_model = detectors.iter().any(|d| d.needs_model() && !d.rebalanced());
    let model = if needs_model {
        Some(stage(
            name,
            None,
            "train",
            train_forest(&train, &grouped.feature_names, &cfg.forest),
        )?)
    } else {
        None
    };
    let (rebalanced_train, rebalanced_model) = if detectors.iter().any(Detector::rebalanced) {
        let balanced = stage(name, None, "rebalance", smote(&train, &cfg.smote))?;
        let needs = detectors.iter().any(|d| d.rebalanced() && d.needs_model());
        let m = if needs {
            Some(stage(
                name,
                None,
                "train",
                train_forest(&balanced, &grouped.feature_names, &cfg.forest),
            )?)
        } else {
            None
        };
        (Some(balanced), m)
    } else {
        (None, None)
    };
    Ok(Prepared {
        name: ds.name.clone(),
        grouped,
        train,
        model,
        rebalanced_train,
        rebalanced_model,
    })
}

enum Table {
    DiffCount(DiffCountTable),
    Monitor(MonitorSeries),
}

fn run_detector(cfg: &RunConfig, p: &Prepared, det: Detector) -> jitdrift::Result<(DriftReport, Table)> {
    let pick = |rebalanced: bool| {
        if rebalanced {
            (
                p.rebalanced_model.as_ref(),
                p.rebalanced_train.as_deref().expect("rebalanced training set prepared"),
            )
        } else {
            (p.model.as_ref(), p.train.as_slice())
        }
    };
    match det {
        Detector::Interpretation { explainer: None, .. } => {
            detect_interpretation_drift(&p.grouped, InterpretationSource::Raw, &cfg.ph, cfg.alpha)
                .map(|(r, t)| (r, Table::DiffCount(t)))
        }
        Detector::Interpretation {
            explainer: Some(method),
            rebalanced,
        } => {
            let (model, train) = pick(rebalanced);
            let model = model.expect("model prepared for explained detector");
            let explain = ExplainConfig {
                method,
                ..cfg.explain.clone()
            };
            let background = Background::from_records(train, explain.reference_cap, explain.seed)?;
            detect_interpretation_drift(
                &p.grouped,
                InterpretationSource::Explained {
                    model,
                    background: &background,
                    cfg: &explain,
                    rebalanced,
                },
                &cfg.ph,
                cfg.alpha,
            )
            .map(|(r, t)| (r, Table::DiffCount(t)))
        }
        Detector::Prediction { with_label, rebalanced } => {
            let (_, train) = pick(rebalanced);
            let pcfg = PredictionDriftConfig {
                repeats: cfg.repeats,
                with_label,
                rebalanced,
                forest: cfg.forest.clone(),
            };
            detect_prediction_drift(&p.grouped, train, &pcfg, &cfg.ph, cfg.alpha).map(|(r, t)| (r, Table::DiffCount(t)))
        }
        Detector::Performance { metric } => {
            let model = p.model.as_ref().expect("model prepared for performance monitor");
            detect_performance_drift(&p.grouped, model, metric, &cfg.ph).map(|(r, s)| (r, Table::Monitor(s)))
        }
    }
}

fn write_outputs(
    cfg: &RunConfig,
    dir: &Path,
    mut report: DriftReport,
    table: Table,
    commits_row: bool,
) -> Result<Vec<PathBuf>> {
    let id = report.detector_id.clone();
    let snapshot = run_snapshot(cfg, &report.dataset, Some(&id));
    report.config_snapshot["run"] = snapshot["run"].clone();
    report.config_snapshot["seed"] = json!(cfg.seed);
    let mut written = vec![write_json(&dir.join(format!("{id}.report.json")), &report)?];
    written.push(match table {
        Table::DiffCount(t) => {
            write_csv_with_snapshot(&dir.join(format!("{id}.diffcount.csv")), &snapshot, |w| t.write_csv(w))?
        }
        Table::Monitor(s) => write_csv_with_snapshot(&dir.join(format!("{id}.monitor.csv")), &snapshot, |w| s.write_csv(w))?,
    });
    if commits_row {
        let row = report.drift_commits.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        written.push(write_csv_with_snapshot(
            &dir.join(format!("{id}.commits.csv")),
            &snapshot,
            |w| {
                w.extend_from_slice(row.as_bytes());
                w.push(b'\n');
                Ok(())
            },
        )?);
    }
    Ok(written)
}

fn run_jobs(cfg: &RunConfig, detectors: &[Detector], commits_row: bool) -> Result<Vec<PathBuf>> {
    let out = cfg.out_dir();
    let per_dataset: Vec<Result<Vec<PathBuf>>> = cfg
        .datasets
        .par_iter()
        .map(|ds| {
            let prepared = prepare(cfg, ds, detectors, &out)?;
            let dir = out.join(&prepared.name);
            let per_detector: Vec<Result<Vec<PathBuf>>> = detectors
                .par_iter()
                .map(|&det| {
                    let id = det.to_string();
                    let (report, table) = stage(&prepared.name, Some(&id), "detect", run_detector(cfg, &prepared, det))?;
                    info!(dataset = %prepared.name, detector = %id, drifts = ?report.drift_groups, "detector finished");
                    write_outputs(cfg, &dir, report, table, commits_row)
                })
                .collect();
            per_detector.into_iter().collect::<Result<Vec<_>>>().map(|v| v.concat())
        })
        .collect();
    per_dataset.into_iter().collect::<Result<Vec<_>>>().map(|v| v.concat())
}

/// Runs every configured detector on every dataset.
pub fn cmd_detect(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let detectors = cfg.parsed_detectors()?;
    if detectors.is_empty() {
        return Err(CliError::Config("no detectors configured".into()));
    }
    run_jobs(cfg, &detectors, false)
}

/// Runs the performance-monitor baselines; also writes a single-row CSV of
/// drift commit indices per baseline.
pub fn cmd_baseline(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let baselines = cfg.parsed_baselines()?;
    if baselines.is_empty() {
        return Err(CliError::Config("no baselines configured".into()));
    }
    run_jobs(cfg, &baselines, true)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> jitdrift::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| jitdrift::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn report_path(cfg: &RunConfig, dataset: &str, id: &str) -> PathBuf {
    cfg.out_dir().join(dataset).join(format!("{id}.report.json"))
}

fn load_report(cfg: &RunConfig, dataset: &str, id: &str) -> Result<DriftReport> {
    let path = report_path(cfg, dataset, id);
    if !path.exists() {
        return Err(jitdrift::Error::Pairing(format!(
            "no report for detector {id} on dataset {dataset} (expected {})",
            path.display()
        ))
        .into());
    }
    stage(dataset, Some(id), "read report", read_json(&path))
}

fn load_reference(cfg: &RunConfig, ds: &DatasetConfig) -> Result<(ReferenceDrifts, MatchMode)> {
    if let Some(path) = &ds.reference {
        let r: ReferenceDrifts = stage(&ds.name, None, "read reference", read_json(&cfg.resolve(path)))?;
        if r.dataset != ds.name {
            return Err(jitdrift::Error::Pairing(format!(
                "reference file names dataset {:?}, expected {:?}",
                r.dataset, ds.name
            ))
            .into());
        }
        return Ok((r, MatchMode::GroundTruth));
    }
    if let Some(id) = &cfg.reference_detector {
        let report = load_report(cfg, &ds.name, id)?;
        return Ok((
            ReferenceDrifts {
                dataset: ds.name.clone(),
                points: report.drift_commits,
                source: ReferenceSource::BaselineDetector,
            },
            MatchMode::Symmetric,
        ));
    }
    Err(jitdrift::Error::Pairing(format!(
        "dataset {} has neither a reference file nor a reference_detector",
        ds.name
    ))
    .into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub dataset: String,
    pub detector_id: String,
    pub reference_source: ReferenceSource,
    pub match_mode: MatchMode,
    pub tolerance_commits: usize,
    pub scores: EvalScores,
}

/// Scores each configured detector against its dataset's reference and
/// ranks detectors per CDD measure.
pub fn cmd_score(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if cfg.detectors.is_empty() {
        return Err(CliError::Config("no detectors configured".into()));
    }
    let mut entries = Vec::new();
    for ds in &cfg.datasets {
        let (reference, mode) = load_reference(cfg, ds)?;
        for id in &cfg.detectors {
            let report = load_report(cfg, &ds.name, id)?;
            let tolerance = cfg.tolerance_groups * report.group_size;
            let m = match_drifts(&report.drift_commits, &reference.points, tolerance, mode);
            let scores = stage(&ds.name, Some(id), "score", score(&m, report.series_length))?;
            entries.push(ScoreEntry {
                dataset: ds.name.clone(),
                detector_id: id.clone(),
                reference_source: reference.source,
                match_mode: mode,
                tolerance_commits: tolerance,
                scores,
            });
        }
    }
    let dir = cfg.out_dir().join("scores");
    let snapshot = run_snapshot(cfg, "*", None);
    let mut written = vec![write_json(
        &dir.join("scores.json"),
        &json!({ "entries": entries, "config_snapshot": snapshot }),
    )?];

    let datasets: Vec<String> = cfg.datasets.iter().map(|d| d.name.clone()).collect();
    let k = cfg.detectors.len();
    let mut rankings = BTreeMap::new();
    for measure in Measure::ALL {
        let matrix: Vec<Vec<f64>> = entries.chunks(k).map(|row| row.iter().map(|e| e.scores.get(measure)).collect()).collect();
        let ranked = if datasets.len() >= 2 {
            match rank_methods(&datasets, &cfg.detectors, &matrix, measure.direction()) {
                Ok(t) => Some(t.friedman),
                Err(e) => {
                    warn!(measure = measure.as_str(), "ranking skipped: {e}");
                    None
                }
            }
        } else {
            warn!(measure = measure.as_str(), "ranking needs at least two datasets; emitting scores only");
            None
        };
        let ranks = ranked.as_ref().map(|f| f.mean_ranks.as_slice());
        written.push(write_csv_with_snapshot(
            &dir.join(format!("{}.csv", measure.as_str())),
            &snapshot,
            |w| write_score_table(w, &datasets, &cfg.detectors, &matrix, ranks),
        )?);
        rankings.insert(measure.as_str(), ranked);
    }
    written.push(write_json(
        &dir.join("ranks.json"),
        &json!({ "methods": cfg.detectors, "rankings": rankings, "config_snapshot": snapshot }),
    )?);
    Ok(written)
}

/// Materializes a synthetic stream and its reference drift points.
pub fn cmd_synth(spec: &DriftSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (stream, reference) = synth_stream(spec).map_err(|e| match e {
        jitdrift::Error::Config(m) => CliError::Config(m),
        other => other.into(),
    })?;
    let snapshot = json!({ "synth": spec });
    let mut body = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut body);
        let mut header = vec!["seq".to_string()];
        header.extend(stream.feature_names.iter().cloned());
        header.push("contains_bug".into());
        w.write_record(&header).map_err(jitdrift::Error::from)?;
        for r in &stream.records {
            let mut rec = vec![r.seq.map(|s| s.to_string()).unwrap_or_default()];
            rec.extend(r.features.iter().map(|v| v.to_string()));
            rec.push(u8::from(r.label == Some(true)).to_string());
            w.write_record(&rec).map_err(jitdrift::Error::from)?;
        }
        w.flush().map_err(|source| CliError::Output {
            path: out_dir.to_path_buf(),
            source,
        })?;
    }
    let csv_path = write_csv_with_snapshot(&out_dir.join(format!("{}.csv", spec.name)), &snapshot, |w| {
        w.extend_from_slice(&body);
        Ok(())
    })?;
    let ref_path = write_json(&out_dir.join(format!("{}.reference.json", spec.name)), &reference)?;
    Ok(vec![csv_path, ref_path])
}

fn parse_cell(raw: &str) -> std::result::Result<f64, String> {
    match raw.trim() {
        "undefined" | "" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| format!("`{t}` is not a number")),
    }
}

/// Friedman ranking of a score table (dataset rows, method columns). A
/// trailing `meanAvg` row in the input is ignored.
pub fn cmd_rank(input: &Path, direction: Direction, output: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(input).map_err(|source| jitdrift::Error::Io {
        path: input.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(jitdrift::Error::from)?.clone();
    let methods: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut datasets = Vec::new();
    let mut scores = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(jitdrift::Error::from)?;
        let name = rec.get(0).unwrap_or_default().to_string();
        if name == "meanAvg" {
            continue;
        }
        let row = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, c)| {
                parse_cell(c).map_err(|message| jitdrift::Error::Parse {
                    row: i + 1,
                    column: methods.get(j).cloned().unwrap_or_default(),
                    message,
                })
            })
            .collect::<jitdrift::Result<Vec<f64>>>()?;
        datasets.push(name);
        scores.push(row);
    }
    let result = friedman_ranks(&scores, direction)?;
    let snapshot = json!({ "input": input, "direction": direction });
    let table = write_csv_with_snapshot(output, &snapshot, |w| {
        write_score_table(w, &datasets, &methods, &scores, Some(&result.mean_ranks))
    })?;
    let json_path = output.with_extension("json");
    let summary = write_json(
        &json_path,
        &json!({ "methods": methods, "friedman": result, "config_snapshot": snapshot }),
    )?;
    Ok(vec![table, summary])
}

