//! Chronological commit streams: CSV ingestion, preprocessing and grouping.

use std::io::Read;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::error::{Error, Result};
use crate::stats::spearman_rho;

/// Name of the boolean bug-fix metric, exempt from scaling.
pub const FIX_FEATURE: &str = "fix";

/// One commit: feature values aligned with the owning stream's
/// `feature_names`, plus an optional defect label (`true` = defect-inducing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    /// Chronological ordinal; `None` for synthetic (SMOTE) records.
    pub seq: Option<u64>,
    pub features: Vec<f64>,
    pub label: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitStream {
    pub name: String,
    pub feature_names: Vec<String>,
    pub records: Vec<CommitRecord>,
}

impl CommitStream {
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.features[j]).collect()
    }

    pub fn is_labeled(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.label.is_some())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Keeps only the named features, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<CommitStream> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_index(n)
                    .ok_or_else(|| Error::Schema(format!("feature `{n}` not in stream `{}`", self.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CommitStream {
            name: self.name.clone(),
            feature_names: names.to_vec(),
            records: self
                .records
                .iter()
                .map(|r| CommitRecord {
                    seq: r.seq,
                    features: idx.iter().map(|&j| r.features[j]).collect(),
                    label: r.label,
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub spearman_threshold: f64,
    pub scale: bool,
    /// Leading groups whose statistics define scaling (and correlation
    /// pruning); `None` means the training window.
    pub scale_fit_window: Option<usize>,
    pub entropy_normalize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            spearman_threshold: 0.7,
            scale: true,
            scale_fit_window: None,
            entropy_normalize: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.spearman_threshold > 0.0 && self.spearman_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "spearman_threshold must be in (0, 1], got {}",
                self.spearman_threshold
            )));
        }
        if self.scale_fit_window == Some(0) {
            return Err(Error::Config("scale_fit_window must be >= 1 group".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub index: usize,
    pub records: Vec<CommitRecord>,
}

impl Group {
    pub fn feature_matrix(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.features.clone()).collect()
    }

    pub fn labels(&self) -> Option<Vec<bool>> {
        self.records.iter().map(|r| r.label).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedStream {
    pub name: String,
    pub feature_names: Vec<String>,
    pub groups: Vec<Group>,
    pub group_size: usize,
    pub train_groups: usize,
    pub vl_gap_groups: usize,
    /// Trailing records dropped because they did not fill a group.
    pub dropped: usize,
}

impl GroupedStream {
    /// Index of the first test group: training window plus verification-latency gap.
    pub fn first_test_group(&self) -> usize {
        self.train_groups + self.vl_gap_groups
    }

    pub fn train_records(&self) -> Vec<CommitRecord> {
        self.groups[..self.train_groups]
            .iter()
            .flat_map(|g| g.records.iter().cloned())
            .collect()
    }

    pub fn test_groups(&self) -> &[Group] {
        &self.groups[self.first_test_group().min(self.groups.len())..]
    }

    pub fn is_labeled(&self) -> bool {
        self.groups.iter().all(|g| g.records.iter().all(|r| r.label.is_some()))
    }
}

fn parse_label(raw: &str, row: usize, column: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" => Ok(true),
        "0" | "0.0" | "false" => Ok(false),
        other => Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("label `{other}` is not one of 0, 1, true, false"),
        }),
    }
}

fn parse_value(raw: &str, row: usize, column: &str) -> Result<f64> {
    let t = raw.trim();
    let value = match t.to_ascii_lowercase().as_str() {
        "true" => Ok(1.0),
        "false" => Ok(0.0),
        _ => t.parse::<f64>(),
    };
    match value {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("`{t}` is not a finite number"),
        }),
    }
}

/// Loads a chronological commit CSV.
///
/// Every schema column must be present in the header (other columns are
/// ignored). An optional `seq` column supplies ordinals and must strictly
/// increase; otherwise the 0-based row index is used. A missing label
/// column yields unlabeled records. Rows are reported 1-based, header excluded.
pub fn load_csv(path: &Path, schema: &[String], label_column: Option<&str>) -> Result<CommitStream> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stream".to_string());
    read_csv(file, &name, schema, label_column)
}

pub fn read_csv<R: Read>(reader: R, name: &str, schema: &[String], label_column: Option<&str>) -> Result<CommitStream> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |col: &str| header.iter().position(|h| h == col);
    let feature_cols = schema
        .iter()
        .map(|f| find(f).ok_or_else(|| Error::Schema(format!("column `{f}` missing from header of `{name}`"))))
        .collect::<Result<Vec<_>>>()?;
    let label_col = label_column.and_then(find);
    let seq_col = find("seq");

    let mut records = Vec::new();
    let mut previous: Option<u64> = None;
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let features = feature_cols
            .iter()
            .zip(schema)
            .map(|(&c, col)| parse_value(row.get(c).unwrap_or(""), row_no, col))
            .collect::<Result<Vec<_>>>()?;
        let label = match label_col {
            Some(c) => Some(parse_label(row.get(c).unwrap_or(""), row_no, label_column.unwrap_or_default())?),
            None => None,
        };
        let seq = match seq_col {
            Some(c) => {
                let raw = row.get(c).unwrap_or("").trim();
                raw.parse::<u64>().map_err(|_| Error::Parse {
                    row: row_no,
                    column: "seq".into(),
                    message: format!("`{raw}` is not a non-negative integer"),
                })?
            }
            None => i as u64,
        };
        if let Some(prev) = previous {
            if seq <= prev {
                return Err(Error::Ordering {
                    row: row_no,
                    seq,
                    previous: prev,
                });
            }
        }
        previous = Some(seq);
        records.push(CommitRecord {
            seq: Some(seq),
            features,
            label,
        });
    }
    Ok(CommitStream {
        name: name.to_string(),
        feature_names: schema.to_vec(),
        records,
    })
}

/// Replaces entropy by `entropy / log2(nf)` (0 when `nf <= 1`).
pub fn normalize_entropy(stream: &CommitStream) -> Result<CommitStream> {
    let e = stream
        .feature_index("entropy")
        .ok_or_else(|| Error::Schema("normalize_entropy: stream has no `entropy` feature".into()))?;
    let nf = stream
        .feature_index("nf")
        .ok_or_else(|| Error::Schema("normalize_entropy: stream has no `nf` feature".into()))?;
    let mut out = stream.clone();
    for r in &mut out.records {
        let files = r.features[nf];
        r.features[e] = if files > 1.0 { r.features[e] / files.log2() } else { 0.0 };
    }
    Ok(out)
}

/// Removes features until no pair has `|ρ| > threshold`.
///
/// Each round takes the most correlated pair (first in schema order on ties)
/// and drops the member with the larger mean absolute correlation to the
/// other remaining features; ties drop the later feature.
pub fn spearman_prune(stream: &CommitStream, threshold: f64) -> Result<(CommitStream, Vec<String>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("spearman threshold must be in (0, 1], got {threshold}")));
    }
    if stream.len() < 2 {
        return Err(Error::Sizing("spearman_prune needs at least 2 records".into()));
    }
    let d = stream.feature_names.len();
    let columns: Vec<Vec<f64>> = (0..d).map(|j| stream.column(j)).collect();
    let mut corr = vec![vec![0.0; d]; d];
    for i in 0..d {
        corr[i][i] = 1.0;
        for j in (i + 1)..d {
            let rho = spearman_rho(&columns[i], &columns[j])?.abs();
            corr[i][j] = rho;
            corr[j][i] = rho;
        }
    }

    let mut alive: Vec<usize> = (0..d).collect();
    let mut removed = Vec::new();
    loop {
        let mut worst: Option<(usize, usize, f64)> = None;
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                if corr[i][j] > threshold && worst.is_none_or(|(_, _, w)| corr[i][j] > w) {
                    worst = Some((i, j, corr[i][j]));
                }
            }
        }
        let Some((i, j, _)) = worst else { break };
        let mean_abs = |f: usize| {
            let others: Vec<f64> = alive.iter().filter(|&&g| g != f).map(|&g| corr[f][g]).collect();
            others.iter().sum::<f64>() / others.len() as f64
        };
        let drop = if mean_abs(i) > mean_abs(j) { i } else { j };
        alive.retain(|&f| f != drop);
        removed.push(stream.feature_names[drop].clone());
    }
    let kept: Vec<String> = alive.iter().map(|&j| stream.feature_names[j].clone()).collect();
    Ok((stream.select_features(&kept)?, removed))
}

/// Centres and scales every non-boolean feature with population statistics
/// of `fit` (a record range). `fix` is left untouched and zero-variance
/// features map to 0.
pub fn zscore_scale(stream: &CommitStream, fit: Range<usize>) -> Result<CommitStream> {
    if fit.is_empty() || fit.end > stream.len() {
        return Err(Error::Sizing(format!(
            "zscore_scale fit range {fit:?} is empty or exceeds {} records",
            stream.len()
        )));
    }
    let fix = stream.feature_index(FIX_FEATURE);
    let n = fit.len() as f64;
    let mut out = stream.clone();
    for j in 0..stream.feature_names.len() {
        if Some(j) == fix {
            continue;
        }
        let values = &stream.records[fit.clone()];
        let mu = values.iter().map(|r| r.features[j]).sum::<f64>() / n;
        let var = values.iter().map(|r| (r.features[j] - mu).powi(2)).sum::<f64>() / n;
        let sigma = var.sqrt();
        for r in &mut out.records {
            r.features[j] = if sigma > 0.0 { (r.features[j] - mu) / sigma } else { 0.0 };
        }
    }
    Ok(out)
}

/// Splits a stream into contiguous groups of `group_size`, dropping the
/// trailing remainder.
pub fn chunk_groups(
    stream: &CommitStream,
    group_size: usize,
    train_groups: usize,
    vl_gap_groups: usize,
) -> Result<GroupedStream> {
    if group_size < 2 {
        return Err(Error::Config(format!("group_size must be >= 2, got {group_size}")));
    }
    if train_groups < 1 {
        return Err(Error::Config("train_groups must be >= 1".into()));
    }
    let minimum = (train_groups + vl_gap_groups + 1) * group_size;
    if stream.len() < minimum {
        return Err(Error::Sizing(format!(
            "stream `{}` has {} records; at least {minimum} are needed for {train_groups} training group(s), \
             a gap of {vl_gap_groups} and one test group of {group_size}",
            stream.name,
            stream.len()
        )));
    }
    let dropped = stream.len() % group_size;
    if dropped > 0 {
        info!("chunk_groups: dropping {dropped} trailing record(s) of `{}`", stream.name);
    }
    let groups = stream
        .records
        .chunks_exact(group_size)
        .enumerate()
        .map(|(index, chunk)| Group {
            index,
            records: chunk.to_vec(),
        })
        .collect();
    Ok(GroupedStream {
        name: stream.name.clone(),
        feature_names: stream.feature_names.clone(),
        groups,
        group_size,
        train_groups,
        vl_gap_groups,
        dropped,
    })
}

/// Summary of one preprocessing run, emitted as the stream manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessManifest {
    pub dataset: String,
    pub records: usize,
    pub group_count: usize,
    pub dropped: usize,
    pub removed_features: Vec<String>,
    pub kept_features: Vec<String>,
    pub first_test_group: usize,
}

/// Full ingestion pipeline: entropy normalisation, correlation pruning and
/// scaling (both fitted on the leading fit window), then grouping.
pub fn preprocess(
    stream: &CommitStream,
    cfg: &PreprocessConfig,
    group_size: usize,
    train_groups: usize,
    vl_gap_groups: usize,
) -> Result<(GroupedStream, PreprocessManifest)> {
    cfg.validate()?;
    // Validate sizing before doing any work.
    chunk_groups(stream, group_size, train_groups, vl_gap_groups)?;

    let mut s = if cfg.entropy_normalize {
        normalize_entropy(stream)?
    } else {
        stream.clone()
    };
    let fit_end = cfg.scale_fit_window.unwrap_or(train_groups) * group_size;
    let fit = 0..fit_end.min(s.len());

    let fit_stream = CommitStream {
        name: s.name.clone(),
        feature_names: s.feature_names.clone(),
        records: s.records[fit.clone()].to_vec(),
    };
    let (pruned_fit, removed) = spearman_prune(&fit_stream, cfg.spearman_threshold)?;
    if !removed.is_empty() {
        warn!("{}: removed correlated features {removed:?}", s.name);
        s = s.select_features(&pruned_fit.feature_names)?;
    }
    if cfg.scale {
        s = zscore_scale(&s, fit)?;
    }
    let grouped = chunk_groups(&s, group_size, train_groups, vl_gap_groups)?;
    let manifest = PreprocessManifest {
        dataset: s.name.clone(),
        records: stream.len(),
        group_count: grouped.groups.len(),
        dropped: grouped.dropped,
        removed_features: removed,
        kept_features: s.feature_names.clone(),
        first_test_group: grouped.first_test_group(),
    };
    Ok((grouped, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn stream_of(cols: &[&str], rows: Vec<Vec<f64>>) -> CommitStream {
        CommitStream {
            name: "t".into(),
            feature_names: names(cols),
            records: rows
                .into_iter()
                .enumerate()
                .map(|(i, f)| CommitRecord {
                    seq: Some(i as u64),
                    features: f,
                    label: None,
                })
                .collect(),
        }
    }

    const CSV3: &str = "fix,nf,entropy,lt,la,ld,contains_bug\n\
                        1,2,1.0,10,5,1,1\n\
                        0,4,2.0,20,3,0,0\n\
                        0,1,0.9,5,1,2,false\n";

    #[test]
    fn loads_labeled_rows() {
        let schema = names(&["fix", "nf", "entropy", "lt", "la", "ld"]);
        let s = read_csv(CSV3.as_bytes(), "x", &schema, Some("contains_bug")).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(
            s.records.iter().map(|r| r.label).collect::<Vec<_>>(),
            vec![Some(true), Some(false), Some(false)]
        );
        assert_eq!(s.records[1].features, vec![0.0, 4.0, 2.0, 20.0, 3.0, 0.0]);
    }

    #[test]
    fn missing_label_column_gives_unlabeled_records() {
        let schema = names(&["fix", "nf", "entropy", "lt", "la", "ld"]);
        let s = read_csv(CSV3.as_bytes(), "x", &schema, Some("bug")).unwrap();
        assert!(s.records.iter().all(|r| r.label.is_none()));
        let s = read_csv(CSV3.as_bytes(), "x", &schema, None).unwrap();
        assert_eq!(s.len(), 3);
        assert!(!s.is_labeled());
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let csv = "fix,nf\n1,2\n0,abc\n1,3\n";
        let err = read_csv(csv.as_bytes(), "x", &names(&["fix", "nf"]), None).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column.as_str()), (2, "nf")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decreasing_seq_is_ordering_error() {
        let csv = "seq,nf\n1,2\n3,2\n3,1\n";
        let err = read_csv(csv.as_bytes(), "x", &names(&["nf"]), None).unwrap_err();
        assert!(matches!(err, Error::Ordering { row: 3, .. }));
    }

    #[test]
    fn entropy_normalization_fixtures() {
        let s = stream_of(&["nf", "entropy"], vec![vec![2.0, 1.0], vec![4.0, 2.0], vec![1.0, 0.9]]);
        let n = normalize_entropy(&s).unwrap();
        let e: Vec<f64> = n.column(1);
        assert_eq!(e, vec![1.0, 1.0, 0.0]);
        assert_eq!(n.column(0), s.column(0));
    }

    #[test]
    fn entropy_normalization_requires_schema() {
        let s = stream_of(&["la"], vec![vec![1.0]]);
        assert!(matches!(normalize_entropy(&s), Err(Error::Schema(_))));
    }

    #[test]
    fn identical_columns_pruned() {
        let rows = (0..20).map(|i| vec![i as f64, i as f64, ((i * 7) % 5) as f64]).collect();
        let s = stream_of(&["a", "b", "c"], rows);
        let (p, removed) = spearman_prune(&s, 0.7).unwrap();
        assert_eq!(removed.len(), 1);
        assert_eq!(p.feature_names.len(), 2);
    }

    #[test]
    fn zscore_population_sigma() {
        let s = stream_of(&["x", "fix", "k"], vec![vec![1.0, 0.0, 4.0], vec![2.0, 1.0, 4.0], vec![3.0, 0.0, 4.0]]);
        let z = zscore_scale(&s, 0..3).unwrap();
        let x = z.column(0);
        let expect = (1.5f64).sqrt();
        assert!((x[0] + expect).abs() < 1e-12 && x[1].abs() < 1e-12 && (x[2] - expect).abs() < 1e-12);
        assert_eq!(z.column(1), vec![0.0, 1.0, 0.0]);
        assert_eq!(z.column(2), vec![0.0; 3]);
    }

    #[test]
    fn chunking_rules() {
        let rows = |n: usize| (0..n).map(|i| vec![i as f64]).collect::<Vec<_>>();
        let g = chunk_groups(&stream_of(&["x"], rows(9000)), 100, 5, 1).unwrap();
        assert_eq!(g.groups.len(), 90);
        let g = chunk_groups(&stream_of(&["x"], rows(950)), 100, 5, 1).unwrap();
        assert_eq!((g.groups.len(), g.dropped), (9, 50));
        assert_eq!(g.first_test_group(), 6);
        let err = chunk_groups(&stream_of(&["x"], rows(650)), 100, 5, 1).unwrap_err();
        assert!(matches!(err, Error::Sizing(m) if m.contains("700")));
    }
}
