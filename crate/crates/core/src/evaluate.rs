//! Scoring detected drift points against references, ranking methods
//! across datasets, and a synthetic piecewise-stationary stream generator.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::stats::{friedman_ranks, Direction, FriedmanResult};
use crate::stream::{CommitRecord, CommitStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    BaselineDetector,
    SyntheticInjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDrifts {
    pub dataset: String,
    /// Commit indices, strictly increasing.
    pub points: Vec<usize>,
    pub source: ReferenceSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Only detections at or after the reference point match.
    #[default]
    GroundTruth,
    /// Detections on either side within the tolerance match.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Matching {
    /// `(reference, detected)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub misses: Vec<usize>,
    pub false_alarms: Vec<usize>,
}

/// Greedy chronological one-to-one matching: each reference point takes the
/// earliest unmatched detection inside its tolerance window. Inputs are
/// expected sorted; they are sorted and deduplicated defensively.
pub fn match_drifts(detected: &[usize], reference: &[usize], tolerance: usize, mode: MatchMode) -> Matching {
    let sorted = |v: &[usize]| {
        let mut v = v.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let detected = sorted(detected);
    let reference = sorted(reference);
    let mut used = vec![false; detected.len()];
    let mut out = Matching::default();
    for &r in &reference {
        let lo = match mode {
            MatchMode::GroundTruth => r,
            MatchMode::Symmetric => r.saturating_sub(tolerance),
        };
        let hit = (0..detected.len()).find(|&i| !used[i] && detected[i] >= lo && detected[i] <= r + tolerance);
        match hit {
            Some(i) => {
                used[i] = true;
                out.matches.push((r, detected[i]));
            }
            None => out.misses.push(r),
        }
    }
    out.false_alarms = detected.iter().zip(&used).filter(|(_, &u)| !u).map(|(&d, _)| d).collect();
    out
}

/// Mean time ratio, which is unbounded when drifts are caught with no delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mtr {
    Finite(f64),
    Infinite,
}

impl Mtr {
    pub fn as_f64(self) -> f64 {
        match self {
            Mtr::Finite(v) => v,
            Mtr::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Mtr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Mtr::Finite(v) => s.serialize_f64(*v),
            Mtr::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumberOrMarker {
    Number(f64),
    Marker(String),
}

impl<'de> Deserialize<'de> for Mtr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NumberOrMarker::deserialize(d)? {
            NumberOrMarker::Number(v) => Ok(Mtr::Finite(v)),
            NumberOrMarker::Marker(m) if m == "inf" => Ok(Mtr::Infinite),
            NumberOrMarker::Marker(m) => Err(serde::de::Error::custom(format!("unexpected mtr marker {m:?}"))),
        }
    }
}

mod undefined_marker {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_f64(*v),
            None => s.serialize_str("undefined"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        match NumberOrMarker::deserialize(d)? {
            NumberOrMarker::Number(v) => Ok(Some(v)),
            NumberOrMarker::Marker(m) if m == "undefined" => Ok(None),
            NumberOrMarker::Marker(m) => Err(serde::de::Error::custom(format!("unexpected mtd marker {m:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub cdd_accuracy: f64,
    pub mdr: f64,
    /// Mean detection delay in commits; undefined without matches.
    #[serde(with = "undefined_marker")]
    pub mtd: Option<f64>,
    /// Mean time between false alarms in commits.
    pub mtfa: f64,
    pub mtr: Mtr,
    pub matched: usize,
    pub missed: usize,
    pub false_alarms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    CddAccuracy,
    Mdr,
    Mtd,
    Mtfa,
    Mtr,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::CddAccuracy, Measure::Mdr, Measure::Mtd, Measure::Mtfa, Measure::Mtr];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::CddAccuracy => "cdd_accuracy",
            Measure::Mdr => "mdr",
            Measure::Mtd => "mtd",
            Measure::Mtfa => "mtfa",
            Measure::Mtr => "mtr",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Measure::Mdr | Measure::Mtd => Direction::LowerIsBetter,
            Measure::CddAccuracy | Measure::Mtfa | Measure::Mtr => Direction::HigherIsBetter,
        }
    }
}

impl EvalScores {
    /// Numeric value of one measure; an undefined MTD is NaN, an unbounded MTR is +inf.
    pub fn get(&self, m: Measure) -> f64 {
        match m {
            Measure::CddAccuracy => self.cdd_accuracy,
            Measure::Mdr => self.mdr,
            Measure::Mtd => self.mtd.unwrap_or(f64::NAN),
            Measure::Mtfa => self.mtfa,
            Measure::Mtr => self.mtr.as_f64(),
        }
    }
}

pub fn score(matching: &Matching, series_length: usize) -> Result<EvalScores> {
    if series_length == 0 {
        return Err(Error::Config("series_length must be > 0".into()));
    }
    let matched = matching.matches.len();
    let n_ref = matched + matching.misses.len();
    let n_fa = matching.false_alarms.len();
    let cdd_accuracy = if n_ref == 0 {
        if n_fa == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        matched as f64 / n_ref as f64
    };
    let mdr = 1.0 - cdd_accuracy;
    let mtd = (matched > 0).then(|| {
        matching.matches.iter().map(|&(r, d)| r.abs_diff(d) as f64).sum::<f64>() / matched as f64
    });
    // Gaps between consecutive false alarms, with 0 and the series end as
    // virtual endpoints, average to length / (k + 1).
    let mtfa = series_length as f64 / (n_fa + 1) as f64;
    let mtr = match mtd {
        None => Mtr::Finite(0.0),
        Some(0.0) => Mtr::Infinite,
        Some(t) => Mtr::Finite(mtfa / t * (1.0 - mdr)),
    };
    Ok(EvalScores {
        cdd_accuracy,
        mdr,
        mtd,
        mtfa,
        mtr,
        matched,
        missed: matching.misses.len(),
        false_alarms: n_fa,
    })
}

/// A Friedman ranking over datasets (rows) and methods (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    pub scores: Vec<Vec<f64>>,
    pub direction: Direction,
    pub friedman: FriedmanResult,
}

pub fn rank_methods(datasets: &[String], methods: &[String], scores: &[Vec<f64>], direction: Direction) -> Result<RankTable> {
    if scores.len() != datasets.len() || scores.iter().any(|r| r.len() != methods.len()) {
        return Err(Error::Schema(format!(
            "score matrix must be {} x {}",
            datasets.len(),
            methods.len()
        )));
    }
    let friedman = friedman_ranks(scores, direction)?;
    Ok(RankTable {
        datasets: datasets.to_vec(),
        methods: methods.to_vec(),
        scores: scores.to_vec(),
        direction,
        friedman,
    })
}

/// Writes a score table: one row per dataset, one column per method, and a
/// trailing `meanAvg` row holding the Friedman mean ranks when available.
pub fn write_score_table<W: Write>(
    writer: W,
    datasets: &[String],
    methods: &[String],
    scores: &[Vec<f64>],
    mean_ranks: Option<&[f64]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["dataset".to_string()];
    header.extend(methods.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in datasets.iter().zip(scores) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| format_cell(*v)));
        w.write_record(&rec)?;
    }
    if let Some(ranks) = mean_ranks {
        let mut rec = vec!["meanAvg".to_string()];
        rec.extend(ranks.iter().map(|v| format_cell(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<score table>".into(),
        source: e,
    })
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        "undefined".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// Every latent mean moves by `magnitude` standard deviations.
    FeatureShift,
    /// The labeling rule is inverted.
    LabelFlip,
    /// The defect log-odds move by `magnitude`.
    ImbalanceShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftSpec {
    pub name: String,
    pub n_groups: usize,
    pub group_size: usize,
    /// Leading groups that must stay drift-free (the training window).
    pub train_groups: usize,
    /// Group indices where a new regime starts.
    pub drift_points: Vec<usize>,
    /// One kind per drift point, or a single kind used for all of them.
    pub drift_kinds: Vec<DriftKind>,
    pub magnitude: f64,
    pub base_defect_rate: f64,
    pub seed: u64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            n_groups: 40,
            group_size: 100,
            train_groups: 5,
            drift_points: Vec::new(),
            drift_kinds: Vec::new(),
            magnitude: 2.0,
            base_defect_rate: 0.25,
            seed: 0,
        }
    }
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_groups < 2 || self.group_size < 2 {
            return bad("synth: n_groups and group_size must be >= 2".into());
        }
        if !(self.base_defect_rate > 0.0 && self.base_defect_rate < 1.0) {
            return bad(format!("synth: base_defect_rate must lie in (0, 1), got {}", self.base_defect_rate));
        }
        if !self.magnitude.is_finite() {
            return bad("synth: magnitude must be finite".into());
        }
        if self.drift_points.windows(2).any(|w| w[0] >= w[1]) {
            return bad("synth: drift_points must be strictly increasing".into());
        }
        if let Some(p) = self.drift_points.iter().find(|&&p| p <= self.train_groups || p >= self.n_groups) {
            return bad(format!(
                "synth: drift point {p} must lie strictly between train_groups ({}) and n_groups ({})",
                self.train_groups, self.n_groups
            ));
        }
        let k = self.drift_kinds.len();
        if !self.drift_points.is_empty() && k != 1 && k != self.drift_points.len() {
            return bad(format!(
                "synth: {} drift points but {k} drift kinds",
                self.drift_points.len()
            ));
        }
        Ok(())
    }

    fn kind(&self, i: usize) -> DriftKind {
        if self.drift_kinds.len() == 1 {
            self.drift_kinds[0]
        } else {
            self.drift_kinds[i]
        }
    }
}

pub const SYNTH_FEATURES: [&str; 6] = ["fix", "nf", "entropy", "lt", "la", "ld"];
const SYNTH_WEIGHTS: [f64; 6] = [0.9, 1.5, -0.8, 0.7, 1.6, -0.6];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Expected defect rate for intercept `b0` when the weighted latent sum is
/// N(0, s²), by trapezoidal integration over ±10 s.
fn prevalence(b0: f64, s: f64) -> f64 {
    const STEPS: usize = 4000;
    let h = 20.0 / STEPS as f64;
    let mut total = 0.0;
    for i in 0..=STEPS {
        let t = -10.0 + i as f64 * h;
        let w = if i == 0 || i == STEPS { 0.5 } else { 1.0 };
        total += w * (-0.5 * t * t).exp() * sigmoid(b0 + s * t);
    }
    total * h / (2.0 * std::f64::consts::PI).sqrt()
}

/// Intercept giving the requested prevalence, by bisection.
fn solve_intercept(rate: f64) -> f64 {
    let s = SYNTH_WEIGHTS.iter().map(|w| w * w).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if prevalence(mid, s) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Generates a labeled commit stream with drifts injected at group
/// boundaries.
///
/// Each commit draws six independent standard-normal latents `z` (shifted by
/// the current regime's mean) and maps them monotonically onto the commit
/// metrics: `fix = z0 > 0.8`, `nf = 1 + floor(exp(1 + 0.8 z1))`,
/// `entropy = log2(nf) * sigmoid(z2)`, and log-normal `lt`, `la`, `ld`.
/// The defect probability is logistic in `z`; its intercept is chosen so the
/// initial regime has `base_defect_rate` prevalence.
pub fn synth_stream(spec: &DriftSpec) -> Result<(CommitStream, ReferenceDrifts)> {
    spec.validate()?;
    let b0 = solve_intercept(spec.base_defect_rate);
    let mut rng = seeded_rng(spec.seed);
    let mut shift = 0.0;
    let mut intercept = b0;
    let mut flipped = false;
    let mut next_drift = 0;
    let mut records = Vec::with_capacity(spec.n_groups * spec.group_size);
    for g in 0..spec.n_groups {
        if spec.drift_points.get(next_drift) == Some(&g) {
            match spec.kind(next_drift) {
                DriftKind::FeatureShift => shift += spec.magnitude,
                DriftKind::LabelFlip => flipped = !flipped,
                DriftKind::ImbalanceShift => intercept += spec.magnitude,
            }
            next_drift += 1;
        }
        for i in 0..spec.group_size {
            let z: [f64; 6] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) + shift);
            let logit = intercept + z.iter().zip(SYNTH_WEIGHTS).map(|(a, w)| a * w).sum::<f64>();
            let p = sigmoid(logit);
            let p = if flipped { 1.0 - p } else { p };
            let label = rng.random::<f64>() < p;
            let nf = 1.0 + (1.0 + 0.8 * z[1]).exp().floor();
            let features = vec![
                f64::from(u8::from(z[0] > 0.8)),
                nf,
                nf.log2() * sigmoid(z[2]),
                (3.0 + 0.8 * z[3]).exp(),
                (2.5 + z[4]).exp(),
                (1.5 + z[5]).exp(),
            ];
            records.push(CommitRecord {
                seq: Some((g * spec.group_size + i) as u64),
                features,
                label: Some(label),
            });
        }
    }
    let stream = CommitStream {
        name: spec.name.clone(),
        feature_names: SYNTH_FEATURES.iter().map(|s| s.to_string()).collect(),
        records,
    };
    let reference = ReferenceDrifts {
        dataset: spec.name.clone(),
        points: spec.drift_points.iter().map(|p| p * spec.group_size).collect(),
        source: ReferenceSource::SyntheticInjection,
    };
    Ok((stream, reference))
}
