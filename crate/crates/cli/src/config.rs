//! TOML run configuration shared by all subcommands.

use std::path::{Path, PathBuf};

use jitdrift::detectors::Detector;
use jitdrift::explain::ExplainConfig;
use jitdrift::forest::ForestConfig;
use jitdrift::rebalance::SmoteConfig;
use jitdrift::stats::PHConfig;
use jitdrift::stream::PreprocessConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    pub features: Vec<String>,
    #[serde(default)]
    pub label_column: Option<String>,
    /// Reference drift points (JSON written by `synth` or by hand).
    #[serde(default)]
    pub reference: Option<PathBuf>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_group_size() -> usize {
    100
}
fn default_train_groups() -> usize {
    5
}
fn default_vl_gap() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.05
}
fn default_tolerance() -> usize {
    3
}
fn default_repeats() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; copied into the forest, explainer and SMOTE sections.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    #[serde(default = "default_train_groups")]
    pub train_groups: usize,
    #[serde(default = "default_vl_gap")]
    pub vl_gap_groups: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance_groups: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Detector ids run by `detect`.
    #[serde(default)]
    pub detectors: Vec<String>,
    /// Performance-monitor ids run by `baseline`.
    #[serde(default)]
    pub baselines: Vec<String>,
    /// Baseline report used as reference when a dataset has no reference file.
    #[serde(default)]
    pub reference_detector: Option<String>,
    #[serde(default)]
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub ph: PHConfig,
    #[serde(default)]
    pub smote: SmoteConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> std::result::Result<Self, toml::de::Error> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.propagate_seed();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.propagate_seed();
    }

    fn propagate_seed(&mut self) {
        self.forest.seed = self.seed;
        self.explain.seed = self.seed;
        self.smote.seed = self.seed;
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> Result<()> {
        let core = |r: jitdrift::Result<()>| r.map_err(|e| CliError::Config(e.to_string()));
        core(self.preprocess.validate())?;
        core(self.forest.validate())?;
        core(self.explain.validate())?;
        core(self.ph.validate())?;
        core(self.smote.validate())?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.group_size < 2 || self.train_groups == 0 {
            return Err(CliError::Config("group_size must be >= 2 and train_groups >= 1".into()));
        }
        if self.repeats < 2 {
            return Err(CliError::Config(format!("repeats must be >= 2, got {}", self.repeats)));
        }
        if self.datasets.is_empty() {
            return Err(CliError::Config("no [[datasets]] configured".into()));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!("duplicate dataset name {:?}", w[0])));
        }
        if let Some(d) = self.datasets.iter().find(|d| !is_safe_name(&d.name)) {
            return Err(CliError::Config(format!("dataset name {:?} must be a plain file name", d.name)));
        }
        self.parsed_detectors()?;
        self.parsed_baselines()?;
        Ok(())
    }

    pub fn parsed_detectors(&self) -> Result<Vec<Detector>> {
        parse_ids(&self.detectors)
    }

    pub fn parsed_baselines(&self) -> Result<Vec<Detector>> {
        let ids = parse_ids(&self.baselines)?;
        if let Some((id, _)) = self.baselines.iter().zip(&ids).find(|(_, d)| !matches!(d, Detector::Performance { .. })) {
            return Err(CliError::Config(format!("baseline {id:?} is not a performance monitor")));
        }
        Ok(ids)
    }
}

fn is_safe_name(name: &str) -> bool {
    !name.is_empty() && name != "." && name != ".." && !name.contains(['/', '\\'])
}

fn parse_ids(ids: &[String]) -> Result<Vec<Detector>> {
    ids.iter()
        .map(|id| id.parse::<Detector>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}
