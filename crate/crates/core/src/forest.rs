//! Random-forest binary classifier (CART trees on Gini impurity, bootstrap
//! samples, random feature subsets) and repeated-prediction ensembles.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::stream::{CommitRecord, Group};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or `min_leaf` stops them.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("forest.n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("forest.min_leaf must be >= 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::Config("forest.features_per_split must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        vote: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Axis-aligned binary tree stored as a flat node list, root at index 0.
/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    #[inline]
    pub fn vote(&self, x: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { vote } => return vote,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Fraction of trees voting class 1.
    #[inline]
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let votes: u32 = self.trees.iter().map(|t| t.vote(x) as u32).sum();
        votes as f64 / self.trees.len() as f64
    }

    pub fn ensure_schema(&self, names: &[String]) -> Result<()> {
        if names != self.feature_names.as_slice() {
            return Err(Error::Schema(format!(
                "model expects features {:?}, got {:?}",
                self.feature_names, names
            )));
        }
        Ok(())
    }

    /// Whether any tree splits on feature `j`.
    pub fn uses_feature(&self, j: usize) -> bool {
        self.trees.iter().any(|t| t.split_features().any(|f| f == j))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ForestModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Class-1 probability per record (mean tree vote).
pub fn predict_proba(model: &ForestModel, records: &[CommitRecord]) -> Result<Vec<f64>> {
    let d = model.feature_names.len();
    if let Some(bad) = records.iter().position(|r| r.features.len() != d) {
        return Err(Error::Schema(format!(
            "record {bad} has {} features, model expects {d}",
            records[bad].features.len()
        )));
    }
    Ok(records.iter().map(|r| model.predict_row(&r.features)).collect())
}

pub(crate) fn labeled_xy(records: &[CommitRecord]) -> Result<(Vec<&[f64]>, Vec<bool>)> {
    let labels = records
        .iter()
        .map(|r| r.label)
        .collect::<Option<Vec<bool>>>()
        .ok_or_else(|| Error::LabelAvailability("training records must all be labeled".into()))?;
    Ok((records.iter().map(|r| r.features.as_slice()).collect(), labels))
}

pub fn train_forest(train: &[CommitRecord], feature_names: &[String], cfg: &ForestConfig) -> Result<ForestModel> {
    cfg.validate()?;
    if train.len() < 2 {
        return Err(Error::DegenerateModel(format!("need >= 2 training records, got {}", train.len())));
    }
    let (x, y) = labeled_xy(train)?;
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateModel("training set contains a single class".into()));
    }
    let d = feature_names.len();
    if x.iter().any(|row| row.len() != d) {
        return Err(Error::Schema(format!("training records do not all have {d} features")));
    }
    let mtry = cfg
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded_rng(cfg.seed);
            rng.set_stream(t as u64);
            let sample: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len())).collect();
            TreeBuilder {
                x: &x,
                y: &y,
                mtry,
                max_depth: cfg.max_depth,
                min_leaf: cfg.min_leaf,
                nodes: Vec::new(),
            }
            .build(sample, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: feature_names.to_vec(),
        trees,
    })
}

struct TreeBuilder<'a> {
    x: &'a [&'a [f64]],
    y: &'a [bool],
    mtry: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl TreeBuilder<'_> {
    fn build(mut self, sample: Vec<usize>, rng: &mut ChaCha8Rng) -> DecisionTree {
        self.grow(sample, 0, rng);
        DecisionTree { nodes: self.nodes }
    }

    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        self.nodes.push(Node::Leaf {
            vote: u8::from(2 * pos > idx.len()),
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let pure = pos == 0 || pos == idx.len();
        if pure || self.max_depth.is_some_and(|m| depth >= m) || idx.len() < 2 * self.min_leaf {
            return self.leaf(&idx);
        }
        let Some(best) = self.best_split(&idx, pos, rng) else {
            return self.leaf(&idx);
        };
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { vote: 0 });
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][best.feature] <= best.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }

    /// Evaluates features in random order until `mtry` non-constant ones
    /// have been tried; returns the split with the lowest weighted Gini.
    fn best_split(&self, idx: &[usize], pos: usize, rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let d = self.x[idx[0]].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let n = idx.len() as f64;
        let parent = gini(pos as f64, n);
        let mut best: Option<BestSplit> = None;
        let mut tried = 0;
        let mut order: Vec<(f64, bool)> = Vec::with_capacity(idx.len());
        for f in features {
            if tried == self.mtry {
                break;
            }
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[order.len() - 1].0 {
                continue;
            }
            tried += 1;
            let mut left_pos = 0usize;
            for k in 1..order.len() {
                left_pos += usize::from(order[k - 1].1);
                if order[k].0 == order[k - 1].0 || k < self.min_leaf || order.len() - k < self.min_leaf {
                    continue;
                }
                let nl = k as f64;
                let nr = n - nl;
                let score = (nl * gini(left_pos as f64, nl) + nr * gini((pos - left_pos) as f64, nr)) / n;
                if score < parent - 1e-12 && best.as_ref().is_none_or(|b| score < b.score) {
                    let mid = 0.5 * (order[k - 1].0 + order[k].0);
                    // Guard against the midpoint rounding onto the upper value.
                    let threshold = if mid < order[k].0 { mid } else { order[k - 1].0 };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

/// `r` repeated class-1 probabilities per test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub group_index: usize,
    /// Row `i` holds the `r` probabilities for instance `i`.
    pub matrix: Vec<Vec<f64>>,
    pub labels: Option<Vec<bool>>,
}

impl PredictionSet {
    pub fn repeats(&self) -> usize {
        self.matrix.first().map(Vec::len).unwrap_or(0)
    }
}

/// `r` forests trained on the same data with seeds `seed, seed + 1, …`.
#[derive(Debug, Clone)]
pub struct RepeatedForest {
    pub models: Vec<ForestModel>,
}

impl RepeatedForest {
    pub fn train(train: &[CommitRecord], feature_names: &[String], r: usize, cfg: &ForestConfig) -> Result<Self> {
        if r < 2 {
            return Err(Error::Config(format!("repeated predictions need r >= 2, got {r}")));
        }
        let models = (0..r)
            .map(|k| {
                let cfg = ForestConfig {
                    seed: cfg.seed.wrapping_add(k as u64),
                    ..cfg.clone()
                };
                train_forest(train, feature_names, &cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { models })
    }

    pub fn predict(&self, group: &Group) -> Result<PredictionSet> {
        let per_model = self
            .models
            .iter()
            .map(|m| predict_proba(m, &group.records))
            .collect::<Result<Vec<_>>>()?;
        let matrix = (0..group.records.len())
            .map(|i| per_model.iter().map(|col| col[i]).collect())
            .collect();
        Ok(PredictionSet {
            group_index: group.index,
            matrix,
            labels: group.labels(),
        })
    }
}

pub fn repeated_predict(
    train: &[CommitRecord],
    feature_names: &[String],
    test: &Group,
    r: usize,
    cfg: &ForestConfig,
) -> Result<PredictionSet> {
    RepeatedForest::train(train, feature_names, r, cfg)?.predict(test)
}
