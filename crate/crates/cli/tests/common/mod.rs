#![allow(dead_code)]

use std::path::{Path, PathBuf};

use jitdrift::evaluate::{DriftKind, DriftSpec};
use jitdrift_cli::{cmd_synth, RunConfig};

pub const FEATURES: &str = r#"["fix", "nf", "entropy", "lt", "la", "ld"]"#;

/// Writes a synthetic dataset named `name` into `dir` and returns its spec.
pub fn synth_dataset(dir: &Path, name: &str, n_groups: usize, drift_at: usize, kind: DriftKind, seed: u64) -> DriftSpec {
    let spec = DriftSpec {
        name: name.into(),
        n_groups,
        drift_points: vec![drift_at],
        drift_kinds: vec![kind],
        seed,
        ..Default::default()
    };
    cmd_synth(&spec, dir).unwrap();
    spec
}

/// A run configuration over the given synthetic datasets with small models.
pub fn config_text(datasets: &[&str], detectors: &[&str], baselines: &[&str], extra: &str) -> String {
    let quote = |ids: &[&str]| ids.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", ");
    let mut text = format!(
        "seed = 11\noutput_dir = \"out\"\nrepeats = 3\ndetectors = [{}]\nbaselines = [{}]\n{extra}\n",
        quote(detectors),
        quote(baselines)
    );
    for ds in datasets {
        text.push_str(&format!(
            "[[datasets]]\nname = \"{ds}\"\npath = \"{ds}.csv\"\nfeatures = {FEATURES}\nlabel_column = \"contains_bug\"\nreference = \"{ds}.reference.json\"\n"
        ));
    }
    text.push_str("[forest]\nn_trees = 10\n[explain]\nime_samples_per_feature = 10\nreference_cap = 50\n");
    text
}

pub fn write_config(dir: &Path, text: &str) -> RunConfig {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    RunConfig::load(&path).unwrap()
}

/// All regular files below `root`, sorted, as paths relative to it.
pub fn tree(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(&p, out);
            } else {
                out.push(p);
            }
        }
    }
    let mut out = Vec::new();
    walk(root, &mut out);
    let mut rel: Vec<PathBuf> = out.into_iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect();
    rel.sort();
    rel
}
