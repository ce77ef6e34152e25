//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{config_text, synth_dataset, tree, write_config};
use jitdrift::detectors::{
    detect_interpretation_drift, detect_performance_drift, detect_prediction_drift, DriftReport, InterpretationSource,
    PredictionDriftConfig,
};
use jitdrift::evaluate::{match_drifts, score, synth_stream, DriftKind, DriftSpec, MatchMode, Matching, Mtr};
use jitdrift::explain::{breakdown_attribute, ime_attribute, Background, ExplainConfig, ExplainMethod, Predict};
use jitdrift::forest::{train_forest, ForestConfig, ForestModel};
use jitdrift::metrics::{auc, group_metrics, Metric};
use jitdrift::rebalance::{smote, SmoteConfig};
use jitdrift::stats::{
    anova_oneway, friedman_ranks, manova_two_group, page_hinkley, spearman_rho, wilcoxon_signed_rank, Direction,
    PHConfig,
};
use jitdrift::stream::{normalize_entropy, preprocess, spearman_prune, CommitRecord, CommitStream, PreprocessConfig};
use jitdrift_cli::{cmd_detect, cmd_score};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rank_by_hand(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| v.iter().filter(|&&y| y < x).count() as f64 + (v.iter().filter(|&&y| y == x).count() as f64 + 1.0) / 2.0)
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (n_match, n_miss, n_fa) = (rng.random_range(0..6), rng.random_range(0..6), rng.random_range(0..8));
        let length = rng.random_range(1000..20000);
        let matching = Matching {
            matches: (0..n_match).map(|i| (1000 * i, 1000 * i + rng.random_range(0..400))).collect(),
            misses: (0..n_miss).map(|i| 50_000 + i).collect(),
            false_alarms: (0..n_fa).map(|i| 60_000 + i).collect(),
        };
        let s = score(&matching, length).map_err(|e| e.to_string())?;
        let n_ref = n_match + n_miss;
        let acc = if n_ref == 0 { if n_fa == 0 { 1.0 } else { 0.0 } } else { n_match as f64 / n_ref as f64 };
        let mdr = 1.0 - acc;
        let mtfa = length as f64 / (n_fa + 1) as f64;
        worst = worst.max((s.mdr - mdr).abs()).max((s.mdr - (1.0 - s.cdd_accuracy)).abs()).max((s.mtfa - mtfa).abs());
        if n_match > 0 {
            let mtd = matching.matches.iter().map(|(r, d)| (d - r) as f64).sum::<f64>() / n_match as f64;
            worst = worst.max((s.mtd.unwrap() - mtd).abs());
            match s.mtr {
                Mtr::Finite(v) => worst = worst.max((v - mtfa / mtd * (1.0 - mdr)).abs()),
                Mtr::Infinite => ensure(mtd == 0.0, || "infinite mtr with positive mtd".into())?,
            }
        } else {
            ensure(s.mtd.is_none() && s.mtr == Mtr::Finite(0.0), || "mtd defined without matches".into())?;
        }
        // Error rate against accuracy on a random group.
        let n = rng.random_range(2..60);
        let p: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let m = group_metrics(&p, &y).map_err(|e| e.to_string())?;
        worst = worst.max((m.er - (1.0 - m.accuracy)).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("1000 fixtures, max deviation {worst:e}"))
}

fn criterion_2() -> Check {
    let ph = PHConfig::default();
    let step: Vec<f64> = (0..400).map(|i| if i < 200 { 0.0 } else { 1.0 }).collect();
    let alarms = page_hinkley(&step, &ph).map_err(|e| e.to_string())?;
    let constant = page_hinkley(&[0.3; 500], &ph).map_err(|e| e.to_string())?;
    let noise: Vec<usize> = (0..10)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = Normal::new(0.0, 1.0).unwrap();
            let series: Vec<f64> = (0..500).map(|_| n.sample(&mut rng)).collect();
            page_hinkley(&series, &ph).unwrap().len()
        })
        .collect();
    let detail = format!("step alarms {alarms:?}, constant alarms {}, noise alarms per seed {noise:?}", constant.len());
    let step_ok = alarms.len() == 1 && (200..=215).contains(&alarms[0]);
    ensure(step_ok && constant.len() <= 1 && noise.iter().all(|&k| k <= 1), || detail.clone())?;
    Ok(detail)
}

fn criterion_3() -> Check {
    let ph = PHConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut series: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * 0.1).collect();
    series.extend([0.0, 1.0, 7.0, 0.0, 0.0, 11.0, 15.0, 54.0, 53.0]);
    let fifty_four = 37;
    let tail = page_hinkley(&series, &ph).map_err(|e| e.to_string())?;
    let table13 = [0., 0., 0., 1., 1., 1., 1., 1., 1., 6., 4., 1., 1., 3., 0., 0., 0., 1., 0., 1.];
    let spike = page_hinkley(&table13, &ph).map_err(|e| e.to_string())?;
    let detail = format!("sum-tail alarms {tail:?} (54 entry at {fifty_four}), spike-series alarms {spike:?}");
    let tail_ok = tail.iter().any(|&a| (fifty_four..=fifty_four + 2).contains(&a));
    ensure(tail_ok && spike.is_empty(), || detail.clone())?;
    Ok(detail)
}

fn exact_shapley<P: Predict>(model: &P, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let d = x.len();
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..d {
        perms = perms
            .into_iter()
            .flat_map(|p| (0..d).filter(|k| !p.contains(k)).map(|k| [p.clone(), vec![k]].concat()).collect::<Vec<_>>())
            .collect();
    }
    let mut phi = vec![0.0; d];
    for perm in &perms {
        for z in background {
            let mut cur = z.clone();
            let mut prev = model.predict(&cur);
            for &j in perm {
                cur[j] = x[j];
                let next = model.predict(&cur);
                phi[j] += next - prev;
                prev = next;
            }
        }
    }
    let total = (perms.len() * background.len()) as f64;
    phi.iter().map(|v| v / total).collect()
}

fn small_forest(seed: u64, d: usize, refs: usize) -> (ForestModel, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<CommitRecord> = (0..200)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let y = rng.random::<f64>() < if x[0] + 0.5 * x[1] > 0.8 { 0.85 } else { 0.15 };
            CommitRecord { seq: None, features: x, label: Some(y) }
        })
        .collect();
    let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    let cfg = ForestConfig { n_trees: 15, max_depth: Some(4), seed, ..Default::default() };
    let model = train_forest(&data, &names, &cfg).unwrap();
    let background = (0..refs).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    (model, background)
}

fn criterion_4() -> Check {
    let mut outside = Vec::new();
    let mut checks = 0;
    for seed in 0..20u64 {
        let d = 2 + (seed % 2) as usize;
        let (model, rows) = small_forest(seed, d, 20 + (seed % 11) as usize);
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let exact = exact_shapley(&model, &x, &rows);
        let bg = Background::new(rows).map_err(|e| e.to_string())?;
        let a = ime_attribute(&model, &x, &bg, 1000, seed).map_err(|e| e.to_string())?;
        let se = a.std_errors.unwrap();
        for j in 0..d {
            checks += 1;
            let z = (a.contributions[j] - exact[j]).abs() / se[j].max(1e-300);
            if (a.contributions[j] - exact[j]).abs() > 3.0 * se[j] + 1e-12 {
                outside.push(format!("seed {seed} feature {j} ({z:.2} SE)"));
            }
        }
    }
    let (model, rows) = small_forest(99, 3, 30);
    let bg = Background::new(rows).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let a = breakdown_attribute(&model, &x, &bg).map_err(|e| e.to_string())?;
        worst = worst.max((a.base_value + a.contributions.iter().sum::<f64>() - a.prediction).abs());
    }
    let detail = format!(
        "IME within 3 SE on {}/{checks} seed-feature pairs{}; BreakDown additivity max error {worst:e}",
        checks - outside.len(),
        if outside.is_empty() { String::new() } else { format!(" (outside: {})", outside.join(", ")) }
    );
    ensure(outside.is_empty() && worst <= 1e-9, || detail.clone())?;
    Ok(detail)
}

fn criterion_5() -> Check {
    use statrs::distribution::{ContinuousCDF, Normal as StdNormal, StudentsT};
    let err = |e: jitdrift::Error| e.to_string();
    // Sums of squares by hand: means 2.5 / 3.5, SSB = 2, SSW = 10, df = (1, 6).
    let a = [1.0, 2.0, 3.0, 4.0];
    let b = [2.0, 3.0, 4.0, 5.0];
    let f: f64 = 2.0 / (10.0 / 6.0);
    let r = anova_oneway(&a, &b).map_err(err)?;
    let p = 2.0 * StudentsT::new(0.0, 1.0, 6.0).unwrap().sf(f.sqrt());
    ensure((r.statistic - f).abs() < 1e-9 && (r.p_value - p).abs() < 1e-9, || "ANOVA fixture".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let a: Vec<f64> = (0..rng.random_range(3..20)).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..rng.random_range(3..20)).map(|_| rng.random_range(-5.0..5.0)).collect();
        let col = |v: &[f64]| v.iter().map(|x| vec![*x]).collect::<Vec<_>>();
        let m = manova_two_group(&col(&a), &col(&b)).map_err(err)?;
        let u = anova_oneway(&a, &b).map_err(err)?;
        ensure((m.p_value - u.p_value).abs() < 1e-9 && (m.statistic - u.statistic).abs() < 1e-9 * (1.0 + u.statistic), || {
            "MANOVA d=1 differs from ANOVA".into()
        })?;
    }

    for _ in 0..200 {
        let n = rng.random_range(2..25);
        let p: Vec<f64> = (0..n).map(|_| (rng.random_range(0..8) as f64) / 8.0).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let (pos, neg): (Vec<_>, Vec<_>) = p.iter().zip(&y).partition(|(_, l)| **l);
        let brute = if pos.is_empty() || neg.is_empty() {
            None
        } else {
            let mut s = 0.0;
            for (pp, _) in &pos {
                for (pn, _) in &neg {
                    s += if *pp > *pn { 1.0 } else if *pp == *pn { 0.5 } else { 0.0 };
                }
            }
            Some(s / (pos.len() * neg.len()) as f64)
        };
        match (auc(&p, &y), brute) {
            (None, None) => {}
            (Some(a), Some(b)) if (a - b).abs() < 1e-12 => {}
            other => return Err(format!("AUC mismatch {other:?}")),
        }
    }

    ensure(spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).map_err(err)? == 0.8, || "spearman fixture".into())?;

    let wa = [3.1, 4.7, 2.2, 6.0, 5.5, 1.9];
    let wb = [2.0, 5.0, 1.1, 3.9, 5.0, 3.3];
    let diff: Vec<f64> = wa.iter().zip(&wb).map(|(x, y)| x - y).collect();
    let ranks = rank_by_hand(&diff.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w_plus: f64 = ranks.iter().zip(&diff).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let null: Vec<f64> = (0..64u32).map(|mask| (0..6).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum()).collect();
    let mean = null.iter().sum::<f64>() / 64.0;
    let var = null.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / 64.0;
    let w = wilcoxon_signed_rank(&wa, &wb).map_err(err)?;
    let wp = 2.0 * StdNormal::new(0.0, 1.0).unwrap().sf(((w_plus - mean) / var.sqrt()).abs());
    ensure((w.statistic - w_plus).abs() < 1e-12 && (w.p_value - wp.min(1.0)).abs() < 1e-9, || "Wilcoxon n=6".into())?;

    let scores: Vec<Vec<f64>> = (0..18).map(|_| (0..5).map(|m| (rng.random_range(0..6) + m) as f64).collect()).collect();
    let fr = friedman_ranks(&scores, Direction::LowerIsBetter).map_err(err)?;
    let mut hand = [0.0; 5];
    for row in &scores {
        for (m, r) in rank_by_hand(row).into_iter().enumerate() {
            hand[m] += r / 18.0;
        }
    }
    ensure(fr.mean_ranks.iter().zip(hand).all(|(a, b)| (a - b).abs() < 1e-12), || "Friedman mean ranks".into())?;
    Ok("ANOVA, MANOVA(d=1), 200 AUC instances, Spearman, Wilcoxon n=6 and Friedman 5x18 match their oracles".into())
}

struct StreamResult {
    kind: DriftKind,
    length: usize,
    matchings: Vec<Matching>,
}

const C6_DETECTORS: [&str; 4] = ["raw_base", "IME_base", "Pred", "ER-PH"];

fn run_stream(i: usize) -> jitdrift::Result<StreamResult> {
    let kind = if i.is_multiple_of(2) { DriftKind::FeatureShift } else { DriftKind::LabelFlip };
    let seed = 1000 + i as u64;
    let spec = DriftSpec {
        name: format!("s{i}"),
        drift_points: vec![12 + (i * 7) % 20],
        drift_kinds: vec![kind],
        seed,
        ..Default::default()
    };
    let (stream, reference) = synth_stream(&spec)?;
    let (g, _) = preprocess(&stream, &PreprocessConfig::default(), spec.group_size, spec.train_groups, 1)?;
    let train = g.train_records();
    let forest = ForestConfig { n_trees: 50, seed, ..Default::default() };
    let model = train_forest(&train, &g.feature_names, &forest)?;
    let ph = PHConfig::default();
    let explain = ExplainConfig { method: ExplainMethod::Ime, ime_samples_per_feature: 100, seed, ..Default::default() };
    let background = Background::from_records(&train, explain.reference_cap, seed)?;
    let pcfg = PredictionDriftConfig { repeats: 10, with_label: false, rebalanced: false, forest };
    let reports: Vec<DriftReport> = vec![
        detect_interpretation_drift(&g, InterpretationSource::Raw, &ph, 0.05)?.0,
        detect_interpretation_drift(
            &g,
            InterpretationSource::Explained { model: &model, background: &background, cfg: &explain, rebalanced: false },
            &ph,
            0.05,
        )?
        .0,
        detect_prediction_drift(&g, &train, &pcfg, &ph, 0.05)?.0,
        detect_performance_drift(&g, &model, Metric::Er, &ph)?.0,
    ];
    let tolerance = 3 * spec.group_size;
    Ok(StreamResult {
        kind,
        length: reports[0].series_length,
        matchings: reports
            .iter()
            .map(|r| match_drifts(&r.drift_commits, &reference.points, tolerance, MatchMode::GroundTruth))
            .collect(),
    })
}

fn criterion_6() -> Check {
    let results = (0..20).into_par_iter().map(run_stream).collect::<jitdrift::Result<Vec<_>>>().map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut all_ok = true;
    for (k, id) in C6_DETECTORS.iter().enumerate() {
        let summarize = |filter: &dyn Fn(&StreamResult) -> bool| {
            let sel: Vec<&StreamResult> = results.iter().filter(|r| filter(r)).collect();
            let refs: usize = sel.iter().map(|r| r.matchings[k].matches.len() + r.matchings[k].misses.len()).sum();
            let missed: usize = sel.iter().map(|r| r.matchings[k].misses.len()).sum();
            let delays: Vec<f64> = sel.iter().flat_map(|r| r.matchings[k].matches.iter().map(|(a, b)| (b - a) as f64)).collect();
            let fas: usize = sel.iter().map(|r| r.matchings[k].false_alarms.len()).sum();
            let length: usize = sel.iter().map(|r| r.length).sum();
            let mdr = missed as f64 / refs as f64;
            let mtd = if delays.is_empty() { f64::NAN } else { delays.iter().sum::<f64>() / delays.len() as f64 };
            let mtfa = if fas == 0 { f64::INFINITY } else { length as f64 / fas as f64 };
            (mdr, mtd, mtfa, fas)
        };
        let (mdr, mtd, mtfa, fas) = summarize(&|_| true);
        let ok = mdr <= 0.25 && mtd <= 300.0 && mtfa >= 2000.0;
        all_ok &= ok;
        let (fs_mdr, _, _, fs_fa) = summarize(&|r| r.kind == DriftKind::FeatureShift);
        let (lf_mdr, _, _, lf_fa) = summarize(&|r| r.kind == DriftKind::LabelFlip);
        lines.push(format!(
            "{id}: {} mdr={mdr:.2} mtd={mtd:.0} mtfa={mtfa:.0} false_alarms={fas} [feature_shift mdr={fs_mdr:.2} fa={fs_fa}; label_flip mdr={lf_mdr:.2} fa={lf_fa}]",
            if ok { "ok" } else { "short" }
        ));
    }
    let detail = lines.join("\n    ");
    ensure(all_ok, || detail.clone())?;
    Ok(detail)
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..200u64 {
        let (n_min, n_maj) = (rng.random_range(6..40), rng.random_range(41..200));
        let d = rng.random_range(1..5);
        let mut data: Vec<CommitRecord> = (0..n_min + n_maj)
            .map(|i| CommitRecord {
                seq: Some(i as u64),
                features: (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
                label: Some(i < n_min),
            })
            .collect();
        data.rotate_left(n_min / 2);
        let out = smote(&data, &SmoteConfig { seed: trial, ..Default::default() }).map_err(|e| e.to_string())?;
        let pos = out.iter().filter(|r| r.label == Some(true)).count();
        ensure(pos.abs_diff(out.len() - pos) <= 1, || format!("trial {trial}: {pos} vs {}", out.len() - pos))?;
        for j in 0..d {
            let col = data.iter().filter(|r| r.label == Some(true)).map(|r| r.features[j]);
            let (lo, hi) = col.fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(v), h.max(v)));
            ensure(
                out.iter().filter(|r| r.label == Some(true)).all(|r| r.features[j] >= lo && r.features[j] <= hi),
                || format!("trial {trial}: synthetic point outside minority box"),
            )?;
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    synth_dataset(dir.path(), "r", 16, 10, DriftKind::FeatureShift, 7);
    let ids = ["IME_base", "rIME_base", "BD_base", "rBD_base", "Pred", "Rpred", "Pred_c", "Rpred_c"];
    let cfg = write_config(dir.path(), &config_text(&["r"], &ids, &[], ""));
    cmd_detect(&cfg).map_err(|e| format!("{e:#}"))?;
    for id in ids {
        let path = dir.path().join(format!("out/r/{id}.report.json"));
        let report: DriftReport =
            serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let prefixed = id.starts_with('r') || id.starts_with('R');
        ensure(
            report.detector_id == id && report.config_snapshot["rebalanced"] == prefixed,
            || format!("{id}: snapshot {}", report.config_snapshot["rebalanced"]),
        )?;
    }
    Ok(format!("200 SMOTE fixtures balanced and boxed; {} detector snapshots carry matching r/R flags", ids.len()))
}

fn full_run(root: &Path) -> Result<Vec<(std::path::PathBuf, Vec<u8>)>, String> {
    for (i, ds) in ["a", "b"].iter().enumerate() {
        synth_dataset(root, ds, 16, 10, if i == 0 { DriftKind::FeatureShift } else { DriftKind::LabelFlip }, 40 + i as u64);
    }
    let cfg = write_config(root, &config_text(&["a", "b"], &["raw_base", "IME_base", "rBD_base", "Pred_c", "ER-PH"], &[], ""));
    cmd_detect(&cfg).map_err(|e| format!("{e:#}"))?;
    cmd_score(&cfg).map_err(|e| format!("{e:#}"))?;
    let out = root.join("out");
    Ok(tree(&out).into_iter().map(|p| (p.clone(), std::fs::read(out.join(&p)).unwrap())).collect())
}

fn criterion_8() -> Check {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = full_run(a.path())?;
    let second = full_run(b.path())?;
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    ensure(first.len() == second.len() && differing.is_empty(), || format!("differing outputs: {differing:?}"))?;
    Ok(format!("{} output files byte-identical across two runs", first.len()))
}

fn criterion_9() -> Check {
    let names = ["ns", "nd", "nf", "entropy", "la", "ld", "lt"];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = Normal::new(0.0, 1.0).unwrap();
    let records: Vec<CommitRecord> = (0..1000)
        .map(|i| {
            let shared: f64 = n.sample(&mut rng);
            let features = vec![
                rng.random_range(1..4) as f64,
                rng.random_range(1..6) as f64,
                rng.random_range(1..20) as f64,
                rng.random::<f64>() * 3.0,
                (shared + 0.33 * n.sample(&mut rng)).exp(),
                (shared + 0.33 * n.sample(&mut rng)).exp(),
                rng.random_range(0..2000) as f64,
            ];
            CommitRecord { seq: Some(i), features, label: None }
        })
        .collect();
    let stream = CommitStream { name: "rho".into(), feature_names: names.iter().map(|s| s.to_string()).collect(), records };
    let rho = pearson(&rank_by_hand(&stream.column(4)), &rank_by_hand(&stream.column(5)));
    let (_, removed) = spearman_prune(&stream, 0.7).map_err(|e| e.to_string())?;
    ensure(removed.len() == 1 && (removed[0] == "la" || removed[0] == "ld"), || format!("removed {removed:?}"))?;

    let fixture = CommitStream {
        name: "e".into(),
        feature_names: vec!["nf".into(), "entropy".into()],
        records: [(2.0, 1.0), (4.0, 2.0), (1.0, 0.9)]
            .iter()
            .enumerate()
            .map(|(i, (nf, e))| CommitRecord { seq: Some(i as u64), features: vec![*nf, *e], label: None })
            .collect(),
    };
    let normalized = normalize_entropy(&fixture).map_err(|e| e.to_string())?;
    ensure(normalized.column(1) == vec![1.0, 1.0, 0.0] && normalized.column(0) == fixture.column(0), || {
        format!("entropy fixtures gave {:?}", normalized.column(1))
    })?;
    Ok(format!("rho(la, ld) = {rho:.3}, removed {removed:?}; entropy fixtures exact"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("formula exactness", Duration::from_secs(1), criterion_1),
        ("PH step response", Duration::from_secs(1), criterion_2),
        ("PH on count-series fixtures", Duration::from_secs(1), criterion_3),
        ("Shapley oracle", Duration::from_secs(60), criterion_4),
        ("statistical-test oracles", Duration::from_secs(10), criterion_5),
        ("end-to-end synthetic detection", Duration::from_secs(15 * 60), criterion_6),
        ("rebalancing contract", Duration::from_secs(600), criterion_7),
        ("determinism", Duration::from_secs(600), criterion_8),
        ("preprocessing", Duration::from_secs(10), criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("over budget ({budget:?}); {detail}")),
            other => other,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {} {name} ({:.2}s): {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
