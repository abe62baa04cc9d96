//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use fatlens::config::SimKind;
use fatlens::manifest::{manifest_name, RunManifest};
use fatlens::{stages, RunConfig};
use fatlens_core::corpus::{balance_check, NoteRecord};
use fatlens_core::econometrics::{disparity_regressions, fit_ols, DataTable, DesignSpec};
use fatlens_core::mlcore::{auc_roc, logit_gradient, logit_objective};
use fatlens_core::predictability::{
    compare_generated_vs_original, log_perplexity, sentences_log_perplexity, train_lm, GenerationConfig, LmConfig,
    NgramLM, TextScore,
};
use fatlens_core::synthlab::{
    attenuation_experiment, pipeline_rows, shrinkage_check, simulate_linear, simulate_text_corpus, DagConfig,
    LinearCorpus, StyleMap,
};
use fatlens_core::textfeat::{LexiconSet, Tokenizer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

mod common;
use common::mock_endpoint;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn timed(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    Outcome { name, pass, detail: format!("{detail}; {:.1} s", t.elapsed().as_secs_f64()) }
}

fn main() {
    let outcomes = [
        timed("shrinkage identity", shrinkage),
        timed("attenuation", attenuation),
        timed("end-to-end AUC", end_to_end),
        timed("oracle equivalences", oracles),
        timed("balance-check calibration", balance_calibration),
        timed("generated vs original perplexity", generation_order),
        timed("determinism", determinism),
        timed("disparity null safety", disparity_null),
    ];
    println!();
    for o in &outcomes {
        println!("{}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn shrinkage() -> (bool, String) {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..1000 {
        let cfg = DagConfig { n_physicians: 2, n_shifts: 10, patients_per_shift: 10, a: vec![1.7], exact_orthogonal: true, seed, ..DagConfig::default() };
        let corpus = simulate_linear(&cfg).unwrap();
        assert_eq!(corpus.len(), 200);
        worst = worst.max(shrinkage_check(&corpus).unwrap().max_abs_error);
    }
    let secs = t.elapsed().as_secs_f64();
    (worst < 1e-10 && secs < 10.0, format!("max abs error {worst:.2e} over 1000 corpora of 200"))
}

/// Two-sided power of the slope t-test at 5%, normal approximation, for a
/// regressor explaining `r2` of the outcome variance.
fn power(n: f64, r2: f64) -> f64 {
    let z = Normal::standard();
    let nc = (n * r2 / (1.0 - r2)).sqrt();
    let c = z.inverse_cdf(0.975);
    z.cdf(nc - c) + z.cdf(-nc - c)
}

/// Outcome noise variance at which the Ŷ and Y rejection rates miss 0.9
/// and 0.3 by the same number of binomial standard errors.
fn balanced_noise(cfg: &DagConfig, replicates: f64) -> f64 {
    let n = cfg.n_records() as f64;
    let g2 = cfg.gamma * cfg.gamma;
    let rates = |s2: f64| {
        let total = g2 * (cfg.var_y + cfg.var_delta) + s2;
        (power(n, g2 * cfg.var_y / total), power(n, g2 * (cfg.var_y + cfg.var_delta) / total))
    };
    let se = |p: f64| (p * (1.0 - p) / replicates).sqrt();
    let gap = |s2: f64| {
        let (py, ph) = rates(s2);
        (ph - 0.9) / se(ph) - (0.3 - py) / se(py)
    };
    let (mut lo, mut hi) = (1.0, 500.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn attenuation() -> (bool, String) {
    let base = DagConfig { n_physicians: 10, n_shifts: 10, patients_per_shift: 10, var_y: 1.0, var_delta: 4.0, gamma: 0.3, ..DagConfig::default() };
    let noise_var = balanced_noise(&base, 200.0);
    let t = Instant::now();
    let on = attenuation_experiment(&DagConfig { noise_var, ..base.clone() }, 200).unwrap();
    let off = attenuation_experiment(&DagConfig { noise_var, gamma: 0.0, ..base }, 200).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let null_ok = |r: f64| (0.02..=0.09).contains(&r);
    let pass = on.reject_rate_yhat >= 0.9
        && on.reject_rate_y <= 0.3
        && null_ok(off.reject_rate_y)
        && null_ok(off.reject_rate_yhat)
        && secs < 120.0;
    let detail = format!(
        "noise var {noise_var:.2}; γ=0.3: Ŷ {:.3}, Y {:.3}; γ=0: Ŷ {:.3}, Y {:.3}",
        on.reject_rate_yhat, on.reject_rate_y, off.reject_rate_yhat, off.reject_rate_y
    );
    (pass, detail)
}

fn pipeline_auc(dir: &Path, contrast: f64) -> f64 {
    let mut config = RunConfig { seed: 1, out_dir: dir.to_path_buf(), ..RunConfig::default() };
    config.dag = DagConfig { n_physicians: 40, n_shifts: 50, patients_per_shift: 10, var_delta: 1.0, workload_gap: 1.0, ..DagConfig::default() };
    config.simulate.contrast = contrast;
    config.evaluate.bootstrap_replicates = 200;
    config.validate().unwrap();
    for stage in ["simulate", "ingest", "segment", "label", "build-dataset", "train-lm", "extract-features", "train", "evaluate"] {
        stages::run_stage(stage, &config, &[]).unwrap_or_else(|e| panic!("{stage}: {e}"));
    }
    let eval: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("eval.json")).unwrap()).unwrap();
    eval["model"]["auc_roc"].as_f64().unwrap()
}

fn end_to_end() -> (bool, String) {
    let target = Normal::standard().cdf(1.0 / 2f64.sqrt());
    let mut detail = Vec::new();
    let mut pass = true;
    for (contrast, expect, tol) in [(1.0, target, 0.03), (0.0, 0.5, 0.02)] {
        let dir = tempfile::tempdir().unwrap();
        let t = Instant::now();
        let auc = pipeline_auc(dir.path(), contrast);
        let secs = t.elapsed().as_secs_f64();
        pass &= (auc - expect).abs() <= tol && secs < 300.0;
        detail.push(format!("contrast {contrast}: AUC {auc:.4} vs {expect:.4} ± {tol} in {secs:.0} s"));
    }
    (pass, detail.join("; "))
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut half, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                half += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    half as f64 / (2 * pairs) as f64
}

fn oracles() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let mut auc_mismatch = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..60);
        // Coarse scores so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8)) / 4.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        labels[0] = true;
        labels[1] = false;
        if auc_roc(&scores, &labels).unwrap() != pairwise_auc(&scores, &labels) {
            auc_mismatch += 1;
        }
    }

    let mut ols_err = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(5..200);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.7 - 1.3 * v + rng.random_range(-1.0..1.0)).collect();
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let mut t = DataTable::new(n);
        t.numeric("y", y.iter().copied());
        t.numeric("x", x.iter().copied());
        let r = fit_ols(&DesignSpec::new("y", &["x"]), &t).unwrap();
        ols_err = ols_err.max((r.term("x").unwrap().coef - slope).abs()).max((r.terms[0].coef - intercept).abs());
    }

    let mut grad_err = 0.0f64;
    for _ in 0..50 {
        let (n, d) = (rng.random_range(5..40), rng.random_range(1..6));
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (b, lambda) = (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0));
        let g = logit_gradient(&x, &y, &w, b, lambda);
        let h = 1e-5;
        let fd = |k: usize| {
            let mut theta: Vec<f64> = std::iter::once(b).chain(w.iter().copied()).collect();
            theta[k] += h;
            let up = logit_objective(&x, &y, &theta[1..], theta[0], lambda);
            theta[k] -= 2.0 * h;
            let down = logit_objective(&x, &y, &theta[1..], theta[0], lambda);
            (up - down) / (2.0 * h)
        };
        for (k, gk) in g.iter().enumerate() {
            grad_err = grad_err.max((gk - fd(k)).abs());
        }
    }

    let mut entropy_err = 0.0f64;
    let words = ["a", "b", "c", "d", "e", "f"];
    for _ in 0..50 {
        let corpus: Vec<Vec<String>> = (0..rng.random_range(1..20))
            .map(|_| (0..rng.random_range(1..12)).map(|_| words[rng.random_range(0..words.len())].to_string()).collect())
            .collect();
        let lm = NgramLM::train(
            corpus.iter().map(|s| s.iter().map(String::as_str)),
            LmConfig { order: 1, discount: 0.0, min_count: 1, sentence_end: true },
        )
        .unwrap();
        let mut freq: BTreeMap<&str, f64> = BTreeMap::new();
        let mut total = 0.0;
        for s in &corpus {
            for w in s.iter().map(String::as_str).chain(["</s>"]) {
                *freq.entry(w).or_default() += 1.0;
                total += 1.0;
            }
        }
        let h: f64 = freq.values().map(|c| -(c / total) * (c / total).log2()).sum();
        entropy_err = entropy_err.max((sentences_log_perplexity(&lm, &corpus).unwrap() - h).abs());
    }

    let pass = auc_mismatch == 0 && ols_err < 1e-10 && grad_err < 1e-6 && entropy_err < 1e-9;
    let detail = format!(
        "AUC mismatches {auc_mismatch}/1000, OLS error {ols_err:.1e}, gradient error {grad_err:.1e}, entropy error {entropy_err:.1e}"
    );
    (pass, detail)
}

fn null_rows(seed: u64, rho: f64) -> (LinearCorpus, Vec<fatlens_core::econometrics::AnalysisRow>) {
    let cfg = DagConfig { rho, seed, ..DagConfig { n_physicians: 10, n_shifts: 10, patients_per_shift: 10, ..DagConfig::default() } };
    let corpus = simulate_linear(&cfg).unwrap();
    let (notes, encounters) = corpus.to_corpus();
    let (_, y_hat) = corpus.fit_y_on_w();
    let mean = y_hat.iter().sum::<f64>() / y_hat.len() as f64;
    let sd = (y_hat.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y_hat.len() as f64).sqrt();
    let scores: BTreeMap<String, f64> = notes.iter().zip(&y_hat).map(|(n, v)| (n.note_id.clone(), (v - mean) / sd)).collect();
    let rows = pipeline_rows(&notes, &encounters, &scores).unwrap();
    (corpus, rows)
}

fn balance_calibration() -> (bool, String) {
    let (mut significant, mut total) = (0usize, 0usize);
    for seed in 0..200 {
        let (_, rows) = null_rows(seed, 0.0);
        let report = balance_check(&rows).unwrap();
        significant += report.significant_complaints(0.05);
        total += report.complaints.len();
    }
    let frac = significant as f64 / total as f64;
    ((0.03..=0.07).contains(&frac), format!("{significant} of {total} complaint coefficients significant ({:.2}%)", 100.0 * frac))
}

fn generation_order() -> (bool, String) {
    let lex = LexiconSet::bundled();
    let tok = Tokenizer::default();
    let mut ordered = 0;
    let runs = 100;
    for seed in 0..runs {
        let cfg = DagConfig { n_physicians: 4, n_shifts: 10, patients_per_shift: 8, var_delta: 1.0, seed, ..DagConfig::default() };
        let corpus = simulate_text_corpus(&cfg, &StyleMap::linear(1.0), &lex).unwrap();
        let mut patients: Vec<&str> = corpus.notes.iter().map(|n| n.patient_id.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
        patients.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let held: BTreeSet<&str> = patients[..patients.len() / 5].iter().copied().collect();
        let (test, train): (Vec<&NoteRecord>, Vec<&NoteRecord>) = corpus.notes.iter().partition(|n| held.contains(n.patient_id.as_str()));
        let texts: Vec<&str> = train.iter().map(|n| n.text.as_str()).collect();
        let lm = train_lm(&texts, &tok, LmConfig::default()).unwrap();
        let scorer = |_: &NoteRecord, text: &str| -> fatlens_core::Result<TextScore> {
            Ok(TextScore { fatigue: 0.0, log_perplexity: log_perplexity(&lm, &tok.tokenize(text))?, frac_anger: 0.0 })
        };
        let test: Vec<NoteRecord> = test.into_iter().cloned().collect();
        let cmp = compare_generated_vs_original(&lm, &test, &tok, &scorer, &GenerationConfig { seed, ..GenerationConfig::default() }).unwrap();
        let lp: Vec<f64> = cmp.summary.iter().map(|s| s.mean_log_perplexity).collect();
        if lp[0] < lp[1] && lp[1] < lp[2] {
            ordered += 1;
        }
    }
    (ordered * 100 >= 95 * runs, format!("greedy < sampled < original in {ordered} of {runs} runs"))
}

const ALL_STAGES: [&str; 19] = [
    "simulate",
    "ingest",
    "segment",
    "label",
    "build-dataset",
    "train-lm",
    "extract-features",
    "train",
    "evaluate",
    "score",
    "validate",
    "yield",
    "disparity",
    "correlations",
    "generate-compare",
    "llm-baseline",
    "shrinkage",
    "attenuation",
    "report",
];

fn run_all(dir: &Path, endpoint: &str) -> BTreeMap<String, String> {
    let mut config = RunConfig { seed: 7, out_dir: dir.to_path_buf(), ..RunConfig::default() };
    config.dag = DagConfig { n_physicians: 8, n_shifts: 40, patients_per_shift: 8, var_delta: 0.25, ..DagConfig::default() };
    config.simulate.kind = SimKind::Text;
    config.train.lambda_grid = vec![0.01, 1.0];
    config.evaluate.bootstrap_replicates = 200;
    config.shrinkage.replicates = 20;
    config.attenuation.replicates = 20;
    config.generation.max_notes = 50;
    config.llm.endpoint = Some(endpoint.to_string());
    config.llm.pairs = 5;
    config.llm.retries = 0;
    config.validate().unwrap();
    let mut digests = BTreeMap::new();
    for stage in ALL_STAGES {
        let (_, manifest) = stages::run_stage(stage, &config, &[]).unwrap_or_else(|e| panic!("{stage}: {e}"));
        let on_disk = RunManifest::read(&dir.join(manifest_name(stage))).unwrap();
        assert_eq!(on_disk.artifacts, manifest.artifacts);
        for a in manifest.artifacts {
            digests.insert(format!("{stage}/{}", a.path), a.sha256);
        }
    }
    digests
}

fn determinism() -> (bool, String) {
    let endpoint = mock_endpoint();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_all(a.path(), &endpoint);
    let second = run_all(b.path(), &endpoint);
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    let stages_run: BTreeSet<&str> = first.keys().filter_map(|k| k.split('/').next()).collect();
    let pass = differing.is_empty() && first.len() == second.len() && stages_run.len() == ALL_STAGES.len();
    (pass, format!("{} artifacts from {} stages, {} differ {:?}", first.len(), stages_run.len(), differing.len(), differing))
}

fn disparity_null() -> (bool, String) {
    let share = |rho: f64| {
        let (mut significant, mut total) = (0usize, 0usize);
        for seed in 0..200 {
            let (_, rows) = null_rows(seed, rho);
            let fit = disparity_regressions(&rows).fatigue.result.unwrap();
            for t in fit.focus_terms().iter().filter(|t| t.name.starts_with("race=")) {
                total += 1;
                significant += usize::from(t.p < 0.05);
            }
        }
        (significant, total)
    };
    let (s0, n0) = share(0.0);
    let (s3, n3) = share(0.3);
    let (f0, f3) = (s0 as f64 / n0 as f64, s3 as f64 / n3 as f64);
    let pass = f0 <= 0.10 && f3 >= 0.90;
    (pass, format!("race coefficients significant: ρ=0 {s0}/{n0} ({:.1}%), ρ=0.3 {s3}/{n3} ({:.1}%)", 100.0 * f0, 100.0 * f3))
}
