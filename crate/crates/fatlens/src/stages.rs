//! Pipeline stages. Each reads upstream artifacts through their manifests,
//! writes its own artifacts atomically and finishes with a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use fatlens_core::corpus::{
    balance_check, build_balanced_dataset, compute_workload, rest_violations, segment_shifts, BalanceConfig,
    BalanceRow, BalancedDataset, Encounter, NoteRecord, Shift, WorkloadClass, WorkloadLabel,
};
use fatlens_core::econometrics::{
    analysis_rows, arrival_time_curve, disparity_regressions, feature_correlations, validation_suite,
    yield_regressions, AnalysisRow, SuiteColumn,
};
use fatlens_core::mlcore::{
    cross_validate, evaluate, llm_pairwise_baseline, score_notes, train_logit, CvResult, EvalReport, LogitModel,
};
use fatlens_core::predictability::{
    compare_generated_vs_original, log_perplexity, train_lm, CrossFitLm, NgramLM, PerplexitySource, TextScore,
    TrainNote,
};
use fatlens_core::synthlab::{
    attenuation_experiment, shrinkage_check, simulate_linear, simulate_text_corpus, DagConfig, StyleMap, Truth,
};
use fatlens_core::textfeat::{FeatureExtractor, FeatureVector, LexiconSet, Standardizer, Tokenizer};
use serde::{Deserialize, Serialize};

use crate::config::{NoteSet, RunConfig, SimKind};
use crate::error::{CliError, Result};
use crate::formats::{self, FeatureRow, FeatureTable, SplitFile};
use crate::http::HttpChat;
use crate::ingest::{corpus_record, Ingestor};
use crate::manifest::{sha256_file, RunManifest, StageRun};
use crate::report::{self, Mark, Series};

pub const STAGES: [&str; 19] = [
    "ingest",
    "segment",
    "label",
    "build-dataset",
    "extract-features",
    "train-lm",
    "train",
    "evaluate",
    "score",
    "validate",
    "yield",
    "disparity",
    "correlations",
    "simulate",
    "shrinkage",
    "attenuation",
    "generate-compare",
    "llm-baseline",
    "report",
];

/// Lines printed to stdout after a successful stage.
pub type Output = Vec<String>;

/// Runs `stage` with `config`, writing into `config.out_dir`.
pub fn run_stage(stage: &str, config: &RunConfig, argv: &[String]) -> Result<(Output, RunManifest)> {
    let name = STAGES
        .iter()
        .copied()
        .find(|s| *s == stage)
        .ok_or_else(|| CliError::Config(format!("unknown stage `{stage}`")))?;
    let mut run = StageRun::new(name, &config.out_dir);
    let c = config;
    let r = &mut run;
    let out = match name {
        "ingest" => ingest(c, r),
        "segment" => segment(c, r),
        "label" => label(c, r),
        "build-dataset" => build_dataset(c, r),
        "extract-features" => extract_features(c, r),
        "train-lm" => train_lm_stage(c, r),
        "train" => train(c, r),
        "evaluate" => evaluate_stage(c, r),
        "score" => score(c, r),
        "validate" => validate(c, r),
        "yield" => yield_stage(c, r),
        "disparity" => disparity(c, r),
        "correlations" => correlations(c, r),
        "simulate" => simulate(c, r),
        "shrinkage" => shrinkage(c, r),
        "attenuation" => attenuation(c, r),
        "generate-compare" => generate_compare(c, r),
        "llm-baseline" => llm_baseline(c, r),
        "report" => report_stage(c, r),
        _ => unreachable!(),
    }?;
    let manifest = run.finish(config, argv)?;
    Ok((out, manifest))
}

/// Reruns the stage recorded in a manifest with its config snapshot and
/// checks that every artifact comes out with the recorded digest.
pub fn replay(manifest_path: &Path, argv: &[String]) -> Result<Output> {
    let old = RunManifest::read(manifest_path)?;
    let (mut out, new) = run_stage(&old.command, &old.config, argv)?;
    let mut mismatched = Vec::new();
    for a in &old.artifacts {
        match new.artifact(&a.path) {
            Some(b) if b.sha256 == a.sha256 => {}
            _ => mismatched.push(a.path.clone()),
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Other(format!("replay of `{}` changed: {}", old.command, mismatched.join(", "))));
    }
    out.push(format!("replayed `{}`: {} artifacts identical", old.command, old.artifacts.len()));
    Ok(out)
}

// Shared loaders.

fn notes(run: &mut StageRun) -> Result<Vec<NoteRecord>> {
    formats::read_jsonl(&run.require("ingest", "notes.jsonl")?)
}

fn encounters(run: &mut StageRun) -> Result<Vec<Encounter>> {
    formats::read_jsonl(&run.require("ingest", "encounters.jsonl")?)
}

fn shifts(run: &mut StageRun) -> Result<Vec<Shift>> {
    formats::read_jsonl(&run.require("segment", "shifts.jsonl")?)
}

fn labels(run: &mut StageRun) -> Result<Vec<WorkloadLabel>> {
    formats::read_labels(&run.require("label", "labels.csv")?)
}

fn dataset(run: &mut StageRun) -> Result<BalancedDataset> {
    formats::read_json(&run.require("build-dataset", "dataset.json")?)
}

fn features(run: &mut StageRun) -> Result<FeatureTable> {
    FeatureTable::read(&run.require("extract-features", "features.csv")?)
}

fn model(run: &mut StageRun) -> Result<LogitModel> {
    formats::read_json(&run.require("train", "model.json")?)
}

fn lm(run: &mut StageRun) -> Result<NgramLM> {
    formats::read_json(&run.require("train-lm", "lm.json")?)
}

fn lexicons(config: &RunConfig, run: &mut StageRun) -> Result<LexiconSet> {
    if let Some(p) = &config.features.lexicon {
        run.input(p)?;
    }
    formats::load_lexicons(config.features.lexicon.as_deref())
}

fn tokenizer(config: &RunConfig) -> Tokenizer {
    match &config.features.abbreviations {
        Some(list) => Tokenizer::with_abbreviations(list),
        None => Tokenizer::default(),
    }
}

fn in_set(set: NoteSet, dataset: &BalancedDataset, note_id: &str, patient_id: &str) -> bool {
    match set {
        NoteSet::Heldout => dataset.split.heldout_patients.contains(patient_id),
        NoteSet::Train => dataset.split.train_note_ids.contains(note_id),
        NoteSet::All => true,
    }
}

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

// Corpus stages.

#[derive(Serialize)]
struct IngestSummary {
    notes: usize,
    rejected: usize,
    reject_counts: BTreeMap<String, usize>,
}

fn ingest(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let input = match &config.ingest.input {
        Some(p) => {
            run.input(p)?;
            p.clone()
        }
        None => run.require("simulate", "simulated.jsonl")?,
    };
    let ingestor = Ingestor::new(&config.ingest)?;
    if let Some(v) = &config.ingest.complaint_vocabulary {
        run.input(v)?;
    }
    let out = ingestor.read_path(&input, config.ingest.format)?;
    if out.notes.is_empty() {
        return Err(data(format!("{}: no valid records ({} rejected)", input.display(), out.rejects.len())));
    }
    run.write("notes.jsonl", &formats::to_jsonl(&out.notes))?;
    run.write("encounters.jsonl", &formats::to_jsonl(&out.encounters))?;
    let rejects = out.rejects.iter().map(|r| {
        vec![r.line.to_string(), r.note_id.clone().unwrap_or_default(), r.code.clone(), r.detail.clone()]
    });
    run.write("rejects.csv", &formats::simple_csv(&["line", "note_id", "code", "detail"], rejects))?;
    let summary = IngestSummary {
        notes: out.notes.len(),
        rejected: out.rejects.len(),
        reject_counts: out.reject_counts(),
    };
    run.write("ingest_summary.json", &formats::to_json(&summary))?;
    Ok(vec![format!("ingested {} notes, rejected {}", summary.notes, summary.rejected)])
}

fn segment(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let notes = notes(run)?;
    let seg = config.segment.to_core();
    let shifts = segment_shifts(&notes, &config.clock()?, &seg)?;
    let violations = rest_violations(&shifts, seg.min_rest);
    run.write("shifts.jsonl", &formats::to_jsonl(&shifts))?;
    let rows = violations.iter().map(|v| {
        vec![v.physician_id.clone(), v.previous_shift.clone(), v.shift.clone(), v.rest_minutes.to_string()]
    });
    run.write(
        "rest_violations.csv",
        &formats::simple_csv(&["physician_id", "previous_shift", "shift", "rest_minutes"], rows),
    )?;
    Ok(vec![format!("{} shifts, {} short rests", shifts.len(), violations.len())])
}

fn label(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let shifts = shifts(run)?;
    let labels = compute_workload(&shifts, &config.label.to_core());
    run.write("labels.csv", &formats::labels_csv(&labels))?;
    let count = |c| labels.iter().filter(|l| l.class == c).count();
    Ok(vec![format!(
        "{} shifts: {} high, {} low, {} mid",
        labels.len(),
        count(WorkloadClass::High),
        count(WorkloadClass::Low),
        count(WorkloadClass::Mid)
    )])
}

const BALANCE_HEADER: [&str; 9] = ["kind", "outcome", "term", "coef", "se", "t", "p", "stars", "n"];

fn balance_rows<'a>(kind: &'a str, rows: &'a [BalanceRow]) -> impl Iterator<Item = Vec<String>> + 'a {
    rows.iter().map(move |r| {
        vec![
            kind.to_string(),
            r.outcome.clone(),
            r.term.name.clone(),
            r.term.coef.to_string(),
            r.term.se.to_string(),
            r.term.t.to_string(),
            r.term.p.to_string(),
            r.term.stars.clone(),
            r.n.to_string(),
        ]
    })
}

fn build_dataset(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let notes = notes(run)?;
    let encounters = encounters(run)?;
    let shifts = shifts(run)?;
    let labels = labels(run)?;
    let bc = BalanceConfig { seed: config.seed, train_fraction: config.dataset.train_fraction };
    let ds = build_balanced_dataset(&notes, &encounters, &shifts, &labels, &bc)?;
    if ds.classes.is_empty() {
        return Err(data("no complaint has both high- and low-workload notes"));
    }
    run.write("dataset.json", &formats::to_json(&ds))?;
    run.write("split.json", &formats::to_json(&SplitFile::of(&ds)))?;

    let rows = analysis_rows(&notes, &encounters, &shifts, &labels, &BTreeMap::new(), &config.clock()?);
    let report = balance_check(&rows)?;
    let csv = formats::simple_csv(
        &BALANCE_HEADER,
        balance_rows("demographic", &report.demographics).chain(balance_rows("complaint", &report.complaints)),
    );
    run.write("balance.csv", &csv)?;
    let demo_sig = report.demographics.iter().filter(|r| r.term.p < 0.05).count();
    Ok(vec![
        format!(
            "balanced dataset: {} notes ({} train, {} held-out), {} complaints excluded",
            ds.classes.len(),
            ds.split.train_note_ids.len(),
            ds.split.heldout_note_ids.len(),
            ds.excluded_complaints.len()
        ),
        format!(
            "balance: {demo_sig} of {} demographic coefficients and {} chief complaints significant at p<0.05",
            report.demographics.len(),
            report.summary(0.05)
        ),
    ])
}

// Features and language model.

fn train_notes<'a>(notes: &'a [NoteRecord], ds: &BalancedDataset) -> Vec<&'a NoteRecord> {
    notes.iter().filter(|n| ds.split.train_note_ids.contains(&n.note_id)).collect()
}

fn train_lm_stage(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let notes = notes(run)?;
    let ds = dataset(run)?;
    let texts: Vec<&str> = train_notes(&notes, &ds).iter().map(|n| n.text.as_str()).collect();
    if texts.is_empty() {
        return Err(data("the training split has no notes"));
    }
    let model = train_lm(&texts, &tokenizer(config), config.lm.to_core())?;
    run.write("lm.json", &formats::to_json(&model))?;
    Ok(vec![format!("order-{} model on {} training notes, {} word types", model.order(), texts.len(), model.vocab_size())])
}

fn complaint_vocabulary(config: &RunConfig, run: &mut StageRun, encounters: &[Encounter]) -> Result<Vec<String>> {
    match &config.ingest.complaint_vocabulary {
        Some(p) => {
            run.input(p)?;
            Ok(formats::read_text(p)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
        }
        None => {
            let set: BTreeSet<&String> = encounters.iter().flat_map(|e| &e.chief_complaints).collect();
            Ok(set.into_iter().cloned().collect())
        }
    }
}

fn extract_features(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let notes = notes(run)?;
    let encounters = encounters(run)?;
    let ds = dataset(run)?;
    let tok = tokenizer(config);
    let source = match &config.features.perplexity_file {
        Some(p) => {
            run.input(p)?;
            PerplexitySource::external(formats::read_perplexity_csv(p)?)
                .map_err(|e| data(format!("{}: {e}", p.display())))?
        }
        None => {
            let full = lm(run)?;
            if config.lm.crossfit_folds >= 2 {
                let train: Vec<TrainNote> = train_notes(&notes, &ds)
                    .into_iter()
                    .map(|n| TrainNote { note_id: &n.note_id, patient_id: &n.patient_id, text: &n.text })
                    .collect();
                PerplexitySource::CrossFitted(CrossFitLm::train(full, &train, &tok, config.lm.crossfit_folds, config.seed)?)
            } else {
                PerplexitySource::Builtin(full)
            }
        }
    };
    let vocab = complaint_vocabulary(config, run, &encounters)?;
    let extractor = FeatureExtractor::new(&lexicons(config, run)?, &vocab)?.with_tokenizer(tok);
    let enc: BTreeMap<&str, &Encounter> = encounters.iter().map(|e| (e.note_id.as_str(), e)).collect();
    let mut rows = Vec::with_capacity(notes.len());
    for n in &notes {
        let vector = extractor
            .extract(n, enc.get(n.note_id.as_str()).copied(), &source)
            .map_err(|e| data(format!("note `{}`: {e}", n.note_id)))?;
        rows.push(FeatureRow {
            patient_id: n.patient_id.clone(),
            split: formats::split_of(&ds, &n.note_id).to_string(),
            class: ds.classes.get(&n.note_id).map_or("none", |c| c.as_str()).to_string(),
            vector,
        });
    }
    let table = FeatureTable { names: extractor.feature_names(), rows };
    run.write("features.csv", &table.to_csv())?;
    Ok(vec![format!("{} notes x {} features", table.rows.len(), table.names.len())])
}

// Classifier.

fn text_columns(names: &[String]) -> usize {
    names.iter().take_while(|n| !n.starts_with("cc:")).count()
}

fn xy<'a>(rows: impl Iterator<Item = &'a FeatureRow>) -> (Vec<Vec<f64>>, Vec<bool>, Vec<String>) {
    let (mut x, mut y, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for r in rows {
        if let Some(h) = r.high() {
            x.push(r.vector.values.clone());
            y.push(h);
            g.push(r.patient_id.clone());
        }
    }
    (x, y, g)
}

fn fit_model(
    config: &RunConfig,
    x: &[Vec<f64>],
    y: &[bool],
    groups: &[String],
    names: &[String],
    standardize: usize,
) -> Result<(LogitModel, CvResult)> {
    let std = Standardizer::fit(x, standardize)?;
    let xs = std.apply_all(x)?;
    let cv = cross_validate(&xs, y, groups, &config.train.lambda_grid, config.train.cv_folds, config.seed)?;
    let mut model = train_logit(&xs, y, cv.best_lambda)?;
    model.feature_names = names.to_vec();
    model.standardizer = Some(std);
    Ok((model, cv))
}

fn cv_rows<'a>(label: &'a str, cv: &'a CvResult) -> impl Iterator<Item = Vec<String>> + 'a {
    cv.scores.iter().map(move |s| {
        let folds: Vec<String> = s.fold_aucs.iter().map(|a| formats::fmt_opt(*a)).collect();
        vec![label.to_string(), s.lambda.to_string(), s.mean_auc.to_string(), folds.join(";")]
    })
}

fn train(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let path = run.require("extract-features", "features.csv")?;
    let digest = sha256_file(&path)?;
    let table = FeatureTable::read(&path)?;
    let (x, y, groups) = xy(table.in_split("train"));
    let n_text = text_columns(&table.names);
    let (mut model, cv) = fit_model(config, &x, &y, &groups, &table.names, n_text)?;
    let provenance = |lambda: f64| {
        BTreeMap::from([
            ("features_sha256".to_string(), digest.clone()),
            ("fit_split".to_string(), "train".to_string()),
            ("standardizer_fit".to_string(), "train".to_string()),
            ("lm_fit".to_string(), if config.features.perplexity_file.is_some() { "external" } else { "train" }.into()),
            ("train_rows".to_string(), x.len().to_string()),
            ("seed".to_string(), config.seed.to_string()),
            ("cv_best_lambda".to_string(), lambda.to_string()),
        ])
    };
    model.provenance = provenance(cv.best_lambda);
    run.write("model.json", &formats::to_json(&model))?;
    let mut lines = vec![format!("λ = {} (CV AUC {:.4}) on {} notes", cv.best_lambda, cv.scores.iter().find(|s| s.lambda == cv.best_lambda).map_or(f64::NAN, |s| s.mean_auc), x.len())];
    let mut cv_csv: Vec<Vec<String>> = cv_rows("full", &cv).collect();

    if n_text < table.names.len() {
        let xc: Vec<Vec<f64>> = x.iter().map(|r| r[n_text..].to_vec()).collect();
        let (mut cc, cv_cc) = fit_model(config, &xc, &y, &groups, &table.names[n_text..], 0)?;
        cc.provenance = provenance(cv_cc.best_lambda);
        run.write("model_cc.json", &formats::to_json(&cc))?;
        cv_csv.extend(cv_rows("cc_only", &cv_cc));
        lines.push(format!("chief-complaint baseline: λ = {}", cv_cc.best_lambda));
    }
    run.write("cv.csv", &formats::simple_csv(&["model", "lambda", "mean_auc", "fold_aucs"], cv_csv))?;
    Ok(lines)
}

#[derive(Debug, Serialize, Deserialize)]
struct EvalFile {
    model: EvalReport,
    cc_baseline: Option<EvalReport>,
}

fn predict(model: &LogitModel, rows: &[&FeatureRow], from: usize) -> Result<Vec<f64>> {
    rows.iter().map(|r| Ok(model.predict_raw(&r.vector.values[from..])?)).collect()
}

fn evaluate_stage(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let model = model(run)?;
    let table = features(run)?;
    if model.feature_names != table.names {
        return Err(data("model features differ from features.csv"));
    }
    let rows: Vec<&FeatureRow> = table.in_split("heldout").filter(|r| r.high().is_some()).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r.high().unwrap()).collect();
    let report = evaluate(&predict(&model, &rows, 0)?, &labels, &config.eval_config())?;
    let cc_path = config.out_dir.join("model_cc.json");
    let cc_baseline = if cc_path.exists() {
        let cc: LogitModel = formats::read_json(&run.require("train", "model_cc.json")?)?;
        let from = text_columns(&table.names);
        Some(evaluate(&predict(&cc, &rows, from)?, &labels, &config.eval_config())?)
    } else {
        None
    };
    let mut lines = vec![
        report.headline(),
        format!("accuracy {:.4}  F1 {:.4}  n {}", report.accuracy, report.f1, report.n),
    ];
    if let Some(b) = &cc_baseline {
        lines.push(format!("chief-complaint baseline: {}", b.headline()));
    }
    run.write("eval.json", &formats::to_json(&EvalFile { model: report, cc_baseline }))?;
    run.write("eval.txt", format!("{}\n", lines.join("\n")).as_bytes())?;
    Ok(lines)
}

fn score(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let model = model(run)?;
    let table = features(run)?;
    let ds = dataset(run)?;
    let vectors: Vec<FeatureVector> = table.rows.iter().map(|r| r.vector.clone()).collect();
    let reference: Vec<usize> = table
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| in_set(config.analysis.reference, &ds, &r.vector.note_id, &r.patient_id))
        .map(|(i, _)| i)
        .collect();
    let scores = score_notes(&model, &vectors, &reference)?;
    let rows: Vec<(String, f64, f64)> = scores.into_iter().map(|s| (s.note_id, s.probability, s.standardized)).collect();
    run.write("scores.csv", &formats::scores_csv(&rows))?;
    Ok(vec![format!("scored {} notes against {} reference notes", rows.len(), reference.len())])
}

// Regression suites.

fn analysis(config: &RunConfig, run: &mut StageRun) -> Result<Vec<AnalysisRow>> {
    let notes = notes(run)?;
    let encounters = encounters(run)?;
    let shifts = shifts(run)?;
    let labels = labels(run)?;
    let ds = dataset(run)?;
    let scores = formats::read_scores(&run.require("score", "scores.csv")?)?;
    let rows = analysis_rows(&notes, &encounters, &shifts, &labels, &scores, &config.clock()?);
    let rows: Vec<AnalysisRow> =
        rows.into_iter().filter(|r| in_set(config.analysis.notes, &ds, &r.note_id, &r.patient_id)).collect();
    if rows.is_empty() {
        return Err(data("no notes in the analysis set"));
    }
    Ok(rows)
}

fn write_suite(run: &mut StageRun, name: &str, title: &str, columns: &[SuiteColumn]) -> Result<String> {
    let csv = formats::regressions_csv(&formats::suite_columns(columns));
    let path = run.write(&format!("{name}.csv"), &csv)?;
    let table = report::regression_table(title, &formats::read_regressions(&path)?);
    run.write(&format!("{name}.txt"), table.as_bytes())?;
    Ok(table)
}

pub const ARRIVAL_HEADER: [&str; 5] = ["hour", "mean", "n", "segment", "fitted"];
pub const ARRIVAL_FIT_HEADER: [&str; 5] = ["segment", "slope", "se", "intercept", "points"];

fn validate(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let rows = analysis(config, run)?;
    let suite = validation_suite(&rows, config.analysis.orientation);
    let table = write_suite(run, "validate", "Fatigue measures and predicted fatigue", &suite)?;

    let curve = arrival_time_curve(&rows);
    let mut points = Vec::new();
    for h in &curve.hours {
        let (segment, fit) =
            if (1..=5).contains(&h.hour) { ("overnight", &curve.overnight) } else { ("daytime", &curve.daytime) };
        let fitted = fit.as_ref().map(|f| f.intercept + f.slope * f64::from(h.hour));
        points.push(vec![h.hour.to_string(), h.mean.to_string(), h.n.to_string(), segment.into(), formats::fmt_opt(fitted)]);
    }
    run.write("arrival_curve.csv", &formats::simple_csv(&ARRIVAL_HEADER, points))?;
    let fits = [("overnight", &curve.overnight), ("daytime", &curve.daytime)].into_iter().map(|(seg, f)| match f {
        Some(f) => vec![seg.into(), f.slope.to_string(), f.se.to_string(), f.intercept.to_string(), f.points.to_string()],
        None => vec![seg.into(), String::new(), String::new(), String::new(), "0".into()],
    });
    run.write("arrival_fit.csv", &formats::simple_csv(&ARRIVAL_FIT_HEADER, fits))?;
    Ok(table.lines().map(String::from).collect())
}

fn yield_stage(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let rows = analysis(config, run)?;
    let y = yield_regressions(&rows)?;
    let columns = [
        SuiteColumn { label: "Workload (Day)".into(), result: Ok(y.workload.clone()) },
        SuiteColumn { label: "Predicted Fatigue".into(), result: Ok(y.fatigue.clone()) },
    ];
    let table = write_suite(run, "yield", "Yield of testing", &columns)?;
    let summary = formats::simple_csv(
        &["base_rate", "workload_relative", "fatigue_relative"],
        [vec![y.base_rate.to_string(), y.workload_relative.to_string(), y.fatigue_relative.to_string()]],
    );
    run.write("yield_summary.csv", &summary)?;
    let mut out: Output = table.lines().map(String::from).collect();
    out.push(format!(
        "base rate {:.4}; per SD of predicted fatigue {:+.1}% of base rate",
        y.base_rate,
        100.0 * y.fatigue_relative
    ));
    Ok(out)
}

fn disparity(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let rows = analysis(config, run)?;
    let d = disparity_regressions(&rows);
    let columns = [d.workload.clone(), d.fatigue.clone(), d.overnight_contrast.clone(), d.language_split.clone()];
    let table = write_suite(run, "disparity", "Patient demographics, workload and predicted fatigue", &columns)?;
    let ratios = d.ratios.iter().map(|r| vec![r.race.clone(), r.coef.to_string(), r.ratio_to_overnight.to_string()]);
    run.write("disparity_ratios.csv", &formats::simple_csv(&["race", "coef", "ratio_to_overnight"], ratios))?;
    let mut out: Output = table.lines().map(String::from).collect();
    for r in &d.ratios {
        out.push(format!("{}: {:.2}x the overnight effect", r.race, r.ratio_to_overnight));
    }
    if !d.absent_levels.is_empty() {
        out.push(format!("race levels absent: {}", d.absent_levels.join(", ")));
    }
    Ok(out)
}

fn correlations(_config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let table = features(run)?;
    let (x, y, _) = xy(table.rows.iter());
    let names: Vec<&str> = table.names.iter().map(String::as_str).collect();
    let rows = feature_correlations(&names, &x, &y)?;
    let csv = rows.iter().map(|r| vec![r.feature.clone(), formats::fmt_opt(r.r), formats::fmt_opt(r.p), r.stars.clone()]);
    run.write("correlations.csv", &formats::simple_csv(&formats::CORRELATIONS_HEADER, csv))?;
    Ok(vec![format!("{} feature correlations over {} balanced notes", rows.len(), x.len())])
}

// Synthetic laboratory.

const TRUTH_HEADER: [&str; 8] = ["note_id", "y", "delta", "y_star", "d", "z", "test_positive", "level"];

fn truth_row(id: &str, t: &Truth, level: Option<i32>) -> Vec<String> {
    vec![
        id.to_string(),
        t.y.to_string(),
        t.delta.to_string(),
        t.y_star.to_string(),
        t.d.to_string(),
        t.z.to_string(),
        t.test_positive.to_string(),
        level.map(|l| l.to_string()).unwrap_or_default(),
    ]
}

fn corpus_jsonl(notes: &[NoteRecord], encounters: &[Encounter]) -> Vec<u8> {
    let records: Vec<serde_json::Value> = notes.iter().zip(encounters).map(|(n, e)| corpus_record(n, e)).collect();
    formats::to_jsonl(&records)
}

fn simulate(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let dag = config.dag();
    match config.simulate.kind {
        SimKind::Text => {
            let lex = lexicons(config, run)?;
            let c = simulate_text_corpus(&dag, &StyleMap::linear(config.simulate.contrast), &lex)?;
            run.write("simulated.jsonl", &corpus_jsonl(&c.notes, &c.encounters))?;
            let truth = c.notes.iter().zip(&c.truth).zip(&c.levels).map(|((n, t), l)| truth_row(&n.note_id, t, Some(*l)));
            run.write("simulated_truth.csv", &formats::simple_csv(&TRUTH_HEADER, truth))?;
            Ok(vec![format!("simulated {} text notes", c.notes.len())])
        }
        SimKind::Linear => {
            let c = simulate_linear(&dag)?;
            let (notes, encounters) = c.to_corpus();
            run.write("simulated.jsonl", &corpus_jsonl(&notes, &encounters))?;
            let truth = notes.iter().zip(&c.truth).map(|(n, t)| truth_row(&n.note_id, t, None));
            run.write("simulated_truth.csv", &formats::simple_csv(&TRUTH_HEADER, truth))?;
            let mut header = vec!["note_id".to_string()];
            header.extend((0..c.a.len()).map(|j| format!("w{j}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let w = notes.iter().zip(&c.w).map(|(n, w)| {
                std::iter::once(n.note_id.clone()).chain(w.iter().map(f64::to_string)).collect()
            });
            run.write("simulated_linear.csv", &formats::simple_csv(&header, w))?;
            Ok(vec![format!("simulated {} linear notes", notes.len())])
        }
    }
}

#[derive(Serialize)]
struct ShrinkageSummary {
    replicates: usize,
    n: usize,
    max_abs_error: f64,
}

fn shrinkage(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let replicates = config.shrinkage.replicates;
    if replicates == 0 {
        return Err(CliError::Config("shrinkage.replicates must be positive".into()));
    }
    let base = config.dag();
    let mut rows = Vec::with_capacity(replicates);
    let mut worst = 0.0f64;
    let mut n = 0;
    for r in 0..replicates {
        let seed = base.seed.wrapping_add(r as u64);
        let corpus = simulate_linear(&DagConfig { seed, exact_orthogonal: true, ..base.clone() })?;
        let rep = shrinkage_check(&corpus)?;
        worst = worst.max(rep.max_abs_error);
        n = rep.n;
        rows.push(vec![r.to_string(), seed.to_string(), rep.n.to_string(), rep.shrink_factor.to_string(), rep.max_abs_error.to_string()]);
    }
    run.write("shrinkage.csv", &formats::simple_csv(&["replicate", "seed", "n", "shrink_factor", "max_abs_error"], rows))?;
    run.write("shrinkage.json", &formats::to_json(&ShrinkageSummary { replicates, n, max_abs_error: worst }))?;
    Ok(vec![format!("{replicates} corpora of {n} notes: max |fit - closed form| = {worst:e}")])
}

fn attenuation(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let mut rep = attenuation_experiment(&config.dag(), config.attenuation.replicates)?;
    let rows = rep.rows.iter().map(|r| {
        [r.seed as f64, r.coef_y, r.t_y, r.p_y, r.coef_yhat, r.t_yhat, r.p_yhat].iter().map(f64::to_string).collect()
    });
    let csv = formats::simple_csv(&["seed", "coef_y", "t_y", "p_y", "coef_yhat", "t_yhat", "p_yhat"], rows);
    run.write("attenuation.csv", &csv)?;
    rep.rows.clear();
    run.write("attenuation.json", &formats::to_json(&rep))?;
    Ok(vec![format!(
        "{} replicates: reject rate Z~Y {:.3}, Z~Ŷ {:.3} (alpha {})",
        rep.replicates, rep.reject_rate_y, rep.reject_rate_yhat, rep.alpha
    )])
}

// Generation and LLM baselines.

fn heldout_balanced<'a>(notes: &'a [NoteRecord], ds: &BalancedDataset) -> Vec<&'a NoteRecord> {
    notes.iter().filter(|n| ds.split.heldout_note_ids.contains(&n.note_id)).collect()
}

fn generate_compare(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let lm = lm(run)?;
    let model = model(run)?;
    let notes = notes(run)?;
    let encounters = encounters(run)?;
    let ds = dataset(run)?;
    let lex = lexicons(config, run)?;
    let tok = tokenizer(config);
    let complaints: Vec<&str> = model.feature_names.iter().filter_map(|n| n.strip_prefix("cc:")).collect();
    let extractor = FeatureExtractor::new(&lex, &complaints)?.with_tokenizer(tok.clone());
    if extractor.feature_names() != model.feature_names {
        return Err(data("model features do not match the configured lexicons"));
    }
    let anger = lex.get("anger")?.clone();
    let enc: BTreeMap<&str, &Encounter> = encounters.iter().map(|e| (e.note_id.as_str(), e)).collect();
    let selected: Vec<NoteRecord> =
        heldout_balanced(&notes, &ds).into_iter().take(config.generation.max_notes).cloned().collect();
    let scorer = |note: &NoteRecord, text: &str| -> fatlens_core::Result<TextScore> {
        let hpi = note.section(fatlens_core::corpus::HPI_HEADING).map_or("", |s| s.text.as_str());
        let mut replaced = note.clone();
        replaced.text = if hpi.is_empty() { note.text.clone() } else { note.text.replacen(hpi, text, 1) };
        let v = extractor.extract(&replaced, enc.get(note.note_id.as_str()).copied(), &lm)?;
        let tokens = tok.tokenize(text);
        Ok(TextScore {
            fatigue: model.predict_raw(&v.values)?,
            log_perplexity: log_perplexity(&lm, &tokens)?,
            frac_anger: anger.fraction(&tokens.to_vec()),
        })
    };
    let cmp = compare_generated_vs_original(&lm, &selected, &tok, &scorer, &config.generation_config())?;
    let opt = |s: Option<TextScore>| match s {
        Some(s) => [s.fatigue, s.log_perplexity, s.frac_anger].map(|v| v.to_string()).to_vec(),
        None => vec![String::new(); 3],
    };
    let rows = cmp.rows.iter().map(|r| {
        let mut row = vec![r.note_id.clone()];
        row.extend(opt(Some(r.original)));
        row.extend(opt(r.greedy));
        row.extend(opt(r.sampled));
        row.extend([r.original_tokens, r.greedy_tokens, r.sampled_tokens].map(|v| v.to_string()));
        row.push(r.flagged.to_string());
        row
    });
    let header = [
        "note_id",
        "original_fatigue",
        "original_log_perplexity",
        "original_frac_anger",
        "greedy_fatigue",
        "greedy_log_perplexity",
        "greedy_frac_anger",
        "sampled_fatigue",
        "sampled_log_perplexity",
        "sampled_frac_anger",
        "original_tokens",
        "greedy_tokens",
        "sampled_tokens",
        "flagged",
    ];
    run.write("generation.csv", &formats::simple_csv(&header, rows))?;
    let summary = cmp.summary.iter().map(|s| {
        vec![
            s.variant.clone(),
            s.n.to_string(),
            s.mean_fatigue.to_string(),
            s.deviation_from_mean.to_string(),
            s.mean_log_perplexity.to_string(),
            s.mean_frac_anger.to_string(),
        ]
    });
    let sh = ["variant", "n", "mean_fatigue", "deviation_from_mean", "mean_log_perplexity", "mean_frac_anger"];
    run.write("generation_summary.csv", &formats::simple_csv(&sh, summary))?;
    let mut out = vec![format!(
        "{} notes compared, {} without an HPI section, {} flagged",
        cmp.rows.len(),
        cmp.skipped_without_hpi,
        cmp.flagged
    )];
    for s in &cmp.summary {
        out.push(format!(
            "{:<8} fatigue {:.4} ({:+.1}% vs pooled)  log2 perplexity {:.4}  anger {:.4}",
            s.variant,
            s.mean_fatigue,
            100.0 * s.deviation_from_mean,
            s.mean_log_perplexity,
            s.mean_frac_anger
        ));
    }
    Ok(out)
}

/// Held-out (high, low) note pairs with the same primary complaint, in a
/// seeded order.
fn note_pairs(notes: &[NoteRecord], encounters: &[Encounter], ds: &BalancedDataset, limit: usize, seed: u64) -> Vec<(String, String, String, String)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let enc: BTreeMap<&str, &Encounter> = encounters.iter().map(|e| (e.note_id.as_str(), e)).collect();
    let mut pools: BTreeMap<&str, (Vec<&NoteRecord>, Vec<&NoteRecord>)> = BTreeMap::new();
    for n in heldout_balanced(notes, ds) {
        let Some(e) = enc.get(n.note_id.as_str()) else { continue };
        let entry = pools.entry(e.primary_complaint()).or_default();
        match ds.is_high(&n.note_id) {
            Some(true) => entry.0.push(n),
            Some(false) => entry.1.push(n),
            None => {}
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for (high, low) in pools.values_mut() {
        high.shuffle(&mut rng);
        low.shuffle(&mut rng);
        pairs.extend(high.iter().zip(low.iter()).map(|(h, l)| (h.note_id.clone(), l.note_id.clone(), h.text.clone(), l.text.clone())));
    }
    pairs.shuffle(&mut rng);
    pairs.truncate(limit);
    pairs
}

fn llm_baseline(config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let mut chat = HttpChat::new(&config.llm)?;
    let notes = notes(run)?;
    let encounters = encounters(run)?;
    let ds = dataset(run)?;
    let pairs = note_pairs(&notes, &encounters, &ds, config.llm.pairs, config.seed);
    let texts: Vec<(String, String)> = pairs.iter().map(|p| (p.2.clone(), p.3.clone())).collect();
    let report = llm_pairwise_baseline(&texts, &mut chat, config.seed)?;
    let rows = report.outcomes.iter().zip(&pairs).map(|(o, p)| {
        vec![
            o.pair.to_string(),
            p.0.clone(),
            p.1.clone(),
            o.fatigued_first.to_string(),
            o.choice.map(|c| c.to_string()).unwrap_or_default(),
            formats::fmt_opt(o.score),
            o.reply.clone().unwrap_or_default(),
            o.error.clone().unwrap_or_default(),
        ]
    });
    let header = ["pair", "fatigued_note", "rested_note", "fatigued_first", "choice", "score", "reply", "error"];
    run.write("llm_pairs.csv", &formats::simple_csv(&header, rows))?;
    let summary = report.summary();
    let mut slim = report;
    slim.outcomes.clear();
    run.write("llm_baseline.json", &formats::to_json(&slim))?;
    Ok(vec![summary])
}

// Report.

fn report_stage(_config: &RunConfig, run: &mut StageRun) -> Result<Output> {
    let validate = run.require("validate", "validate.csv")?;
    let curve = run.require("validate", "arrival_curve.csv")?;
    let fit = run.require("validate", "arrival_fit.csv")?;
    let yield_csv = run.require("yield", "yield.csv")?;
    let disparity = run.require("disparity", "disparity.csv")?;
    let corr = run.require("correlations", "correlations.csv")?;

    let mut text = String::new();
    text.push_str(&report::regression_table("Table 1. Fatigue measures and predicted fatigue", &formats::read_regressions(&validate)?));
    text.push('\n');
    text.push_str(&report::regression_table("Table 2. Yield of testing", &formats::read_regressions(&yield_csv)?));
    text.push('\n');
    text.push_str(&report::regression_table(
        "Table 3. Patient demographics, workload and predicted fatigue",
        &formats::read_regressions(&disparity)?,
    ));
    text.push('\n');
    let corr_rows: Vec<Vec<String>> = formats::read_correlations(&corr)?
        .into_iter()
        .map(|(f, r, _, stars)| vec![f, r.map(|v| format!("{v:.4}{stars}")).unwrap_or_else(|| "constant".into())])
        .collect();
    text.push_str("Table 4. Feature correlations with high workload\n");
    text.push_str(&report::aligned(&["feature".into(), "r".into()], &corr_rows));

    let points = formats::read_simple_csv(&curve, &ARRIVAL_HEADER)?;
    let num = |s: &str, p: &Path| s.parse::<f64>().map_err(|e| data(format!("{}: `{s}`: {e}", p.display())));
    let mut means = Vec::new();
    let mut lines: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &points {
        let h = num(&r[0], &curve)?;
        means.push((h, num(&r[1], &curve)?));
        if !r[4].is_empty() {
            lines.entry(r[3].clone()).or_default().push((h, num(&r[4], &curve)?));
        }
    }
    let mut series = vec![Series { label: "mean by hour".into(), points: means, mark: Mark::Points, color: "#333333" }];
    for (seg, pts) in lines {
        let color = if seg == "overnight" { "#c0392b" } else { "#2471a3" };
        series.push(Series { label: format!("{seg} fit"), points: pts, mark: Mark::Line, color });
    }
    let svg = report::svg_plot("Predicted fatigue by patient arrival time", "Arrival hour", "Predicted fatigue (SD)", &series);
    text.push_str("\nFigure 1. Predicted fatigue by arrival hour (fig1.svg)\n");
    for r in formats::read_simple_csv(&fit, &ARRIVAL_FIT_HEADER)? {
        if !r[1].is_empty() {
            text.push_str(&format!("{}: slope {:.4} (se {:.4}) over {} hours\n", r[0], num(&r[1], &fit)?, num(&r[2], &fit)?, r[4]));
        }
    }
    run.write("report.txt", text.as_bytes())?;
    run.write("fig1.svg", svg.as_bytes())?;
    Ok(text.lines().map(String::from).collect())
}
