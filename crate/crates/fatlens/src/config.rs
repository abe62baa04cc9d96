//! Run configuration: TOML file, then `FATLENS_*` environment variables,
//! then `--set key=value` flags, each layer overriding the previous one.
//! Unknown keys are rejected at every layer.

use std::path::{Path, PathBuf};

use chrono::Duration;
use chrono_tz::Tz;
use fatlens_core::corpus::{BalanceConfig, SegmentConfig, WorkloadThresholds, HPI_HEADING};
use fatlens_core::econometrics::Orientation;
use fatlens_core::mlcore::{EvalConfig, DEFAULT_LAMBDA_GRID};
use fatlens_core::predictability::{GenerationConfig, LmConfig};
use fatlens_core::synthlab::{DagConfig, PLAN_HEADING};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const ENV_PREFIX: &str = "FATLENS_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds every random step: balancing split, CV folds, bootstrap,
    /// simulation, generation and LLM pair order.
    pub seed: u64,
    /// IANA zone for calendar days, hours and time controls.
    pub timezone: String,
    pub out_dir: PathBuf,
    pub ingest: IngestSection,
    pub segment: SegmentSection,
    pub label: LabelSection,
    pub dataset: DatasetSection,
    pub features: FeatureSection,
    pub lm: LmSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
    pub analysis: AnalysisSection,
    pub simulate: SimulateSection,
    /// Simulator parameters. Its `seed` is replaced by the top-level seed.
    pub dag: DagConfig,
    pub shrinkage: ShrinkageSection,
    pub attenuation: AttenuationSection,
    pub generation: GenerationSection,
    pub llm: LlmSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            timezone: "UTC".into(),
            out_dir: PathBuf::from("fatlens-out"),
            ingest: IngestSection::default(),
            segment: SegmentSection::default(),
            label: LabelSection::default(),
            dataset: DatasetSection::default(),
            features: FeatureSection::default(),
            lm: LmSection::default(),
            train: TrainSection::default(),
            evaluate: EvaluateSection::default(),
            analysis: AnalysisSection::default(),
            simulate: SimulateSection::default(),
            dag: DagConfig::default(),
            shrinkage: ShrinkageSection::default(),
            attenuation: AttenuationSection::default(),
            generation: GenerationSection::default(),
            llm: LlmSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// By file extension: `.csv` is CSV, anything else JSONL.
    #[default]
    Auto,
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    /// Regexes; leading and trailing lines matching any are stripped.
    pub boilerplate_patterns: Vec<String>,
    pub section_headings: Vec<String>,
    /// One complaint per line. When set, other complaints are rejected.
    pub complaint_vocabulary: Option<PathBuf>,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            input: None,
            format: InputFormat::Auto,
            boilerplate_patterns: vec![
                r"(?i)^\s*electronically signed by\b".into(),
                r"(?i)^\s*this note was (generated|created)\b".into(),
                r"(?i)^\s*(cc|attestation):\s*$".into(),
            ],
            section_headings: vec![
                "Chief Complaint".into(),
                HPI_HEADING.into(),
                "Review of Systems".into(),
                "Physical Exam".into(),
                PLAN_HEADING.into(),
                "Medical Decision Making".into(),
            ],
            complaint_vocabulary: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSection {
    pub max_gap_minutes: i64,
    pub min_rest_minutes: i64,
}

impl Default for SegmentSection {
    fn default() -> Self {
        Self { max_gap_minutes: 180, min_rest_minutes: 900 }
    }
}

impl SegmentSection {
    pub fn to_core(self) -> SegmentConfig {
        SegmentConfig {
            max_gap: Duration::minutes(self.max_gap_minutes),
            min_rest: Duration::minutes(self.min_rest_minutes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    pub high_min_prior: u8,
    pub low_max_prior: u8,
}

impl Default for LabelSection {
    fn default() -> Self {
        let t = WorkloadThresholds::default();
        Self { high_min_prior: t.high_min_prior, low_max_prior: t.low_max_prior }
    }
}

impl LabelSection {
    pub fn to_core(self) -> WorkloadThresholds {
        WorkloadThresholds { high_min_prior: self.high_min_prior, low_max_prior: self.low_max_prior }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub train_fraction: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { train_fraction: BalanceConfig::default().train_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    /// Lexicon file; the bundled open test lexicon when unset.
    pub lexicon: Option<PathBuf>,
    /// CSV `note_id,log2_perplexity` replacing the built-in language model.
    pub perplexity_file: Option<PathBuf>,
    /// Abbreviations that do not end a sentence; built-in list when unset.
    pub abbreviations: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmSection {
    pub order: usize,
    pub discount: f64,
    pub min_count: u64,
    pub sentence_end: bool,
    /// Training notes are scored by models fit to the other folds; 0 scores
    /// them in-sample.
    pub crossfit_folds: usize,
}

impl Default for LmSection {
    fn default() -> Self {
        let c = LmConfig::default();
        Self { order: c.order, discount: c.discount, min_count: c.min_count, sentence_end: c.sentence_end, crossfit_folds: 5 }
    }
}

impl LmSection {
    pub fn to_core(self) -> LmConfig {
        LmConfig { order: self.order, discount: self.discount, min_count: self.min_count, sentence_end: self.sentence_end }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(), cv_folds: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub bootstrap_replicates: usize,
    pub level: f64,
    pub threshold: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        let c = EvalConfig::default();
        Self { bootstrap_replicates: c.replicates, level: c.level, threshold: c.threshold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteSet {
    /// Every note of a held-out patient, whatever its workload class.
    #[default]
    Heldout,
    /// Notes in the classifier's training set.
    Train,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub orientation: Orientation,
    /// Notes whose probabilities set the mean and SD of the fatigue score.
    pub reference: NoteSet,
    /// Notes entering the regressions.
    pub notes: NoteSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    #[default]
    Text,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub kind: SimKind,
    /// Strength of the fatigue-dependent writing style in text corpora.
    pub contrast: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { kind: SimKind::Text, contrast: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkageSection {
    pub replicates: usize,
}

impl Default for ShrinkageSection {
    fn default() -> Self {
        Self { replicates: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttenuationSection {
    pub replicates: usize,
}

impl Default for AttenuationSection {
    fn default() -> Self {
        Self { replicates: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    /// Held-out notes regenerated, in note-id order.
    pub max_notes: usize,
    pub max_sentence_tokens: usize,
    pub max_sentences: usize,
}

impl Default for GenerationSection {
    fn default() -> Self {
        let c = GenerationConfig::default();
        Self { max_notes: 200, max_sentence_tokens: c.max_sentence_tokens, max_sentences: c.max_sentences }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    /// Chat-completions URL.
    pub endpoint: Option<String>,
    pub model: String,
    /// Environment variable holding a bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    /// Extra attempts after a failed request.
    pub retries: u32,
    pub pairs: usize,
}

impl Default for LlmSection {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: "gpt-4".into(),
            api_key_env: None,
            timeout_secs: 60,
            retries: 2,
            pairs: 100,
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value, origin: &str) -> Result<()> {
    let (last, parents) = path.split_last().ok_or_else(|| CliError::Config(format!("{origin}: empty key")))?;
    let mut table = root;
    for p in parents {
        let entry = table.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("{origin}: `{p}` is not a table")))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Layers the optional file, `FATLENS_*` variables from `env`
    /// (`FATLENS_LM__ORDER=4` sets `lm.order`) and `key.path=value`
    /// overrides. Values are read as TOML, falling back to plain strings.
    pub fn load(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[String],
    ) -> Result<Self> {
        let mut root = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        let mut env: Vec<(String, String)> =
            env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        env.sort();
        for (key, raw) in env {
            let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
            set_path(&mut root, &path, parse_value(&raw), &key)?;
        }
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
            let path: Vec<String> = key.trim().split('.').map(String::from).collect();
            set_path(&mut root, &path, parse_value(raw.trim()), o)?;
        }
        let config: RunConfig =
            RunConfig::deserialize(toml::Value::Table(root)).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.clock()?;
        for p in &self.ingest.boilerplate_patterns {
            regex::Regex::new(p).map_err(|e| CliError::Config(format!("boilerplate pattern `{p}`: {e}")))?;
        }
        if self.segment.max_gap_minutes <= 0 {
            return Err(CliError::Config("segment.max_gap_minutes must be positive".into()));
        }
        if self.train.lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || self.train.lambda_grid.is_empty() {
            return Err(CliError::Config("train.lambda_grid needs finite non-negative values".into()));
        }
        if self.train.cv_folds < 2 {
            return Err(CliError::Config("train.cv_folds must be at least 2".into()));
        }
        if self.lm.crossfit_folds == 1 {
            return Err(CliError::Config("lm.crossfit_folds must be 0 or at least 2".into()));
        }
        if !(0.0 < self.evaluate.level && self.evaluate.level < 1.0) {
            return Err(CliError::Config("evaluate.level must be in (0, 1)".into()));
        }
        self.lm.to_core().validate()?;
        self.dag.validate()?;
        Ok(())
    }

    pub fn clock(&self) -> Result<Tz> {
        self.timezone.parse::<Tz>().map_err(|e| CliError::Config(format!("timezone `{}`: {e}", self.timezone)))
    }

    /// Makes every path absolute against the working directory, so the
    /// snapshot in a manifest can be replayed from anywhere.
    pub fn absolutize(&mut self) -> Result<()> {
        let abs = |p: &mut PathBuf| -> Result<()> {
            *p = std::path::absolute(&*p).map_err(CliError::io(p))?;
            Ok(())
        };
        abs(&mut self.out_dir)?;
        for p in [&mut self.ingest.input, &mut self.ingest.complaint_vocabulary, &mut self.features.lexicon, &mut self.features.perplexity_file]
            .into_iter()
            .flatten()
        {
            abs(p)?;
        }
        Ok(())
    }

    pub fn dag(&self) -> DagConfig {
        DagConfig { seed: self.seed, ..self.dag.clone() }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            replicates: self.evaluate.bootstrap_replicates,
            level: self.evaluate.level,
            seed: self.seed,
            threshold: self.evaluate.threshold,
        }
    }

    pub fn generation_config(&self) -> GenerationConfig {
        GenerationConfig {
            seed: self.seed,
            max_sentence_tokens: self.generation.max_sentence_tokens,
            max_sentences: self.generation.max_sentences,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn layers_override_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 3\n[lm]\norder = 2\n").unwrap();
        let c = RunConfig::load(Some(&path), env(&[("FATLENS_LM__ORDER", "4"), ("HOME", "/x")]), &[]).unwrap();
        assert_eq!((c.seed, c.lm.order), (3, 4));
        let c = RunConfig::load(Some(&path), env(&[("FATLENS_LM__ORDER", "4")]), &["lm.order=5".into()]).unwrap();
        assert_eq!(c.lm.order, 5);
        let c = RunConfig::load(None, env(&[("FATLENS_TIMEZONE", "America/New_York")]), &[]).unwrap();
        assert_eq!(c.timezone, "America/New_York");
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        for (e, o) in [
            (env(&[("FATLENS_NOPE", "1")]), vec![]),
            (env(&[]), vec!["lm.ordr=2".to_string()]),
            (env(&[]), vec!["timezone=Mars/Base".to_string()]),
            (env(&[]), vec!["lm.order=0".to_string()]),
            (env(&[]), vec!["seed".to_string()]),
        ] {
            let err = RunConfig::load(None, e, &o).unwrap_err();
            assert_eq!(err.exit_code(), crate::error::exit::CONFIG, "{err}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = [").unwrap();
        assert_eq!(RunConfig::load(Some(&path), env(&[]), &[]).unwrap_err().exit_code(), 3);
    }
}
