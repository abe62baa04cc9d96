use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ngram::{log_perplexity, NgramLM};
#[cfg(test)]
use super::ngram::train_lm;
use crate::mlcore::group_folds;
use crate::textfeat::{PerplexityProvider, Tokenized, Tokenizer};
use crate::{Error, Result};

impl PerplexityProvider for NgramLM {
    fn log_perplexity(&self, _note_id: &str, text: &Tokenized) -> Result<f64> {
        log_perplexity(self, text)
    }
}

/// An n-gram model that does not score its own training notes. A model fit
/// to every training note scores all other notes; each training note is
/// scored by a model fit to the remaining folds, with folds that keep a
/// patient's notes together. Otherwise memorized n-grams make training
/// notes look far more predictable than unseen ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitLm {
    pub full: NgramLM,
    pub folds: Vec<NgramLM>,
    fold_of: BTreeMap<String, usize>,
}

/// A training note for [`CrossFitLm::train`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainNote<'a> {
    pub note_id: &'a str,
    pub patient_id: &'a str,
    pub text: &'a str,
}

impl CrossFitLm {
    /// Fits `k` fold models with the configuration of `full`, which should
    /// have been trained on exactly `notes`.
    pub fn train(full: NgramLM, notes: &[TrainNote<'_>], tokenizer: &Tokenizer, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("cross-fitting needs at least 2 folds, got {k}")));
        }
        let patients: Vec<&str> = notes.iter().map(|n| n.patient_id).collect();
        let folds = group_folds(&patients, k, seed);
        let mut fold_of = BTreeMap::new();
        for (n, &f) in notes.iter().zip(&folds) {
            if fold_of.insert(n.note_id.to_string(), f).is_some() {
                return Err(Error::DuplicateNote(n.note_id.to_string()));
            }
        }
        let tokenized: Vec<Tokenized> = notes.iter().map(|n| tokenizer.tokenize(n.text)).collect();
        let models = (0..k)
            .map(|f| {
                let sentences = tokenized
                    .iter()
                    .zip(&folds)
                    .filter(move |(_, &g)| g != f)
                    .flat_map(|(t, _)| t.sentences.iter())
                    .map(|s| s.iter().map(String::as_str));
                NgramLM::train(sentences, *full.config())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { full, folds: models, fold_of })
    }

    /// The model that scores `note_id`.
    pub fn model_for(&self, note_id: &str) -> &NgramLM {
        self.fold_of.get(note_id).map_or(&self.full, |&f| &self.folds[f])
    }
}

impl PerplexityProvider for CrossFitLm {
    fn log_perplexity(&self, note_id: &str, text: &Tokenized) -> Result<f64> {
        log_perplexity(self.model_for(note_id), text)
    }
}

/// Where per-note log2 perplexities come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PerplexitySource {
    Builtin(NgramLM),
    CrossFitted(CrossFitLm),
    /// Precomputed scores keyed by note id, e.g. from a neural model.
    External(BTreeMap<String, f64>),
}

impl PerplexitySource {
    /// Builds an external source, rejecting duplicate ids and non-finite
    /// values.
    pub fn external<S: AsRef<str>>(scores: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (id, v) in scores {
            let id = id.as_ref();
            if !v.is_finite() {
                return Err(Error::NonFinite("external perplexity"));
            }
            if map.insert(id.to_string(), v).is_some() {
                return Err(Error::DuplicateNote(id.to_string()));
            }
        }
        Ok(Self::External(map))
    }
}

impl PerplexityProvider for PerplexitySource {
    fn log_perplexity(&self, note_id: &str, text: &Tokenized) -> Result<f64> {
        match self {
            Self::Builtin(lm) => lm.log_perplexity(note_id, text),
            Self::CrossFitted(lm) => lm.log_perplexity(note_id, text),
            Self::External(map) => map.get(note_id).copied().ok_or_else(|| Error::UnknownNote(note_id.to_string())),
        }
    }
}
