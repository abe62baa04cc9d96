use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lexicon::{Lexicon, LexiconMatcher, LexiconSet};
use super::readability::fk_grade;
use super::tokenize::{Tokenized, Tokenizer};
use crate::corpus::{Encounter, NoteRecord};
use crate::{Error, Result};

/// Number of text-derived features ahead of the complaint dummies.
pub const N_TEXT_FEATURES: usize = 27;

/// Fixed feature order; complaint dummies follow as `cc:<complaint>`.
pub const TEXT_FEATURES: [&str; N_TEXT_FEATURES] = [
    "note_length",
    "log_perplexity",
    "frac_stopwords",
    "frac_medical",
    "frac_pronoun",
    "frac_fps",
    "frac_fpp",
    "frac_sp",
    "frac_tps",
    "frac_tpp",
    "frac_impersonal",
    "frac_affect",
    "frac_posemo",
    "frac_negemo",
    "frac_anxiety",
    "frac_anger",
    "frac_sadness",
    "frac_cog",
    "frac_insight",
    "frac_causation",
    "frac_discrepancy",
    "frac_tentative",
    "frac_certainty",
    "frac_inhibition",
    "frac_inclusive",
    "frac_exclusive",
    "fk_grade",
];

/// Lexicon category behind each `frac_*` feature, in feature order.
pub const LEXICON_CATEGORIES: [(&str, &str); 24] = [
    ("frac_stopwords", "stopwords"),
    ("frac_medical", "medical"),
    ("frac_pronoun", "pronoun"),
    ("frac_fps", "first_person_singular"),
    ("frac_fpp", "first_person_plural"),
    ("frac_sp", "second_person"),
    ("frac_tps", "third_person_singular"),
    ("frac_tpp", "third_person_plural"),
    ("frac_impersonal", "impersonal"),
    ("frac_affect", "affect"),
    ("frac_posemo", "posemo"),
    ("frac_negemo", "negemo"),
    ("frac_anxiety", "anxiety"),
    ("frac_anger", "anger"),
    ("frac_sadness", "sadness"),
    ("frac_cog", "cogproc"),
    ("frac_insight", "insight"),
    ("frac_causation", "causation"),
    ("frac_discrepancy", "discrepancy"),
    ("frac_tentative", "tentative"),
    ("frac_certainty", "certainty"),
    ("frac_inhibition", "inhibition"),
    ("frac_inclusive", "inclusive"),
    ("frac_exclusive", "exclusive"),
];

/// Column index of a text feature by name.
pub fn feature_index(name: &str) -> Option<usize> {
    TEXT_FEATURES.iter().position(|f| *f == name)
}

/// Source of the per-note log2 perplexity.
pub trait PerplexityProvider {
    fn log_perplexity(&self, note_id: &str, text: &Tokenized) -> Result<f64>;
}

impl<P: PerplexityProvider + ?Sized> PerplexityProvider for &P {
    fn log_perplexity(&self, note_id: &str, text: &Tokenized) -> Result<f64> {
        (**self).log_perplexity(note_id, text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub note_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).and_then(|i| self.values.get(i).copied())
    }
}

/// Computes [`FeatureVector`]s with a fixed lexicon set and complaint
/// vocabulary.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    tokenizer: Tokenizer,
    lexicons: LexiconMatcher,
    complaints: Vec<String>,
}

impl FeatureExtractor {
    /// Fails with [`Error::MissingLexicon`] naming the first absent category.
    pub fn new<S: AsRef<str>>(lexicons: &LexiconSet, complaint_vocabulary: impl IntoIterator<Item = S>) -> Result<Self> {
        let lexicons: Vec<Lexicon> =
            LEXICON_CATEGORIES.iter().map(|(_, cat)| lexicons.get(cat).cloned()).collect::<Result<_>>()?;
        let lexicons = LexiconMatcher::new(&lexicons)?;
        let mut complaints: Vec<String> = complaint_vocabulary.into_iter().map(|c| c.as_ref().to_string()).collect();
        complaints.sort();
        complaints.dedup();
        Ok(Self { tokenizer: Tokenizer::default(), lexicons, complaints })
    }

    pub fn with_tokenizer(mut self, tokenizer: Tokenizer) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn complaints(&self) -> &[String] {
        &self.complaints
    }

    pub fn dimension(&self) -> usize {
        N_TEXT_FEATURES + self.complaints.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        TEXT_FEATURES
            .iter()
            .map(|s| s.to_string())
            .chain(self.complaints.iter().map(|c| format!("cc:{c}")))
            .collect()
    }

    /// Text features only; `log_perplexity` comes from `perplexity`.
    pub fn text_features(&self, note_id: &str, text: &str, perplexity: &impl PerplexityProvider) -> Result<Vec<f64>> {
        let tokenized = self.tokenizer.tokenize(text);
        let tokens = tokenized.to_vec();
        if tokens.is_empty() {
            return Err(Error::InvalidInput(format!("note `{note_id}` has no words")));
        }
        let log_ppl = perplexity.log_perplexity(note_id, &tokenized)?;
        if !log_ppl.is_finite() {
            return Err(Error::NonFinite("log perplexity"));
        }
        let mut values = Vec::with_capacity(N_TEXT_FEATURES);
        values.push(tokens.len() as f64);
        values.push(log_ppl);
        values.extend(self.lexicons.fractions(&tokens));
        values.push(fk_grade(&tokens, tokenized.sentence_count).grade);
        Ok(values)
    }

    pub fn extract(
        &self,
        note: &NoteRecord,
        encounter: Option<&Encounter>,
        perplexity: &impl PerplexityProvider,
    ) -> Result<FeatureVector> {
        let mut values = self.text_features(&note.note_id, &note.text, perplexity)?;
        values.extend(self.complaints.iter().map(|c| {
            let has = encounter.is_some_and(|e| e.chief_complaints.iter().any(|x| x == c));
            if has {
                1.0
            } else {
                0.0
            }
        }));
        Ok(FeatureVector { note_id: note.note_id.clone(), values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    struct Fixed(f64);

    impl PerplexityProvider for Fixed {
        fn log_perplexity(&self, _: &str, _: &Tokenized) -> Result<f64> {
            Ok(self.0)
        }
    }

    fn note(text: &str) -> NoteRecord {
        NoteRecord {
            note_id: "n1".into(),
            physician_id: "p".into(),
            patient_id: "x".into(),
            timestamp: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            text: text.into(),
            sections: Vec::new(),
        }
    }

    #[test]
    fn names_are_in_fixed_order() {
        let ex = FeatureExtractor::new(&LexiconSet::bundled(), ["chest pain", "abdominal pain"]).unwrap();
        let names = ex.feature_names();
        assert_eq!(names.len(), 29);
        assert_eq!(names[0], "note_length");
        assert_eq!(names[26], "fk_grade");
        assert_eq!(names[27], "cc:abdominal pain");
        for (i, (f, _)) in LEXICON_CATEGORIES.iter().enumerate() {
            assert_eq!(TEXT_FEATURES[i + 2], *f);
        }
    }

    #[test]
    fn missing_category_named() {
        let set = LexiconSet::parse("#category stopwords\nthe\n").unwrap();
        assert_eq!(FeatureExtractor::new(&set, [""; 0]).unwrap_err(), Error::MissingLexicon("medical".into()));
    }

    #[test]
    fn no_hits_gives_zero_fractions() {
        let mut set = LexiconSet::default();
        for (_, cat) in LEXICON_CATEGORIES {
            set.insert(Lexicon::new(cat, ["zzzz"]).unwrap()).unwrap();
        }
        let ex = FeatureExtractor::new(&set, [""; 0]).unwrap();
        let v = ex.extract(&note("The cat sat."), None, &Fixed(1.5)).unwrap();
        assert_eq!(v.get("note_length"), Some(3.0));
        assert_eq!(v.get("log_perplexity"), Some(1.5));
        assert!(v.values[2..26].iter().all(|&f| f == 0.0));
        assert!((v.get("fk_grade").unwrap() + 2.62).abs() < 1e-12);
    }

    #[test]
    fn dummies_follow_encounter() {
        let ex = FeatureExtractor::new(&LexiconSet::bundled(), ["a", "b", "c"]).unwrap();
        let enc = Encounter {
            note_id: "n1".into(),
            age: 40,
            sex: crate::corpus::Sex::Male,
            race: crate::corpus::Race::White,
            primary_language: None,
            chief_complaints: alloc::vec!["c".into(), "a".into()],
            arrival_time: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            tested: false,
            test_positive: false,
        };
        let n = note("I think he is fine.");
        let v = ex.extract(&n, Some(&enc), &Fixed(0.0)).unwrap();
        assert_eq!(&v.values[27..], &[1.0, 0.0, 1.0]);
        assert_eq!(v, ex.extract(&n, Some(&enc), &Fixed(0.0)).unwrap());
    }

    #[test]
    fn wordless_note_rejected() {
        let ex = FeatureExtractor::new(&LexiconSet::bundled(), [""; 0]).unwrap();
        assert!(ex.extract(&note("12 34."), None, &Fixed(0.0)).is_err());
    }
}
