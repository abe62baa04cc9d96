//! Tokenization, lexicon fractions, readability and the note feature vector.

mod features;
mod lexicon;
mod readability;
mod standardize;
mod tokenize;

pub use features::{
    feature_index, FeatureExtractor, FeatureVector, PerplexityProvider, LEXICON_CATEGORIES, N_TEXT_FEATURES,
    TEXT_FEATURES,
};
pub use lexicon::{lexicon_fraction, Lexicon, LexiconMatcher, LexiconSet, BUNDLED_LEXICON};
pub use readability::{count_syllables, fk_from_counts, fk_grade, FkGrade};
pub use standardize::Standardizer;
pub use tokenize::{tokenize, Tokenized, Tokenizer, DEFAULT_ABBREVIATIONS};
