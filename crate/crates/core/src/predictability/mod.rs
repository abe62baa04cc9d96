//! Word n-gram language model for note predictability and text generation.

mod generate;
mod ngram;
mod provider;

pub use generate::{
    compare_generated_vs_original, generate, generate_passage, generate_with, render_sentences, DecodeMode,
    GenerationComparison, GenerationConfig, GenerationRow, HpiScorer, TextScore, VariantSummary,
};
pub use ngram::{
    log_perplexity, sentences_log_perplexity, train_lm, LanguageModel, LmConfig, LmFile, NgramLM, BOS, EOS, LM_FORMAT,
    UNK,
};
pub use provider::{CrossFitLm, PerplexitySource, TrainNote};
