use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ngram::{NgramLM, EOS};
use crate::corpus::{NoteRecord, HPI_HEADING};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Greedy,
    Sampled,
}

/// Continues a sentence after `prompt` until `</s>` or `max_tokens` words.
/// Greedy decoding breaks probability ties by the lexicographically first
/// symbol.
pub fn generate_with<R: Rng + ?Sized>(
    lm: &NgramLM,
    prompt: &[&str],
    mode: DecodeMode,
    max_tokens: usize,
    rng: &mut R,
) -> Vec<String> {
    let mut history: Vec<u32> = lm.history_ids(prompt);
    let mut out = Vec::new();
    while out.len() < max_tokens {
        let dist = lm.distribution(&history);
        let next = match mode {
            DecodeMode::Greedy => {
                let mut best = 1usize;
                for i in 2..dist.len() {
                    let better = dist[i] > dist[best]
                        || (dist[i] == dist[best] && lm.word(i as u32) < lm.word(best as u32));
                    if better {
                        best = i;
                    }
                }
                best
            }
            DecodeMode::Sampled => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = dist.len() - 1;
                for (i, p) in dist.iter().enumerate().skip(1) {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                pick
            }
        };
        let word = lm.word(next as u32);
        if word == EOS {
            break;
        }
        out.push(word.to_string());
        if !history.is_empty() {
            history.remove(0);
            history.push(next as u32);
        }
    }
    out
}

/// [`generate_with`] using a ChaCha8 generator seeded with `seed`.
pub fn generate(lm: &NgramLM, prompt: &[&str], mode: DecodeMode, max_tokens: usize, seed: u64) -> Vec<String> {
    generate_with(lm, prompt, mode, max_tokens, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub seed: u64,
    pub max_sentence_tokens: usize,
    pub max_sentences: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { seed: 0, max_sentence_tokens: 60, max_sentences: 100 }
    }
}

/// Generates whole sentences until at least `target_tokens` words exist.
/// Empty sentences are dropped; greedy decoding stops after one since it
/// would repeat.
pub fn generate_passage<R: Rng + ?Sized>(
    lm: &NgramLM,
    target_tokens: usize,
    mode: DecodeMode,
    config: &GenerationConfig,
    rng: &mut R,
) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut words = 0;
    for _ in 0..config.max_sentences {
        if words >= target_tokens {
            break;
        }
        let s = generate_with(lm, &[], mode, config.max_sentence_tokens, rng);
        if s.is_empty() {
            if mode == DecodeMode::Greedy {
                break;
            }
            continue;
        }
        words += s.len();
        sentences.push(s);
    }
    sentences
}

/// Renders sentences as plain text that tokenizes back to the same words.
pub fn render_sentences(sentences: &[Vec<String>]) -> String {
    let mut out = String::new();
    for s in sentences {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&s.join(" "));
        out.push('.');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextScore {
    /// Predicted probability of high workload.
    pub fatigue: f64,
    pub log_perplexity: f64,
    pub frac_anger: f64,
}

/// Scores a replacement HPI text in the context of its note.
pub trait HpiScorer {
    fn score(&self, note: &NoteRecord, text: &str) -> Result<TextScore>;
}

impl<F: Fn(&NoteRecord, &str) -> Result<TextScore>> HpiScorer for F {
    fn score(&self, note: &NoteRecord, text: &str) -> Result<TextScore> {
        self(note, text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub note_id: String,
    pub original: TextScore,
    pub greedy: Option<TextScore>,
    pub sampled: Option<TextScore>,
    pub original_tokens: usize,
    pub greedy_tokens: usize,
    pub sampled_tokens: usize,
    /// A decoder produced no words; the row is left out of the summary.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub n: usize,
    pub mean_fatigue: f64,
    /// `mean_fatigue` relative to the pooled mean over all three variants,
    /// minus one (0.08 means 8% above).
    pub deviation_from_mean: f64,
    pub mean_log_perplexity: f64,
    pub mean_frac_anger: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationComparison {
    pub rows: Vec<GenerationRow>,
    pub skipped_without_hpi: usize,
    pub flagged: usize,
    /// Greedy, sampled, original.
    pub summary: Vec<VariantSummary>,
}

/// For each note with an HPI section, regenerates the section greedily and
/// by sampling (as many words as the original, whole sentences) and scores
/// original and generated text with `scorer`.
pub fn compare_generated_vs_original(
    lm: &NgramLM,
    notes: &[NoteRecord],
    tokenizer: &crate::textfeat::Tokenizer,
    scorer: &impl HpiScorer,
    config: &GenerationConfig,
) -> Result<GenerationComparison> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::new();
    let mut skipped = 0;
    for note in notes {
        let Some(hpi) = note.section(HPI_HEADING) else {
            skipped += 1;
            continue;
        };
        let original_tokens = tokenizer.tokenize(&hpi.text).len();
        if original_tokens == 0 {
            skipped += 1;
            continue;
        }
        let original = scorer.score(note, &hpi.text)?;
        let mut variant = |mode| -> Result<(Option<TextScore>, usize)> {
            let sentences = generate_passage(lm, original_tokens, mode, config, &mut rng);
            let n: usize = sentences.iter().map(Vec::len).sum();
            if n == 0 {
                return Ok((None, 0));
            }
            Ok((Some(scorer.score(note, &render_sentences(&sentences))?), n))
        };
        let (greedy, greedy_tokens) = variant(DecodeMode::Greedy)?;
        let (sampled, sampled_tokens) = variant(DecodeMode::Sampled)?;
        rows.push(GenerationRow {
            note_id: note.note_id.clone(),
            original,
            flagged: greedy.is_none() || sampled.is_none(),
            greedy,
            sampled,
            original_tokens,
            greedy_tokens,
            sampled_tokens,
        });
    }
    let kept: Vec<&GenerationRow> = rows.iter().filter(|r| !r.flagged).collect();
    let pick: [(&str, fn(&GenerationRow) -> TextScore); 3] = [
        ("greedy", |r| r.greedy.unwrap()),
        ("sampled", |r| r.sampled.unwrap()),
        ("original", |r| r.original),
    ];
    let n = kept.len();
    let mean = |f: &dyn Fn(&GenerationRow) -> f64| kept.iter().map(|r| f(r)).sum::<f64>() / n as f64;
    let means: Vec<f64> = pick.iter().map(|(_, g)| mean(&|r| g(r).fatigue)).collect();
    let pooled = means.iter().sum::<f64>() / 3.0;
    let summary = pick
        .iter()
        .zip(&means)
        .map(|((label, g), m)| VariantSummary {
            variant: label.to_string(),
            n,
            mean_fatigue: *m,
            deviation_from_mean: m / pooled - 1.0,
            mean_log_perplexity: mean(&|r| g(r).log_perplexity),
            mean_frac_anger: mean(&|r| g(r).frac_anger),
        })
        .collect();
    let flagged = rows.len() - n;
    Ok(GenerationComparison { rows, skipped_without_hpi: skipped, flagged, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictability::{LmConfig, NgramLM};
    use crate::textfeat::Tokenizer;
    use alloc::vec;
    use chrono::{TimeZone, Utc};

    fn lm(corpus: &[&str], order: usize) -> NgramLM {
        let sents: Vec<Vec<&str>> = corpus.iter().map(|s| s.split_whitespace().collect()).collect();
        NgramLM::train(sents.iter().map(|s| s.iter().copied()), LmConfig { order, discount: 0.5, min_count: 1, sentence_end: true })
            .unwrap()
    }

    #[test]
    fn greedy_follows_counts() {
        let m = lm(&["a b c"; 5], 3);
        assert_eq!(generate(&m, &["a"], DecodeMode::Greedy, 10, 0), ["b", "c"]);
        let m = lm(&["a b c"; 5], 2);
        assert_eq!(generate(&m, &["a"], DecodeMode::Greedy, 10, 0), ["b", "c"]);
        assert_eq!(generate(&m, &["a"], DecodeMode::Greedy, 1, 0), ["b"]);
    }

    #[test]
    fn greedy_ties_go_to_first_word() {
        let m = lm(&["x b", "x a"], 2);
        assert_eq!(generate(&m, &["x"], DecodeMode::Greedy, 1, 0), ["a"]);
    }

    #[test]
    fn sampling_is_seeded() {
        let m = lm(&["a b c", "a c b", "b a", "c c a b"], 2);
        let a = generate(&m, &[], DecodeMode::Sampled, 30, 42);
        assert_eq!(a, generate(&m, &[], DecodeMode::Sampled, 30, 42));
        let runs: Vec<_> = (0..20).map(|s| generate(&m, &[], DecodeMode::Sampled, 30, s)).collect();
        assert!(runs.iter().any(|r| *r != runs[0]));
    }

    fn note(id: &str, hpi: Option<&str>) -> NoteRecord {
        let sections = hpi
            .map(|t| vec![crate::corpus::Section { name: HPI_HEADING.into(), text: t.into() }])
            .unwrap_or_default();
        NoteRecord {
            note_id: id.into(),
            physician_id: "p".into(),
            patient_id: "q".into(),
            timestamp: Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap(),
            text: String::new(),
            sections,
        }
    }

    #[test]
    fn comparison_counts_and_summary() {
        let m = lm(&["pain in chest", "pain in arm", "no fever"], 2);
        let scorer = |_: &NoteRecord, text: &str| -> Result<TextScore> {
            let n = Tokenizer::default().tokenize(text).len() as f64;
            Ok(TextScore { fatigue: 1.0 / n, log_perplexity: 0.0, frac_anger: 0.0 })
        };
        let notes = [note("a", Some("pain in chest")), note("b", None), note("c", Some("12"))];
        let cfg = GenerationConfig { seed: 3, ..GenerationConfig::default() };
        let cmp = compare_generated_vs_original(&m, &notes, &Tokenizer::default(), &scorer, &cfg).unwrap();
        assert_eq!(cmp.skipped_without_hpi, 2);
        assert_eq!(cmp.rows.len(), 1);
        assert_eq!(cmp.rows[0].greedy_tokens, 3);
        let labels: Vec<&str> = cmp.summary.iter().map(|s| s.variant.as_str()).collect();
        assert_eq!(labels, ["greedy", "sampled", "original"]);
        let dev: f64 = cmp.summary.iter().map(|s| s.deviation_from_mean).sum();
        assert!(dev.abs() < 1e-12);
    }

    #[test]
    fn empty_generation_is_flagged() {
        // Every training sentence is empty, so `</s>` always wins.
        let m = NgramLM::train(vec![Vec::<&str>::new(); 3], LmConfig { min_count: 1, ..LmConfig::default() }).unwrap();
        let scorer = |_: &NoteRecord, _: &str| -> Result<TextScore> {
            Ok(TextScore { fatigue: 0.5, log_perplexity: 0.0, frac_anger: 0.0 })
        };
        let cmp = compare_generated_vs_original(
            &m,
            &[note("a", Some("some words here"))],
            &Tokenizer::default(),
            &scorer,
            &GenerationConfig::default(),
        )
        .unwrap();
        assert_eq!(cmp.flagged, 1);
        assert!(cmp.rows[0].greedy.is_none());
        assert_eq!(cmp.summary[0].n, 0);
    }
}
