use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{draw_deltas, outcomes, DagConfig, Truth};
use super::schedule::{build_schedule, draw_records, per_record};
use crate::corpus::{split_sections, Encounter, NoteRecord, HPI_HEADING};
use crate::textfeat::{LexiconSet, DEFAULT_ABBREVIATIONS};
use crate::{Error, Result};

/// Heading of the section that follows the HPI in simulated notes.
pub const PLAN_HEADING: &str = "Assessment and Plan";

/// How notes at one fatigue level are written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleProfile {
    /// Filler words are drawn uniformly from the first `neutral_vocab`
    /// entries of a fixed pseudo-word list; fewer means more predictable.
    pub neutral_vocab: usize,
    pub anger_rate: f64,
    pub insight_rate: f64,
    pub stopword_rate: f64,
    /// Mean words per sentence; lengths vary by up to two words.
    pub sentence_length: f64,
    pub note_words: usize,
}

/// Maps true fatigue Y* to a level `round(Y* / level_width)`, clamped to
/// `[min_level, max_level]`, and each level to a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleMap {
    pub level_width: f64,
    pub min_level: i32,
    pub max_level: i32,
    pub profiles: BTreeMap<i32, StyleProfile>,
}

impl StyleMap {
    /// Profiles linear in the level value x around x = 0.5: per unit of x,
    /// filler vocabulary halves every `2/contrast` units, the anger rate
    /// rises by 0.02·contrast, the insight rate falls by 0.015·contrast and
    /// sentences shorten by 1.5·contrast words. `contrast = 0` gives one
    /// profile for every level.
    pub fn linear(contrast: f64) -> Self {
        let (width, min_level, max_level) = (0.25, -20, 24);
        let profiles = (min_level..=max_level)
            .map(|level| {
                let x = f64::from(level) * width - 0.5;
                let c = contrast * x;
                let profile = StyleProfile {
                    neutral_vocab: (160.0 * (-0.5 * c).exp2()).round().clamp(8.0, 2000.0) as usize,
                    anger_rate: (0.05 + 0.02 * c).clamp(0.0, 0.3),
                    insight_rate: (0.05 - 0.015 * c).clamp(0.0, 0.3),
                    stopword_rate: 0.25,
                    sentence_length: (12.0 - 1.5 * c).clamp(4.0, 30.0),
                    note_words: 300,
                };
                (level, profile)
            })
            .collect();
        Self { level_width: width, min_level, max_level, profiles }
    }

    pub fn level_of(&self, y_star: f64) -> i32 {
        let raw = (y_star / self.level_width).round();
        raw.clamp(f64::from(self.min_level), f64::from(self.max_level)) as i32
    }

    pub fn profile(&self, level: i32) -> Result<&StyleProfile> {
        self.profiles.get(&level).ok_or_else(|| Error::Config(format!("style map has no profile for level {level}")))
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// The filler vocabulary: pseudo-words of two or three syllables in a fixed
/// order, skipping anything a lexicon in `lexicons` would match.
pub fn neutral_words(lexicons: &LexiconSet) -> Vec<String> {
    let syllables: Vec<[u8; 2]> =
        CONSONANTS.iter().flat_map(|&c| VOWELS.iter().map(move |&v| [c, v])).collect();
    let mut pairs: Vec<(usize, usize)> =
        (0..syllables.len()).flat_map(|i| (0..syllables.len()).map(move |j| (i, j))).collect();
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (k, (i, j)) in pairs.into_iter().enumerate() {
        let mut w: Vec<u8> = [syllables[i], syllables[j]].concat();
        if k % 3 == 2 {
            w.extend_from_slice(&syllables[(i + j) % syllables.len()]);
        }
        let w = String::from_utf8(w).expect("ascii");
        let hit = lexicons.names().any(|n| lexicons.get(n).is_ok_and(|l| l.matches(&w)));
        if !hit && !DEFAULT_ABBREVIATIONS.contains(&w.as_str()) && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn words_of(lexicons: &LexiconSet, name: &str) -> Result<Vec<String>> {
    let words: Vec<String> = lexicons.get(name)?.entries().map(|e| e.trim_end_matches('*').to_string()).collect();
    if words.is_empty() {
        return Err(Error::Lexicon(format!("category `{name}` is empty")));
    }
    Ok(words)
}

struct Vocab {
    neutral: Vec<String>,
    anger: Vec<String>,
    insight: Vec<String>,
    stop: Vec<String>,
}

fn pick<'a, R: Rng + ?Sized>(words: &'a [String], rng: &mut R) -> &'a str {
    &words[rng.random_range(0..words.len())]
}

fn write_note<R: Rng + ?Sized>(p: &StyleProfile, vocab: &Vocab, rng: &mut R) -> String {
    let k = p.neutral_vocab.clamp(1, vocab.neutral.len());
    let n_sentences = ((p.note_words as f64 / p.sentence_length).round() as usize).max(2);
    let base = p.sentence_length.round() as i64;
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let len = (base + rng.random_range(-2..=2)).max(2) as usize;
        let mut s = String::new();
        for i in 0..len {
            let u: f64 = rng.random();
            let w = if i + 1 == len {
                // Sentences always end on a filler word, never on an
                // abbreviation.
                &vocab.neutral[rng.random_range(0..k)]
            } else if u < p.anger_rate {
                pick(&vocab.anger, rng)
            } else if u < p.anger_rate + p.insight_rate {
                pick(&vocab.insight, rng)
            } else if u < p.anger_rate + p.insight_rate + p.stopword_rate {
                pick(&vocab.stop, rng)
            } else {
                &vocab.neutral[rng.random_range(0..k)]
            };
            if i == 0 {
                let mut cs = w.chars();
                if let Some(c) = cs.next() {
                    s.extend(c.to_uppercase());
                    s.push_str(cs.as_str());
                }
            } else {
                s.push(' ');
                s.push_str(w);
            }
        }
        s.push('.');
        sentences.push(s);
    }
    let half = n_sentences.div_ceil(2);
    format!("{HPI_HEADING}: {}\n{PLAN_HEADING}: {}", sentences[..half].join(" "), sentences[half..].join(" "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCorpus {
    pub notes: Vec<NoteRecord>,
    pub encounters: Vec<Encounter>,
    pub truth: Vec<Truth>,
    /// Style level each note was written at.
    pub levels: Vec<i32>,
}

/// Simulates an ingestible corpus whose text depends on true fatigue
/// Y* = workload_gap · min(prior_days, 4)/4 + Δ through `style_map`. Filler,
/// anger, insight and stopword vocabularies come from `lexicons`.
pub fn simulate_text_corpus(config: &DagConfig, style_map: &StyleMap, lexicons: &LexiconSet) -> Result<TextCorpus> {
    config.validate()?;
    if !(style_map.level_width > 0.0) || style_map.min_level > style_map.max_level {
        return Err(Error::Config("style map needs a positive level width and min_level <= max_level".into()));
    }
    let vocab = Vocab {
        neutral: neutral_words(lexicons),
        anger: words_of(lexicons, "anger")?,
        insight: words_of(lexicons, "insight")?,
        stop: words_of(lexicons, "stopwords")?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shifts = build_schedule(config.n_physicians, config.n_shifts, config.patients_per_shift, &mut rng);
    let records = draw_records(&shifts, &mut rng);
    let y_shift: Vec<f64> =
        shifts.iter().map(|s| config.workload_gap * f64::from(s.prior_days.min(4)) / 4.0).collect();
    let y = per_record(&records, &y_shift);
    let delta = draw_deltas(config, &records, &mut rng);
    let truth = outcomes(config, &records, &y, &delta, &mut rng);
    let mut notes = Vec::with_capacity(records.len());
    let mut levels = Vec::with_capacity(records.len());
    for (r, t) in records.iter().zip(&truth) {
        let level = style_map.level_of(t.y_star);
        let text = write_note(style_map.profile(level)?, &vocab, &mut rng);
        let sections = split_sections(&text, &[HPI_HEADING, PLAN_HEADING]);
        notes.push(r.to_note(text, sections));
        levels.push(level);
    }
    let encounters = records.iter().zip(&truth).map(|(r, t)| r.to_encounter(t.test_positive)).collect();
    Ok(TextCorpus { notes, encounters, truth, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textfeat::{fk_grade, Tokenizer};

    fn small(seed: u64) -> DagConfig {
        DagConfig { n_physicians: 4, n_shifts: 12, patients_per_shift: 5, var_delta: 1.0, seed, ..DagConfig::default() }
    }

    #[test]
    fn neutral_words_avoid_lexicons() {
        let lex = LexiconSet::bundled();
        let words = neutral_words(&lex);
        assert!(words.len() > 2000);
        for w in &words {
            for n in lex.names() {
                assert!(!lex.get(n).unwrap().matches(w), "{w} in {n}");
            }
        }
    }

    #[test]
    fn notes_have_sections_and_are_deterministic() {
        let lex = LexiconSet::bundled();
        let a = simulate_text_corpus(&small(1), &StyleMap::linear(1.0), &lex).unwrap();
        assert_eq!(a, simulate_text_corpus(&small(1), &StyleMap::linear(1.0), &lex).unwrap());
        assert_eq!(a.notes.len(), 240);
        for n in &a.notes {
            assert!(n.section(HPI_HEADING).is_some_and(|s| !s.text.is_empty()));
            assert!(n.section(PLAN_HEADING).is_some());
        }
    }

    #[test]
    fn missing_level_is_an_error() {
        let lex = LexiconSet::bundled();
        let mut map = StyleMap::linear(1.0);
        map.profiles.remove(&2);
        assert!(matches!(simulate_text_corpus(&small(2), &map, &lex), Err(Error::Config(_))));
    }

    #[test]
    fn style_directions() {
        let lex = LexiconSet::bundled();
        let map = StyleMap::linear(2.0);
        let vocab = Vocab {
            neutral: neutral_words(&lex),
            anger: words_of(&lex, "anger").unwrap(),
            insight: words_of(&lex, "insight").unwrap(),
            stop: words_of(&lex, "stopwords").unwrap(),
        };
        let tok = Tokenizer::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stats = |level: i32, rng: &mut ChaCha8Rng| {
            let (mut anger, mut insight, mut fk) = (0.0, 0.0, 0.0);
            for _ in 0..50 {
                let t = tok.tokenize(&write_note(map.profile(level).unwrap(), &vocab, rng));
                let words = t.to_vec();
                anger += lex.get("anger").unwrap().fraction(&words);
                insight += lex.get("insight").unwrap().fraction(&words);
                fk += fk_grade(&words, t.sentence_count).grade;
            }
            (anger, insight, fk)
        };
        let rested = stats(-4, &mut rng);
        let tired = stats(8, &mut rng);
        assert!(tired.0 > rested.0 && tired.1 < rested.1 && tired.2 < rested.2);
    }
}
