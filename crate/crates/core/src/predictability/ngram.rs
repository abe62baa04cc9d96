use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::textfeat::{Tokenized, Tokenizer};
use crate::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfig {
    pub order: usize,
    /// Absolute discount in `[0, 1)`; 0 gives maximum likelihood estimates.
    pub discount: f64,
    /// Words seen fewer times than this map to `<unk>`.
    pub min_count: u64,
    /// Score `</s>` at the end of every sentence.
    pub sentence_end: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { order: 3, discount: 0.75, min_count: 2, sentence_end: true }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("n-gram order must be at least 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config("discount must be in [0, 1)".to_string()));
        }
        Ok(())
    }
}

/// Anything that assigns a next-word probability given a history of words.
pub trait LanguageModel {
    /// Longest history the model looks at.
    fn context_len(&self) -> usize;
    /// `p(word | history)` where `history` holds the preceding words of the
    /// sentence, oldest first, without boundary markers.
    fn prob(&self, history: &[&str], word: &str) -> f64;
    fn scores_sentence_end(&self) -> bool {
        true
    }
    /// Total −log2 probability of a sentence's words, plus `</s>` when the
    /// model scores it.
    fn sentence_bits(&self, words: &[&str]) -> f64 {
        let ctx = self.context_len();
        let end = if self.scores_sentence_end() { Some(EOS) } else { None };
        let mut bits = 0.0;
        for (i, w) in words.iter().copied().chain(end).enumerate() {
            bits -= self.prob(&words[i.saturating_sub(ctx)..i], w).log2();
        }
        bits
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Node {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Word n-gram model with interpolated absolute discounting, backing off
/// to a uniform distribution over the vocabulary (`</s>` and `<unk>`
/// included, `<s>` excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LmFile", try_from = "LmFile")]
pub struct NgramLM {
    config: LmConfig,
    words: Vec<String>,
    ids: HashMap<String, u32>,
    // levels[k] holds contexts of length k.
    levels: Vec<HashMap<Vec<u32>, Node>>,
}

/// On-disk form of [`NgramLM`]: the vocabulary and every counted n-gram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmFile {
    pub format: String,
    pub config: LmConfig,
    /// Word types other than the three markers, sorted.
    pub words: Vec<String>,
    /// Per order: (context ids, word id, count). Ids 0, 1, 2 are `<s>`,
    /// `</s>`, `<unk>`; id `3 + i` is `words[i]`.
    pub counts: Vec<Vec<(Vec<u32>, u32, u64)>>,
}

pub const LM_FORMAT: &str = "fatlens-ngram-v1";

impl From<NgramLM> for LmFile {
    fn from(lm: NgramLM) -> Self {
        let counts = lm
            .levels
            .iter()
            .map(|level| {
                let mut entries: Vec<(Vec<u32>, u32, u64)> = level
                    .iter()
                    .flat_map(|(ctx, node)| node.next.iter().map(move |(w, c)| (ctx.clone(), *w, *c)))
                    .collect();
                entries.sort_unstable();
                entries
            })
            .collect();
        LmFile { format: LM_FORMAT.to_string(), config: lm.config, words: lm.words[3..].to_vec(), counts }
    }
}

impl TryFrom<LmFile> for NgramLM {
    type Error = Error;

    fn try_from(file: LmFile) -> Result<Self> {
        if file.format != LM_FORMAT {
            return Err(Error::InvalidInput(alloc::format!("unknown language model format `{}`", file.format)));
        }
        file.config.validate()?;
        if file.counts.len() != file.config.order {
            return Err(Error::Dimension { expected: file.config.order, got: file.counts.len() });
        }
        let mut lm = NgramLM::empty(file.config, file.words)?;
        let v = lm.words.len() as u32;
        for (k, entries) in file.counts.into_iter().enumerate() {
            for (ctx, w, c) in entries {
                if ctx.len() != k || w >= v || w == BOS_ID || ctx.iter().any(|&t| t >= v) {
                    return Err(Error::InvalidInput("language model count out of range".to_string()));
                }
                let node = lm.levels[k].entry(ctx).or_default();
                node.total += c;
                *node.next.entry(w).or_default() += c;
            }
        }
        Ok(lm)
    }
}

impl NgramLM {
    fn empty(config: LmConfig, mut words: Vec<String>) -> Result<Self> {
        words.sort();
        words.dedup();
        let mut all: Vec<String> = [BOS, EOS, UNK].iter().map(|s| s.to_string()).collect();
        all.extend(words);
        let ids = all.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Ok(Self { config, words: all, ids, levels: vec![HashMap::new(); config.order] })
    }

    /// Counts n-grams over tokenized sentences.
    pub fn train<'a, S>(sentences: impl IntoIterator<Item = S> + Clone, config: LmConfig) -> Result<Self>
    where
        S: IntoIterator<Item = &'a str>,
    {
        config.validate()?;
        let mut freq: HashMap<&str, u64> = HashMap::new();
        let mut any = false;
        for s in sentences.clone() {
            any = true;
            for w in s {
                *freq.entry(w).or_default() += 1;
            }
        }
        if !any || (freq.is_empty() && !config.sentence_end) {
            return Err(Error::Empty("language model training corpus"));
        }
        let vocab = freq.into_iter().filter(|(_, c)| *c >= config.min_count).map(|(w, _)| w.to_string()).collect();
        let mut lm = Self::empty(config, vocab)?;
        let n = config.order;
        for s in sentences {
            let mut hist = vec![BOS_ID; n - 1];
            let ids: Vec<u32> = s.into_iter().map(|w| lm.id(w)).collect();
            let ends = if config.sentence_end { Some(EOS_ID) } else { None };
            for w in ids.into_iter().chain(ends) {
                for k in 0..n {
                    let ctx = &hist[hist.len() - k..];
                    let node = match lm.levels[k].get_mut(ctx) {
                        Some(node) => node,
                        None => lm.levels[k].entry(ctx.to_vec()).or_default(),
                    };
                    node.total += 1;
                    *node.next.entry(w).or_default() += 1;
                }
                if n > 1 {
                    hist.remove(0);
                    hist.push(w);
                }
            }
        }
        if lm.levels[0].is_empty() {
            return Err(Error::Empty("language model training corpus"));
        }
        Ok(lm)
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// Number of predictable symbols (words, `</s>`, `<unk>`).
    pub fn vocab_size(&self) -> usize {
        self.words.len() - 1
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    pub(crate) fn id(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    pub(crate) fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Padded id history of length `order − 1` for the given sentence prefix.
    pub(crate) fn history_ids(&self, history: &[&str]) -> Vec<u32> {
        let n = self.config.order - 1;
        let mut h = vec![BOS_ID; n];
        h.extend(history.iter().map(|w| self.id(w)));
        h.split_off(h.len() - n)
    }

    pub(crate) fn prob_id(&self, hist: &[u32], w: u32) -> f64 {
        let d = self.config.discount;
        let mut p = 1.0 / self.vocab_size() as f64;
        for k in 0..self.config.order {
            if let Some(node) = self.levels[k].get(&hist[hist.len() - k..]) {
                let c = node.next.get(&w).copied().unwrap_or(0) as f64;
                let total = node.total as f64;
                p = (c - d).max(0.0) / total + d * node.next.len() as f64 / total * p;
            }
        }
        p
    }

    /// Full next-symbol distribution indexed by id (entry 0, `<s>`, is 0).
    pub(crate) fn distribution(&self, hist: &[u32]) -> Vec<f64> {
        let d = self.config.discount;
        let mut p = vec![1.0 / self.vocab_size() as f64; self.words.len()];
        p[BOS_ID as usize] = 0.0;
        for k in 0..self.config.order {
            if let Some(node) = self.levels[k].get(&hist[hist.len() - k..]) {
                let total = node.total as f64;
                let backoff = d * node.next.len() as f64 / total;
                p.iter_mut().for_each(|x| *x *= backoff);
                for (&w, &c) in &node.next {
                    p[w as usize] += (c as f64 - d).max(0.0) / total;
                }
            }
        }
        p
    }

    /// Symbols with their probabilities given a history of words.
    pub fn next_distribution(&self, history: &[&str]) -> Vec<(&str, f64)> {
        let hist = self.history_ids(history);
        self.distribution(&hist).into_iter().enumerate().skip(1).map(|(i, p)| (self.word(i as u32), p)).collect()
    }
}

impl LanguageModel for NgramLM {
    fn context_len(&self) -> usize {
        self.config.order - 1
    }

    fn prob(&self, history: &[&str], word: &str) -> f64 {
        if word == BOS {
            return 0.0;
        }
        self.prob_id(&self.history_ids(history), self.id(word))
    }

    fn scores_sentence_end(&self) -> bool {
        self.config.sentence_end
    }

    fn sentence_bits(&self, words: &[&str]) -> f64 {
        let n = self.config.order - 1;
        let mut hist = vec![BOS_ID; n];
        let ends = if self.config.sentence_end { Some(EOS_ID) } else { None };
        let mut bits = 0.0;
        for w in words.iter().map(|w| self.id(w)).chain(ends) {
            bits -= self.prob_id(&hist[hist.len() - n..], w).log2();
            hist.push(w);
        }
        bits
    }
}

/// Trains on the sentences of the given texts.
pub fn train_lm<T: AsRef<str>>(texts: &[T], tokenizer: &Tokenizer, config: LmConfig) -> Result<NgramLM> {
    let tokenized: Vec<Tokenized> = texts.iter().map(|t| tokenizer.tokenize(t.as_ref())).collect();
    let sentences = tokenized.iter().flat_map(|t| t.sentences.iter()).map(|s| s.iter().map(String::as_str));
    NgramLM::train(sentences, config)
}

/// Log2 perplexity (bits per scored token) of the given sentences. Every
/// word is scored, plus `</s>` per sentence when the model scores it.
pub fn sentences_log_perplexity<M: LanguageModel + ?Sized, S: AsRef<str>>(model: &M, sentences: &[Vec<S>]) -> Result<f64> {
    let mut bits = 0.0;
    let mut n = 0usize;
    let mut words: Vec<&str> = Vec::new();
    for s in sentences {
        words.clear();
        words.extend(s.iter().map(AsRef::as_ref));
        bits += model.sentence_bits(&words);
        n += words.len() + usize::from(model.scores_sentence_end());
    }
    if n == 0 {
        return Err(Error::Empty("no scoreable tokens"));
    }
    let lp = bits / n as f64;
    if !lp.is_finite() {
        return Err(Error::NonFinite("log perplexity (zero-probability token)"));
    }
    Ok(lp)
}

/// [`sentences_log_perplexity`] over a tokenized note.
pub fn log_perplexity<M: LanguageModel + ?Sized>(model: &M, note: &Tokenized) -> Result<f64> {
    sentences_log_perplexity(model, &note.sentences)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textfeat::tokenize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sents(text: &[&str]) -> Vec<Vec<String>> {
        text.iter().map(|s| s.split_whitespace().map(String::from).collect()).collect()
    }

    fn fit_lm(corpus: &[Vec<String>], config: LmConfig) -> Result<NgramLM> {
        NgramLM::train(corpus.iter().map(|s| s.iter().map(String::as_str)), config)
    }

    fn cfg(order: usize, discount: f64, min_count: u64) -> LmConfig {
        LmConfig { order, discount, min_count, sentence_end: true }
    }

    #[test]
    fn unigram_mle() {
        let c = LmConfig { order: 1, discount: 0.0, min_count: 1, sentence_end: false };
        let lm = fit_lm(&sents(&["a b a b"]), c).unwrap();
        assert_eq!(lm.prob(&[], "a"), 0.5);
        assert_eq!(lm.prob(&[], "b"), 0.5);
        assert_eq!(lm.prob(&[], "zzz"), 0.0);
    }

    struct Uniform(usize);

    impl LanguageModel for Uniform {
        fn context_len(&self) -> usize {
            0
        }
        fn prob(&self, _: &[&str], _: &str) -> f64 {
            1.0 / self.0 as f64
        }
    }

    #[test]
    fn certain_and_uniform_models() {
        let s = sents(&["x y z", "w"]);
        assert_eq!(sentences_log_perplexity(&Uniform(1), &s).unwrap(), 0.0);
        let lp = sentences_log_perplexity(&Uniform(37), &s).unwrap();
        assert!((2f64.powf(lp) - 37.0).abs() < 1e-9);
        assert!(sentences_log_perplexity(&Uniform(5), &Vec::<Vec<String>>::new()).is_err());
    }

    #[test]
    fn training_unigram_perplexity_is_empirical_entropy() {
        let corpus = sents(&["the cat sat on the mat", "the dog sat", "a cat ran on"]);
        let lm = fit_lm(&corpus, cfg(1, 0.0, 1)).unwrap();
        let mut freq: BTreeMap<&str, f64> = BTreeMap::new();
        let mut n = 0.0;
        for s in &corpus {
            for w in s.iter().map(String::as_str).chain([EOS]) {
                *freq.entry(w).or_default() += 1.0;
                n += 1.0;
            }
        }
        let h: f64 = freq.values().map(|c| -(c / n) * (c / n).log2()).sum();
        let lp = sentences_log_perplexity(&lm, &corpus).unwrap();
        assert!((lp - h).abs() < 1e-9, "{lp} vs {h}");
    }

    #[test]
    fn rare_words_become_unknown() {
        let lm = fit_lm(&sents(&["a a b"]), cfg(2, 0.5, 2)).unwrap();
        assert!(lm.contains("a") && !lm.contains("b"));
        assert_eq!(lm.prob(&["a"], "b"), lm.prob(&["a"], UNK));
        assert_eq!(lm.vocab_size(), 3);
    }

    #[test]
    fn config_errors() {
        assert!(fit_lm(&sents(&["a"]), cfg(0, 0.5, 1)).is_err());
        assert!(fit_lm(&sents(&["a"]), cfg(2, 1.0, 1)).is_err());
        assert!(fit_lm(&[], cfg(2, 0.5, 1)).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let lm = fit_lm(&sents(&["a b c", "a b", "b c a"]), cfg(3, 0.6, 1)).unwrap();
        let file: LmFile = lm.clone().into();
        let back = NgramLM::try_from(file).unwrap();
        assert_eq!(back, lm);
    }

    #[test]
    fn from_text() {
        let lm = train_lm(&["The cat sat. The cat ran."], &Tokenizer::default(), cfg(2, 0.5, 1)).unwrap();
        assert!(lm.prob(&["the"], "cat") > 0.5);
        let (t, _) = tokenize("cat sat");
        assert_eq!(t, ["cat", "sat"]);
    }

    fn bigram_source(rng: &mut ChaCha8Rng, tokens: usize) -> Vec<Vec<String>> {
        // Five words plus end; each word strongly prefers a successor.
        let words = ["a", "b", "c", "d", "e"];
        let mut out = Vec::new();
        let mut produced = 0;
        while produced < tokens {
            let mut s = Vec::new();
            let mut prev = 0usize;
            loop {
                let u: f64 = rng.random();
                let next = if u < 0.15 { 5 } else if u < 0.75 { (prev + 1) % 5 } else { rng.random_range(0..5) };
                produced += 1;
                if next == 5 {
                    break;
                }
                s.push(words[next].to_string());
                prev = next;
            }
            out.push(s);
        }
        out
    }

    /// Entropy rate (bits per symbol) of the source above, computed from
    /// its stationary distribution over the "previous word" state.
    fn source_entropy() -> f64 {
        // State 0 is sentence start (prev = a) then words a..e.
        let next_dist = |prev: usize| {
            let mut p = [0.25 / 5.0; 6];
            p[5] = 0.15;
            p[(prev + 1) % 5] += 0.6;
            p
        };
        // Per-sentence expected counts: start from prev = 0 and iterate.
        let mut visits = [0.0f64; 5];
        let mut state = [0.0f64; 5];
        state[0] = 1.0;
        for _ in 0..2000 {
            let mut nxt = [0.0; 5];
            for (prev, &m) in state.iter().enumerate() {
                visits[prev] += m;
                let p = next_dist(prev);
                for w in 0..5 {
                    nxt[w] += m * p[w];
                }
            }
            state = nxt;
        }
        let total: f64 = visits.iter().sum();
        visits
            .iter()
            .enumerate()
            .map(|(prev, v)| v / total * next_dist(prev).iter().map(|p| -p * p.log2()).sum::<f64>())
            .sum()
    }

    #[test]
    fn converges_to_source_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let train = bigram_source(&mut rng, 100_000);
        let test = bigram_source(&mut rng, 100_000);
        let lm = fit_lm(&train, cfg(2, 0.75, 2)).unwrap();
        let lp = sentences_log_perplexity(&lm, &test).unwrap();
        let h = source_entropy();
        assert!((lp - h).abs() / h < 0.02, "{lp} vs {h}");
    }

    #[test]
    fn trigram_no_worse_than_unigram_on_bigram_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let train = bigram_source(&mut rng, 20_000);
        let test = bigram_source(&mut rng, 20_000);
        let fit = |order| fit_lm(&train, cfg(order, 0.75, 2)).unwrap();
        let tri = sentences_log_perplexity(&fit(3), &test).unwrap();
        let uni = sentences_log_perplexity(&fit(1), &test).unwrap();
        assert!(tri <= uni, "{tri} > {uni}");
    }

    fn random_corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]).prop_map(String::from), 0..8), 1..30)
    }

    proptest! {
        #[test]
        fn conditionals_sum_to_one(
            corpus in random_corpus(),
            order in 1usize..5,
            discount in 0.05f64..0.95,
            history in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "zz", "f"]), 0..5),
        ) {
            let lm = fit_lm(&corpus, cfg(order, discount, 1)).unwrap();
            let dist = lm.next_distribution(&history);
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(dist.iter().all(|(_, p)| *p > 0.0));
            for (w, p) in &dist {
                prop_assert!((lm.prob(&history, w) - p).abs() < 1e-15);
            }
        }

        #[test]
        fn positive_discount_never_zero(corpus in random_corpus(), d1 in 0.01f64..0.5, extra in 0.0f64..0.49) {
            for d in [d1, d1 + extra] {
                let lm = fit_lm(&corpus, cfg(3, d, 1)).unwrap();
                for (_, p) in lm.next_distribution(&["f", "a"]) {
                    prop_assert!(p > 0.0);
                }
            }
        }
    }
}
