use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Zero-shot prompt for the pairwise comparison, with `{note1}` and
/// `{note2}` placeholders. Trailing spaces are part of the template.
pub const PAIRWISE_PROMPT: &str = "Note 1: {note1} \n\n\nNote 2: {note2} \n\n\nTask:\nAnalyze the above two physician notes and assess \nwhich one appears to be written by a more fatigued physician. \nAnswer the question at the end by selecting either [Note 1] or [Note 2].\nOnly reply the answer.\nDo not include any other information.";

pub fn pairwise_prompt(note1: &str, note2: &str) -> String {
    let (head, rest) = PAIRWISE_PROMPT.split_once("{note1}").expect("template has {note1}");
    let (middle, tail) = rest.split_once("{note2}").expect("template has {note2}");
    [head, note1, middle, note2, tail].concat()
}

/// A chat-completion service. `Err` carries a transport or protocol error
/// message for the request.
pub trait ChatEndpoint {
    fn complete(&mut self, prompt: &str) -> core::result::Result<String, String>;
}

impl<F: FnMut(&str) -> core::result::Result<String, String>> ChatEndpoint for F {
    fn complete(&mut self, prompt: &str) -> core::result::Result<String, String> {
        self(prompt)
    }
}

/// Reads the chosen note from a reply: the first "note" (any case)
/// followed, after optional spaces, `[`, `#` or `:`, by the digit 1 or 2.
/// `None` is an abstention.
pub fn parse_choice(reply: &str) -> Option<u8> {
    let lower = reply.to_lowercase();
    let bytes = lower.as_bytes();
    let mut from = 0;
    while let Some(pos) = lower[from..].find("note") {
        let mut i = from + pos + 4;
        while i < bytes.len() && matches!(bytes[i], b' ' | b'\t' | b'[' | b'#' | b':') {
            i += 1;
        }
        match bytes.get(i) {
            Some(b'1') | Some(b'2') if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                return Some(bytes[i] - b'0');
            }
            _ => from = from + pos + 4,
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub pair: usize,
    /// Whether the high-workload note was shown as Note 1.
    pub fatigued_first: bool,
    pub reply: Option<String>,
    pub choice: Option<u8>,
    /// 1 correct, 0 wrong, 0.5 abstained; `None` when the request failed.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub pairs: usize,
    pub answered: usize,
    pub abstained: usize,
    pub failed: usize,
    /// Mean score over completed pairs, abstentions at 0.5. This is the
    /// pairwise AUC of the model's choices.
    pub accuracy: f64,
    /// Correct answers over completed pairs, abstentions counted wrong.
    pub strict_accuracy: f64,
    pub outcomes: Vec<PairOutcome>,
}

/// Asks the endpoint which note of each (fatigued, rested) pair was written
/// by the more fatigued physician. Note order is shuffled per pair with
/// `seed`. Failed requests are recorded and skipped.
pub fn llm_pairwise_baseline<E: ChatEndpoint + ?Sized>(
    pairs: &[(String, String)],
    endpoint: &mut E,
    seed: u64,
) -> Result<PairwiseReport> {
    if pairs.is_empty() {
        return Err(Error::Empty("no note pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(pairs.len());
    for (i, (fatigued, rested)) in pairs.iter().enumerate() {
        let fatigued_first: bool = rng.random();
        let prompt =
            if fatigued_first { pairwise_prompt(fatigued, rested) } else { pairwise_prompt(rested, fatigued) };
        let outcome = match endpoint.complete(&prompt) {
            Ok(reply) => {
                let choice = parse_choice(&reply);
                let score = match choice {
                    None => 0.5,
                    Some(c) if (c == 1) == fatigued_first => 1.0,
                    Some(_) => 0.0,
                };
                PairOutcome { pair: i, fatigued_first, reply: Some(reply), choice, score: Some(score), error: None }
            }
            Err(e) => PairOutcome { pair: i, fatigued_first, reply: None, choice: None, score: None, error: Some(e) },
        };
        outcomes.push(outcome);
    }
    let done: Vec<&PairOutcome> = outcomes.iter().filter(|o| o.score.is_some()).collect();
    if done.is_empty() {
        return Err(Error::AllRequestsFailed);
    }
    let n = done.len() as f64;
    let abstained = done.iter().filter(|o| o.choice.is_none()).count();
    Ok(PairwiseReport {
        pairs: pairs.len(),
        answered: done.len() - abstained,
        abstained,
        failed: pairs.len() - done.len(),
        accuracy: done.iter().map(|o| o.score.unwrap()).sum::<f64>() / n,
        strict_accuracy: done.iter().filter(|o| o.score == Some(1.0)).count() as f64 / n,
        outcomes,
    })
}

impl PairwiseReport {
    pub fn summary(&self) -> String {
        alloc::format!(
            "pairs {} answered {} abstained {} failed {} accuracy {:.3}",
            self.pairs,
            self.answered,
            self.abstained,
            self.failed,
            self.accuracy
        )
    }
}
