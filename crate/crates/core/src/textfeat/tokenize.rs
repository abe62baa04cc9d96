use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

/// Default abbreviations whose trailing period does not end a sentence.
pub const DEFAULT_ABBREVIATIONS: [&str; 16] =
    ["dr", "mr", "mrs", "ms", "prof", "st", "vs", "etc", "approx", "jr", "sr", "pt", "hx", "dx", "tx", "fig"];

/// Output of [`Tokenizer::tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tokenized {
    /// Lowercase words grouped by sentence; sentences without words are omitted.
    pub sentences: Vec<Vec<String>>,
    /// Number of sentences, at least one.
    pub sentence_count: usize,
    /// Digit runs seen and skipped.
    pub numbers: usize,
}

impl Tokenized {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<String> {
        self.sentences.iter().flatten().cloned().collect()
    }
}

/// Word and sentence splitter.
///
/// Words are maximal runs of letters and apostrophes (outer apostrophes
/// trimmed), lowercased. Digit runs are counted but not emitted. A sentence
/// ends at `.`, `!` or `?` followed by whitespace or end of text, except a
/// period directly after a listed abbreviation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    abbreviations: BTreeSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphabetic() || c == '\'' || c == '\u{2019}'
}

impl Tokenizer {
    pub fn with_abbreviations<S: AsRef<str>>(abbreviations: impl IntoIterator<Item = S>) -> Self {
        Self { abbreviations: abbreviations.into_iter().map(|a| a.as_ref().to_lowercase()).collect() }
    }

    pub fn tokenize(&self, text: &str) -> Tokenized {
        let mut out = Tokenized::default();
        let mut sentence: Vec<String> = Vec::new();
        let mut has_content = false;
        let mut ended = 0usize;
        let mut word = String::new();
        let mut in_number = false;
        let mut chars = text.chars().peekable();

        fn flush(word: &mut String, sentence: &mut Vec<String>) -> Option<String> {
            if word.is_empty() {
                return None;
            }
            let trimmed = word.trim_matches(|c| c == '\'' || c == '\u{2019}').replace('\u{2019}', "'");
            word.clear();
            if trimmed.is_empty() {
                return None;
            }
            let w = trimmed.to_lowercase();
            sentence.push(w.clone());
            Some(w)
        }

        while let Some(c) = chars.next() {
            if is_word_char(c) {
                in_number = false;
                word.push(c);
                has_content = true;
                continue;
            }
            let prev = flush(&mut word, &mut sentence);
            if c.is_ascii_digit() {
                if !in_number {
                    out.numbers += 1;
                    in_number = true;
                }
                has_content = true;
                continue;
            }
            in_number = false;
            if matches!(c, '.' | '!' | '?') {
                let at_boundary = chars.peek().map_or(true, |n| n.is_whitespace());
                let abbreviation = c == '.' && prev.as_ref().is_some_and(|w| self.abbreviations.contains(w));
                if at_boundary && !abbreviation && has_content {
                    ended += 1;
                    if !sentence.is_empty() {
                        out.sentences.push(core::mem::take(&mut sentence));
                    }
                    has_content = false;
                }
            } else if c.is_alphanumeric() {
                has_content = true;
            }
        }
        flush(&mut word, &mut sentence);
        if has_content {
            ended += 1;
        }
        if !sentence.is_empty() {
            out.sentences.push(sentence);
        }
        out.sentence_count = ended.max(1);
        out
    }
}

/// Tokens and sentence count with the default abbreviation list.
pub fn tokenize(text: &str) -> (Vec<String>, usize) {
    let t = Tokenizer::default().tokenize(text);
    (t.to_vec(), t.sentence_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_sentence() {
        let (tokens, sentences) = tokenize("The cat sat.");
        assert_eq!(tokens, ["the", "cat", "sat"]);
        assert_eq!(sentences, 1);
    }

    #[test]
    fn abbreviation_suppresses_split() {
        let t = Tokenizer::with_abbreviations(["dr"]).tokenize("Pt c/o pain. Dr. Smith notified.");
        assert_eq!(t.sentence_count, 2);
        assert_eq!(t.sentences[1], ["dr", "smith", "notified"]);
        let t = Tokenizer::with_abbreviations::<&str>([]).tokenize("Pt c/o pain. Dr. Smith notified.");
        assert_eq!(t.sentence_count, 3);
    }

    #[test]
    fn empty_text() {
        assert_eq!(tokenize(""), (Vec::<String>::new(), 1));
        assert_eq!(tokenize("   \n\t"), (Vec::<String>::new(), 1));
    }

    #[test]
    fn apostrophes_and_numbers() {
        let t = Tokenizer::default().tokenize("Don't give 3.5 mg to 'them' 55M.");
        assert_eq!(t.to_vec(), ["don't", "give", "mg", "to", "them", "m"]);
        assert_eq!(t.numbers, 3);
        assert_eq!(t.sentence_count, 1);
    }

    #[test]
    fn trailing_text_without_terminator_counts() {
        let t = Tokenizer::default().tokenize("First one! Second one? third");
        assert_eq!(t.sentence_count, 3);
        assert_eq!(t.sentences.len(), 3);
    }

    #[test]
    fn repeated_terminators_count_once() {
        assert_eq!(tokenize("Really?! Yes...").1, 2);
    }
}
