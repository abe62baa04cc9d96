fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable heuristic: count runs of `aeiouy`, drop a silent
/// final `e` that forms its own group (unless it is the only group), and
/// never return less than one.
pub fn count_syllables(word: &str) -> u32 {
    let letters: alloc::vec::Vec<char> = word.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect();
    let mut groups = 0u32;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = letters.len();
    let silent_e = n >= 2 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]);
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

/// Flesch-Kincaid grade with the 1975 constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkGrade {
    pub grade: f64,
    pub words: usize,
    pub sentences: usize,
    pub syllables: u64,
    /// Set when there were no words; `grade` is then 0.
    pub degenerate: bool,
}

pub fn fk_from_counts(words: usize, sentences: usize, syllables: u64) -> f64 {
    let w = words as f64;
    0.39 * w / sentences.max(1) as f64 + 11.8 * syllables as f64 / w - 15.59
}

/// `0.39·words/sentences + 11.8·syllables/words − 15.59`.
pub fn fk_grade<S: AsRef<str>>(tokens: &[S], sentence_count: usize) -> FkGrade {
    if tokens.is_empty() {
        return FkGrade { grade: 0.0, words: 0, sentences: sentence_count, syllables: 0, degenerate: true };
    }
    let syllables: u64 = tokens.iter().map(|t| u64::from(count_syllables(t.as_ref()))).sum();
    let grade = fk_from_counts(tokens.len(), sentence_count, syllables);
    debug_assert!(grade.is_finite());
    FkGrade { grade, words: tokens.len(), sentences: sentence_count, syllables, degenerate: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syllables() {
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("believe"), 2);
        assert_eq!(count_syllables("a"), 1);
        assert_eq!(count_syllables("the"), 1);
        assert_eq!(count_syllables("free"), 1);
        assert_eq!(count_syllables("hypertension"), 4);
        assert_eq!(count_syllables("rhythm"), 1);
        assert_eq!(count_syllables("don't"), 1);
    }

    #[test]
    fn the_cat_sat() {
        let g = fk_grade(&["the", "cat", "sat"], 1);
        assert!((g.grade - (-2.62)).abs() < 1e-12);
        assert_eq!(g.syllables, 3);
    }

    #[test]
    fn empty_is_flagged() {
        let g = fk_grade::<&str>(&[], 1);
        assert!(g.degenerate);
        assert_eq!(g.grade, 0.0);
    }

    #[test]
    fn doubling_monosyllables_adds_words_per_sentence_term() {
        let base = ["the", "cat", "sat", "on", "mat"];
        let doubled: alloc::vec::Vec<&str> = base.iter().chain(base.iter()).copied().collect();
        let a = fk_grade(&base, 1).grade;
        let b = fk_grade(&doubled, 1).grade;
        assert!((b - a - 0.39 * 5.0).abs() < 1e-12);
    }
}
