use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::{Error, Result};

/// The open test lexicon shipped with the crate (about 20–200 entries per
/// category). It is not LIWC; load a licensed dictionary for real analyses.
pub const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.txt");

/// One word category. Entries ending in `*` match by prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    name: String,
    exact: BTreeSet<String>,
    prefixes: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(name: impl Into<String>, entries: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let mut exact = BTreeSet::new();
        let mut prefixes = BTreeSet::new();
        for entry in entries {
            let entry = entry.as_ref().trim();
            if entry.is_empty() {
                continue;
            }
            if entry.chars().any(char::is_uppercase) {
                return Err(Error::Lexicon(format!("{name}: entry `{entry}` is not lowercase")));
            }
            let stem = entry.strip_suffix('*');
            let body = stem.unwrap_or(entry);
            if body.is_empty() || body.contains('*') {
                return Err(Error::Lexicon(format!("{name}: wildcard only allowed as final character in `{entry}`")));
            }
            let fresh = match stem {
                Some(s) => prefixes.insert(s.to_string()),
                None => exact.insert(entry.to_string()),
            };
            if !fresh {
                return Err(Error::Lexicon(format!("{name}: duplicate entry `{entry}`")));
            }
        }
        Ok(Self { name, exact, prefixes })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries in file syntax (prefixes with their trailing `*`).
    pub fn entries(&self) -> impl Iterator<Item = String> + '_ {
        self.exact.iter().cloned().chain(self.prefixes.iter().map(|p| format!("{p}*")))
    }

    pub fn matches(&self, token: &str) -> bool {
        self.exact.contains(token)
            || (!self.prefixes.is_empty()
                && token.char_indices().skip(1).map(|(i, _)| &token[..i]).chain([token]).any(|p| self.prefixes.contains(p)))
    }

    /// Share of tokens matching the lexicon; zero for no tokens.
    pub fn fraction<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        let hits = tokens.iter().filter(|t| self.matches(t.as_ref())).count();
        hits as f64 / tokens.len().max(1) as f64
    }
}

/// Several lexicons matched together: one table lookup per token prefix
/// yields the set of matching categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconMatcher {
    n: usize,
    exact: HashMap<String, u64>,
    prefixes: HashMap<String, u64>,
}

impl LexiconMatcher {
    /// At most 64 lexicons.
    pub fn new(lexicons: &[Lexicon]) -> Result<Self> {
        if lexicons.len() > 64 {
            return Err(Error::Lexicon(format!("{} categories, at most 64 can be matched together", lexicons.len())));
        }
        let mut exact: HashMap<String, u64> = HashMap::new();
        let mut prefixes: HashMap<String, u64> = HashMap::new();
        for (i, l) in lexicons.iter().enumerate() {
            for e in &l.exact {
                *exact.entry(e.clone()).or_default() |= 1 << i;
            }
            for p in &l.prefixes {
                *prefixes.entry(p.clone()).or_default() |= 1 << i;
            }
        }
        Ok(Self { n: lexicons.len(), exact, prefixes })
    }

    /// Bit `i` is set when lexicon `i` matches.
    pub fn mask(&self, token: &str) -> u64 {
        let mut m = self.exact.get(token).copied().unwrap_or(0);
        if !self.prefixes.is_empty() {
            for p in token.char_indices().skip(1).map(|(i, _)| &token[..i]).chain([token]) {
                m |= self.prefixes.get(p).copied().unwrap_or(0);
            }
        }
        m
    }

    /// [`Lexicon::fraction`] of every lexicon, in order.
    pub fn fractions<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut hits = vec![0usize; self.n];
        for t in tokens {
            let mut m = self.mask(t.as_ref());
            while m != 0 {
                hits[m.trailing_zeros() as usize] += 1;
                m &= m - 1;
            }
        }
        let n = tokens.len().max(1) as f64;
        hits.into_iter().map(|h| h as f64 / n).collect()
    }
}

/// Lexicons keyed by category name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LexiconSet {
    lexicons: BTreeMap<String, Lexicon>,
}

impl LexiconSet {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON).expect("bundled lexicon is well formed")
    }

    /// Parses the lexicon file format: a `#category <name>` line opens a
    /// category, followed by one entry per line. Other lines starting with
    /// `#` and blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut set = LexiconSet::default();
        let mut current: Option<(String, Vec<&str>)> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("#category") {
                let name = rest.trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(Error::Lexicon(format!("line {}: bad category header", lineno + 1)));
                }
                if let Some((n, entries)) = current.take() {
                    set.insert(Lexicon::new(n, entries)?)?;
                }
                current = Some((name.to_string(), Vec::new()));
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match current.as_mut() {
                Some((_, entries)) => entries.push(line),
                None => return Err(Error::Lexicon(format!("line {}: entry before any #category", lineno + 1))),
            }
        }
        if let Some((n, entries)) = current.take() {
            set.insert(Lexicon::new(n, entries)?)?;
        }
        Ok(set)
    }

    /// Adds a lexicon; errors if the category is already present.
    pub fn insert(&mut self, lexicon: Lexicon) -> Result<()> {
        if self.lexicons.contains_key(lexicon.name()) {
            return Err(Error::Lexicon(format!("category `{}` defined twice", lexicon.name())));
        }
        self.lexicons.insert(lexicon.name().to_string(), lexicon);
        Ok(())
    }

    /// Adds or replaces a lexicon.
    pub fn replace(&mut self, lexicon: Lexicon) {
        self.lexicons.insert(lexicon.name().to_string(), lexicon);
    }

    pub fn get(&self, name: &str) -> Result<&Lexicon> {
        self.lexicons.get(name).ok_or_else(|| Error::MissingLexicon(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.lexicons.keys().map(String::as_str)
    }
}

/// Free-function form of [`Lexicon::fraction`].
pub fn lexicon_fraction<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> f64 {
    lexicon.fraction(tokens)
}
