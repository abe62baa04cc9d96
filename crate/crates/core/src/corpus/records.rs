use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Heading that opens the history-of-present-illness section.
pub const HPI_HEADING: &str = "History of Present Illness";

/// A named span of a note, in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub text: String,
}

/// One timestamped note. `text` has already had system boilerplate removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub note_id: String,
    pub physician_id: String,
    pub patient_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<Section>,
}

impl NoteRecord {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Race {
    White,
    Black,
    Hispanic,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    English,
    Spanish,
    Other,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

impl Race {
    pub const ALL: [Race; 4] = [Race::White, Race::Black, Race::Hispanic, Race::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Race::White => "white",
            Race::Black => "black",
            Race::Hispanic => "hispanic",
            Race::Other => "other",
        }
    }
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::English => "english",
            Language::Spanish => "spanish",
            Language::Other => "other",
        }
    }
}

/// Patient-side data attached to a note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encounter {
    pub note_id: String,
    pub age: u32,
    pub sex: Sex,
    pub race: Race,
    #[serde(default)]
    pub primary_language: Option<Language>,
    /// Sorted and de-duplicated.
    pub chief_complaints: Vec<String>,
    pub arrival_time: DateTime<Utc>,
    pub tested: bool,
    pub test_positive: bool,
}

impl Encounter {
    /// Complaint used for balancing: the lexicographically first one.
    pub fn primary_complaint(&self) -> &str {
        &self.chief_complaints[0]
    }

    /// Normalizes the complaint list and checks the record invariants.
    pub fn validate(mut self, vocabulary: Option<&BTreeSet<String>>) -> Result<Self, RejectReason> {
        if self.test_positive && !self.tested {
            return Err(RejectReason::OutcomeInconsistent);
        }
        let set: BTreeSet<String> = self
            .chief_complaints
            .iter()
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        if set.is_empty() {
            return Err(RejectReason::NoComplaints);
        }
        if let Some(vocab) = vocabulary {
            if let Some(bad) = set.iter().find(|c| !vocab.contains(*c)) {
                return Err(RejectReason::UnknownComplaint(bad.clone()));
            }
        }
        self.chief_complaints = set.into_iter().collect();
        Ok(self)
    }
}

/// Why an input row was rejected at ingest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    MissingField(String),
    BadField { field: String, message: String },
    EmptyText,
    OutcomeInconsistent,
    NoComplaints,
    UnknownComplaint(String),
    DuplicateNoteId(String),
    Malformed(String),
}

impl RejectReason {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::MissingField(_) => "missing_field",
            RejectReason::BadField { .. } => "bad_field",
            RejectReason::EmptyText => "empty_text",
            RejectReason::OutcomeInconsistent => "outcome_inconsistent",
            RejectReason::NoComplaints => "no_complaints",
            RejectReason::UnknownComplaint(_) => "unknown_complaint",
            RejectReason::DuplicateNoteId(_) => "duplicate_note_id",
            RejectReason::Malformed(_) => "malformed",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::MissingField(name) => write!(f, "missing_field: {name}"),
            RejectReason::BadField { field, message } => write!(f, "bad_field: {field}: {message}"),
            RejectReason::UnknownComplaint(c) => write!(f, "unknown_complaint: {c}"),
            RejectReason::DuplicateNoteId(id) => write!(f, "duplicate_note_id: {id}"),
            RejectReason::Malformed(m) => write!(f, "malformed: {m}"),
            other => f.write_str(other.code()),
        }
    }
}

/// Drops leading and trailing lines that are blank or flagged as system
/// boilerplate. Interior lines are kept untouched.
pub fn strip_boilerplate(text: &str, is_boilerplate: impl Fn(&str) -> bool) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let skip = |l: &&str| l.trim().is_empty() || is_boilerplate(l);
    let start = lines.iter().position(|l| !skip(l));
    let Some(start) = start else {
        return String::new();
    };
    let end = lines.iter().rposition(|l| !skip(l)).unwrap_or(start);
    lines[start..=end].join("\n")
}

/// Splits a note at heading lines of the form `Heading: text`. Headings are
/// matched case-insensitively against `headings`; text before the first
/// heading is not returned.
pub fn split_sections(text: &str, headings: &[&str]) -> Vec<Section> {
    let mut out: Vec<Section> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        let hit = headings.iter().find_map(|h| {
            let head = trimmed.get(..h.len())?;
            let rest = &trimmed[h.len()..];
            (head.eq_ignore_ascii_case(h) && rest.starts_with(':')).then(|| (*h, rest[1..].trim()))
        });
        match hit {
            Some((name, rest)) => out.push(Section { name: name.to_string(), text: rest.to_string() }),
            None => {
                if let Some(cur) = out.last_mut() {
                    if !cur.text.is_empty() {
                        cur.text.push('\n');
                    }
                    cur.text.push_str(line);
                }
            }
        }
    }
    out
}
