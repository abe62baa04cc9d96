//! Reading raw note corpora (JSONL or CSV) into validated records.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use fatlens_core::corpus::{split_sections, strip_boilerplate, Encounter, Language, NoteRecord, Race, RejectReason, Sex};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{IngestSection, InputFormat};
use crate::error::{CliError, Result};

/// Columns of the CSV form, in order. `arrival_time` may be empty.
pub const CSV_COLUMNS: [&str; 13] = [
    "note_id",
    "physician_id",
    "patient_id",
    "timestamp",
    "text",
    "age",
    "sex",
    "race",
    "language",
    "chief_complaints",
    "tested",
    "test_positive",
    "arrival_time",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line (JSONL) or record (CSV, header excluded) number.
    pub line: usize,
    pub note_id: Option<String>,
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestOutput {
    pub notes: Vec<NoteRecord>,
    pub encounters: Vec<Encounter>,
    pub rejects: Vec<Reject>,
}

impl IngestOutput {
    pub fn reject_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rejects {
            *m.entry(r.code.clone()).or_default() += 1;
        }
        m
    }
}

/// Text cleanup and field rules shared by both input formats.
pub struct Ingestor {
    boilerplate: Vec<Regex>,
    headings: Vec<String>,
    vocabulary: Option<BTreeSet<String>>,
}

fn missing(field: &str) -> RejectReason {
    RejectReason::MissingField(field.to_string())
}

fn bad(field: &str, message: impl Into<String>) -> RejectReason {
    RejectReason::BadField { field: field.to_string(), message: message.into() }
}

fn get_str<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a str, RejectReason> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(missing(field)),
        Some(Value::String(s)) if s.trim().is_empty() => Err(missing(field)),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(bad(field, "expected a string")),
    }
}

fn get_bool(obj: &Map<String, Value>, field: &str) -> Result<bool, RejectReason> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(missing(field)),
        Some(Value::Bool(b)) => Ok(*b),
        Some(Value::Number(n)) if n.as_u64() == Some(0) => Ok(false),
        Some(Value::Number(n)) if n.as_u64() == Some(1) => Ok(true),
        Some(Value::String(s)) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            "" => Err(missing(field)),
            _ => Err(bad(field, format!("`{s}` is not a boolean"))),
        },
        Some(_) => Err(bad(field, "expected a boolean")),
    }
}

fn get_time(obj: &Map<String, Value>, field: &str) -> Result<DateTime<Utc>, RejectReason> {
    let s = get_str(obj, field)?;
    DateTime::parse_from_rfc3339(s.trim()).map(|t| t.with_timezone(&Utc)).map_err(|e| bad(field, format!("`{s}`: {e}")))
}

fn get_age(obj: &Map<String, Value>) -> Result<u32, RejectReason> {
    let v = match obj.get("age") {
        None | Some(Value::Null) => return Err(missing("age")),
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) if s.trim().is_empty() => return Err(missing("age")),
        Some(Value::String(s)) => s.trim().parse::<f64>().ok(),
        Some(_) => None,
    };
    match v {
        Some(a) if a.fract() == 0.0 && (0.0..=130.0).contains(&a) => Ok(a as u32),
        _ => Err(bad("age", "expected a whole number of years in 0..=130")),
    }
}

fn parse_sex(s: &str) -> Result<Sex, RejectReason> {
    match s.trim().to_ascii_lowercase().as_str() {
        "female" | "f" => Ok(Sex::Female),
        "male" | "m" => Ok(Sex::Male),
        _ => Err(bad("sex", format!("`{s}` is not female or male"))),
    }
}

fn parse_race(s: &str) -> Result<Race, RejectReason> {
    Race::ALL
        .into_iter()
        .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| bad("race", format!("`{s}` is not one of white, black, hispanic, other")))
}

fn parse_language(v: Option<&Value>) -> Result<Option<Language>, RejectReason> {
    let s = match v {
        None | Some(Value::Null) => return Ok(None),
        Some(Value::String(s)) => s.trim().to_ascii_lowercase(),
        Some(_) => return Err(bad("language", "expected a string")),
    };
    match s.as_str() {
        "" => Ok(None),
        "english" | "en" => Ok(Some(Language::English)),
        "spanish" | "es" => Ok(Some(Language::Spanish)),
        "other" => Ok(Some(Language::Other)),
        _ => Err(bad("language", format!("`{s}` is not english, spanish or other"))),
    }
}

fn parse_complaints(v: Option<&Value>) -> Result<Vec<String>, RejectReason> {
    match v {
        None | Some(Value::Null) => Err(missing("chief_complaints")),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| i.as_str().map(str::to_string).ok_or_else(|| bad("chief_complaints", "expected strings")))
            .collect(),
        Some(Value::String(s)) => Ok(s.split('|').map(str::to_string).collect()),
        Some(_) => Err(bad("chief_complaints", "expected an array")),
    }
}

impl Ingestor {
    pub fn new(config: &IngestSection) -> Result<Self> {
        let boilerplate = config
            .boilerplate_patterns
            .iter()
            .map(|p| Regex::new(p).map_err(|e| CliError::Config(format!("boilerplate pattern `{p}`: {e}"))))
            .collect::<Result<_>>()?;
        let vocabulary = match &config.complaint_vocabulary {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
                Some(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
            }
            None => None,
        };
        Ok(Self { boilerplate, headings: config.section_headings.clone(), vocabulary })
    }

    pub fn clean_text(&self, raw: &str) -> String {
        strip_boilerplate(raw, |line| self.boilerplate.iter().any(|r| r.is_match(line)))
    }

    /// Validates one record given as a JSON object.
    pub fn record(&self, obj: &Map<String, Value>) -> Result<(NoteRecord, Encounter), RejectReason> {
        let note_id = get_str(obj, "note_id")?.trim().to_string();
        let physician_id = get_str(obj, "physician_id")?.trim().to_string();
        let patient_id = get_str(obj, "patient_id")?.trim().to_string();
        let timestamp = get_time(obj, "timestamp")?;
        let raw = match obj.get("text") {
            None | Some(Value::Null) => return Err(missing("text")),
            Some(Value::String(s)) => s,
            Some(_) => return Err(bad("text", "expected a string")),
        };
        let text = self.clean_text(raw);
        if text.trim().is_empty() {
            return Err(RejectReason::EmptyText);
        }
        let age = get_age(obj)?;
        let sex = parse_sex(get_str(obj, "sex")?)?;
        let race = parse_race(get_str(obj, "race")?)?;
        let primary_language = parse_language(obj.get("language"))?;
        let chief_complaints = parse_complaints(obj.get("chief_complaints"))?;
        let tested = get_bool(obj, "tested")?;
        let test_positive = get_bool(obj, "test_positive")?;
        let arrival_time = match obj.get("arrival_time") {
            None | Some(Value::Null) => timestamp,
            Some(Value::String(s)) if s.trim().is_empty() => timestamp,
            Some(_) => get_time(obj, "arrival_time")?,
        };
        let headings: Vec<&str> = self.headings.iter().map(String::as_str).collect();
        let sections = split_sections(&text, &headings);
        let encounter = Encounter {
            note_id: note_id.clone(),
            age,
            sex,
            race,
            primary_language,
            chief_complaints,
            arrival_time,
            tested,
            test_positive,
        }
        .validate(self.vocabulary.as_ref())?;
        Ok((NoteRecord { note_id, physician_id, patient_id, timestamp, text, sections }, encounter))
    }

    fn push(&self, out: &mut IngestOutput, seen: &mut BTreeSet<String>, line: usize, obj: Result<Map<String, Value>, RejectReason>) {
        let id = obj.as_ref().ok().and_then(|o| o.get("note_id")).and_then(Value::as_str).map(|s| s.trim().to_string());
        let result = obj.and_then(|o| self.record(&o)).and_then(|(n, e)| {
            if seen.contains(&n.note_id) {
                Err(RejectReason::DuplicateNoteId(n.note_id.clone()))
            } else {
                Ok((n, e))
            }
        });
        match result {
            Ok((n, e)) => {
                seen.insert(n.note_id.clone());
                out.notes.push(n);
                out.encounters.push(e);
            }
            Err(reason) => out.rejects.push(Reject {
                line,
                note_id: id,
                code: reason.code().to_string(),
                detail: reason.to_string(),
            }),
        }
    }

    pub fn read_jsonl(&self, text: &str) -> IngestOutput {
        let mut out = IngestOutput::default();
        let mut seen = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let obj = match serde_json::from_str::<Value>(line) {
                Ok(Value::Object(o)) => Ok(o),
                Ok(_) => Err(RejectReason::Malformed("expected a JSON object".into())),
                Err(e) => Err(RejectReason::Malformed(e.to_string())),
            };
            self.push(&mut out, &mut seen, i + 1, obj);
        }
        out
    }

    pub fn read_csv(&self, text: &str) -> Result<IngestOutput> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| CliError::Data(format!("CSV header: {e}")))?.clone();
        let required = &CSV_COLUMNS[..CSV_COLUMNS.len() - 1];
        if let Some(col) = required.iter().find(|c| !headers.iter().any(|h| h == **c)) {
            return Err(CliError::Data(format!("CSV header lacks column `{col}`")));
        }
        let mut out = IngestOutput::default();
        let mut seen = BTreeSet::new();
        for (i, rec) in reader.records().enumerate() {
            let obj = match rec {
                Ok(r) if r.len() != headers.len() => {
                    Err(RejectReason::Malformed(format!("{} fields, header has {}", r.len(), headers.len())))
                }
                Ok(r) => Ok(headers.iter().zip(r.iter()).map(|(h, v)| (h.to_string(), json!(v))).collect()),
                Err(e) => Err(RejectReason::Malformed(e.to_string())),
            };
            self.push(&mut out, &mut seen, i + 1, obj);
        }
        Ok(out)
    }

    pub fn read_path(&self, path: &Path, format: InputFormat) -> Result<IngestOutput> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let csv = match format {
            InputFormat::Csv => true,
            InputFormat::Jsonl => false,
            InputFormat::Auto => path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
        };
        if csv {
            self.read_csv(&text)
        } else {
            Ok(self.read_jsonl(&text))
        }
    }
}

/// A note and its encounter as one object of the JSONL ingest schema.
pub fn corpus_record(note: &NoteRecord, enc: &Encounter) -> Value {
    json!({
        "note_id": note.note_id,
        "physician_id": note.physician_id,
        "patient_id": note.patient_id,
        "timestamp": note.timestamp.to_rfc3339(),
        "text": note.text,
        "age": enc.age,
        "sex": enc.sex.as_str(),
        "race": enc.race.as_str(),
        "language": enc.primary_language.map(Language::as_str),
        "chief_complaints": enc.chief_complaints,
        "tested": enc.tested,
        "test_positive": enc.test_positive,
        "arrival_time": enc.arrival_time.to_rfc3339(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingestor() -> Ingestor {
        Ingestor::new(&IngestSection::default()).unwrap()
    }

    const GOOD: &str = r#"{"note_id":"n1","physician_id":"p1","patient_id":"x1","timestamp":"2021-03-01T08:00:00-05:00","text":"History of Present Illness: Pt with pain.\nElectronically signed by Dr. A","age":54,"sex":"F","race":"black","language":"english","chief_complaints":["chest pain"],"tested":true,"test_positive":false}"#;

    #[test]
    fn jsonl_good_and_rejected_lines() {
        let bad_outcome = GOOD.replace(r#""n1""#, r#""n2""#).replace(r#""tested":true"#, r#""tested":false"#).replace(r#""test_positive":false"#, r#""test_positive":true"#);
        let no_text = GOOD.replace(r#""n1""#, r#""n3""#).replace("History of Present Illness: Pt with pain.\\n", "");
        let text = [GOOD, "not json", &bad_outcome, GOOD, &no_text, r#"{"note_id":"n4"}"#].join("\n");
        let out = ingestor().read_jsonl(&text);
        assert_eq!(out.notes.len(), 1);
        let n = &out.notes[0];
        assert_eq!(n.text, "History of Present Illness: Pt with pain.");
        assert_eq!(n.timestamp.to_rfc3339(), "2021-03-01T13:00:00+00:00");
        assert_eq!(n.section("history of present illness").unwrap().text, "Pt with pain.");
        assert_eq!(out.encounters[0].arrival_time, n.timestamp);
        let codes: Vec<(usize, &str)> = out.rejects.iter().map(|r| (r.line, r.code.as_str())).collect();
        assert_eq!(
            codes,
            [(2, "malformed"), (3, "outcome_inconsistent"), (4, "duplicate_note_id"), (5, "empty_text"), (6, "missing_field")]
        );
    }

    #[test]
    fn csv_matches_jsonl() {
        let csv = "note_id,physician_id,patient_id,timestamp,text,age,sex,race,language,chief_complaints,tested,test_positive,arrival_time\n\
                   n1,p1,x1,2021-03-01T13:00:00Z,\"History of Present Illness: Pt with pain.\",54,female,black,english,chest pain|fever,1,0,\n\
                   n2,p1,x2,2021-03-01T14:00:00Z,Some text,abc,male,white,,fever,0,0,\n";
        let out = ingestor().read_csv(csv).unwrap();
        assert_eq!(out.notes.len(), 1);
        assert_eq!(out.encounters[0].chief_complaints, ["chest pain", "fever"]);
        assert_eq!(out.rejects[0].line, 2);
        assert_eq!(out.rejects[0].code, "bad_field");
        let json = corpus_record(&out.notes[0], &out.encounters[0]).to_string();
        let again = ingestor().read_jsonl(&json);
        assert_eq!(again.notes, out.notes);
        assert_eq!(again.encounters, out.encounters);
    }

    #[test]
    fn csv_without_required_column_is_a_data_error() {
        let err = ingestor().read_csv("note_id,text\nn1,x\n").unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
