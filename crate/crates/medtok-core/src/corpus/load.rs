//! Parsing of the normalized `TEXT,LOCATION,LABEL` CSV input.
//!
//! Both supported corpora share the same normalized schema: `LOCATION` is a
//! bracketed list of 0-based word indices into the whitespace tokenization of
//! `TEXT`, and `LABEL` is a bracketed list of sense strings parallel to it.
//! Rows that fail structural checks (arity mismatch, out-of-range or
//! non-increasing locations) are rejected individually and reported; rows
//! that cannot be parsed at all abort the load with the offending line.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Read;
use std::path::Path;

use super::SourceId;

/// Input corpus flavor. Both use the normalized schema; the tag is kept for
/// provenance and documentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    MedalCsv,
    UmnCsv,
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusFormat::MedalCsv => write!(f, "medal-csv"),
            CorpusFormat::UmnCsv => write!(f, "umn-csv"),
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "medal-csv" => Ok(CorpusFormat::MedalCsv),
            "umn-csv" => Ok(CorpusFormat::UmnCsv),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

/// One corpus row: text, abbreviation word indices, and gold senses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub source_id: SourceId,
    pub text: String,
    pub locations: Vec<usize>,
    pub labels: Vec<String>,
}

impl RawRecord {
    /// Abbreviation surface form at a gold location (whitespace token).
    pub fn surface_at(&self, location: usize) -> Option<&str> {
        self.text.split_whitespace().nth(location)
    }
}

/// A rejected row with the reason, collected instead of aborting the load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

const EXPECTED_HEADER: [&str; 3] = ["TEXT", "LOCATION", "LABEL"];

/// Load raw records from a CSV file in the declared format.
///
/// Returns the accepted records (row order preserved) together with the
/// issues for rows that were rejected.
pub fn load_raw(path: &Path, format: CorpusFormat) -> Result<(Vec<RawRecord>, Vec<RowIssue>)> {
    let file = std::fs::File::open(path)?;
    parse_raw_records(file, format, &path.display().to_string())
}

/// Parse raw records from any reader; `origin` only labels error messages.
pub fn parse_raw_records<R: Read>(
    reader: R,
    _format: CorpusFormat,
    origin: &str,
) -> Result<(Vec<RawRecord>, Vec<RowIssue>)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    {
        let headers = csv_reader.headers().map_err(|e| Error::Csv {
            line: 1,
            message: e.to_string(),
        })?;
        // An empty file has no header row; treat it as an empty corpus.
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Ok((Vec::new(), Vec::new()));
        }
        let found: Vec<&str> = headers.iter().map(str::trim).collect();
        if found != EXPECTED_HEADER {
            return Err(Error::BadHeader {
                path: origin.to_string(),
                expected: EXPECTED_HEADER.join(","),
                found: found.join(","),
            });
        }
    }

    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut source_id: SourceId = 0;
    for row in csv_reader.records() {
        let row = row.map_err(|e| Error::Csv {
            line: e
                .position()
                .map(|p| p.line())
                .unwrap_or_default(),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or_default();
        if row.len() != 3 {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let text = row[0].to_string();
        let locations = parse_location_list(&row[1]).map_err(|message| Error::MalformedRow {
            line,
            message: format!("LOCATION: {message}"),
        })?;
        let labels = parse_label_list(&row[2]).map_err(|message| Error::MalformedRow {
            line,
            message: format!("LABEL: {message}"),
        })?;

        match check_row(&text, &locations, &labels) {
            Ok(()) => {
                records.push(RawRecord {
                    source_id,
                    text,
                    locations,
                    labels,
                });
                source_id += 1;
            }
            Err(message) => issues.push(RowIssue { line, message }),
        }
    }
    Ok((records, issues))
}

/// Structural checks for one row; failures reject the row, not the file.
fn check_row(text: &str, locations: &[usize], labels: &[String]) -> std::result::Result<(), String> {
    if locations.len() != labels.len() {
        return Err(format!(
            "{} locations but {} labels",
            locations.len(),
            labels.len()
        ));
    }
    let word_count = text.split_whitespace().count();
    let mut previous: Option<usize> = None;
    for &loc in locations {
        if loc >= word_count {
            return Err(format!(
                "location {loc} out of range (text has {word_count} words)"
            ));
        }
        if let Some(prev) = previous {
            if loc <= prev {
                return Err(format!("locations not strictly increasing ({prev} then {loc})"));
            }
        }
        previous = Some(loc);
    }
    Ok(())
}

/// Parse a bracketed integer list such as `[76, 90]` or `[]`.
fn parse_location_list(raw: &str) -> std::result::Result<Vec<usize>, String> {
    let inner = strip_brackets(raw)?;
    let mut out = Vec::new();
    for part in split_top_level(inner) {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let value: usize = part
            .parse()
            .map_err(|_| format!("{part:?} is not a word index"))?;
        out.push(value);
    }
    Ok(out)
}

/// Parse a bracketed string list such as `['Pulmonary Artery', "Histamine Release"]`.
///
/// Entries may be single-quoted, double-quoted, or bare; quoted entries may
/// contain commas.
fn parse_label_list(raw: &str) -> std::result::Result<Vec<String>, String> {
    let inner = strip_brackets(raw)?;
    let mut out = Vec::new();
    for part in split_top_level(inner) {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(unquote(part)?);
    }
    Ok(out)
}

fn strip_brackets(raw: &str) -> std::result::Result<&str, String> {
    let trimmed = raw.trim();
    if let Some(stripped) = trimmed.strip_prefix('[') {
        stripped
            .strip_suffix(']')
            .ok_or_else(|| format!("unterminated bracket list {raw:?}"))
    } else {
        Err(format!("expected bracketed list, got {raw:?}"))
    }
}

/// Split on commas that are not inside single or double quotes.
fn split_top_level(inner: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut quote: Option<char> = None;
    for (i, c) in inner.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '\'' | '"' => quote = Some(c),
                ',' => {
                    parts.push(&inner[start..i]);
                    start = i + 1;
                }
                _ => {}
            },
        }
    }
    parts.push(&inner[start..]);
    parts
}

fn unquote(part: &str) -> std::result::Result<String, String> {
    for q in ['\'', '"'] {
        if let Some(stripped) = part.strip_prefix(q) {
            return stripped
                .strip_suffix(q)
                .map(str::to_string)
                .ok_or_else(|| format!("unterminated quote in {part:?}"));
        }
    }
    Ok(part.to_string())
}
