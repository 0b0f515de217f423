//! Record normalization: punctuation, stopwords, location remapping,
//! the abbreviation index cutoff, and length truncation.
//!
//! Rule order is fixed: punctuation characters become spaces, stopwords are
//! removed (abbreviation tokens are exempt), gold locations are remapped to
//! surviving-token indices, records whose remapped abbreviation index exceeds
//! the cutoff are dropped, and finally tokens are truncated to the maximum
//! length. An abbreviation token that would be destroyed outright (for
//! example a location pointing at pure punctuation) is a hard error; it never
//! disappears silently.

use super::{Document, LabelId, LabelVocabulary, RawRecord};
use crate::error::{Error, Result};
use std::collections::HashSet;
use std::sync::OnceLock;

/// Frozen stopword list shipped with the repository (`data/stopwords.txt`).
pub static STOPWORDS: &str = include_str!("../../../../data/stopwords.txt");

fn stopword_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.lines().filter(|l| !l.is_empty()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    /// Maximum document length in tokens after normalization.
    pub max_length: usize,
    /// Records with a remapped abbreviation index beyond this are dropped.
    pub max_abbrev_index: usize,
    /// Lowercase non-abbreviation tokens. Abbreviation surfaces always keep
    /// their original case ("PA" and "pa" are different keys).
    pub lowercase: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            max_length: 115,
            max_abbrev_index: 110,
            lowercase: false,
        }
    }
}

/// Result of normalizing one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalizeOutcome {
    Document(Document),
    /// The record was dropped by the abbreviation index cutoff.
    Dropped,
}

impl NormalizeOutcome {
    pub fn into_document(self) -> Option<Document> {
        match self {
            NormalizeOutcome::Document(doc) => Some(doc),
            NormalizeOutcome::Dropped => None,
        }
    }
}

fn is_stopword(token: &str) -> bool {
    stopword_set().contains(token.to_lowercase().as_str())
}

/// Replace every non-alphanumeric character with a space and split.
/// "44/26" becomes ["44", "26"].
fn split_punctuation(raw: &str) -> Vec<String> {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Normalize one record into a token-aligned document, or drop it.
///
/// Sense labels are interned into `vocab` in order of first appearance.
pub fn normalize(
    record: &RawRecord,
    config: &PreprocessConfig,
    vocab: &mut LabelVocabulary,
) -> Result<NormalizeOutcome> {
    let mut tokens: Vec<String> = Vec::new();
    let mut token_labels: Vec<LabelId> = Vec::new();
    let mut abbrev_mask: Vec<bool> = Vec::new();
    let mut remapped: Vec<usize> = Vec::with_capacity(record.locations.len());

    let mut gold = record.locations.iter().zip(&record.labels).peekable();
    for (raw_index, raw_token) in record.text.split_whitespace().enumerate() {
        let gold_label = match gold.peek() {
            Some(&(&loc, label)) if loc == raw_index => {
                gold.next();
                Some(label)
            }
            _ => None,
        };
        let pieces = split_punctuation(raw_token);
        match gold_label {
            Some(label) => {
                // The abbreviation occurrence must survive; it is exempt from
                // stopword removal and lowercasing. If punctuation splits the
                // raw token, the first piece carries the label.
                let mut pieces = pieces.into_iter();
                let surface = pieces.next().ok_or(Error::AbbrevTokenRemoved {
                    source_id: record.source_id,
                    location: raw_index,
                })?;
                remapped.push(tokens.len());
                tokens.push(surface);
                token_labels.push(vocab.intern(label)?);
                abbrev_mask.push(true);
                for piece in pieces {
                    push_plain(&mut tokens, &mut token_labels, &mut abbrev_mask, piece, config);
                }
            }
            None => {
                for piece in pieces {
                    push_plain(&mut tokens, &mut token_labels, &mut abbrev_mask, piece, config);
                }
            }
        }
    }

    if remapped.iter().any(|&i| i > config.max_abbrev_index) {
        return Ok(NormalizeOutcome::Dropped);
    }

    tokens.truncate(config.max_length);
    token_labels.truncate(config.max_length);
    abbrev_mask.truncate(config.max_length);

    Ok(NormalizeOutcome::Document(Document {
        source_id: record.source_id,
        tokens,
        token_labels,
        abbrev_mask,
    }))
}

fn push_plain(
    tokens: &mut Vec<String>,
    token_labels: &mut Vec<LabelId>,
    abbrev_mask: &mut Vec<bool>,
    piece: String,
    config: &PreprocessConfig,
) {
    if is_stopword(&piece) {
        return;
    }
    let piece = if config.lowercase {
        piece.to_lowercase()
    } else {
        piece
    };
    tokens.push(piece);
    token_labels.push(LabelId::NA_WORD);
    abbrev_mask.push(false);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(text: &str, locations: Vec<usize>, labels: Vec<&str>) -> RawRecord {
        RawRecord {
            source_id: 0,
            text: text.to_string(),
            locations,
            labels: labels.into_iter().map(str::to_string).collect(),
        }
    }

    #[test]
    fn stopword_list_is_frozen_at_179_entries() {
        assert_eq!(stopword_set().len(), 179);
        assert!(is_stopword("the"));
        assert!(is_stopword("The"));
        assert!(!is_stopword("pressure"));
    }

    #[test]
    fn umn_sample_aligns_both_occurrences() {
        // Clinical-note shape: "PA" at raw indices 1 and 35, punctuation and
        // stopwords in between.
        let text = "Her PA pressures were 44/26 with a wedge of 22 with a CVP of 10 \
                    and her heart rate of 120 to 139. Her cardiac index was 3. Nursing \
                    made aggressive attempts to bring her PA pressures down";
        let rec = record(text, vec![1, 35], vec!["Pulmonary Artery", "Pulmonary Artery"]);
        let mut vocab = LabelVocabulary::new();
        let doc = normalize(&rec, &PreprocessConfig::default(), &mut vocab)
            .unwrap()
            .into_document()
            .unwrap();

        let positions: Vec<usize> = doc.occurrences().collect();
        assert_eq!(positions.len(), 2);
        let pa = vocab.lookup("Pulmonary Artery").unwrap();
        for &pos in &positions {
            assert_eq!(doc.tokens[pos], "PA");
            assert_eq!(doc.token_labels[pos], pa);
        }
        for (i, &label) in doc.token_labels.iter().enumerate() {
            if !positions.contains(&i) {
                assert_eq!(label, LabelId::NA_WORD);
            }
        }
        // "44/26" became two plain tokens.
        assert!(doc.tokens.iter().any(|t| t == "44"));
        assert!(doc.tokens.iter().any(|t| t == "26"));
        // Stopwords are gone.
        assert!(!doc.tokens.iter().any(|t| t.eq_ignore_ascii_case("the")));
        assert!(!doc.tokens.iter().any(|t| t == "a"));
    }

    #[test]
    fn plain_tokens_pass_through_with_all_na() {
        let rec = record("kinetic disposition betaadrenergic blocking action", vec![], vec![]);
        let mut vocab = LabelVocabulary::new();
        let doc = normalize(&rec, &PreprocessConfig::default(), &mut vocab)
            .unwrap()
            .into_document()
            .unwrap();
        assert_eq!(doc.tokens.len(), 5);
        assert!(doc.token_labels.iter().all(|&l| l == LabelId::NA_WORD));
        assert!(doc.abbrev_mask.iter().all(|&m| !m));
    }

    #[test]
    fn abbrev_beyond_cutoff_drops_record() {
        // 130 alphabetic non-stopword tokens, ABV at raw index 111: with no
        // removals the remapped index is also 111, one past the cutoff.
        let mut words: Vec<String> = (0..130).map(|i| format!("tok{i}")).collect();
        words[111] = "AB".to_string();
        let rec = record(&words.join(" "), vec![111], vec!["Alpha Beta"]);
        let mut vocab = LabelVocabulary::new();
        let outcome = normalize(&rec, &PreprocessConfig::default(), &mut vocab).unwrap();
        assert_eq!(outcome, NormalizeOutcome::Dropped);
    }

    #[test]
    fn abbrev_exactly_at_cutoff_survives_and_truncates() {
        let mut words: Vec<String> = (0..130).map(|i| format!("tok{i}")).collect();
        words[110] = "AB".to_string();
        let rec = record(&words.join(" "), vec![110], vec!["Alpha Beta"]);
        let mut vocab = LabelVocabulary::new();
        let doc = normalize(&rec, &PreprocessConfig::default(), &mut vocab)
            .unwrap()
            .into_document()
            .unwrap();
        assert_eq!(doc.tokens.len(), 115);
        assert_eq!(doc.occurrences().collect::<Vec<_>>(), vec![110]);
    }

    #[test]
    fn abbreviation_equal_to_stopword_is_kept() {
        let rec = record("measured IT level", vec![1], vec!["Inspiratory Time"]);
        let mut vocab = LabelVocabulary::new();
        let doc = normalize(&rec, &PreprocessConfig::default(), &mut vocab)
            .unwrap()
            .into_document()
            .unwrap();
        assert_eq!(doc.tokens, vec!["measured", "IT", "level"]);
        assert_eq!(doc.occurrences().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn abbreviation_destroyed_by_punctuation_is_an_error() {
        let rec = record("count ... done", vec![1], vec!["Ellipsis Sense"]);
        let mut vocab = LabelVocabulary::new();
        let err = normalize(&rec, &PreprocessConfig::default(), &mut vocab).unwrap_err();
        assert!(matches!(
            err,
            Error::AbbrevTokenRemoved { source_id: 0, location: 1 }
        ));
    }

    #[test]
    fn surviving_gold_count_matches_mask_count() {
        let rec = record(
            "alpha PA beta the PA gamma",
            vec![1, 4],
            vec!["Pulmonary Artery", "Physician Assistant"],
        );
        let mut vocab = LabelVocabulary::new();
        let doc = normalize(&rec, &PreprocessConfig::default(), &mut vocab)
            .unwrap()
            .into_document()
            .unwrap();
        assert_eq!(doc.occurrences().count(), rec.locations.len());
        // Different senses of the same surface stay distinct.
        assert_ne!(doc.token_labels[1], doc.token_labels[3]);
    }

    #[test]
    fn lowercase_config_spares_abbreviations() {
        let rec = record("Heart PA Rate", vec![1], vec!["Pulmonary Artery"]);
        let mut vocab = LabelVocabulary::new();
        let config = PreprocessConfig {
            lowercase: true,
            ..PreprocessConfig::default()
        };
        let doc = normalize(&rec, &config, &mut vocab)
            .unwrap()
            .into_document()
            .unwrap();
        assert_eq!(doc.tokens, vec!["heart", "PA", "rate"]);
    }

    #[test]
    fn normalization_is_idempotent_on_token_level() {
        let rec = record(
            "Her PA pressures were 44/26, nursing notes... and her PA again",
            vec![1, 9],
            vec!["Pulmonary Artery", "Pulmonary Artery"],
        );
        let mut vocab = LabelVocabulary::new();
        let first = normalize(&rec, &PreprocessConfig::default(), &mut vocab)
            .unwrap()
            .into_document()
            .unwrap();

        // Re-normalize the already-normalized token stream.
        let again = RawRecord {
            source_id: first.source_id,
            text: first.tokens.join(" "),
            locations: first.occurrences().collect(),
            labels: first
                .occurrences()
                .map(|p| vocab.name(first.token_labels[p]).unwrap().to_string())
                .collect(),
        };
        let second = normalize(&again, &PreprocessConfig::default(), &mut vocab)
            .unwrap()
            .into_document()
            .unwrap();
        assert_eq!(first.tokens, second.tokens);
        assert_eq!(first.token_labels, second.token_labels);
        assert_eq!(first.abbrev_mask, second.abbrev_mask);
    }
}
