//! Corpus ingestion, preprocessing, subsampling, folds, and statistics.
//!
//! A corpus moves through two representations. [`RawRecord`] mirrors one row
//! of the normalized CSV input: free text, word indices of the target
//! abbreviations, and their gold senses. Record-level filtering
//! ([`prune_rare_labels`], [`reduce_overrepresented`], [`subsample_top`])
//! operates on raw records. [`normalize`] then turns each surviving record
//! into a token-aligned [`Document`] whose non-abbreviation positions carry
//! the `NA_word` sentinel label.

mod filter;
mod folds;
mod load;
mod normalize;
mod stats;
mod store;

pub use filter::{prune_rare_labels, reduce_overrepresented, subsample_top, FilterReport};
pub use folds::{make_folds, SplitPlan};
pub use load::{load_raw, parse_raw_records, CorpusFormat, RawRecord, RowIssue};
pub use normalize::{normalize, NormalizeOutcome, PreprocessConfig, STOPWORDS};
pub use stats::{corpus_stats, CorpusStats, LabelsPerAbbrev, NgramCount, StatsOptions};
pub use store::{
    read_documents, read_documents_from, read_raw_records, write_documents, write_documents_to,
    write_raw_records, CorpusFile,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Identifier of a sense label. Id 0 is always the `NA_word` sentinel.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct LabelId(pub u32);

impl LabelId {
    /// The reserved sentinel for non-abbreviation tokens.
    pub const NA_WORD: LabelId = LabelId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_na(self) -> bool {
        self == Self::NA_WORD
    }
}

/// Stable identifier of a corpus record, assigned at ingestion time.
pub type SourceId = u64;

/// Name of the sentinel label.
pub const NA_WORD: &str = "NA_word";

/// Ordered sense-label vocabulary with the `NA_word` sentinel at id 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    names: Vec<String>,
    index: HashMap<String, LabelId>,
}

impl Default for LabelVocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelVocabulary {
    pub fn new() -> Self {
        let mut vocab = LabelVocabulary {
            names: Vec::new(),
            index: HashMap::new(),
        };
        vocab.names.push(NA_WORD.to_string());
        vocab.index.insert(NA_WORD.to_string(), LabelId::NA_WORD);
        vocab
    }

    /// Rebuild a vocabulary from an ordered name list (as persisted on disk).
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        if names.first().map(String::as_str) != Some(NA_WORD) {
            return Err(Error::Vocab(format!(
                "first label must be {NA_WORD:?}, got {:?}",
                names.first()
            )));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), LabelId(i as u32)).is_some() {
                return Err(Error::Vocab(format!("duplicate label {name:?}")));
            }
        }
        Ok(LabelVocabulary { names, index })
    }

    /// Intern a sense label, assigning a fresh id on first sight.
    ///
    /// The sentinel name is rejected: gold senses must be real expansions.
    pub fn intern(&mut self, name: &str) -> Result<LabelId> {
        if name == NA_WORD {
            return Err(Error::Vocab(format!(
                "{NA_WORD:?} is reserved and cannot be used as a sense label"
            )));
        }
        if let Some(&id) = self.index.get(name) {
            return Ok(id);
        }
        let id = LabelId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn lookup(&self, name: &str) -> Option<LabelId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: LabelId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    /// Total number of labels, sentinel included.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        // The sentinel is always present.
        false
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Ids of all sense labels (everything except the sentinel).
    pub fn sense_ids(&self) -> impl Iterator<Item = LabelId> + '_ {
        (1..self.names.len()).map(|i| LabelId(i as u32))
    }
}

/// A preprocessed token sequence with aligned per-token labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub source_id: SourceId,
    pub tokens: Vec<String>,
    pub token_labels: Vec<LabelId>,
    pub abbrev_mask: Vec<bool>,
}

impl Document {
    /// Check the structural invariants; used when loading from disk.
    pub fn validate(&self, label_count: usize) -> Result<()> {
        if self.tokens.len() != self.token_labels.len() || self.tokens.len() != self.abbrev_mask.len()
        {
            return Err(Error::Store(format!(
                "document {}: parallel arrays disagree in length",
                self.source_id
            )));
        }
        for (i, (&label, &is_abbrev)) in self.token_labels.iter().zip(&self.abbrev_mask).enumerate()
        {
            if label.index() >= label_count {
                return Err(Error::LabelOutOfRange {
                    label: label.0,
                    label_count,
                });
            }
            if label.is_na() == is_abbrev {
                return Err(Error::Store(format!(
                    "document {}: token {} violates the NA_word/abbrev_mask pairing",
                    self.source_id, i
                )));
            }
        }
        Ok(())
    }

    /// Positions of abbreviation occurrences, in token order.
    pub fn occurrences(&self) -> impl Iterator<Item = usize> + '_ {
        self.abbrev_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }
}

/// Candidate senses observed for each abbreviation in a training split.
///
/// Built exclusively from training documents; it is the oracle that
/// postprocessing uses to restrict predicted distributions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbbrevInventory {
    /// Abbreviation surface form (original case) to its observed sense ids.
    pub candidates: BTreeMap<String, BTreeSet<LabelId>>,
    /// Occurrence count of each (abbreviation, sense) pair in training data.
    pub frequency: BTreeMap<String, BTreeMap<LabelId, u32>>,
}

impl AbbrevInventory {
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates_for(&self, abbrev: &str) -> Option<&BTreeSet<LabelId>> {
        self.candidates.get(abbrev)
    }

    pub fn frequency_of(&self, abbrev: &str, label: LabelId) -> u32 {
        self.frequency
            .get(abbrev)
            .and_then(|m| m.get(&label))
            .copied()
            .unwrap_or(0)
    }

    /// The training sense with the highest count for `abbrev`.
    /// Ties break toward the lower label id.
    pub fn most_frequent_sense(&self, abbrev: &str) -> Option<LabelId> {
        let counts = self.frequency.get(abbrev)?;
        counts
            .iter()
            .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then(lb.cmp(la)))
            .map(|(&l, _)| l)
    }

    /// The most frequent sense across the whole inventory (fallback for
    /// abbreviations never seen in training). Ties break toward the lower id.
    pub fn global_most_frequent_sense(&self) -> Option<LabelId> {
        let mut totals: BTreeMap<LabelId, u64> = BTreeMap::new();
        for counts in self.frequency.values() {
            for (&label, &count) in counts {
                *totals.entry(label).or_insert(0) += u64::from(count);
            }
        }
        totals
            .into_iter()
            .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then(lb.cmp(la)))
            .map(|(l, _)| l)
    }
}

/// Collect each abbreviation's gold senses from training documents.
pub fn build_inventory(training_docs: &[Document]) -> AbbrevInventory {
    let mut inventory = AbbrevInventory::default();
    for doc in training_docs {
        for pos in doc.occurrences() {
            let surface = doc.tokens[pos].clone();
            let label = doc.token_labels[pos];
            inventory
                .candidates
                .entry(surface.clone())
                .or_default()
                .insert(label);
            *inventory
                .frequency
                .entry(surface)
                .or_default()
                .entry(label)
                .or_insert(0) += 1;
        }
    }
    inventory
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(source_id: SourceId, tokens: &[(&str, u32)]) -> Document {
        Document {
            source_id,
            tokens: tokens.iter().map(|(t, _)| t.to_string()).collect(),
            token_labels: tokens.iter().map(|&(_, l)| LabelId(l)).collect(),
            abbrev_mask: tokens.iter().map(|&(_, l)| l != 0).collect(),
        }
    }

    #[test]
    fn vocabulary_reserves_sentinel() {
        let mut vocab = LabelVocabulary::new();
        assert_eq!(vocab.len(), 1);
        assert_eq!(vocab.name(LabelId::NA_WORD), Some(NA_WORD));
        let a = vocab.intern("Pulmonary Artery").unwrap();
        assert_eq!(a, LabelId(1));
        assert_eq!(vocab.intern("Pulmonary Artery").unwrap(), a);
        assert!(vocab.intern(NA_WORD).is_err());
    }

    #[test]
    fn vocabulary_lookup_name_roundtrip() {
        let mut vocab = LabelVocabulary::new();
        for name in ["alpha", "beta", "gamma"] {
            vocab.intern(name).unwrap();
        }
        for id in 0..vocab.len() as u32 {
            let id = LabelId(id);
            let name = vocab.name(id).unwrap();
            assert_eq!(vocab.lookup(name), Some(id));
        }
    }

    #[test]
    fn inventory_counts_pairs() {
        // Three docs with AB -> {s1, s1, s2}.
        let docs = vec![
            doc(0, &[("AB", 1), ("x", 0)]),
            doc(1, &[("AB", 1)]),
            doc(2, &[("AB", 2), ("y", 0)]),
        ];
        let inv = build_inventory(&docs);
        let cands = inv.candidates_for("AB").unwrap();
        assert_eq!(
            cands.iter().copied().collect::<Vec<_>>(),
            vec![LabelId(1), LabelId(2)]
        );
        assert_eq!(inv.frequency_of("AB", LabelId(1)), 2);
        assert_eq!(inv.frequency_of("AB", LabelId(2)), 1);
        assert_eq!(inv.most_frequent_sense("AB"), Some(LabelId(1)));
    }

    #[test]
    fn inventory_empty_for_no_docs() {
        let inv = build_inventory(&[]);
        assert!(inv.is_empty());
        assert_eq!(inv.global_most_frequent_sense(), None);
    }

    #[test]
    fn document_validation_catches_mask_mismatch() {
        let mut d = doc(7, &[("a", 0), ("AB", 1)]);
        assert!(d.validate(2).is_ok());
        d.abbrev_mask[0] = true;
        assert!(d.validate(2).is_err());
    }
}
