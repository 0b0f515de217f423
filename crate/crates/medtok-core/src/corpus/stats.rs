//! Corpus statistics: count histograms, senses per abbreviation, label
//! support, and frequent n-grams.

use super::{Document, LabelId, LabelVocabulary};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelsPerAbbrev {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

/// An n-gram with its occurrence count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramCount {
    pub tokens: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatsOptions {
    /// How many top labels and n-grams to report.
    pub top_k: usize,
    /// Skip n-grams containing a token with a digit (clinical-note reporting).
    pub exclude_digit_ngrams: bool,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            top_k: 20,
            exclude_digit_ngrams: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    /// Document token count -> number of documents.
    pub word_count_histogram: BTreeMap<usize, usize>,
    /// Abbreviation occurrences per document -> number of documents.
    pub abbrev_count_histogram: BTreeMap<usize, usize>,
    pub labels_per_abbrev: LabelsPerAbbrev,
    /// Sense label -> occurrence count, descending, full table.
    pub label_support: Vec<(String, usize)>,
    pub top_bigrams: Vec<NgramCount>,
    pub top_trigrams: Vec<NgramCount>,
    pub total_occurrences: usize,
    pub distinct_abbrevs: usize,
    pub distinct_words: usize,
}

/// Compute corpus statistics over normalized documents.
pub fn corpus_stats(
    docs: &[Document],
    vocab: &LabelVocabulary,
    options: &StatsOptions,
) -> Result<CorpusStats> {
    if docs.is_empty() {
        return Err(Error::Eval("cannot compute statistics of an empty corpus".into()));
    }

    let mut word_count_histogram = BTreeMap::new();
    let mut abbrev_count_histogram = BTreeMap::new();
    let mut senses: HashMap<&str, HashSet<LabelId>> = HashMap::new();
    let mut support: HashMap<LabelId, usize> = HashMap::new();
    let mut words: HashSet<String> = HashSet::new();
    let mut bigrams: HashMap<Vec<String>, usize> = HashMap::new();
    let mut trigrams: HashMap<Vec<String>, usize> = HashMap::new();
    let mut total_occurrences = 0usize;

    for doc in docs {
        *word_count_histogram.entry(doc.tokens.len()).or_insert(0) += 1;
        *abbrev_count_histogram
            .entry(doc.occurrences().count())
            .or_insert(0) += 1;
        for pos in doc.occurrences() {
            total_occurrences += 1;
            senses
                .entry(doc.tokens[pos].as_str())
                .or_default()
                .insert(doc.token_labels[pos]);
            *support.entry(doc.token_labels[pos]).or_insert(0) += 1;
        }
        let lowered: Vec<String> = doc.tokens.iter().map(|t| t.to_lowercase()).collect();
        for token in &lowered {
            words.insert(token.clone());
        }
        for n in [2usize, 3] {
            let counter = if n == 2 { &mut bigrams } else { &mut trigrams };
            for window in lowered.windows(n) {
                if options.exclude_digit_ngrams
                    && window.iter().any(|t| t.chars().any(|c| c.is_ascii_digit()))
                {
                    continue;
                }
                *counter.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
    }

    let labels_per_abbrev = if senses.is_empty() {
        LabelsPerAbbrev { mean: 0.0, min: 0, max: 0 }
    } else {
        let counts: Vec<usize> = senses.values().map(HashSet::len).collect();
        LabelsPerAbbrev {
            mean: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
            min: counts.iter().copied().min().unwrap(),
            max: counts.iter().copied().max().unwrap(),
        }
    };

    let mut label_support: Vec<(String, usize)> = support
        .into_iter()
        .map(|(id, n)| (vocab.name(id).unwrap_or("?").to_string(), n))
        .collect();
    label_support.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    Ok(CorpusStats {
        word_count_histogram,
        abbrev_count_histogram,
        labels_per_abbrev,
        label_support,
        top_bigrams: top_ngrams(bigrams, options.top_k),
        top_trigrams: top_ngrams(trigrams, options.top_k),
        total_occurrences,
        distinct_abbrevs: senses.len(),
        distinct_words: words.len(),
    })
}

fn top_ngrams(counts: HashMap<Vec<String>, usize>, k: usize) -> Vec<NgramCount> {
    let mut entries: Vec<(Vec<String>, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    entries
        .into_iter()
        .take(k)
        .map(|(tokens, count)| NgramCount { tokens, count })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceId;

    fn doc(source_id: SourceId, tokens: &[&str], gold: &[(usize, u32)]) -> Document {
        let mut token_labels = vec![LabelId::NA_WORD; tokens.len()];
        let mut abbrev_mask = vec![false; tokens.len()];
        for &(pos, label) in gold {
            token_labels[pos] = LabelId(label);
            abbrev_mask[pos] = true;
        }
        Document {
            source_id,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            token_labels,
            abbrev_mask,
        }
    }

    fn vocab(names: &[&str]) -> LabelVocabulary {
        let mut v = LabelVocabulary::new();
        for n in names {
            v.intern(n).unwrap();
        }
        v
    }

    #[test]
    fn bigram_counting_on_repeated_pair() {
        let d = doc(0, &["a", "b", "a", "b"], &[]);
        let v = vocab(&[]);
        let stats = corpus_stats(&[d], &v, &StatsOptions::default()).unwrap();
        let ab = stats
            .top_bigrams
            .iter()
            .find(|g| g.tokens == vec!["a".to_string(), "b".to_string()])
            .unwrap();
        assert_eq!(ab.count, 2);
        let aba = &stats.top_trigrams[0];
        assert_eq!(aba.count, 1);
    }

    #[test]
    fn single_doc_histograms_have_one_entry() {
        let d = doc(0, &["x", "AB", "y"], &[(1, 1)]);
        let v = vocab(&["Alpha"]);
        let stats = corpus_stats(&[d], &v, &StatsOptions::default()).unwrap();
        assert_eq!(stats.word_count_histogram.len(), 1);
        assert_eq!(stats.word_count_histogram[&3], 1);
        assert_eq!(stats.abbrev_count_histogram[&1], 1);
    }

    #[test]
    fn label_support_sums_to_total_occurrences() {
        let docs = vec![
            doc(0, &["AB", "x"], &[(0, 1)]),
            doc(1, &["CD", "AB"], &[(0, 2), (1, 1)]),
        ];
        let v = vocab(&["Alpha", "Gamma"]);
        let stats = corpus_stats(&docs, &v, &StatsOptions::default()).unwrap();
        let sum: usize = stats.label_support.iter().map(|&(_, n)| n).sum();
        assert_eq!(sum, stats.total_occurrences);
        assert_eq!(stats.total_occurrences, 3);
    }

    #[test]
    fn senses_per_abbrev_distinguishes_case_and_counts_distinct() {
        let docs = vec![
            doc(0, &["AB"], &[(0, 1)]),
            doc(1, &["AB"], &[(0, 2)]),
            doc(2, &["ab"], &[(0, 1)]),
        ];
        let v = vocab(&["Alpha", "Gamma"]);
        let stats = corpus_stats(&docs, &v, &StatsOptions::default()).unwrap();
        // "AB" has 2 senses, "ab" has 1: mean 1.5, min 1, max 2.
        assert_eq!(stats.distinct_abbrevs, 2);
        assert!((stats.labels_per_abbrev.mean - 1.5).abs() < 1e-12);
        assert_eq!(stats.labels_per_abbrev.min, 1);
        assert_eq!(stats.labels_per_abbrev.max, 2);
    }

    #[test]
    fn digit_ngram_exclusion() {
        let d = doc(0, &["dose", "44", "mg"], &[]);
        let v = vocab(&[]);
        let with = corpus_stats(
            &[d.clone()],
            &v,
            &StatsOptions { top_k: 10, exclude_digit_ngrams: false },
        )
        .unwrap();
        let without = corpus_stats(
            &[d],
            &v,
            &StatsOptions { top_k: 10, exclude_digit_ngrams: true },
        )
        .unwrap();
        assert_eq!(with.top_bigrams.len(), 2);
        assert!(without.top_bigrams.is_empty());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let v = vocab(&[]);
        assert!(corpus_stats(&[], &v, &StatsOptions::default()).is_err());
    }
}
