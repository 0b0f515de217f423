//! Record-level corpus filtering: rare-label pruning, over-represented
//! record reduction, and top-k abbreviation/label subsampling.
//!
//! All three operate on raw records and are deterministic. Pruning and
//! reduction count a label once per record containing it; subsampling ranks
//! by occurrence count with lexicographic tie-breaking.

use super::RawRecord;
use crate::error::{Error, Result};
use std::collections::{BTreeSet, HashMap, HashSet};

/// Before/after counts reported by each filtering pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterReport {
    pub rows_before: usize,
    pub rows_after: usize,
    pub labels_before: usize,
    pub labels_after: usize,
    pub abbrevs_before: usize,
    pub abbrevs_after: usize,
}

fn count_distinct(records: &[RawRecord]) -> (usize, usize) {
    let mut labels: HashSet<&str> = HashSet::new();
    let mut abbrevs: HashSet<&str> = HashSet::new();
    for record in records {
        let words: Vec<&str> = record.text.split_whitespace().collect();
        for (&loc, label) in record.locations.iter().zip(&record.labels) {
            labels.insert(label);
            abbrevs.insert(words[loc]);
        }
    }
    (labels.len(), abbrevs.len())
}

fn report(before: &[RawRecord], after: &[RawRecord]) -> FilterReport {
    let (labels_before, abbrevs_before) = count_distinct(before);
    let (labels_after, abbrevs_after) = count_distinct(after);
    FilterReport {
        rows_before: before.len(),
        rows_after: after.len(),
        labels_before,
        labels_after,
        abbrevs_before,
        abbrevs_after,
    }
}

/// Drop labeled occurrences of every label present in fewer than
/// `min_support` records; records left without any occurrence are dropped.
pub fn prune_rare_labels(
    records: Vec<RawRecord>,
    min_support: usize,
) -> Result<(Vec<RawRecord>, FilterReport)> {
    if min_support < 1 {
        return Err(Error::Config("min_support must be at least 1".into()));
    }
    let mut row_support: HashMap<&str, usize> = HashMap::new();
    for record in &records {
        let distinct: BTreeSet<&str> = record.labels.iter().map(String::as_str).collect();
        for label in distinct {
            *row_support.entry(label).or_insert(0) += 1;
        }
    }
    let keep: HashSet<String> = row_support
        .into_iter()
        .filter(|&(_, n)| n >= min_support)
        .map(|(l, _)| l.to_string())
        .collect();

    let mut kept = Vec::with_capacity(records.len());
    for mut record in records.iter().cloned() {
        let paired: Vec<(usize, String)> = record
            .locations
            .iter()
            .copied()
            .zip(record.labels.iter().cloned())
            .filter(|(_, l)| keep.contains(l))
            .collect();
        if paired.is_empty() {
            continue;
        }
        record.locations = paired.iter().map(|&(loc, _)| loc).collect();
        record.labels = paired.into_iter().map(|(_, l)| l).collect();
        kept.push(record);
    }
    let rep = report(&records, &kept);
    Ok((kept, rep))
}

/// Drop every record whose labels can all point to at least `threshold`
/// other remaining records.
///
/// The pass is a single sweep in ascending source_id order, re-counting
/// supports after each drop, which makes the aggregate outcome reproducible.
pub fn reduce_overrepresented(
    records: Vec<RawRecord>,
    threshold: usize,
) -> Result<(Vec<RawRecord>, FilterReport)> {
    if threshold < 1 {
        return Err(Error::Config("reduce threshold must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].source_id);

    let mut row_support: HashMap<&str, usize> = HashMap::new();
    let mut per_record: Vec<BTreeSet<&str>> = Vec::with_capacity(records.len());
    for record in &records {
        let distinct: BTreeSet<&str> = record.labels.iter().map(String::as_str).collect();
        for label in &distinct {
            *row_support.entry(label).or_insert(0) += 1;
        }
        per_record.push(distinct);
    }

    let mut dropped = vec![false; records.len()];
    for &i in &order {
        let all_covered = per_record[i]
            .iter()
            .all(|label| row_support[label] - 1 >= threshold);
        if all_covered {
            dropped[i] = true;
            for label in &per_record[i] {
                *row_support.get_mut(label).unwrap() -= 1;
            }
        }
    }

    let kept: Vec<RawRecord> = records
        .iter()
        .enumerate()
        .filter(|&(i, _)| !dropped[i])
        .map(|(_, r)| r.clone())
        .collect();
    let rep = report(&records, &kept);
    Ok((kept, rep))
}

/// Keep only occurrences of the `top_abbrevs` most frequent abbreviations and
/// their `top_labels` most frequent labels.
///
/// Frequency is the occurrence count (each gold location counts once); ties
/// break toward the lexicographically smaller surface form or label.
pub fn subsample_top(
    records: Vec<RawRecord>,
    top_abbrevs: usize,
    top_labels: usize,
) -> Result<(Vec<RawRecord>, FilterReport)> {
    if top_abbrevs < 1 || top_labels < 1 {
        return Err(Error::Config("top-k counts must be at least 1".into()));
    }

    let mut abbrev_freq: HashMap<&str, usize> = HashMap::new();
    for record in &records {
        let words: Vec<&str> = record.text.split_whitespace().collect();
        for &loc in &record.locations {
            *abbrev_freq.entry(words[loc]).or_insert(0) += 1;
        }
    }
    let keep_abbrevs = top_k(abbrev_freq, top_abbrevs);

    let mut label_freq: HashMap<&str, usize> = HashMap::new();
    for record in &records {
        let words: Vec<&str> = record.text.split_whitespace().collect();
        for (&loc, label) in record.locations.iter().zip(&record.labels) {
            if keep_abbrevs.contains(words[loc]) {
                *label_freq.entry(label).or_insert(0) += 1;
            }
        }
    }
    let keep_labels = top_k(label_freq, top_labels);

    let mut kept = Vec::with_capacity(records.len());
    for record in &records {
        let words: Vec<&str> = record.text.split_whitespace().collect();
        let paired: Vec<(usize, String)> = record
            .locations
            .iter()
            .copied()
            .zip(record.labels.iter().cloned())
            .filter(|&(loc, ref label)| {
                keep_abbrevs.contains(words[loc]) && keep_labels.contains(label.as_str())
            })
            .collect();
        if paired.is_empty() {
            continue;
        }
        let mut record = record.clone();
        record.locations = paired.iter().map(|&(loc, _)| loc).collect();
        record.labels = paired.into_iter().map(|(_, l)| l).collect();
        kept.push(record);
    }
    let rep = report(&records, &kept);
    Ok((kept, rep))
}

fn top_k(freq: HashMap<&str, usize>, k: usize) -> HashSet<String> {
    let mut entries: Vec<(&str, usize)> = freq.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    entries
        .into_iter()
        .take(k)
        .map(|(s, _)| s.to_string())
        .collect()
}
