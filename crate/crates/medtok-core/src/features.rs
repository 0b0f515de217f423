//! Handcrafted token features for the CRF.
//!
//! The template emits the lowercased token identity, short prefixes and
//! suffixes, capitalization and digit shape, the abbreviation check flag, the
//! identity and capitalization of each neighbor inside the context window,
//! and boundary markers. Feature strings are stable across runs: ids are
//! assigned in encounter order while the index is unfrozen, and unknown
//! features are silently dropped once it is frozen.

use crate::corpus::Document;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Id of an interned feature string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(pub u32);

impl FeatureId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The feature template; the default mirrors a [-1, +1] context window with
/// prefixes and suffixes of lengths 1..=3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTemplate {
    pub prefix_lengths: Vec<usize>,
    pub suffix_lengths: Vec<usize>,
    pub use_capitalization: bool,
    pub use_abbrev_flag: bool,
    /// Context offsets, sorted, excluding 0.
    pub window: Vec<i32>,
    pub use_bos_eos: bool,
}

impl Default for FeatureTemplate {
    fn default() -> Self {
        FeatureTemplate {
            prefix_lengths: vec![1, 2, 3],
            suffix_lengths: vec![1, 2, 3],
            use_capitalization: true,
            use_abbrev_flag: true,
            window: vec![-1, 1],
            use_bos_eos: true,
        }
    }
}

/// Binary feature vector: sorted, deduplicated feature ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector(pub Vec<FeatureId>);

impl FeatureVector {
    pub fn ids(&self) -> &[FeatureId] {
        &self.0
    }
}

/// Injective map from feature strings to dense ids.
#[derive(Debug, Clone, Default)]
pub struct FeatureIndex {
    names: Vec<String>,
    map: HashMap<String, FeatureId>,
    frozen: bool,
}

impl FeatureIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn lookup(&self, feature: &str) -> Option<FeatureId> {
        self.map.get(feature).copied()
    }

    pub fn name(&self, id: FeatureId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    /// Intern a feature string. Returns `None` for unseen features once the
    /// index is frozen.
    pub fn intern(&mut self, feature: &str) -> Option<FeatureId> {
        if let Some(&id) = self.map.get(feature) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = FeatureId(self.names.len() as u32);
        self.names.push(feature.to_string());
        self.map.insert(feature.to_string(), id);
        Some(id)
    }

    /// Ordered feature names; the position is the id.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Rebuild from the persisted name list; the result is frozen.
    pub fn from_names(names: Vec<String>) -> Self {
        let map = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), FeatureId(i as u32)))
            .collect();
        FeatureIndex {
            names,
            map,
            frozen: true,
        }
    }
}

fn char_len(token: &str) -> usize {
    token.chars().count()
}

fn is_all_caps(token: &str) -> bool {
    let mut saw_alpha = false;
    for c in token.chars() {
        if c.is_alphabetic() {
            saw_alpha = true;
            if !c.is_uppercase() {
                return false;
            }
        }
    }
    saw_alpha
}

fn is_capitalized(token: &str) -> bool {
    let mut chars = token.chars();
    match chars.next() {
        Some(first) if first.is_uppercase() => {
            chars.all(|c| !c.is_alphabetic() || c.is_lowercase())
        }
        _ => false,
    }
}

fn is_digit(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit())
}

fn prefix(token: &str, len: usize) -> String {
    token.chars().take(len).collect()
}

fn suffix(token: &str, len: usize) -> String {
    let total = char_len(token);
    token.chars().skip(total - len).collect()
}

/// Emit the feature strings for one position of a token sequence.
///
/// `abbrev_mask` supplies the check flag: occurrences are known at both
/// train and prediction time, since the task is sense disambiguation of
/// marked abbreviations, not abbreviation detection.
pub fn extract_token_features(
    tokens: &[String],
    abbrev_mask: &[bool],
    position: usize,
    template: &FeatureTemplate,
) -> Vec<String> {
    debug_assert!(position < tokens.len());
    let token = &tokens[position];
    let lower = token.to_lowercase();
    let length = char_len(token);

    let mut features = Vec::with_capacity(16);
    features.push(format!("w={lower}"));
    for &len in &template.prefix_lengths {
        if length >= len {
            features.push(format!("pre{len}={}", prefix(&lower, len)));
        }
    }
    for &len in &template.suffix_lengths {
        if length >= len {
            features.push(format!("suf{len}={}", suffix(&lower, len)));
        }
    }
    if template.use_capitalization {
        features.push(format!("istitle={}", is_capitalized(token)));
        features.push(format!("isupper={}", is_all_caps(token)));
        features.push(format!("isdigit={}", is_digit(token)));
    }
    if template.use_abbrev_flag {
        features.push(format!("abv={}", abbrev_mask[position]));
    }
    for &offset in &template.window {
        if offset == 0 {
            continue;
        }
        let neighbor = position as i64 + i64::from(offset);
        if neighbor < 0 || neighbor >= tokens.len() as i64 {
            continue;
        }
        let neighbor = neighbor as usize;
        let tag = if offset > 0 {
            format!("+{offset}")
        } else {
            offset.to_string()
        };
        features.push(format!("{tag}:w={}", tokens[neighbor].to_lowercase()));
        if template.use_capitalization {
            features.push(format!("{tag}:istitle={}", is_capitalized(&tokens[neighbor])));
            features.push(format!("{tag}:isupper={}", is_all_caps(&tokens[neighbor])));
        }
    }
    if template.use_bos_eos {
        if position == 0 {
            features.push("BOS".to_string());
        }
        if position + 1 == tokens.len() {
            features.push("EOS".to_string());
        }
    }
    features
}

/// Vectorize a whole document: one binary feature vector per token.
///
/// With `freeze` false, unseen features get fresh ids; with `freeze` true the
/// index is left untouched and unknown features are dropped.
/// Vectorize against a frozen index without mutating it.
pub fn vectorize_frozen(
    doc: &Document,
    template: &FeatureTemplate,
    index: &FeatureIndex,
) -> Vec<FeatureVector> {
    let mut vectors = Vec::with_capacity(doc.tokens.len());
    for position in 0..doc.tokens.len() {
        let mut ids: Vec<FeatureId> =
            extract_token_features(&doc.tokens, &doc.abbrev_mask, position, template)
                .iter()
                .filter_map(|f| index.lookup(f))
                .collect();
        ids.sort_unstable();
        ids.dedup();
        vectors.push(FeatureVector(ids));
    }
    vectors
}

pub fn vectorize_sequence(
    doc: &Document,
    template: &FeatureTemplate,
    index: &mut FeatureIndex,
    freeze: bool,
) -> Vec<FeatureVector> {
    let allow_new = !freeze && !index.is_frozen();
    let mut vectors = Vec::with_capacity(doc.tokens.len());
    for position in 0..doc.tokens.len() {
        let mut ids: Vec<FeatureId> =
            extract_token_features(&doc.tokens, &doc.abbrev_mask, position, template)
                .iter()
                .filter_map(|f| {
                    if allow_new {
                        index.intern(f)
                    } else {
                        index.lookup(f)
                    }
                })
                .collect();
        ids.sort_unstable();
        ids.dedup();
        vectors.push(FeatureVector(ids));
    }
    vectors
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelId, SourceId};

    fn doc(source_id: SourceId, tokens: &[&str], mask: &[bool]) -> Document {
        Document {
            source_id,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            token_labels: mask
                .iter()
                .map(|&m| if m { LabelId(1) } else { LabelId::NA_WORD })
                .collect(),
            abbrev_mask: mask.to_vec(),
        }
    }

    fn strings(tokens: &[&str], mask: &[bool], pos: usize) -> Vec<String> {
        let owned: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
        extract_token_features(&owned, mask, pos, &FeatureTemplate::default())
    }

    #[test]
    fn abbreviation_position_emits_expected_features() {
        let features = strings(&["her", "PA", "pressures"], &[false, true, false], 1);
        for expected in ["w=pa", "isupper=true", "abv=true", "-1:w=her", "+1:w=pressures"] {
            assert!(features.iter().any(|f| f == expected), "missing {expected}: {features:?}");
        }
        // Length 2 token: no length-3 prefix or suffix.
        assert!(!features.iter().any(|f| f.starts_with("pre3=")));
        assert!(features.iter().any(|f| f == "pre2=pa"));
        assert!(features.iter().any(|f| f == "suf1=a"));
    }

    #[test]
    fn sequence_start_marks_bos_without_left_context() {
        let features = strings(&["her", "PA"], &[false, true], 0);
        assert!(features.iter().any(|f| f == "BOS"));
        assert!(!features.iter().any(|f| f.starts_with("-1:")));
        assert!(features.iter().any(|f| f == "+1:w=pa"));
    }

    #[test]
    fn empty_window_emits_no_neighbor_features() {
        let template = FeatureTemplate {
            window: vec![],
            ..FeatureTemplate::default()
        };
        let tokens: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let features = extract_token_features(&tokens, &[false, false, false], 1, &template);
        assert!(features.iter().all(|f| !f.contains(":w=")));
    }

    #[test]
    fn digit_token_shape() {
        let features = strings(&["44"], &[false], 0);
        assert!(features.iter().any(|f| f == "isdigit=true"));
        assert!(features.iter().any(|f| f == "isupper=false"));
    }

    #[test]
    fn identical_contexts_vectorize_identically() {
        let d = doc(0, &["x", "AB", "y", "x", "AB", "y"], &[false, true, false, false, true, false]);
        let mut index = FeatureIndex::new();
        let vectors = vectorize_sequence(&d, &FeatureTemplate::default(), &mut index, false);
        assert_eq!(vectors[1], vectors[4]);
        assert_eq!(vectors[0], vectors[3]);
    }

    #[test]
    fn frozen_index_drops_unknown_features() {
        let train = doc(0, &["alpha", "AB"], &[false, true]);
        let mut index = FeatureIndex::new();
        vectorize_sequence(&train, &FeatureTemplate::default(), &mut index, false);
        index.freeze();
        let size_after_training = index.len();

        let test = doc(1, &["novelword", "AB"], &[false, true]);
        let vectors = vectorize_sequence(&test, &FeatureTemplate::default(), &mut index, true);
        assert_eq!(index.len(), size_after_training);
        // The novel token still gets its known shape features.
        assert!(!vectors[0].ids().is_empty());
        for id in vectors[0].ids() {
            assert!(id.index() < size_after_training);
        }
        assert!(index.lookup("w=novelword").is_none());
    }

    #[test]
    fn feature_ids_are_stable_across_runs() {
        let d = doc(0, &["her", "PA", "pressures", "were", "44"], &[false, true, false, false, false]);
        let build = || {
            let mut index = FeatureIndex::new();
            let vectors = vectorize_sequence(&d, &FeatureTemplate::default(), &mut index, false);
            (index.names().to_vec(), vectors)
        };
        let (names_a, vectors_a) = build();
        let (names_b, vectors_b) = build();
        assert_eq!(names_a, names_b);
        assert_eq!(vectors_a, vectors_b);
    }

    #[test]
    fn extraction_is_position_local() {
        let base = vec!["a".to_string(), "b".into(), "c".into(), "d".into(), "e".into()];
        let mask = vec![false; 5];
        let template = FeatureTemplate::default();
        let before = extract_token_features(&base, &mask, 1, &template);
        let mut changed = base.clone();
        changed[4] = "zzz".to_string();
        let after = extract_token_features(&changed, &mask, 1, &template);
        assert_eq!(before, after);
    }
}
