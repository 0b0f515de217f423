//! Deterministic k-fold assignment.

use super::{Document, SourceId};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// A k-fold partition of a corpus, reproducible from its seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: HashMap<SourceId, usize>,
}

impl SplitPlan {
    pub fn fold_of(&self, source_id: SourceId) -> Option<usize> {
        self.assignments.get(&source_id).copied()
    }

    /// Split a document slice into (train, test) views for one fold.
    pub fn split<'a>(&self, docs: &'a [Document], fold: usize) -> (Vec<&'a Document>, Vec<&'a Document>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for doc in docs {
            if self.fold_of(doc.source_id) == Some(fold) {
                test.push(doc);
            } else {
                train.push(doc);
            }
        }
        (train, test)
    }
}

/// Shuffle document ids with a seeded generator and deal them round-robin
/// into `k` folds. Fold sizes differ by at most one.
pub fn make_folds(docs: &[Document], k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    if docs.len() < k {
        return Err(Error::Config(format!(
            "cannot split {} documents into {k} folds",
            docs.len()
        )));
    }
    let mut ids: Vec<SourceId> = docs.iter().map(|d| d.source_id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let assignments = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i % k))
        .collect();
    Ok(SplitPlan { k, seed, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelId;

    fn docs(n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| Document {
                source_id: i as SourceId,
                tokens: vec!["w".into()],
                token_labels: vec![LabelId::NA_WORD],
                abbrev_mask: vec![false],
            })
            .collect()
    }

    fn fold_sizes(plan: &SplitPlan) -> Vec<usize> {
        let mut sizes = vec![0; plan.k];
        for &fold in plan.assignments.values() {
            sizes[fold] += 1;
        }
        sizes
    }

    #[test]
    fn nine_docs_three_folds_are_even() {
        let plan = make_folds(&docs(9), 3, 7).unwrap();
        assert_eq!(fold_sizes(&plan), vec![3, 3, 3]);
    }

    #[test]
    fn ten_docs_three_folds_differ_by_one() {
        let plan = make_folds(&docs(10), 3, 7).unwrap();
        let mut sizes = fold_sizes(&plan);
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn same_seed_gives_identical_assignments() {
        let corpus = docs(50);
        let a = make_folds(&corpus, 3, 42).unwrap();
        let b = make_folds(&corpus, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = make_folds(&corpus, 3, 43).unwrap();
        assert_ne!(a.assignments, c.assignments);
    }

    #[test]
    fn every_document_lands_in_exactly_one_fold() {
        let corpus = docs(23);
        let plan = make_folds(&corpus, 4, 1).unwrap();
        assert_eq!(plan.assignments.len(), corpus.len());
        for doc in &corpus {
            let fold = plan.fold_of(doc.source_id).unwrap();
            assert!(fold < 4);
        }
    }

    #[test]
    fn too_few_docs_or_folds_is_an_error() {
        assert!(make_folds(&docs(2), 3, 0).is_err());
        assert!(make_folds(&docs(5), 1, 0).is_err());
    }
}
