//! Candidate-sense postprocessing.
//!
//! A prediction's probability mass is restricted to the senses the target
//! abbreviation was observed with in training data, renormalized, and the
//! argmax re-selected. `NA_word` is never a candidate: an occurrence is known
//! to be an abbreviation, so only real senses compete. Degenerate cases (an
//! abbreviation never seen in training, or zero restricted mass) fall back to
//! either the most frequent training sense or the raw distribution.

use crate::corpus::{AbbrevInventory, LabelId};
use crate::pipeline::OccurrencePrediction;
use serde::{Deserialize, Serialize};

/// Behavior when candidate restriction cannot apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    /// One-hot on the abbreviation's most frequent training sense (or the
    /// corpus-wide most frequent sense for unseen abbreviations).
    #[default]
    MostFrequentTrainingSense,
    /// Leave the raw distribution untouched.
    RawArgmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PostprocessConfig {
    pub fallback: Fallback,
}

/// Restrict a prediction to the abbreviation's candidate senses.
pub fn filter_distribution(
    pred: &OccurrencePrediction,
    inventory: &AbbrevInventory,
    config: &PostprocessConfig,
) -> OccurrencePrediction {
    let candidates = inventory.candidates_for(&pred.abbrev);

    let restricted = candidates.and_then(|candidates| {
        let mut distribution = vec![0.0; pred.distribution.len()];
        let mut mass = 0.0;
        for &label in candidates {
            if label.is_na() || label.index() >= distribution.len() {
                continue;
            }
            let p = pred.distribution[label.index()];
            distribution[label.index()] = p;
            mass += p;
        }
        if mass > 0.0 {
            for p in distribution.iter_mut() {
                *p /= mass;
            }
            Some(distribution)
        } else {
            None
        }
    });

    let distribution = match restricted {
        Some(distribution) => distribution,
        None => match config.fallback {
            Fallback::RawArgmax => pred.distribution.clone(),
            Fallback::MostFrequentTrainingSense => {
                let pick = inventory
                    .most_frequent_sense(&pred.abbrev)
                    .or_else(|| inventory.global_most_frequent_sense());
                match pick {
                    Some(label) => {
                        let mut distribution = vec![0.0; pred.distribution.len()];
                        distribution[label.index()] = 1.0;
                        distribution
                    }
                    // Empty inventory: nothing to prefer.
                    None => pred.distribution.clone(),
                }
            }
        },
    };

    OccurrencePrediction {
        source_id: pred.source_id,
        position: pred.position,
        abbrev: pred.abbrev.clone(),
        distribution,
        viterbi_label: pred.viterbi_label,
    }
}

/// Argmax of a (possibly filtered) distribution. Exact probability ties break
/// toward the candidate with the higher training frequency, then toward the
/// lower label id.
pub fn resolve_prediction(pred: &OccurrencePrediction, inventory: &AbbrevInventory) -> LabelId {
    let mut best = 0usize;
    let mut best_freq = inventory.frequency_of(&pred.abbrev, LabelId(0));
    for (i, &p) in pred.distribution.iter().enumerate().skip(1) {
        let current = pred.distribution[best];
        if p > current {
            best = i;
            best_freq = inventory.frequency_of(&pred.abbrev, LabelId(i as u32));
        } else if p == current {
            let freq = inventory.frequency_of(&pred.abbrev, LabelId(i as u32));
            if freq > best_freq {
                best = i;
                best_freq = freq;
            }
        }
    }
    LabelId(best as u32)
}
