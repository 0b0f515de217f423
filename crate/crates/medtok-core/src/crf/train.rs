//! Maximum-likelihood CRF training over normalized documents.

use super::objective::{batch_objective, empirical_counts, Sequence};
use super::owlqn::{IterationRecord, OwlQn};
use super::{CrfModel, EmissionMap, TrainConfig};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::features::{vectorize_sequence, FeatureIndex, FeatureTemplate, FeatureVector};

pub struct TrainOutcome {
    pub model: CrfModel,
    /// Objective value of every accepted optimizer iteration.
    pub log: Vec<IterationRecord>,
}

/// Train a CRF on the given documents.
///
/// Features are collected from the training documents in order (so runs are
/// reproducible), emission parameters exist for observed (feature, gold
/// label) pairs, weights start at zero, and the optimizer minimizes the
/// elastic-net regularized negative log-likelihood.
pub fn train(
    docs: &[Document],
    label_count: usize,
    template: &FeatureTemplate,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::Training {
            iterations: 0,
            message: "no training documents".into(),
        });
    }
    for doc in docs {
        for &label in &doc.token_labels {
            if label.index() >= label_count {
                return Err(Error::LabelOutOfRange {
                    label: label.0,
                    label_count,
                });
            }
        }
    }

    let trainable: Vec<&Document> = docs.iter().filter(|d| !d.tokens.is_empty()).collect();
    if trainable.is_empty() {
        return Err(Error::Training {
            iterations: 0,
            message: "all training documents are empty".into(),
        });
    }

    let mut index = FeatureIndex::new();
    let vectors: Vec<Vec<FeatureVector>> = trainable
        .iter()
        .map(|doc| vectorize_sequence(doc, template, &mut index, false))
        .collect();
    index.freeze();
    log::info!(
        "training CRF: {} sequences, {} features, {} labels",
        trainable.len(),
        index.len(),
        label_count
    );

    let golds: Vec<Vec<crate::corpus::LabelId>> =
        trainable.iter().map(|doc| doc.token_labels.clone()).collect();
    let emission_map = EmissionMap::from_observations(&vectors, &golds, index.len());
    let param_count = label_count * label_count + emission_map.param_count();
    log::info!(
        "{} parameters ({} transition, {} emission)",
        param_count,
        label_count * label_count,
        emission_map.param_count()
    );

    let sequences: Vec<Sequence<'_>> = trainable
        .iter()
        .zip(&vectors)
        .zip(&golds)
        .map(|((doc, vecs), gold)| Sequence {
            source_id: doc.source_id,
            vectors: vecs.as_slice(),
            golds: gold.as_slice(),
        })
        .collect();
    let empirical = empirical_counts(&sequences, &emission_map, label_count);

    let optimizer = OwlQn {
        c1: config.c1,
        memory: 6,
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
    };

    let template_owned = template.clone();
    let index_for_eval = index.clone();
    let map_for_eval = emission_map.clone();
    let eval = |params: &[f64]| -> Result<(f64, Vec<f64>)> {
        let model = CrfModel::from_parts(
            label_count,
            template_owned.clone(),
            index_for_eval.clone(),
            map_for_eval.clone(),
            params.to_vec(),
        )?;
        batch_objective(&model, &sequences, &empirical, config.c2)
    };

    let (params, log) = optimizer
        .minimize(vec![0.0; param_count], eval)
        .map_err(|e| match e {
            Error::NonFinite(msg) => Error::Training {
                iterations: 0,
                message: msg,
            },
            other => other,
        })?;

    for record in &log {
        log::info!(
            "iteration {:3}  objective {:.6}",
            record.iteration,
            record.objective
        );
    }

    let model = CrfModel::from_parts(label_count, template.clone(), index, emission_map, params)?;
    Ok(TrainOutcome { model, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, LabelId};
    use crate::crf::viterbi;

    /// Corpus where the token identity fully determines the label: "aa"
    /// is always sense 1, "bb" always sense 2, filler tokens are NA_word.
    pub(crate) fn separable_corpus(n_docs: usize) -> (Vec<Document>, usize) {
        let docs = (0..n_docs)
            .map(|i| {
                let (abbrev, label) = if i % 2 == 0 { ("aa", 1) } else { ("bb", 2) };
                Document {
                    source_id: i as u64,
                    tokens: vec![
                        format!("w{}", i % 5),
                        abbrev.to_string(),
                        "filler".to_string(),
                    ],
                    token_labels: vec![LabelId::NA_WORD, LabelId(label), LabelId::NA_WORD],
                    abbrev_mask: vec![false, true, false],
                }
            })
            .collect();
        (docs, 3)
    }

    #[test]
    fn separable_corpus_reaches_perfect_training_accuracy() {
        let (docs, label_count) = separable_corpus(20);
        let template = FeatureTemplate::default();
        let config = TrainConfig::default();
        let outcome = train(&docs, label_count, &template, &config).unwrap();

        let mut index = outcome.model.feature_index().clone();
        for doc in &docs {
            let vectors = vectorize_sequence(doc, &template, &mut index, true);
            let (decoded, _) = viterbi(&outcome.model, &vectors).unwrap();
            assert_eq!(decoded, doc.token_labels, "doc {}", doc.source_id);
        }
    }

    #[test]
    fn objective_decreases_within_one_iteration_without_regularization() {
        let (docs, label_count) = separable_corpus(6);
        let config = TrainConfig {
            c1: 0.0,
            c2: 0.0,
            max_iterations: 1,
            ..TrainConfig::default()
        };
        let outcome = train(&docs, label_count, &FeatureTemplate::default(), &config).unwrap();
        // Zero-weight objective is sum over docs of T ln L.
        let start: f64 = docs.len() as f64 * 3.0 * (label_count as f64).ln();
        assert_eq!(outcome.log.len(), 1);
        assert!(outcome.log[0].objective < start);
    }

    #[test]
    fn training_is_deterministic() {
        let (docs, label_count) = separable_corpus(8);
        let config = TrainConfig {
            max_iterations: 15,
            ..TrainConfig::default()
        };
        let a = train(&docs, label_count, &FeatureTemplate::default(), &config).unwrap();
        let b = train(&docs, label_count, &FeatureTemplate::default(), &config).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn objective_is_non_increasing_over_iterations() {
        let (docs, label_count) = separable_corpus(10);
        let config = TrainConfig {
            max_iterations: 40,
            tolerance: 0.0,
            ..TrainConfig::default()
        };
        let outcome = train(&docs, label_count, &FeatureTemplate::default(), &config).unwrap();
        for pair in outcome.log.windows(2) {
            assert!(pair[1].objective <= pair[0].objective + 1e-9);
        }
    }

    #[test]
    fn label_out_of_vocabulary_is_an_error() {
        let (docs, _) = separable_corpus(4);
        let err = train(&docs, 2, &FeatureTemplate::default(), &TrainConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { .. }));
    }
}
