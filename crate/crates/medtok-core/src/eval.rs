//! Confusion counting, macro and weighted metrics, and k-fold
//! cross-validation.
//!
//! Two evaluation units share this code. Token-level evaluation scores every
//! position of every sequence against the Viterbi path, with `NA_word` part
//! of the macro label universe; it is the headline number for the token
//! classifier and deliberately uses raw decoded labels, no postprocessing.
//! Occurrence-level evaluation scores one prediction per abbreviation
//! occurrence (as a text classifier would be scored) and never introduces
//! `NA_word` into the universe; weighted metrics exclude `NA_word` in both
//! units because its support would swamp every sense label.

use crate::corpus::{
    build_inventory, make_folds, Document, LabelId, LabelVocabulary,
};
use crate::crf::{train, viterbi, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{vectorize_frozen, FeatureTemplate};
use crate::pipeline::{run_token_classifier, PredictionSet};
use crate::postprocess::{filter_distribution, resolve_prediction, PostprocessConfig};
use std::collections::BTreeMap;

/// Per-label true/false positive and false negative counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl LabelCounts {
    pub fn support(&self) -> usize {
        self.true_positives + self.false_negatives
    }

    fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Multiclass confusion counts over any evaluation unit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionStats {
    counts: BTreeMap<LabelId, LabelCounts>,
    total: usize,
}

impl ConfusionStats {
    /// Count one (gold, predicted) sequence pair of equal length.
    pub fn observe(&mut self, gold: &[LabelId], pred: &[LabelId]) -> Result<()> {
        if gold.len() != pred.len() {
            return Err(Error::Eval(format!(
                "gold has {} labels, prediction has {}",
                gold.len(),
                pred.len()
            )));
        }
        for (&g, &p) in gold.iter().zip(pred) {
            self.total += 1;
            if g == p {
                self.counts.entry(g).or_default().true_positives += 1;
            } else {
                self.counts.entry(g).or_default().false_negatives += 1;
                self.counts.entry(p).or_default().false_positives += 1;
            }
        }
        Ok(())
    }

    pub fn of(&self, label: LabelId) -> LabelCounts {
        self.counts.get(&label).copied().unwrap_or_default()
    }

    /// Labels seen in gold or predictions.
    pub fn present_labels(&self) -> Vec<LabelId> {
        self.counts.keys().copied().collect()
    }

    /// Number of evaluation units observed; equals the summed support.
    pub fn total(&self) -> usize {
        self.total
    }
}

/// Standard multiclass confusion of one pair of label sequences.
pub fn confusion(gold: &[LabelId], pred: &[LabelId]) -> Result<ConfusionStats> {
    let mut stats = ConfusionStats::default();
    stats.observe(gold, pred)?;
    Ok(stats)
}

/// Unweighted mean of per-label precision/recall/F1 over `label_set`.
///
/// The caller chooses the universe; token-level evaluation passes the labels
/// present in gold and predictions plus `NA_word`. Labels without support or
/// predictions contribute zeros.
pub fn macro_metrics(stats: &ConfusionStats, label_set: &[LabelId]) -> Result<(f64, f64, f64)> {
    if label_set.is_empty() {
        return Err(Error::Eval("macro metrics need a nonempty label set".into()));
    }
    let n = label_set.len() as f64;
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut f1 = 0.0;
    for &label in label_set {
        let counts = stats.of(label);
        precision += counts.precision();
        recall += counts.recall();
        f1 += counts.f1();
    }
    Ok((precision / n, recall / n, f1 / n))
}

/// Support-weighted mean of per-label metrics over `label_set`, which must
/// exclude `NA_word` and carry nonzero total gold support.
pub fn weighted_metrics(stats: &ConfusionStats, label_set: &[LabelId]) -> Result<(f64, f64, f64)> {
    let mut total_support = 0usize;
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut f1 = 0.0;
    for &label in label_set {
        let counts = stats.of(label);
        let support = counts.support();
        total_support += support;
        let w = support as f64;
        precision += w * counts.precision();
        recall += w * counts.recall();
        f1 += w * counts.f1();
    }
    if total_support == 0 {
        return Err(Error::Eval(
            "weighted metrics need nonzero total support".into(),
        ));
    }
    let z = total_support as f64;
    Ok((precision / z, recall / z, f1 / z))
}

/// Per-label metric row of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetrics {
    pub label: LabelId,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Metrics of one evaluation run (one fold).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub fold: usize,
    pub per_label: Vec<LabelMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Number of evaluation units (tokens or occurrences).
    pub units: usize,
}

/// Assemble a report from confusion counts.
///
/// `include_na` adds `NA_word` to the macro universe (token-level
/// evaluation); weighted metrics always range over sense labels only.
pub fn report_from_confusion(
    stats: &ConfusionStats,
    include_na: bool,
    fold: usize,
) -> Result<EvalReport> {
    let mut universe = stats.present_labels();
    if include_na && !universe.contains(&LabelId::NA_WORD) {
        universe.insert(0, LabelId::NA_WORD);
    }
    let senses: Vec<LabelId> = universe.iter().copied().filter(|l| !l.is_na()).collect();

    let (macro_precision, macro_recall, macro_f1) = macro_metrics(stats, &universe)?;
    let (weighted_precision, weighted_recall, weighted_f1) = weighted_metrics(stats, &senses)?;

    let per_label = universe
        .iter()
        .map(|&label| {
            let counts = stats.of(label);
            LabelMetrics {
                label,
                precision: counts.precision(),
                recall: counts.recall(),
                f1: counts.f1(),
                support: counts.support(),
            }
        })
        .collect();

    Ok(EvalReport {
        fold,
        per_label,
        macro_precision,
        macro_recall,
        macro_f1,
        weighted_precision,
        weighted_recall,
        weighted_f1,
        units: stats.total(),
    })
}

/// Token-level evaluation: decode every document with Viterbi and score all
/// positions, `NA_word` included.
pub fn evaluate_token_level(
    model: &crate::crf::CrfModel,
    docs: &[&Document],
    fold: usize,
) -> Result<EvalReport> {
    let mut stats = ConfusionStats::default();
    for doc in docs {
        if doc.tokens.is_empty() {
            continue;
        }
        let vectors = vectorize_frozen(doc, model.template(), model.feature_index());
        let (path, _) = viterbi(model, &vectors)?;
        stats.observe(&doc.token_labels, &path)?;
    }
    report_from_confusion(&stats, true, fold)
}

/// Occurrence-level evaluation of a prediction set against gold labels.
///
/// With a postprocess config, distributions are candidate-filtered before
/// the argmax is taken.
pub fn evaluate_occurrences(
    set: &PredictionSet,
    docs: &[Document],
    inventory: &crate::corpus::AbbrevInventory,
    postprocess: Option<&PostprocessConfig>,
    fold: usize,
) -> Result<EvalReport> {
    let by_id: BTreeMap<u64, &Document> = docs.iter().map(|d| (d.source_id, d)).collect();
    let mut gold = Vec::with_capacity(set.len());
    let mut pred = Vec::with_capacity(set.len());
    for prediction in &set.predictions {
        let doc = by_id.get(&prediction.source_id).ok_or_else(|| {
            Error::Eval(format!("prediction references unknown document {}", prediction.source_id))
        })?;
        gold.push(doc.token_labels[prediction.position]);
        let resolved = match postprocess {
            Some(config) => {
                let filtered = filter_distribution(prediction, inventory, config);
                resolve_prediction(&filtered, inventory)
            }
            None => resolve_prediction(prediction, inventory),
        };
        pred.push(resolved);
    }
    let stats = confusion(&gold, &pred)?;
    report_from_confusion(&stats, false, fold)
}

/// Mean and sample standard deviation of one metric across folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Stat {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let variance =
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
            variance.sqrt()
        };
        Stat { mean, std }
    }
}

/// Per-fold reports and their mean +/- sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    pub folds: Vec<EvalReport>,
    pub macro_f1: Stat,
    pub macro_precision: Stat,
    pub macro_recall: Stat,
    pub weighted_f1: Stat,
    pub weighted_precision: Stat,
    pub weighted_recall: Stat,
}

impl CvSummary {
    pub fn from_folds(folds: Vec<EvalReport>) -> CvSummary {
        let collect = |f: fn(&EvalReport) -> f64| -> Vec<f64> { folds.iter().map(f).collect() };
        CvSummary {
            macro_f1: Stat::from_values(&collect(|r| r.macro_f1)),
            macro_precision: Stat::from_values(&collect(|r| r.macro_precision)),
            macro_recall: Stat::from_values(&collect(|r| r.macro_recall)),
            weighted_f1: Stat::from_values(&collect(|r| r.weighted_f1)),
            weighted_precision: Stat::from_values(&collect(|r| r.weighted_precision)),
            weighted_recall: Stat::from_values(&collect(|r| r.weighted_recall)),
            folds,
        }
    }
}

/// Occurrence-level companion numbers: raw argmax vs candidate-filtered.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceAnalysis {
    pub raw: CvSummary,
    pub postprocessed: CvSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    /// Headline token-level summary (raw Viterbi labels).
    pub token: CvSummary,
    /// Present when a postprocess config was supplied.
    pub occurrence: Option<OccurrenceAnalysis>,
}

/// Options for [`cross_validate`].
#[derive(Debug, Clone)]
pub struct CvOptions {
    pub folds: usize,
    pub template: FeatureTemplate,
    pub config: TrainConfig,
    /// Also produce occurrence-level raw/postprocessed summaries.
    pub postprocess: Option<PostprocessConfig>,
}

/// k-fold cross-validation: per fold, train on the other folds, build the
/// abbreviation inventory from the training split only, and evaluate on the
/// held-out documents.
pub fn cross_validate(
    docs: &[Document],
    vocab: &LabelVocabulary,
    options: &CvOptions,
) -> Result<CvOutcome> {
    let plan = make_folds(docs, options.folds, options.config.seed)?;
    let mut token_folds = Vec::with_capacity(options.folds);
    let mut raw_folds = Vec::with_capacity(options.folds);
    let mut post_folds = Vec::with_capacity(options.folds);

    for fold in 0..options.folds {
        let (train_docs, test_docs) = plan.split(docs, fold);
        let train_owned: Vec<Document> = train_docs.iter().map(|&d| d.clone()).collect();
        let outcome = train(&train_owned, vocab.len(), &options.template, &options.config)
            .map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })?;
        let inventory = build_inventory(&train_owned);
        debug_assert!(inventory
            .candidates
            .iter()
            .all(|(abbrev, senses)| senses.iter().all(|&s| train_owned.iter().any(|d| {
                d.occurrences()
                    .any(|p| d.tokens[p] == *abbrev && d.token_labels[p] == s)
            }))));

        token_folds.push(evaluate_token_level(&outcome.model, &test_docs, fold)?);

        if let Some(post_config) = &options.postprocess {
            let test_owned: Vec<Document> = test_docs.iter().map(|&d| d.clone()).collect();
            let set = run_token_classifier(&outcome.model, &test_owned)?;
            raw_folds.push(evaluate_occurrences(&set, &test_owned, &inventory, None, fold)?);
            post_folds.push(evaluate_occurrences(
                &set,
                &test_owned,
                &inventory,
                Some(post_config),
                fold,
            )?);
        }
    }

    let occurrence = if options.postprocess.is_some() {
        Some(OccurrenceAnalysis {
            raw: CvSummary::from_folds(raw_folds),
            postprocessed: CvSummary::from_folds(post_folds),
        })
    } else {
        None
    };

    Ok(CvOutcome {
        token: CvSummary::from_folds(token_folds),
        occurrence,
    })
}
