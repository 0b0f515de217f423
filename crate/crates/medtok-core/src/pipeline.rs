//! Experiment plumbing around the classifier: per-occurrence predictions,
//! context windowing for text-classification exports, and the line-delimited
//! prediction interchange format that external models can write.

use crate::corpus::{Document, LabelId, LabelVocabulary, SourceId};
use crate::crf::{marginals, viterbi, CrfModel};
use crate::error::{Error, Result};
use crate::features::vectorize_frozen;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};

/// Context window half-width, in tokens per side of the occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub m: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { m: 40 }
    }
}

/// Predicted label distribution for one abbreviation occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrencePrediction {
    pub source_id: SourceId,
    pub position: usize,
    pub abbrev: String,
    /// Dense distribution over the full vocabulary (NA_word included).
    pub distribution: Vec<f64>,
    /// Hard label from Viterbi decoding; absent for imported predictions.
    pub viterbi_label: Option<LabelId>,
}

impl OccurrencePrediction {
    /// Highest-probability label, ties toward the lower id.
    pub fn argmax(&self) -> LabelId {
        let mut best = 0usize;
        for (i, &p) in self.distribution.iter().enumerate() {
            if p > self.distribution[best] {
                best = i;
            }
        }
        LabelId(best as u32)
    }

    pub fn validate(&self, label_count: usize) -> Result<()> {
        if self.distribution.len() != label_count {
            return Err(Error::Prediction(format!(
                "occurrence ({}, {}): distribution over {} labels, vocabulary has {label_count}",
                self.source_id,
                self.position,
                self.distribution.len()
            )));
        }
        if self.distribution.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Prediction(format!(
                "occurrence ({}, {}): malformed probability",
                self.source_id, self.position
            )));
        }
        let sum: f64 = self.distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Prediction(format!(
                "occurrence ({}, {}): probabilities sum to {sum}, not 1",
                self.source_id, self.position
            )));
        }
        Ok(())
    }
}

/// Where a prediction set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    InternalCrf,
    External,
}

/// Per-occurrence predictions in stable (source_id, position) order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub provenance: Provenance,
    pub predictions: Vec<OccurrencePrediction>,
}

impl PredictionSet {
    fn sort_and_check_unique(&mut self) -> Result<()> {
        self.predictions
            .sort_by_key(|p| (p.source_id, p.position));
        for pair in self.predictions.windows(2) {
            if pair[0].source_id == pair[1].source_id && pair[0].position == pair[1].position {
                return Err(Error::Prediction(format!(
                    "duplicate occurrence ({}, {})",
                    pair[0].source_id, pair[0].position
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

/// Run the CRF over documents, producing one prediction per abbreviation
/// occurrence: the full per-position marginal distribution plus the Viterbi
/// hard label.
pub fn run_token_classifier(model: &CrfModel, docs: &[Document]) -> Result<PredictionSet> {
    let label_count = model.label_count();
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

    let mut predictions = Vec::new();
    for doc in docs {
        if doc.tokens.is_empty() || doc.occurrences().count() == 0 {
            continue;
        }
        let vectors = vectorize_frozen(doc, model.template(), model.feature_index());
        let m = marginals(model, &vectors)?;
        let (path, _) = viterbi(model, &vectors)?;
        for pos in doc.occurrences() {
            predictions.push(OccurrencePrediction {
                source_id: doc.source_id,
                position: pos,
                abbrev: doc.tokens[pos].clone(),
                distribution: m.row(pos).to_vec(),
                viterbi_label: Some(path[pos]),
            });
        }
    }
    let mut set = PredictionSet {
        provenance: Provenance::InternalCrf,
        predictions,
    };
    set.sort_and_check_unique()?;
    Ok(set)
}

/// Token span of up to `2m + 1` tokens centered on the occurrence,
/// clamped to the sequence bounds.
pub fn extract_window<'a>(tokens: &'a [String], position: usize, config: &WindowConfig) -> &'a [String] {
    assert!(position < tokens.len(), "window position out of bounds");
    let start = position.saturating_sub(config.m);
    let end = (position + config.m + 1).min(tokens.len());
    &tokens[start..end]
}

const PREDICTIONS_FORMAT: &str = "medtok-predictions";
const PREDICTIONS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PredictionsHeader {
    format: String,
    version: u32,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    source_id: SourceId,
    position: usize,
    abbrev: String,
    /// Label name to probability; absent labels are zero.
    probs: BTreeMap<String, f64>,
}

/// Write predictions as line-delimited records under a header line.
/// Output is byte-deterministic for a given set.
pub fn export_predictions<W: Write>(writer: W, set: &PredictionSet, vocab: &LabelVocabulary) -> Result<()> {
    let mut writer = BufWriter::new(writer);
    let header = PredictionsHeader {
        format: PREDICTIONS_FORMAT.to_string(),
        version: PREDICTIONS_VERSION,
        provenance: set.provenance,
    };
    serde_json::to_writer(&mut writer, &header).map_err(|e| Error::Prediction(e.to_string()))?;
    writer.write_all(b"\n")?;
    for prediction in &set.predictions {
        let mut probs = BTreeMap::new();
        for (i, &p) in prediction.distribution.iter().enumerate() {
            if p > 0.0 {
                let name = vocab
                    .name(LabelId(i as u32))
                    .ok_or_else(|| Error::Prediction(format!("label id {i} has no name")))?;
                probs.insert(name.to_string(), p);
            }
        }
        let line = PredictionLine {
            source_id: prediction.source_id,
            position: prediction.position,
            abbrev: prediction.abbrev.clone(),
            probs,
        };
        serde_json::to_writer(&mut writer, &line).map_err(|e| Error::Prediction(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read and validate a prediction interchange file against a corpus.
///
/// Every record must reference a known document, point at an abbreviation
/// position, and use known label names. Distributions whose mass is within
/// 1e-3 of 1 are renormalized; anything further off is rejected.
pub fn import_predictions<R: Read>(
    reader: R,
    docs: &[Document],
    vocab: &LabelVocabulary,
) -> Result<PredictionSet> {
    let by_id: HashMap<SourceId, &Document> = docs.iter().map(|d| (d.source_id, d)).collect();
    let mut lines = BufReader::new(reader).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Prediction("missing header line".into()))??;
    let header: PredictionsHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Prediction(format!("bad header: {e}")))?;
    if header.format != PREDICTIONS_FORMAT || header.version != PREDICTIONS_VERSION {
        return Err(Error::Prediction(format!(
            "expected {PREDICTIONS_FORMAT} v{PREDICTIONS_VERSION}, found {} v{}",
            header.format, header.version
        )));
    }

    let mut predictions = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let record: PredictionLine = serde_json::from_str(&line)
            .map_err(|e| Error::Prediction(format!("line {}: {e}", i + 2)))?;
        let doc = by_id.get(&record.source_id).ok_or_else(|| {
            Error::Prediction(format!("line {}: unknown source_id {}", i + 2, record.source_id))
        })?;
        if record.position >= doc.abbrev_mask.len() || !doc.abbrev_mask[record.position] {
            return Err(Error::Prediction(format!(
                "line {}: position {} of document {} is not an abbreviation",
                i + 2,
                record.position,
                record.source_id
            )));
        }

        let mut distribution = vec![0.0; vocab.len()];
        for (name, p) in &record.probs {
            let label = vocab.lookup(name).ok_or_else(|| {
                Error::Prediction(format!("line {}: unknown label {name:?}", i + 2))
            })?;
            if !(*p >= 0.0) || !p.is_finite() {
                return Err(Error::Prediction(format!(
                    "line {}: malformed probability {p} for {name:?}",
                    i + 2
                )));
            }
            distribution[label.index()] = *p;
        }
        let sum: f64 = distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-3 {
            return Err(Error::Prediction(format!(
                "line {}: probabilities sum to {sum}, outside the 1e-3 tolerance",
                i + 2
            )));
        }
        for p in distribution.iter_mut() {
            *p /= sum;
        }

        predictions.push(OccurrencePrediction {
            source_id: record.source_id,
            position: record.position,
            abbrev: record.abbrev,
            distribution,
            viterbi_label: None,
        });
    }
    let mut set = PredictionSet {
        provenance: Provenance::External,
        predictions,
    };
    set.sort_and_check_unique()?;
    Ok(set)
}
