//! Versioned model container.
//!
//! The file holds everything prediction needs: the feature template, the
//! frozen feature index, the label vocabulary, the weights, and the
//! training-split abbreviation inventory used by postprocessing. JSON with
//! shortest-round-trip floats, so a save/load cycle reproduces identical
//! predictions.

use super::{CrfModel, EmissionMap, TrainConfig};
use crate::corpus::{AbbrevInventory, LabelVocabulary};
use crate::error::{Error, Result};
use crate::features::{FeatureIndex, FeatureTemplate};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MODEL_FORMAT: &str = "medtok-model";
const MODEL_VERSION: u32 = 1;

/// A trained model with the vocabulary and inventory it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: CrfModel,
    pub vocab: LabelVocabulary,
    pub inventory: AbbrevInventory,
    pub config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    labels: Vec<String>,
    template: FeatureTemplate,
    features: Vec<String>,
    emission_map: EmissionMap,
    params: Vec<f64>,
    inventory: AbbrevInventory,
    config: TrainConfig,
}

pub fn write_model<W: Write>(writer: W, bundle: &ModelBundle) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        labels: bundle.vocab.names().to_vec(),
        template: bundle.model.template().clone(),
        features: bundle.model.feature_index().names().to_vec(),
        emission_map: bundle.model.emission_map().clone(),
        params: bundle.model.params().to_vec(),
        inventory: bundle.inventory.clone(),
        config: bundle.config.clone(),
    };
    let mut writer = BufWriter::new(writer);
    serde_json::to_writer(&mut writer, &file).map_err(|e| Error::Model(e.to_string()))?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(reader: R) -> Result<ModelBundle> {
    let file: ModelFile = serde_json::from_reader(BufReader::new(reader))
        .map_err(|e| Error::Model(e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(Error::Model(format!(
            "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
            file.format, file.version
        )));
    }
    let vocab = LabelVocabulary::from_names(file.labels)?;
    let index = FeatureIndex::from_names(file.features);
    let model = CrfModel::from_parts(
        vocab.len(),
        file.template,
        index,
        file.emission_map,
        file.params,
    )?;
    for senses in file.inventory.candidates.values() {
        for &label in senses {
            if label.index() >= vocab.len() || label.is_na() {
                return Err(Error::Model(format!(
                    "inventory references invalid label id {}",
                    label.0
                )));
            }
        }
    }
    Ok(ModelBundle {
        model,
        vocab,
        inventory: file.inventory,
        config: file.config,
    })
}

pub fn write_model_to(path: &Path, bundle: &ModelBundle) -> Result<()> {
    write_model(std::fs::File::create(path)?, bundle)
}

pub fn read_model_from(path: &Path) -> Result<ModelBundle> {
    read_model(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_inventory, Document, LabelId};
    use crate::crf::{marginals, train, viterbi};
    use crate::features::vectorize_sequence;

    fn trained_bundle() -> (ModelBundle, Vec<Document>) {
        let (docs, label_count) = crate::crf::train::tests::separable_corpus(12);
        let mut vocab = LabelVocabulary::new();
        vocab.intern("Sense One").unwrap();
        vocab.intern("Sense Two").unwrap();
        assert_eq!(vocab.len(), label_count);
        let config = TrainConfig {
            max_iterations: 25,
            ..TrainConfig::default()
        };
        let outcome = train(&docs, label_count, &FeatureTemplate::default(), &config).unwrap();
        let bundle = ModelBundle {
            model: outcome.model,
            vocab,
            inventory: build_inventory(&docs),
            config,
        };
        (bundle, docs)
    }

    #[test]
    fn roundtrip_reproduces_identical_predictions() {
        let (bundle, docs) = trained_bundle();
        let mut buf = Vec::new();
        write_model(&mut buf, &bundle).unwrap();
        let reread = read_model(buf.as_slice()).unwrap();
        assert_eq!(reread.model.params(), bundle.model.params());
        assert_eq!(reread, bundle);

        let template = bundle.model.template().clone();
        for doc in &docs {
            let mut index_a = bundle.model.feature_index().clone();
            let mut index_b = reread.model.feature_index().clone();
            let va = vectorize_sequence(doc, &template, &mut index_a, true);
            let vb = vectorize_sequence(doc, &template, &mut index_b, true);
            assert_eq!(viterbi(&bundle.model, &va).unwrap(), viterbi(&reread.model, &vb).unwrap());
            let ma = marginals(&bundle.model, &va).unwrap();
            let mb = marginals(&reread.model, &vb).unwrap();
            assert_eq!(ma.unary, mb.unary);
        }
    }

    #[test]
    fn inventory_with_unknown_label_is_rejected() {
        let (bundle, _) = trained_bundle();
        let mut buf = Vec::new();
        write_model(&mut buf, &bundle).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // Point an inventory entry at a label id beyond the vocabulary.
        let corrupted = text.replace("\"candidates\":{\"aa\":[1]", "\"candidates\":{\"aa\":[9]");
        assert_ne!(text, corrupted, "fixture should contain the aa candidate");
        assert!(read_model(corrupted.as_bytes()).is_err());
    }
}
