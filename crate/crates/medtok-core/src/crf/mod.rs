//! Linear-chain conditional random field: scoring, exact inference,
//! maximum-likelihood training with elastic-net regularization, and decoding.
//!
//! The model keeps a dense label-transition matrix and sparse emission
//! weights over (feature, label) pairs observed in training data, which keeps
//! memory bounded even for corpora with large sense vocabularies. Inference
//! runs the forward-backward recursions over per-position potentials with
//! per-step renormalization, so sequences of a hundred tokens neither
//! underflow nor overflow.

mod lattice;
mod objective;
mod owlqn;
mod store;
mod train;

pub use lattice::{log_partition, marginals, score_sequence, viterbi, Lattice, Marginals};
pub use objective::nll_and_gradient;
pub use owlqn::{IterationRecord, OwlQn};
pub use store::{read_model, read_model_from, write_model, write_model_to, ModelBundle};
pub use train::{train, TrainOutcome};

use crate::corpus::LabelId;
use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureIndex, FeatureTemplate, FeatureVector};
use serde::{Deserialize, Serialize};

/// Training hyperparameters. Defaults are the reference configuration:
/// L-BFGS with c1 = c2 = 0.1 and at most 100 iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// L1 coefficient, applied orthant-wise by the optimizer.
    pub c1: f64,
    /// L2 coefficient on the squared weight norm.
    pub c2: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective change falls below this.
    pub tolerance: f64,
    /// Seed for fold shuffling; the optimizer itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c1: 0.1,
            c2: 0.1,
            max_iterations: 100,
            tolerance: 1e-5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::Config("c1 and c2 must be nonnegative".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config("tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Sparse layout of emission parameters: for each feature, the sorted list of
/// labels it may score. Parameter slots are dense in (feature, label) order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionMap {
    /// Length `feature_count + 1`; prefix offsets into `labels`.
    offsets: Vec<u32>,
    /// Concatenated sorted label ids per feature.
    labels: Vec<u32>,
}

impl EmissionMap {
    /// Build from observed (feature, gold label) pairs.
    pub fn from_observations(
        docs: &[Vec<FeatureVector>],
        golds: &[Vec<LabelId>],
        feature_count: usize,
    ) -> EmissionMap {
        let mut per_feature: Vec<Vec<u32>> = vec![Vec::new(); feature_count];
        for (vectors, labels) in docs.iter().zip(golds) {
            for (vector, &label) in vectors.iter().zip(labels) {
                for &fid in vector.ids() {
                    per_feature[fid.index()].push(label.0);
                }
            }
        }
        let mut offsets = Vec::with_capacity(feature_count + 1);
        let mut labels = Vec::new();
        offsets.push(0);
        for mut seen in per_feature {
            seen.sort_unstable();
            seen.dedup();
            labels.extend_from_slice(&seen);
            offsets.push(labels.len() as u32);
        }
        EmissionMap { offsets, labels }
    }

    /// Every (feature, label) combination; used by small models and tests.
    pub fn dense(feature_count: usize, label_count: usize) -> EmissionMap {
        let mut offsets = Vec::with_capacity(feature_count + 1);
        let mut labels = Vec::with_capacity(feature_count * label_count);
        offsets.push(0);
        for _ in 0..feature_count {
            labels.extend(0..label_count as u32);
            offsets.push(labels.len() as u32);
        }
        EmissionMap { offsets, labels }
    }

    pub fn feature_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.labels.len()
    }

    /// (label, slot) pairs for a feature; slots index the emission block.
    #[inline]
    pub fn entries(&self, feature: FeatureId) -> impl Iterator<Item = (LabelId, usize)> + '_ {
        let start = self.offsets[feature.index()] as usize;
        let end = self.offsets[feature.index() + 1] as usize;
        (start..end).map(move |slot| (LabelId(self.labels[slot]), slot))
    }

    /// Emission slot of (feature, label), if parameterized.
    #[inline]
    pub fn slot(&self, feature: FeatureId, label: LabelId) -> Option<usize> {
        let start = self.offsets[feature.index()] as usize;
        let end = self.offsets[feature.index() + 1] as usize;
        self.labels[start..end]
            .binary_search(&label.0)
            .ok()
            .map(|i| start + i)
    }
}

/// A trained linear-chain CRF.
///
/// The parameter vector is laid out as the dense `L x L` transition block
/// followed by the sparse emission block described by [`EmissionMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    label_count: usize,
    template: FeatureTemplate,
    feature_index: FeatureIndex,
    emission_map: EmissionMap,
    params: Vec<f64>,
}

impl CrfModel {
    pub fn from_parts(
        label_count: usize,
        template: FeatureTemplate,
        feature_index: FeatureIndex,
        emission_map: EmissionMap,
        params: Vec<f64>,
    ) -> Result<CrfModel> {
        if label_count < 1 {
            return Err(Error::Model("label count must be at least 1".into()));
        }
        if emission_map.feature_count() != feature_index.len() {
            return Err(Error::Model(format!(
                "emission map covers {} features, index has {}",
                emission_map.feature_count(),
                feature_index.len()
            )));
        }
        let expected = label_count * label_count + emission_map.param_count();
        if params.len() != expected {
            return Err(Error::Model(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|w| !w.is_finite()) {
            return Err(Error::Model("non-finite weight".into()));
        }
        Ok(CrfModel {
            label_count,
            template,
            feature_index,
            emission_map,
            params,
        })
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn template(&self) -> &FeatureTemplate {
        &self.template
    }

    pub fn feature_index(&self) -> &FeatureIndex {
        &self.feature_index
    }

    pub fn emission_map(&self) -> &EmissionMap {
        &self.emission_map
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// The dense transition block, row-major from-label x to-label.
    #[inline]
    pub fn transitions(&self) -> &[f64] {
        &self.params[..self.label_count * self.label_count]
    }

    pub fn transition_weight(&self, from: LabelId, to: LabelId) -> f64 {
        self.params[from.index() * self.label_count + to.index()]
    }

    pub fn emission_weight(&self, feature: FeatureId, label: LabelId) -> f64 {
        match self.emission_map.slot(feature, label) {
            Some(slot) => self.params[self.label_count * self.label_count + slot],
            None => 0.0,
        }
    }

    /// Iterate the parameterized (label, weight) pairs of one feature.
    #[inline]
    pub fn emission_entries(&self, feature: FeatureId) -> impl Iterator<Item = (LabelId, f64)> + '_ {
        let base = self.label_count * self.label_count;
        self.emission_map
            .entries(feature)
            .map(move |(label, slot)| (label, self.params[base + slot]))
    }
}
