//! Regularized negative log-likelihood and its gradient over a batch.
//!
//! The heavy per-sequence forward-backward passes run in parallel; their
//! results are folded into the objective and gradient serially, in sequence
//! order, so the outcome is bit-identical regardless of thread count. The L1
//! penalty is not part of this objective: the orthant-wise optimizer owns it.

use super::lattice::{forward_backward, Lattice, TransTable};
use super::{CrfModel, EmissionMap};
use crate::corpus::{LabelId, SourceId};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use rayon::prelude::*;

/// Sequences are processed in chunks of this many; bounds transient memory
/// while keeping the parallel sections wide.
const CHUNK: usize = 512;

/// One training sequence: feature vectors with gold labels.
pub(crate) struct Sequence<'a> {
    pub source_id: SourceId,
    pub vectors: &'a [FeatureVector],
    pub golds: &'a [LabelId],
}

struct SequencePass {
    log_z: f64,
    gold_score: f64,
    /// T x L unary marginals.
    unary: Vec<f64>,
    /// L x L summed edge marginals.
    pair_sum: Vec<f64>,
}

fn sequence_pass(
    model: &CrfModel,
    table: &TransTable,
    sequence: &Sequence<'_>,
) -> Result<SequencePass> {
    let l = model.label_count();
    let lattice = Lattice::build(model, sequence.vectors);
    let gold_score = lattice_gold_score(&lattice, sequence)?;
    let pass = forward_backward(&lattice, table).map_err(|e| match e {
        Error::NonFinite(msg) => {
            Error::NonFinite(format!("sequence {}: {msg}", sequence.source_id))
        }
        other => other,
    })?;

    let t_len = sequence.vectors.len();
    let mut unary = vec![0.0; t_len * l];
    for t in 0..t_len {
        for y in 0..l {
            unary[t * l + y] = pass.alpha[t * l + y] * pass.beta[t * l + y];
        }
    }
    let mut pair_sum = vec![0.0; l * l];
    for t in 1..t_len {
        let inv_norm = 1.0 / pass.norm[t];
        let emit = &pass.shifted_emit[t * l..(t + 1) * l];
        for i in 0..l {
            let a = pass.alpha[(t - 1) * l + i] * inv_norm;
            if a == 0.0 {
                continue;
            }
            let trans = &table.exp[i * l..(i + 1) * l];
            let row = &mut pair_sum[i * l..(i + 1) * l];
            for j in 0..l {
                row[j] += a * trans[j] * emit[j] * pass.beta[t * l + j];
            }
        }
    }

    Ok(SequencePass {
        log_z: pass.log_z,
        gold_score,
        unary,
        pair_sum,
    })
}

fn lattice_gold_score(lattice: &Lattice, sequence: &Sequence<'_>) -> Result<f64> {
    if sequence.golds.len() != sequence.vectors.len() {
        return Err(Error::Eval(format!(
            "sequence {}: {} tokens but {} gold labels",
            sequence.source_id,
            sequence.vectors.len(),
            sequence.golds.len()
        )));
    }
    lattice.score(sequence.golds)
}

/// Empirical feature counts of the batch, aligned with the parameter vector.
pub(crate) fn empirical_counts(
    sequences: &[Sequence<'_>],
    emission_map: &EmissionMap,
    label_count: usize,
) -> Vec<f64> {
    let mut counts = vec![0.0; label_count * label_count + emission_map.param_count()];
    let base = label_count * label_count;
    for sequence in sequences {
        for (t, (&gold, vector)) in sequence.golds.iter().zip(sequence.vectors).enumerate() {
            if t > 0 {
                counts[sequence.golds[t - 1].index() * label_count + gold.index()] += 1.0;
            }
            for &fid in vector.ids() {
                if let Some(slot) = emission_map.slot(fid, gold) {
                    counts[base + slot] += 1.0;
                }
            }
        }
    }
    counts
}

/// Smooth part of the training objective over a batch:
///
/// `sum_d (log Z_d - score(gold_d)) + c2 * ||w||^2`
///
/// and its gradient `expected - empirical + 2 c2 w`.
pub(crate) fn batch_objective(
    model: &CrfModel,
    sequences: &[Sequence<'_>],
    empirical: &[f64],
    c2: f64,
) -> Result<(f64, Vec<f64>)> {
    let l = model.label_count();
    let table = TransTable::new(model.transitions());

    let mut objective = 0.0;
    let mut grad = vec![0.0; model.params().len()];
    let base = l * l;

    for chunk in sequences.chunks(CHUNK) {
        let passes: Vec<Result<SequencePass>> = chunk
            .par_iter()
            .map(|sequence| sequence_pass(model, &table, sequence))
            .collect();
        for (sequence, pass) in chunk.iter().zip(passes) {
            let pass = pass?;
            objective += pass.log_z - pass.gold_score;
            for (g, x) in grad[..base].iter_mut().zip(&pass.pair_sum) {
                *g += x;
            }
            for (t, vector) in sequence.vectors.iter().enumerate() {
                let mu = &pass.unary[t * l..(t + 1) * l];
                for &fid in vector.ids() {
                    for (label, slot) in model.emission_map().entries(fid) {
                        grad[base + slot] += mu[label.index()];
                    }
                }
            }
        }
    }

    for ((g, &e), &w) in grad.iter_mut().zip(empirical).zip(model.params()) {
        *g += -e + 2.0 * c2 * w;
    }
    objective += c2 * model.params().iter().map(|w| w * w).sum::<f64>();

    if !objective.is_finite() {
        return Err(Error::NonFinite("batch objective".into()));
    }
    Ok((objective, grad))
}

/// Public entry point: objective and gradient of the batch at the model's
/// current weights. The L1 term is handled by the optimizer and therefore
/// not included here.
pub fn nll_and_gradient(
    model: &CrfModel,
    batch: &[(&[FeatureVector], &[LabelId])],
    c2: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Eval("batch must be nonempty".into()));
    }
    let sequences: Vec<Sequence<'_>> = batch
        .iter()
        .enumerate()
        .map(|(i, &(vectors, golds))| Sequence {
            source_id: i as SourceId,
            vectors,
            golds,
        })
        .collect();
    let empirical = empirical_counts(&sequences, model.emission_map(), model.label_count());
    batch_objective(model, &sequences, &empirical, c2)
}
