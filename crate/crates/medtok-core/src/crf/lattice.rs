//! Exact inference over the linear chain: sequence scoring, the partition
//! function, forward-backward marginals, and Viterbi decoding.
//!
//! Potentials are assembled in the log domain. The forward and backward
//! recursions then run on exponentiated, per-position max-shifted potentials
//! with per-step renormalization; the shifts and step norms are reassembled
//! into the log partition value. This keeps every intermediate in a safe
//! floating-point range for any sequence length while avoiding transcendental
//! calls in the inner loops.

use super::CrfModel;
use crate::corpus::LabelId;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Log-domain potentials of one sequence: per-position emissions plus the
/// shared transition matrix.
#[derive(Debug, Clone)]
pub struct Lattice {
    label_count: usize,
    /// T x L, row-major.
    emissions: Vec<f64>,
    /// L x L, row-major from x to.
    transitions: Vec<f64>,
}

impl Lattice {
    pub fn build(model: &CrfModel, vectors: &[FeatureVector]) -> Lattice {
        let l = model.label_count();
        let mut emissions = vec![0.0; vectors.len() * l];
        for (t, vector) in vectors.iter().enumerate() {
            let row = &mut emissions[t * l..(t + 1) * l];
            for &fid in vector.ids() {
                for (label, weight) in model.emission_entries(fid) {
                    row[label.index()] += weight;
                }
            }
        }
        Lattice {
            label_count: l,
            emissions,
            transitions: model.transitions().to_vec(),
        }
    }

    /// Assemble directly from log potentials (tests and oracles).
    pub fn from_parts(label_count: usize, emissions: Vec<f64>, transitions: Vec<f64>) -> Lattice {
        assert_eq!(emissions.len() % label_count, 0);
        assert_eq!(transitions.len(), label_count * label_count);
        Lattice {
            label_count,
            emissions,
            transitions,
        }
    }

    pub fn len(&self) -> usize {
        self.emissions.len() / self.label_count
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    #[inline]
    fn emission_row(&self, t: usize) -> &[f64] {
        &self.emissions[t * self.label_count..(t + 1) * self.label_count]
    }

    pub(crate) fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub(crate) fn score(&self, labels: &[LabelId]) -> Result<f64> {
        let l = self.label_count;
        if labels.len() != self.len() {
            return Err(Error::Eval(format!(
                "label sequence length {} does not match lattice length {}",
                labels.len(),
                self.len()
            )));
        }
        for &label in labels {
            if label.index() >= l {
                return Err(Error::LabelOutOfRange {
                    label: label.0,
                    label_count: l,
                });
            }
        }
        let mut total = 0.0;
        for (t, &label) in labels.iter().enumerate() {
            total += self.emission_row(t)[label.index()];
            if t > 0 {
                total += self.transitions[labels[t - 1].index() * l + label.index()];
            }
        }
        Ok(total)
    }
}

/// Exponentiated transition table shared across positions.
pub(crate) struct TransTable {
    /// exp(trans - max), L x L.
    pub exp: Vec<f64>,
    pub max: f64,
}

impl TransTable {
    pub fn new(transitions: &[f64]) -> TransTable {
        let max = transitions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let max = if max.is_finite() { max } else { 0.0 };
        TransTable {
            exp: transitions.iter().map(|&w| (w - max).exp()).collect(),
            max,
        }
    }
}

/// One scaled forward-backward pass.
///
/// `alpha` rows are normalized filtered distributions; `beta` rows are the
/// matching scaled backward values, so `alpha[t] * beta[t]` is exactly the
/// per-position marginal and
/// `alpha[t-1][i] * p[i][j] * shifted_emit[t][j] * beta[t][j] / norm[t]`
/// the edge marginal.
pub(crate) struct FbPass {
    pub log_z: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// exp(emit - row max), T x L.
    pub shifted_emit: Vec<f64>,
    /// Per-step normalizers.
    pub norm: Vec<f64>,
}

pub(crate) fn forward_backward(lattice: &Lattice, table: &TransTable) -> Result<FbPass> {
    let t_len = lattice.len();
    let l = lattice.label_count;
    if t_len == 0 {
        return Err(Error::Eval("cannot run inference on an empty sequence".into()));
    }

    let mut shifted_emit = vec![0.0; t_len * l];
    let mut emit_max_sum = 0.0;
    for t in 0..t_len {
        let row = lattice.emission_row(t);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NonFinite(format!("emission potentials at position {t}")));
        }
        emit_max_sum += max;
        for (dst, &w) in shifted_emit[t * l..(t + 1) * l].iter_mut().zip(row) {
            *dst = (w - max).exp();
        }
    }

    let mut alpha = vec![0.0; t_len * l];
    let mut norm = vec![0.0; t_len];

    // Forward.
    let mut sum = 0.0;
    for y in 0..l {
        let v = shifted_emit[y];
        alpha[y] = v;
        sum += v;
    }
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::NonFinite("forward normalizer at position 0".into()));
    }
    norm[0] = sum;
    for y in 0..l {
        alpha[y] /= sum;
    }
    for t in 1..t_len {
        let (prev_rows, cur_rows) = alpha.split_at_mut(t * l);
        let prev = &prev_rows[(t - 1) * l..];
        let cur = &mut cur_rows[..l];
        cur.fill(0.0);
        for i in 0..l {
            let a = prev[i];
            if a == 0.0 {
                continue;
            }
            let row = &table.exp[i * l..(i + 1) * l];
            for j in 0..l {
                cur[j] += a * row[j];
            }
        }
        let emit = &shifted_emit[t * l..(t + 1) * l];
        let mut sum = 0.0;
        for j in 0..l {
            cur[j] *= emit[j];
            sum += cur[j];
        }
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::NonFinite(format!("forward normalizer at position {t}")));
        }
        norm[t] = sum;
        for j in 0..l {
            cur[j] /= sum;
        }
    }

    // Backward, scaled with the forward normalizers.
    let mut beta = vec![0.0; t_len * l];
    beta[(t_len - 1) * l..].fill(1.0);
    let mut scratch = vec![0.0; l];
    for t in (0..t_len - 1).rev() {
        let emit = &shifted_emit[(t + 1) * l..(t + 2) * l];
        {
            let next = &beta[(t + 1) * l..(t + 2) * l];
            for j in 0..l {
                scratch[j] = emit[j] * next[j];
            }
        }
        let inv_norm = 1.0 / norm[t + 1];
        let row_out = &mut beta[t * l..(t + 1) * l];
        for i in 0..l {
            let trans = &table.exp[i * l..(i + 1) * l];
            let mut acc = 0.0;
            for j in 0..l {
                acc += trans[j] * scratch[j];
            }
            row_out[i] = acc * inv_norm;
        }
    }

    let log_z =
        norm.iter().map(|c| c.ln()).sum::<f64>() + emit_max_sum + (t_len as f64 - 1.0) * table.max;
    if !log_z.is_finite() {
        return Err(Error::NonFinite("log partition".into()));
    }

    Ok(FbPass {
        log_z,
        alpha,
        beta,
        shifted_emit,
        norm,
    })
}

/// Per-position and per-edge marginal distributions.
#[derive(Debug, Clone)]
pub struct Marginals {
    pub label_count: usize,
    /// T x L; each row sums to 1.
    pub unary: Vec<f64>,
    /// (T-1) x L x L edge marginals; entry (t, i, j) is the probability of
    /// labels (i, j) at positions (t, t+1).
    pub pairwise: Vec<f64>,
    pub log_z: f64,
}

impl Marginals {
    pub fn len(&self) -> usize {
        self.unary.len() / self.label_count
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.unary[t * self.label_count..(t + 1) * self.label_count]
    }

    pub fn edge(&self, t: usize) -> &[f64] {
        let ll = self.label_count * self.label_count;
        &self.pairwise[t * ll..(t + 1) * ll]
    }
}

/// Log score of one label sequence: emission weights plus transition weights.
pub fn score_sequence(model: &CrfModel, vectors: &[FeatureVector], labels: &[LabelId]) -> Result<f64> {
    Lattice::build(model, vectors).score(labels)
}

/// Log of the summed exponentiated scores over all label sequences.
pub fn log_partition(model: &CrfModel, vectors: &[FeatureVector]) -> Result<f64> {
    let lattice = Lattice::build(model, vectors);
    let table = TransTable::new(&lattice.transitions);
    Ok(forward_backward(&lattice, &table)?.log_z)
}

/// Forward-backward marginals for one sequence.
pub fn marginals(model: &CrfModel, vectors: &[FeatureVector]) -> Result<Marginals> {
    let lattice = Lattice::build(model, vectors);
    lattice_marginals(&lattice)
}

pub(crate) fn lattice_marginals(lattice: &Lattice) -> Result<Marginals> {
    let table = TransTable::new(&lattice.transitions);
    let pass = forward_backward(lattice, &table)?;
    let t_len = lattice.len();
    let l = lattice.label_count;

    let mut unary = vec![0.0; t_len * l];
    for t in 0..t_len {
        for y in 0..l {
            unary[t * l + y] = pass.alpha[t * l + y] * pass.beta[t * l + y];
        }
    }

    let mut pairwise = vec![0.0; t_len.saturating_sub(1) * l * l];
    for t in 1..t_len {
        let inv_norm = 1.0 / pass.norm[t];
        let emit = &pass.shifted_emit[t * l..(t + 1) * l];
        let out = &mut pairwise[(t - 1) * l * l..t * l * l];
        for i in 0..l {
            let a = pass.alpha[(t - 1) * l + i];
            let trans = &table.exp[i * l..(i + 1) * l];
            let row = &mut out[i * l..(i + 1) * l];
            for j in 0..l {
                row[j] = a * trans[j] * emit[j] * pass.beta[t * l + j] * inv_norm;
            }
        }
    }

    Ok(Marginals {
        label_count: l,
        unary,
        pairwise,
        log_z: pass.log_z,
    })
}

/// Most likely label sequence and its log score.
///
/// Ties break toward the lower label id at every backpointer decision and at
/// the final position.
pub fn viterbi(model: &CrfModel, vectors: &[FeatureVector]) -> Result<(Vec<LabelId>, f64)> {
    let lattice = Lattice::build(model, vectors);
    lattice_viterbi(&lattice)
}

pub(crate) fn lattice_viterbi(lattice: &Lattice) -> Result<(Vec<LabelId>, f64)> {
    let t_len = lattice.len();
    let l = lattice.label_count;
    if t_len == 0 {
        return Err(Error::Eval("cannot decode an empty sequence".into()));
    }

    let mut delta: Vec<f64> = lattice.emission_row(0).to_vec();
    let mut backpointers: Vec<u32> = Vec::with_capacity((t_len - 1) * l);
    let mut next = vec![0.0; l];
    for t in 1..t_len {
        let emit = lattice.emission_row(t);
        for j in 0..l {
            let mut best_i = 0usize;
            let mut best = delta[0] + lattice.transitions[j];
            for i in 1..l {
                let candidate = delta[i] + lattice.transitions[i * l + j];
                if candidate > best {
                    best = candidate;
                    best_i = i;
                }
            }
            next[j] = best + emit[j];
            backpointers.push(best_i as u32);
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let mut best_label = 0usize;
    for y in 1..l {
        if delta[y] > delta[best_label] {
            best_label = y;
        }
    }
    let best_score = delta[best_label];

    let mut labels = vec![LabelId(0); t_len];
    labels[t_len - 1] = LabelId(best_label as u32);
    let mut current = best_label;
    for t in (1..t_len).rev() {
        current = backpointers[(t - 1) * l + current] as usize;
        labels[t - 1] = LabelId(current as u32);
    }
    Ok((labels, best_score))
}
