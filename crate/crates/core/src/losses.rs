//! Hologram-domain loss and the reverse-attention weighting.
//!
//! For candidate losses `L_1..L_n` the reverse-attention loss is
//! `sum_i W_i L_i` with `W_i = exp(1/L_i) / sum_j exp(1/L_j)`, where the
//! weights are constants during backward. The weights are evaluated as
//! `exp(1/L_i - max_j 1/L_j)` before normalizing; the naive form overflows as
//! soon as any loss drops below roughly `1/709`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tape, Var};

/// Losses at or below this are treated as having reached the optimum.
pub const LOSS_FLOOR: f64 = 1e-12;

/// Ordered candidate object distances, in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    distances: Vec<f64>,
    true_index: Option<usize>,
}

impl CandidateSet {
    pub fn new(distances: Vec<f64>, true_index: Option<usize>) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::InvalidArgument("candidate set is empty".into()));
        }
        if distances.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("candidate distances must be finite".into()));
        }
        if distances.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("candidate distances must be strictly increasing".into()));
        }
        if let Some(i) = true_index {
            if i >= distances.len() {
                return Err(Error::InvalidArgument(format!(
                    "true index {i} out of range for {} candidates",
                    distances.len()
                )));
            }
        }
        Ok(CandidateSet { distances, true_index })
    }

    /// `min, min + step, ...` up to `max` inclusive (within 1e-6 of a step).
    pub fn from_range(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max >= min) {
            return Err(Error::InvalidArgument(format!("bad candidate range {min}..{max} step {step}")));
        }
        let count = ((max - min) / step + 1e-6).floor() as usize + 1;
        Self::new((0..count).map(|i| min + i as f64 * step).collect(), None)
    }

    /// Attach the hidden true distance, which must be one of the candidates
    /// (compared with a relative tolerance of 1e-9).
    pub fn with_true_distance(mut self, z: f64) -> Result<Self> {
        let tol = 1e-9 * z.abs().max(1e-12);
        let idx = self.distances.iter().position(|d| (d - z).abs() <= tol).ok_or_else(|| {
            Error::InvalidArgument(format!("true distance {z} is not in the candidate set"))
        })?;
        self.true_index = Some(idx);
        Ok(self)
    }

    pub fn single(z: f64) -> Self {
        CandidateSet { distances: vec![z], true_index: Some(0) }
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn true_index(&self) -> Option<usize> {
        self.true_index
    }

    pub fn true_distance(&self) -> Option<f64> {
        self.true_index.map(|i| self.distances[i])
    }
}

/// Per-epoch candidate losses and detached weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLossReport {
    pub epoch: usize,
    pub losses: Vec<f64>,
    pub weights: Vec<f64>,
    pub total: f64,
}

impl CandidateLossReport {
    /// Index of the largest weight, lowest index on ties.
    pub fn argmax_weight(&self) -> usize {
        argmax_lowest(&self.weights)
    }
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean squared error between a reproduced and a captured hologram.
pub fn hologram_loss<T: Real>(tape: &mut Tape<T>, reproduced: Var, captured: Var) -> Result<Var> {
    tape.mse(reproduced, captured)
}

/// Softmax over inverse losses, in the max-shifted form.
///
/// Any loss at or below [`LOSS_FLOOR`] takes the limit of the formula: the
/// floor-hitting candidates split the whole weight equally.
pub fn reverse_attention_weights(losses: &[f64]) -> Result<Vec<f64>> {
    if losses.is_empty() {
        return Err(Error::InvalidArgument("no candidate losses".into()));
    }
    if losses.iter().any(|l| l.is_nan()) {
        return Err(Error::NonFinite("candidate loss".into()));
    }
    let at_floor = losses.iter().filter(|&&l| l <= LOSS_FLOOR).count();
    if at_floor > 0 {
        let share = 1.0 / at_floor as f64;
        return Ok(losses.iter().map(|&l| if l <= LOSS_FLOOR { share } else { 0.0 }).collect());
    }
    let inverse: Vec<f64> = losses.iter().map(|&l| 1.0 / l).collect();
    let shift = inverse.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = inverse.iter().map(|&v| (v - shift).exp()).collect();
    let norm: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / norm).collect())
}

/// `sum_i detach(W_i) * L_i` for scalar candidate losses on `tape`.
pub fn reverse_attention_loss<T: Real>(
    tape: &mut Tape<T>,
    losses: &[Var],
    epoch: usize,
) -> Result<(Var, CandidateLossReport)> {
    let values = scalar_values(tape, losses)?;
    // weights are plain numbers read off the tape, so no gradient reaches them
    let weights = reverse_attention_weights(&values)?;
    let w_t: Vec<T> = weights.iter().map(|&w| T::lit(w)).collect();
    let total = tape.weighted_sum(losses, &w_t)?;
    let report = CandidateLossReport {
        epoch,
        total: tape.value(total).item().to_f64_lossy(),
        losses: values,
        weights,
    };
    Ok((total, report))
}

pub(crate) fn scalar_values<T: Real>(tape: &Tape<T>, losses: &[Var]) -> Result<Vec<f64>> {
    losses
        .iter()
        .map(|&l| {
            let v = tape.value(l);
            if v.numel() != 1 {
                return Err(Error::NonScalarLoss(v.shape().to_vec()));
            }
            Ok(v.item().to_f64_lossy())
        })
        .collect()
}
