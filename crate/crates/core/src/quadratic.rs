//! Synthetic noisy quadratics for checking optimum preservation and
//! convergence rate of the reverse-attention loss.
//!
//! Member `i` is `f_i(x) = |a_i x - b_i|^2 + c_i` with `a_i ~ U(1, 3)`, each
//! coordinate of `b_i ~ U(-5, 5)` and `c_i ~ U(0, 400)`. One ground member
//! has `c = 0`, so its minimum value is exactly zero at `x* = b / a`.
//! Descent is plain gradient descent with `t = 1 / C`, `C = max_i 2 a_i^2`,
//! which bounds the gradient Lipschitz constant of every member and of any
//! convex combination of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{argmax_lowest, reverse_attention_weights};

pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticEnsemble {
    pub a: Vec<f64>,
    /// `b[i]` has one entry per dimension.
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub ground_index: usize,
    pub seed: u64,
}

impl QuadraticEnsemble {
    /// Scalar ensemble of `n` members.
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        Self::generate_with_dim(n, 1, seed)
    }

    /// Sample `n` members in `dim` dimensions. The ground member's index is
    /// itself drawn uniformly so it carries no positional bias.
    pub fn generate_with_dim(n: usize, dim: usize, seed: u64) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidArgument(format!("need n >= 1 and dim >= 1, got n={n}, dim={dim}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        for _ in 0..n {
            a.push(rng.random_range(1.0..3.0));
            b.push((0..dim).map(|_| rng.random_range(-5.0..5.0)).collect());
            c.push(rng.random_range(0.0..400.0));
        }
        let ground_index = rng.random_range(0..n);
        c[ground_index] = 0.0;
        Ok(QuadraticEnsemble { a, b, c, ground_index, seed })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.b[0].len()
    }

    /// `C = max_i 2 a_i^2`.
    pub fn lipschitz(&self) -> f64 {
        self.a.iter().map(|a| 2.0 * a * a).fold(0.0, f64::max)
    }

    pub fn step_size(&self) -> f64 {
        1.0 / self.lipschitz()
    }

    /// Minimizer of the ground member.
    pub fn optimum(&self) -> Vec<f64> {
        let g = self.ground_index;
        self.b[g].iter().map(|b| b / self.a[g]).collect()
    }

    pub fn member_loss(&self, i: usize, x: &[f64]) -> f64 {
        x.iter().zip(&self.b[i]).map(|(x, b)| (self.a[i] * x - b).powi(2)).sum::<f64>() + self.c[i]
    }

    pub fn member_grad(&self, i: usize, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.b[i]).map(|(x, b)| 2.0 * self.a[i] * (self.a[i] * x - b)).collect()
    }

    pub fn losses(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.member_loss(i, x)).collect()
    }

    pub fn ground_loss(&self, x: &[f64]) -> f64 {
        self.member_loss(self.ground_index, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Ground,
    ReverseAttention,
    NonWeighted,
    Alternating,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Ground => "ground",
            LossKind::ReverseAttention => "reverse-attention",
            LossKind::NonWeighted => "non-weighted",
            LossKind::Alternating => "alternating",
        }
    }

    pub const ALL: [LossKind; 4] =
        [LossKind::Ground, LossKind::ReverseAttention, LossKind::NonWeighted, LossKind::Alternating];
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss kind '{s}'")))
    }
}

/// Member weights used by `kind` at `x`.
pub fn member_weights(ensemble: &QuadraticEnsemble, kind: LossKind, x: &[f64]) -> Result<Vec<f64>> {
    let n = ensemble.len();
    Ok(match kind {
        LossKind::Ground => {
            let mut w = vec![0.0; n];
            w[ensemble.ground_index] = 1.0;
            w
        }
        LossKind::ReverseAttention => reverse_attention_weights(&ensemble.losses(x))?,
        LossKind::NonWeighted => vec![1.0 / n as f64; n],
        LossKind::Alternating => {
            let losses = ensemble.losses(x);
            let neg: Vec<f64> = losses.iter().map(|l| -l).collect();
            let mut w = vec![0.0; n];
            w[argmax_lowest(&neg)] = 1.0;
            w
        }
    })
}

/// Gradient-descent record. Entry `k` of every vector describes iterate `x_k`,
/// so each has `iterations + 1` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub kind: LossKind,
    pub step_size: f64,
    pub lipschitz: f64,
    pub iterations: usize,
    pub iterates: Vec<Vec<f64>>,
    pub member_losses: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
    /// `f_ground(x_k) - 0`.
    pub ground_gaps: Vec<f64>,
}

impl DescentTrace {
    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("non-empty trace")
    }

    /// Euclidean distance from the final iterate to `target`.
    pub fn final_error(&self, target: &[f64]) -> f64 {
        self.final_iterate().iter().zip(target).map(|(x, t)| (x - t).powi(2)).sum::<f64>().sqrt()
    }
}

/// Plain gradient descent with `t = 1/C`, weights recomputed (and held
/// constant) at every iterate.
pub fn descend(ensemble: &QuadraticEnsemble, kind: LossKind, x0: &[f64], iterations: usize) -> Result<DescentTrace> {
    if x0.len() != ensemble.dim() {
        return Err(Error::InvalidArgument(format!("x0 has {} entries, ensemble dimension is {}", x0.len(), ensemble.dim())));
    }
    let lipschitz = ensemble.lipschitz();
    let t = 1.0 / lipschitz;
    let mut trace = DescentTrace {
        kind,
        step_size: t,
        lipschitz,
        iterations,
        iterates: Vec::with_capacity(iterations + 1),
        member_losses: Vec::with_capacity(iterations + 1),
        weights: Vec::with_capacity(iterations + 1),
        totals: Vec::with_capacity(iterations + 1),
        ground_gaps: Vec::with_capacity(iterations + 1),
    };
    let mut x = x0.to_vec();
    for k in 0..=iterations {
        let magnitude = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(magnitude <= DIVERGENCE_LIMIT) {
            return Err(Error::DescentDiverged { kind: kind.name(), iteration: k, magnitude });
        }
        let losses = ensemble.losses(&x);
        let weights = member_weights(ensemble, kind, &x)?;
        let total = losses.iter().zip(&weights).map(|(l, w)| l * w).sum();
        trace.ground_gaps.push(losses[ensemble.ground_index]);
        trace.totals.push(total);
        trace.iterates.push(x.clone());
        if k < iterations {
            let mut grad = vec![0.0; x.len()];
            for (i, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (g, gi) in grad.iter_mut().zip(ensemble.member_grad(i, &x)) {
                    *g += w * gi;
                }
            }
            for (xv, g) in x.iter_mut().zip(&grad) {
                *xv -= t * g;
            }
        }
        trace.member_losses.push(losses);
        trace.weights.push(weights);
    }
    Ok(trace)
}

/// Iterations each trace needs before its ground-loss gap first drops below
/// `threshold`; `None` stands for "never" (infinity).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateComparison {
    pub iterations_a: Option<usize>,
    pub iterations_b: Option<usize>,
}

impl RateComparison {
    /// `k_a / k_b`, infinite when `a` never reaches the threshold.
    pub fn ratio(&self) -> f64 {
        match (self.iterations_a, self.iterations_b) {
            (Some(a), Some(b)) => a.max(1) as f64 / b.max(1) as f64,
            (None, Some(_)) => f64::INFINITY,
            (Some(_), None) => 0.0,
            (None, None) => f64::NAN,
        }
    }
}

pub fn iterations_to_threshold(trace: &DescentTrace, threshold: f64) -> Option<usize> {
    trace.ground_gaps.iter().position(|&g| g < threshold)
}

pub fn compare_rates(a: &DescentTrace, b: &DescentTrace, threshold: f64) -> RateComparison {
    RateComparison {
        iterations_a: iterations_to_threshold(a, threshold),
        iterations_b: iterations_to_threshold(b, threshold),
    }
}

/// Largest `(f(x_k) - f*) * k - C |x0 - x*|^2 / 2` over the trace; the
/// O(1/k) rate bound holds when this is not positive.
pub fn rate_bound_excess(trace: &DescentTrace, optimum: &[f64]) -> f64 {
    let x0 = &trace.iterates[0];
    let dist2: f64 = x0.iter().zip(optimum).map(|(a, b)| (a - b).powi(2)).sum();
    let bound = trace.lipschitz * dist2 / 2.0;
    trace
        .ground_gaps
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, gap)| gap * k as f64 - bound)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sampled loss curves of every member plus the ground and reverse-attention
/// losses over a 1-D grid (first coordinate varies, others fixed at `x*`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSurface {
    pub xs: Vec<f64>,
    pub member_losses: Vec<Vec<f64>>,
    pub ground: Vec<f64>,
    pub reverse_attention: Vec<f64>,
}

pub fn error_surface(ensemble: &QuadraticEnsemble, lo: f64, hi: f64, samples: usize) -> Result<ErrorSurface> {
    if samples < 2 || !(hi > lo) {
        return Err(Error::InvalidArgument("error surface needs hi > lo and at least two samples".into()));
    }
    let base = ensemble.optimum();
    let mut out = ErrorSurface { xs: vec![], member_losses: vec![], ground: vec![], reverse_attention: vec![] };
    for s in 0..samples {
        let v = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
        let mut x = base.clone();
        x[0] = v;
        let losses = ensemble.losses(&x);
        let w = reverse_attention_weights(&losses)?;
        out.xs.push(v);
        out.ground.push(losses[ensemble.ground_index]);
        out.reverse_attention.push(losses.iter().zip(&w).map(|(l, w)| l * w).sum());
        out.member_losses.push(losses);
    }
    Ok(out)
}
