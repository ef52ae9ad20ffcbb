//! Reconstruction loop shared by the reverse-attention method and its baselines.
//!
//! Every strategy trains a freshly initialized [`Autoencoder`] against the
//! captured hologram. Given the network output `O`, the reproduced hologram
//! for candidate `z_i` is `|ASM(O, z_i)|^2` and its loss is the MSE against
//! the captured intensity. Strategies differ only in which candidate losses
//! they build and how those are combined before the backward pass.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    argmax_lowest, hologram_loss, reverse_attention_loss, scalar_values, CandidateLossReport, CandidateSet,
};
use crate::metrics::{psnr, ssim, ImagePair};
use crate::network::{Autoencoder, AutoencoderSpec};
use crate::optics::{make_kernel, propagate_spectrum_on_tape, ComplexField, Hologram};
use crate::plane::Plane;
use crate::spectral::Fft2Plan;
use crate::tensor::{AdamConfig, AdamState, Real, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomMode {
    /// Every candidate is eligible.
    Include,
    /// The true distance is left out.
    Exclude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyKind {
    KnownDistance,
    /// A single candidate, fixed before training starts.
    RandomDistance { index: usize },
    NonWeightedIntegration,
    AlternatingDescent,
    ReverseAttention,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::KnownDistance => "known",
            StrategyKind::RandomDistance { .. } => "random",
            StrategyKind::NonWeightedIntegration => "non-weighted",
            StrategyKind::AlternatingDescent => "alternating",
            StrategyKind::ReverseAttention => "reverse-attention",
        }
    }

    /// Candidate indices whose losses the strategy evaluates each epoch.
    pub fn active_indices(&self, candidates: &CandidateSet) -> Result<Vec<usize>> {
        match *self {
            StrategyKind::KnownDistance => candidates
                .true_index()
                .map(|i| vec![i])
                .ok_or_else(|| Error::InvalidArgument("known-distance strategy needs the true distance".into())),
            StrategyKind::RandomDistance { index } if index >= candidates.len() => Err(Error::InvalidArgument(
                format!("random-distance index {index} out of range for {} candidates", candidates.len()),
            )),
            StrategyKind::RandomDistance { index } => Ok(vec![index]),
            _ => Ok((0..candidates.len()).collect()),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::RandomDistance { index } => write!(f, "random:{index}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    /// Accepts the [`fmt::Display`] forms, e.g. `reverse-attention` or `random:3`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "known" => StrategyKind::KnownDistance,
            "non-weighted" => StrategyKind::NonWeightedIntegration,
            "alternating" => StrategyKind::AlternatingDescent,
            "reverse-attention" => StrategyKind::ReverseAttention,
            _ => {
                let index = s
                    .strip_prefix("random:")
                    .and_then(|i| i.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy '{s}'")))?;
                StrategyKind::RandomDistance { index }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    /// Architecture; its grid must match the hologram.
    pub network: AutoencoderSpec,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub seed: u64,
    /// Print a progress line to stderr every this many epochs.
    pub log_every: Option<usize>,
}

impl ReconstructionConfig {
    pub fn desk(height: usize, width: usize) -> Self {
        ReconstructionConfig {
            network: AutoencoderSpec::desk(height, width),
            adam: AdamConfig::default(),
            epochs: 1500,
            seed: 0,
            log_every: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    /// Network output at the object plane after the last update.
    pub object_estimate: ComplexField,
    pub predicted_index: Option<usize>,
    pub predicted_distance: Option<f64>,
    /// One report per epoch, in candidate order of [`Self::trace_distances`].
    pub trace: Vec<CandidateLossReport>,
    pub trace_distances: Vec<f64>,
    /// Epoch loop only.
    pub wall_time: Duration,
    pub epochs: usize,
    pub seed: u64,
    pub strategy: StrategyKind,
}

struct Problem<T: Real> {
    plan: Arc<Fft2Plan<T>>,
    transfers: Vec<Arc<[Complex<T>]>>,
    input: Tensor<T>,
    target: Tensor<T>,
}

fn prepare<T: Real>(hologram: &Hologram, candidates: &CandidateSet, active: &[usize]) -> Result<Problem<T>> {
    let cfg = hologram.config;
    let (h, w) = (cfg.height, cfg.width);
    let values: Vec<T> = hologram.intensity.data().iter().map(|&v| T::lit(v)).collect();
    Ok(Problem {
        plan: Arc::new(Fft2Plan::new(h, w)),
        transfers: active.iter().map(|&i| make_kernel(&cfg, candidates.distances()[i]).transfer_as()).collect(),
        input: Tensor::new(vec![1, h, w], values.clone())?,
        target: Tensor::new(vec![h, w], values)?,
    })
}

fn candidate_losses<T: Real>(tape: &mut Tape<T>, problem: &Problem<T>, object: Var, target: Var) -> Result<Vec<Var>> {
    let spectrum = tape.fft2(object, &problem.plan, false)?;
    problem
        .transfers
        .iter()
        .map(|transfer| {
            let field = propagate_spectrum_on_tape(tape, spectrum, &problem.plan, transfer)?;
            let intensity = tape.abs2(field)?;
            hologram_loss(tape, intensity, target)
        })
        .collect()
}

/// Train the network on `hologram` under `strategy`.
///
/// The hologram is used as given; callers normally pass a mean-normalized
/// one. A non-finite loss aborts with [`Error::Diverged`] carrying every
/// report recorded so far.
pub fn reconstruct<T: Real>(
    hologram: &Hologram,
    candidates: &CandidateSet,
    strategy: StrategyKind,
    config: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    let cfg = hologram.config;
    if (config.network.height, config.network.width) != (cfg.height, cfg.width) {
        return Err(Error::ShapeMismatch {
            op: "reconstruct",
            lhs: vec![config.network.height, config.network.width],
            rhs: vec![cfg.height, cfg.width],
        });
    }
    config.adam.validate()?;
    let active = strategy.active_indices(candidates)?;
    let problem = prepare::<T>(hologram, candidates, &active)?;
    let mut net = Autoencoder::<T>::build(config.network.clone(), config.seed)?;
    let mut adam = AdamState::new(net.params(), config.adam)?;
    let mut trace = Vec::with_capacity(config.epochs);

    let started = Instant::now();
    for epoch in 0..config.epochs {
        let mut tape = Tape::new();
        let input = tape.constant(problem.input.clone());
        let target = tape.constant(problem.target.clone());
        let pass = net.forward(&mut tape, input)?;
        let losses = candidate_losses(&mut tape, &problem, pass.output, target)?;
        let values = scalar_values(&tape, &losses)?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch, loss: *bad, trace });
        }

        let (objective, report) = match strategy {
            StrategyKind::KnownDistance | StrategyKind::RandomDistance { .. } => {
                let report = CandidateLossReport { epoch, losses: values.clone(), weights: vec![1.0], total: values[0] };
                (losses[0], report)
            }
            StrategyKind::NonWeightedIntegration => {
                let n = losses.len();
                let w = T::lit(1.0 / n as f64);
                let objective = tape.weighted_sum(&losses, &vec![w; n])?;
                let total = tape.value(objective).item().to_f64_lossy();
                let report = CandidateLossReport { epoch, losses: values, weights: vec![1.0 / n as f64; n], total };
                (objective, report)
            }
            StrategyKind::AlternatingDescent => {
                let neg: Vec<f64> = values.iter().map(|v| -v).collect();
                let best = argmax_lowest(&neg);
                let mut weights = vec![0.0; losses.len()];
                weights[best] = 1.0;
                let report = CandidateLossReport { epoch, total: values[best], losses: values, weights };
                (losses[best], report)
            }
            StrategyKind::ReverseAttention => reverse_attention_loss(&mut tape, &losses, epoch)?,
        };

        tape.backward(objective)?;
        let grads: Vec<Tensor<T>> = pass
            .params
            .iter()
            .zip(net.params())
            .map(|(&v, p)| tape.grad(v).unwrap_or_else(|| Tensor::zeros(p.shape().to_vec())))
            .collect();
        adam.step(net.params_mut(), &grads)?;

        if let Some(every) = config.log_every.filter(|&e| e > 0) {
            if epoch % every == 0 || epoch + 1 == config.epochs {
                eprintln!(
                    "[{strategy}] epoch {epoch:>5} total {:.6e} argmax {}",
                    report.total,
                    active[report.argmax_weight()]
                );
            }
        }
        trace.push(report);
    }
    let wall_time = started.elapsed();

    let output = net.evaluate(&problem.input)?;
    let object_estimate = ComplexField::from_pair(output.data(), cfg)?;
    let last = trace.last().expect("at least one epoch");
    let predicted_index = match strategy {
        StrategyKind::NonWeightedIntegration => None,
        _ => Some(active[last.argmax_weight()]),
    };
    Ok(ReconstructionResult {
        object_estimate,
        predicted_index,
        predicted_distance: predicted_index.map(|i| candidates.distances()[i]),
        trace,
        trace_distances: active.iter().map(|&i| candidates.distances()[i]).collect(),
        wall_time,
        epochs: config.epochs,
        seed: config.seed,
        strategy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub psnr: f64,
    pub ssim: f64,
}

/// Score `|object|` against a ground-truth amplitude, both min-max scaled to [0, 1].
pub fn evaluate_against(object: &ComplexField, truth_amplitude: &Plane) -> Result<QualityScores> {
    let pair = ImagePair::new(&truth_amplitude.min_max_normalized(), &object.amplitude().min_max_normalized())?;
    Ok(QualityScores { psnr: psnr(&pair), ssim: ssim(&pair)? })
}

/// Seed of the `index`-th run in a random-distance sweep.
pub fn derived_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomDistanceRun {
    pub index: usize,
    pub distance: f64,
    pub seed: u64,
    pub scores: QualityScores,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomDistanceSummary {
    pub mode: RandomMode,
    pub runs: Vec<RandomDistanceRun>,
    pub mean: QualityScores,
}

/// Expected quality when the distance is drawn uniformly from the eligible
/// candidates: one single-distance run per eligible candidate, averaged.
pub fn random_distance_expectation<T: Real>(
    hologram: &Hologram,
    candidates: &CandidateSet,
    mode: RandomMode,
    config: &ReconstructionConfig,
    truth_amplitude: &Plane,
) -> Result<RandomDistanceSummary> {
    let true_index = candidates
        .true_index()
        .ok_or_else(|| Error::InvalidArgument("random-distance expectation needs the true distance".into()))?;
    let eligible: Vec<usize> =
        (0..candidates.len()).filter(|&i| mode == RandomMode::Include || i != true_index).collect();
    if eligible.is_empty() {
        return Err(Error::InvalidArgument("no eligible candidates once the true distance is excluded".into()));
    }
    let mut runs = Vec::with_capacity(eligible.len());
    for index in eligible {
        let run_config = ReconstructionConfig { seed: derived_seed(config.seed, index), ..config.clone() };
        let result = reconstruct::<T>(hologram, candidates, StrategyKind::RandomDistance { index }, &run_config)?;
        runs.push(RandomDistanceRun {
            index,
            distance: candidates.distances()[index],
            seed: run_config.seed,
            scores: evaluate_against(&result.object_estimate, truth_amplitude)?,
            wall_time_secs: result.wall_time.as_secs_f64(),
        });
    }
    let n = runs.len() as f64;
    let mean = QualityScores {
        psnr: runs.iter().map(|r| r.scores.psnr).sum::<f64>() / n,
        ssim: runs.iter().map(|r| r.scores.ssim).sum::<f64>() / n,
    };
    Ok(RandomDistanceSummary { mode, runs, mean })
}
