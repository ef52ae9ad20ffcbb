//! The four CLI commands as library functions.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::CandidateSet;
use crate::metrics::{psnr, ssim, ImagePair};
use crate::optics::{synthesize_hologram_padded, transmittance_from_image, Hologram};
use crate::plane::Plane;
use crate::quadratic::{
    compare_rates, descend, error_surface, iterations_to_threshold, rate_bound_excess, DescentTrace, LossKind,
    QuadraticEnsemble,
};
use crate::runner::config::{ExperimentConfig, Precision};
use crate::runner::io::{
    ensure_dir, read_hologram, read_image, read_json, truth_path, write_hologram, write_image, write_json,
    write_phase_image, write_table, write_trace, HologramMeta, TRUTH_IMAGE,
};
use crate::runner::samples::load_sample;
use crate::strategies::{
    evaluate_against, random_distance_expectation, reconstruct as run_strategy, QualityScores,
    RandomDistanceSummary, ReconstructionResult, StrategyKind,
};

pub const OUTPUT_ROOT_ENV: &str = "HOLOFOCUS_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "holofocus-runs";

pub const AMPLITUDE_IMAGE: &str = "amplitude.png";
pub const PHASE_IMAGE: &str = "phase.png";
pub const TRACE_CSV: &str = "trace.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const CONFIG_TXT: &str = "config.txt";

/// `$HOLOFOCUS_OUTPUT_ROOT`, falling back to `./holofocus-runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn out_dir(explicit: Option<&Path>, default_name: &str) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| output_root().join(default_name))
}

/// Decibel values that may be `+inf` (identical images), kept as the string
/// `"inf"` in JSON.
pub mod decibels {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    #[serde(with = "decibels")]
    pub psnr: f64,
    pub ssim: f64,
}

impl From<QualityScores> for MetricsRecord {
    fn from(q: QualityScores) -> Self {
        MetricsRecord { psnr: q.psnr, ssim: q.ssim }
    }
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub created_unix: u64,
    /// Same content as `config.txt`.
    pub config: String,
    pub extra: serde_json::Value,
}

fn write_manifest(dir: &Path, command: &str, config_text: String, extra: serde_json::Value) -> Result<()> {
    std::fs::write(dir.join(CONFIG_TXT), &config_text).map_err(|e| Error::io(dir.join(CONFIG_TXT), e))?;
    let manifest = Manifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config: config_text,
        extra,
    };
    write_json(&dir.join(MANIFEST_JSON), &manifest)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateOutcome {
    pub dir: PathBuf,
    pub hologram: Hologram,
    pub truth_amplitude: Plane,
}

/// Synthesize (without writing) the hologram described by `cfg`.
pub fn simulate_in_memory(cfg: &ExperimentConfig) -> Result<(Hologram, Plane)> {
    let optics = cfg.optical()?;
    let image = load_sample(&cfg.sample, cfg.size, cfg.seed)?;
    let transmittance = transmittance_from_image(&image, &optics, cfg.object)?;
    let mut hologram = synthesize_hologram_padded(&transmittance, cfg.z, cfg.padding)?;
    if cfg.noise > 0.0 {
        hologram = hologram.with_noise(cfg.noise, cfg.seed)?;
    }
    if cfg.normalize {
        hologram = hologram.normalized();
    }
    Ok((hologram, transmittance.amplitude()))
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulateOutcome> {
    let dir = out_dir(cfg.out.as_deref(), "simulate");
    let (hologram, truth_amplitude) = simulate_in_memory(cfg)?;
    let meta = HologramMeta {
        optics: hologram.config,
        true_distance: hologram.true_distance,
        normalization: hologram.normalization,
        intensity_scale: 1.0,
        sample: cfg.sample.clone(),
        object: cfg.object,
        padding: cfg.padding,
        noise: cfg.noise,
        seed: cfg.seed,
        truth_image: Some(TRUTH_IMAGE.into()),
    };
    write_hologram(&dir, &hologram, meta)?;
    write_image(&dir.join(TRUTH_IMAGE), &truth_amplitude)?;
    write_manifest(&dir, "simulate", cfg.to_text(), serde_json::json!({ "seed": cfg.seed }))?;
    Ok(SimulateOutcome { dir, hologram, truth_amplitude })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructSummary {
    pub strategy: String,
    /// `ok` or the error kind that stopped the run.
    pub status: String,
    pub predicted_index: Option<usize>,
    pub predicted_distance: Option<f64>,
    pub true_distance: Option<f64>,
    pub candidates: Vec<f64>,
    pub final_losses: Vec<f64>,
    pub final_weights: Vec<f64>,
    pub metrics: Option<MetricsRecord>,
    pub random_expectation: Option<RandomDistanceSummary>,
    pub wall_time_secs: f64,
    pub epochs: usize,
    pub seed: u64,
    pub precision: Precision,
    pub truth_image: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructOutcome {
    pub dir: PathBuf,
    pub summary: ReconstructSummary,
    pub result: ReconstructionResult,
}

/// Candidate set for a strategy; a known distance off the grid becomes a
/// one-element set.
pub fn candidates_for(cfg: &ExperimentConfig, strategy: StrategyKind, true_distance: Option<f64>) -> Result<CandidateSet> {
    let grid = cfg.candidates_with_truth(true_distance)?;
    if strategy == StrategyKind::KnownDistance && grid.true_index().is_none() {
        return Ok(CandidateSet::single(true_distance.unwrap_or(cfg.z)));
    }
    Ok(grid)
}

fn dispatch(
    cfg: &ExperimentConfig,
    hologram: &Hologram,
    candidates: &CandidateSet,
) -> Result<ReconstructionResult> {
    let rc = cfg.reconstruction();
    match cfg.precision {
        Precision::F32 => run_strategy::<f32>(hologram, candidates, cfg.strategy, &rc),
        Precision::F64 => run_strategy::<f64>(hologram, candidates, cfg.strategy, &rc),
    }
}

/// Reconstruct the hologram stored in `cfg.hologram` and write the result
/// bundle. An aborted optimization still writes its partial trace and a
/// summary whose status names the error.
pub fn reconstruct(cfg: &ExperimentConfig) -> Result<ReconstructOutcome> {
    let holo_dir = cfg
        .hologram
        .as_deref()
        .ok_or_else(|| Error::Config("reconstruct needs 'hologram' (a directory written by simulate)".into()))?;
    let (mut hologram, meta) = read_hologram(holo_dir)?;
    if cfg.normalize && hologram.normalization.is_none() {
        hologram = hologram.normalized();
    }
    let mut cfg = cfg.clone();
    cfg.size = hologram.config.height;
    if hologram.config.height != hologram.config.width {
        return Err(Error::Config("only square holograms are supported by the runner".into()));
    }
    cfg.wavelength = hologram.config.wavelength;
    cfg.pitch = hologram.config.pixel_pitch;
    let true_distance = meta.true_distance;
    let candidates = candidates_for(&cfg, cfg.strategy, true_distance.or(Some(cfg.z)))?;
    let dir = out_dir(cfg.out.as_deref(), &format!("reconstruct-{}", cfg.strategy.name()));
    ensure_dir(&dir)?;
    write_manifest(
        &dir,
        "reconstruct",
        cfg.to_text(),
        serde_json::json!({ "seed": cfg.seed, "hologram_meta": meta }),
    )?;

    let truth = truth_path(holo_dir, &meta);
    let mut summary = ReconstructSummary {
        strategy: cfg.strategy.to_string(),
        status: "ok".into(),
        predicted_index: None,
        predicted_distance: None,
        true_distance,
        candidates: candidates.distances().to_vec(),
        final_losses: vec![],
        final_weights: vec![],
        metrics: None,
        random_expectation: None,
        wall_time_secs: 0.0,
        epochs: cfg.epochs,
        seed: cfg.seed,
        precision: cfg.precision,
        truth_image: truth.clone(),
    };

    let result = match dispatch(&cfg, &hologram, &candidates) {
        Ok(r) => r,
        Err(err) => {
            if let Error::Diverged { trace, .. } = &err {
                let active = cfg.strategy.active_indices(&candidates)?;
                let distances: Vec<f64> = active.iter().map(|&i| candidates.distances()[i]).collect();
                write_trace(&dir.join(TRACE_CSV), &distances, trace)?;
            }
            summary.status = err.kind().into();
            write_json(&dir.join(SUMMARY_JSON), &summary)?;
            return Err(err);
        }
    };

    let amplitude = result.object_estimate.amplitude();
    write_image(&dir.join(AMPLITUDE_IMAGE), &amplitude.min_max_normalized())?;
    write_phase_image(&dir.join(PHASE_IMAGE), &result.object_estimate.phase())?;
    write_trace(&dir.join(TRACE_CSV), &result.trace_distances, &result.trace)?;

    let truth_amplitude = truth.as_deref().map(read_image).transpose()?;
    if let Some(t) = &truth_amplitude {
        summary.metrics = Some(evaluate_against(&result.object_estimate, t)?.into());
    }
    if cfg.random_expectation {
        let t = truth_amplitude
            .as_ref()
            .ok_or_else(|| Error::Config("random expectation needs a ground-truth image".into()))?;
        let rc = cfg.reconstruction();
        summary.random_expectation = Some(match cfg.precision {
            Precision::F32 => random_distance_expectation::<f32>(&hologram, &candidates, cfg.random_mode, &rc, t)?,
            Precision::F64 => random_distance_expectation::<f64>(&hologram, &candidates, cfg.random_mode, &rc, t)?,
        });
    }
    let last = result.trace.last().expect("non-empty trace");
    summary.final_losses = last.losses.clone();
    summary.final_weights = last.weights.clone();
    summary.predicted_index = result.predicted_index;
    summary.predicted_distance = result.predicted_distance;
    summary.wall_time_secs = result.wall_time.as_secs_f64();
    write_json(&dir.join(SUMMARY_JSON), &summary)?;
    Ok(ReconstructOutcome { dir, summary, result })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticArgs {
    pub ns: Vec<usize>,
    pub seeds: usize,
    pub first_seed: u64,
    pub iterations: usize,
    pub x0: f64,
    pub dim: usize,
    pub threshold: f64,
    /// Also export an error surface for the first seed of every `n`.
    pub surface: bool,
    pub out: Option<PathBuf>,
}

impl Default for QuadraticArgs {
    fn default() -> Self {
        QuadraticArgs {
            ns: vec![2, 5, 20, 100],
            seeds: 20,
            first_seed: 0,
            iterations: 500,
            x0: 10.0,
            dim: 1,
            threshold: 1e-4,
            surface: false,
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticRow {
    pub n: usize,
    pub seed: u64,
    pub kind: LossKind,
    pub final_error: f64,
    pub iterations_to_threshold: Option<usize>,
    /// Against the ground-loss trace of the same ensemble.
    pub iteration_ratio: f64,
    pub rate_bound_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticReport {
    pub dir: PathBuf,
    pub rows: Vec<QuadraticRow>,
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "inf".into(), |k| k.to_string())
}

fn trace_table(trace: &DescentTrace) -> (Vec<String>, Vec<Vec<String>>) {
    let dim = trace.iterates[0].len();
    let n = trace.member_losses[0].len();
    let mut header = vec!["iteration".to_string()];
    header.extend((0..dim).map(|d| if dim == 1 { "x".into() } else { format!("x{d}") }));
    header.extend(["total".into(), "ground_gap".into()]);
    header.extend((0..n).map(|i| format!("loss_{i}")));
    header.extend((0..n).map(|i| format!("weight_{i}")));
    let rows = (0..trace.iterates.len())
        .map(|k| {
            let mut row = vec![k.to_string()];
            row.extend(trace.iterates[k].iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", trace.totals[k]));
            row.push(format!("{:e}", trace.ground_gaps[k]));
            row.extend(trace.member_losses[k].iter().map(|v| format!("{v:e}")));
            row.extend(trace.weights[k].iter().map(|v| format!("{v:e}")));
            row
        })
        .collect();
    (header, rows)
}

/// Sweep ensembles and loss kinds, writing per-run traces, `summary.csv`
/// and `rates.csv` (median iteration counts per `n` and kind).
pub fn quadratic(args: &QuadraticArgs) -> Result<QuadraticReport> {
    if args.seeds == 0 || args.ns.is_empty() {
        return Err(Error::Config("quadratic sweep needs at least one n and one seed".into()));
    }
    let dir = out_dir(args.out.as_deref(), "quadratic");
    let traces_dir = dir.join("traces");
    ensure_dir(&traces_dir)?;
    let mut rows = Vec::new();
    for &n in &args.ns {
        for s in 0..args.seeds as u64 {
            let seed = args.first_seed + s;
            let ensemble = QuadraticEnsemble::generate_with_dim(n, args.dim, seed)?;
            let optimum = ensemble.optimum();
            let x0 = vec![args.x0; args.dim];
            let ground = descend(&ensemble, LossKind::Ground, &x0, args.iterations)?;
            for kind in LossKind::ALL {
                let trace = if kind == LossKind::Ground { ground.clone() } else { descend(&ensemble, kind, &x0, args.iterations)? };
                let (header, table) = trace_table(&trace);
                write_table(&traces_dir.join(format!("n{n}_seed{seed}_{}.csv", kind.name())), &header, &table)?;
                rows.push(QuadraticRow {
                    n,
                    seed,
                    kind,
                    final_error: trace.final_error(&optimum),
                    iterations_to_threshold: iterations_to_threshold(&trace, args.threshold),
                    iteration_ratio: compare_rates(&trace, &ground, args.threshold).ratio(),
                    rate_bound_excess: rate_bound_excess(&trace, &optimum),
                });
            }
            if args.surface && s == 0 {
                let x_star = optimum[0];
                let surf = error_surface(&ensemble, x_star - 15.0, x_star + 15.0, 301)?;
                let mut header = vec!["x".to_string(), "ground".into(), "reverse_attention".into()];
                header.extend((0..n).map(|i| format!("loss_{i}")));
                let table: Vec<Vec<String>> = (0..surf.xs.len())
                    .map(|i| {
                        let mut r = vec![format!("{:e}", surf.xs[i]), format!("{:e}", surf.ground[i]), format!("{:e}", surf.reverse_attention[i])];
                        r.extend(surf.member_losses[i].iter().map(|v| format!("{v:e}")));
                        r
                    })
                    .collect();
                write_table(&dir.join(format!("surface_n{n}.csv")), &header, &table)?;
            }
        }
    }

    let header: Vec<String> =
        ["n", "seed", "kind", "final_error", "iterations_to_threshold", "iteration_ratio", "rate_bound_excess"]
            .map(String::from)
            .to_vec();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.seed.to_string(),
                r.kind.name().to_string(),
                format!("{:e}", r.final_error),
                fmt_opt(r.iterations_to_threshold),
                r.iteration_ratio.to_string(),
                format!("{:e}", r.rate_bound_excess),
            ]
        })
        .collect();
    write_table(&dir.join("summary.csv"), &header, &table)?;

    let mut rate_rows = Vec::new();
    for &n in &args.ns {
        for kind in LossKind::ALL {
            let counts: Vec<Option<usize>> =
                rows.iter().filter(|r| r.n == n && r.kind == kind).map(|r| r.iterations_to_threshold).collect();
            let errors: Vec<f64> = rows.iter().filter(|r| r.n == n && r.kind == kind).map(|r| r.final_error).collect();
            rate_rows.push(vec![
                n.to_string(),
                kind.name().to_string(),
                fmt_opt(median_iterations(&counts)),
                counts.iter().filter(|c| c.is_some()).count().to_string(),
                format!("{:e}", errors.iter().copied().fold(0.0, f64::max)),
            ]);
        }
    }
    let header: Vec<String> =
        ["n", "kind", "median_iterations", "reached", "max_final_error"].map(String::from).to_vec();
    write_table(&dir.join("rates.csv"), &header, &rate_rows)?;
    write_manifest(
        &dir,
        "quadratic",
        String::new(),
        serde_json::to_value(args).map_err(|e| Error::Json { path: dir.display().to_string(), source: e })?,
    )?;
    Ok(QuadraticReport { dir, rows })
}

/// Median with `None` ordered above every count (upper median for even
/// lengths, so a tie between finite and infinite reports infinite).
pub fn median_iterations(counts: &[Option<usize>]) -> Option<usize> {
    if counts.is_empty() {
        return None;
    }
    let mut sorted: Vec<Option<usize>> = counts.to_vec();
    sorted.sort_by_key(|c| c.unwrap_or(usize::MAX));
    sorted[sorted.len() / 2]
}

pub fn evaluate(reference: &Path, test: &Path) -> Result<MetricsRecord> {
    let (r, t) = (read_image(reference)?, read_image(test)?);
    let pair = ImagePair::new(&r, &t)?;
    Ok(MetricsRecord { psnr: psnr(&pair), ssim: ssim(&pair)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub run: String,
    pub strategy: String,
    pub predicted_distance: Option<f64>,
    pub metrics: MetricsRecord,
    pub wall_time_secs: f64,
}

/// Score every run directory directly under `root` that holds an amplitude
/// image, against `reference` or the truth image recorded in its summary.
/// Writes `root/evaluation.csv`.
pub fn evaluate_batch(root: &Path, reference: Option<&Path>) -> Result<Vec<BatchRow>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(AMPLITUDE_IMAGE).is_file() && p.join(SUMMARY_JSON).is_file())
        .collect();
    entries.sort();
    let mut rows = Vec::new();
    for dir in entries {
        let summary: ReconstructSummary = read_json(&dir.join(SUMMARY_JSON))?;
        let Some(reference) = reference.map(Path::to_path_buf).or(summary.truth_image.clone()) else { continue };
        rows.push(BatchRow {
            run: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            strategy: summary.strategy.clone(),
            predicted_distance: summary.predicted_distance,
            metrics: evaluate(&reference, &dir.join(AMPLITUDE_IMAGE))?,
            wall_time_secs: summary.wall_time_secs,
        });
    }
    let header: Vec<String> =
        ["run", "strategy", "predicted_distance_m", "psnr_db", "ssim", "wall_time_s"].map(String::from).to_vec();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.run.clone(),
                r.strategy.clone(),
                r.predicted_distance.map_or_else(String::new, |d| format!("{d:e}")),
                r.metrics.psnr.to_string(),
                r.metrics.ssim.to_string(),
                r.wall_time_secs.to_string(),
            ]
        })
        .collect();
    write_table(&root.join("evaluation.csv"), &header, &table)?;
    Ok(rows)
}
