//! C ABI over the holofocus library.
//!
//! Objects cross the boundary as opaque handles created by `hf_*_new`-style
//! calls and released with the matching `hf_*_free`. Every fallible call
//! returns an [`HfStatus`]; on failure a description is kept per thread and
//! can be read with [`hf_last_error_message`]. Image buffers are row-major
//! `double` arrays of `height * width` entries.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use holofocus::losses::{reverse_attention_weights, CandidateSet};
use holofocus::metrics::{psnr, ssim, ImagePair};
use holofocus::optics::{propagate, ComplexField, Hologram, OpticalConfig};
use holofocus::quadratic::{descend, LossKind, QuadraticEnsemble};
use holofocus::runner::{simulate_in_memory, ExperimentConfig};
use holofocus::strategies::{reconstruct, ReconstructionConfig, ReconstructionResult, StrategyKind};
use holofocus::tensor::AdamConfig;
use holofocus::{Error, Plane};
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    NonFinite = 4,
    Diverged = 5,
    Io = 6,
    BufferTooSmall = 7,
    Unavailable = 8,
    Panic = 9,
    Internal = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HfStrategy {
    Known = 0,
    Random = 1,
    NonWeighted = 2,
    Alternating = 3,
    ReverseAttention = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HfLossKind {
    Ground = 0,
    ReverseAttention = 1,
    NonWeighted = 2,
    Alternating = 3,
}

/// Settings for [`hf_reconstruct`]; start from [`hf_reconstruct_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HfReconstructOptions {
    pub strategy: HfStrategy,
    /// Candidate index used by [`HfStrategy::Random`].
    pub random_index: usize,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Candidate distances `zmin, zmin + zstep, ..., zmax` in meters.
    pub zmin: f64,
    pub zmax: f64,
    pub zstep: f64,
    /// Non-zero selects 64-bit arithmetic.
    pub double_precision: i32,
}

/// Opaque hologram handle.
pub struct HfHologram {
    hologram: Hologram,
    truth: Option<Plane>,
}

/// Opaque reconstruction result handle.
pub struct HfReconstruction {
    result: ReconstructionResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> HfStatus {
    match err {
        Error::ShapeMismatch { .. } | Error::InvalidShape { .. } => HfStatus::Shape,
        Error::InvalidArgument(_) | Error::Config(_) => HfStatus::InvalidArgument,
        Error::NonFinite(_) => HfStatus::NonFinite,
        Error::Diverged { .. } | Error::DescentDiverged { .. } => HfStatus::Diverged,
        Error::Io { .. } | Error::Image { .. } | Error::Csv { .. } | Error::Json { .. } => HfStatus::Io,
        Error::NonScalarLoss(_) => HfStatus::Internal,
    }
}

struct Failure(HfStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn fail<T>(status: HfStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `body`, recording any error or panic for [`hf_last_error_message`].
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            HfStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        fail(HfStatus::NullPointer, format!("{name} is null"))
    } else {
        Ok(())
    }
}

/// # Safety
/// `data` must be valid for `len` reads when non-null.
unsafe fn input_slice<'a>(data: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    non_null(data, name)?;
    Ok(std::slice::from_raw_parts(data, len))
}

/// # Safety
/// `out` must be valid for `len` writes when non-null.
unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    non_null(out, "output buffer")?;
    if len < values.len() {
        return fail(HfStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", values.len()));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    non_null(out, "output pointer")?;
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Simulate the in-line hologram of a built-in sample (`bar-target`,
/// `cells`, `dendrite`) or an image file, mean-normalized.
///
/// # Safety
/// `sample` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hf_simulate(
    sample: *const c_char,
    size: usize,
    wavelength: f64,
    pixel_pitch: f64,
    distance: f64,
    seed: u64,
    out: *mut *mut HfHologram,
) -> HfStatus {
    guard(|| {
        non_null(sample, "sample")?;
        non_null(out, "out")?;
        let name = CStr::from_ptr(sample)
            .to_str()
            .map_err(|_| Failure(HfStatus::InvalidArgument, "sample name is not UTF-8".into()))?;
        let cfg = ExperimentConfig {
            sample: name.into(),
            size,
            wavelength,
            pitch: pixel_pitch,
            z: distance,
            seed,
            ..ExperimentConfig::default()
        };
        let (hologram, truth) = simulate_in_memory(&cfg)?;
        write(out, Box::into_raw(Box::new(HfHologram { hologram, truth: Some(truth) })))
    })
}

/// Wrap a measured intensity (`height * width` values) as a hologram.
/// The intensity is divided by its mean.
///
/// # Safety
/// `intensity` must be valid for `height * width` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn hf_hologram_from_intensity(
    intensity: *const f64,
    height: usize,
    width: usize,
    wavelength: f64,
    pixel_pitch: f64,
    out: *mut *mut HfHologram,
) -> HfStatus {
    guard(|| {
        non_null(out, "out")?;
        let config = OpticalConfig::new(wavelength, pixel_pitch, height, width)?;
        let data = input_slice(intensity, height * width, "intensity")?.to_vec();
        let hologram = Hologram::new(Plane::new(height, width, data)?, config)?.normalized();
        write(out, Box::into_raw(Box::new(HfHologram { hologram, truth: None })))
    })
}

/// # Safety
/// `hologram` must come from this library; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hf_hologram_dims(hologram: *const HfHologram, height: *mut usize, width: *mut usize) -> HfStatus {
    guard(|| {
        non_null(hologram, "hologram")?;
        let cfg = (*hologram).hologram.config;
        write(height, cfg.height)?;
        write(width, cfg.width)
    })
}

/// Copy the (normalized) intensity into `out`.
///
/// # Safety
/// `hologram` must come from this library and `out` be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hf_hologram_intensity(hologram: *const HfHologram, out: *mut f64, len: usize) -> HfStatus {
    guard(|| {
        non_null(hologram, "hologram")?;
        copy_out((*hologram).hologram.intensity.data(), out, len)
    })
}

/// Copy the ground-truth object amplitude; `Unavailable` for measured holograms.
///
/// # Safety
/// `hologram` must come from this library and `out` be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hf_hologram_truth_amplitude(hologram: *const HfHologram, out: *mut f64, len: usize) -> HfStatus {
    guard(|| {
        non_null(hologram, "hologram")?;
        match &(*hologram).truth {
            Some(t) => copy_out(t.data(), out, len),
            None => fail(HfStatus::Unavailable, "hologram has no ground truth"),
        }
    })
}

/// # Safety
/// `hologram` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hf_hologram_free(hologram: *mut HfHologram) {
    if !hologram.is_null() {
        drop(Box::from_raw(hologram));
    }
}

/// Desk-scale defaults: reverse-attention, 1500 epochs, seed 0, Adam 1e-3,
/// candidates 4.5 mm to 5.5 mm in 0.1 mm steps, 32-bit.
#[no_mangle]
pub extern "C" fn hf_reconstruct_options_default() -> HfReconstructOptions {
    let cfg = ExperimentConfig::default();
    HfReconstructOptions {
        strategy: HfStrategy::ReverseAttention,
        random_index: 0,
        epochs: cfg.epochs,
        seed: cfg.seed,
        learning_rate: cfg.learning_rate,
        zmin: cfg.zmin,
        zmax: cfg.zmax,
        zstep: cfg.zstep,
        double_precision: 0,
    }
}

fn strategy_of(options: &HfReconstructOptions) -> StrategyKind {
    match options.strategy {
        HfStrategy::Known => StrategyKind::KnownDistance,
        HfStrategy::Random => StrategyKind::RandomDistance { index: options.random_index },
        HfStrategy::NonWeighted => StrategyKind::NonWeightedIntegration,
        HfStrategy::Alternating => StrategyKind::AlternatingDescent,
        HfStrategy::ReverseAttention => StrategyKind::ReverseAttention,
    }
}

/// Train the autoencoder on `hologram`. The known-distance strategy needs a
/// simulated hologram whose true distance lies on the candidate grid.
///
/// # Safety
/// `hologram` must come from this library, `options` be null (defaults) or
/// valid, and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hf_reconstruct(
    hologram: *const HfHologram,
    options: *const HfReconstructOptions,
    out: *mut *mut HfReconstruction,
) -> HfStatus {
    guard(|| {
        non_null(hologram, "hologram")?;
        non_null(out, "out")?;
        let options = if options.is_null() { hf_reconstruct_options_default() } else { *options };
        let holo = &(*hologram).hologram;
        let mut candidates = CandidateSet::from_range(options.zmin, options.zmax, options.zstep)?;
        if let Some(z) = holo.true_distance {
            candidates = candidates.clone().with_true_distance(z).unwrap_or(candidates);
        }
        let mut rc = ReconstructionConfig::desk(holo.config.height, holo.config.width);
        rc.epochs = options.epochs;
        rc.seed = options.seed;
        rc.adam = AdamConfig::with_learning_rate(options.learning_rate);
        let strategy = strategy_of(&options);
        let result = if options.double_precision != 0 {
            reconstruct::<f64>(holo, &candidates, strategy, &rc)?
        } else {
            reconstruct::<f32>(holo, &candidates, strategy, &rc)?
        };
        write(out, Box::into_raw(Box::new(HfReconstruction { result })))
    })
}

/// Selected distance in meters; `Unavailable` for non-weighted integration.
///
/// # Safety
/// `reconstruction` must come from this library and the out pointers be valid.
#[no_mangle]
pub unsafe extern "C" fn hf_reconstruction_predicted(
    reconstruction: *const HfReconstruction,
    index: *mut usize,
    distance: *mut f64,
) -> HfStatus {
    guard(|| {
        non_null(reconstruction, "reconstruction")?;
        let r = &(*reconstruction).result;
        match (r.predicted_index, r.predicted_distance) {
            (Some(i), Some(d)) => {
                write(index, i)?;
                write(distance, d)
            }
            _ => fail(HfStatus::Unavailable, format!("strategy {} does not select a distance", r.strategy)),
        }
    })
}

/// Number of candidates the run evaluated (and of entries in its weights).
///
/// # Safety
/// `reconstruction` must come from this library and `count` be valid.
#[no_mangle]
pub unsafe extern "C" fn hf_reconstruction_candidate_count(reconstruction: *const HfReconstruction, count: *mut usize) -> HfStatus {
    guard(|| {
        non_null(reconstruction, "reconstruction")?;
        write(count, (*reconstruction).result.trace_distances.len())
    })
}

/// Candidate weights of the last epoch.
///
/// # Safety
/// `reconstruction` must come from this library and `out` be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hf_reconstruction_weights(reconstruction: *const HfReconstruction, out: *mut f64, len: usize) -> HfStatus {
    guard(|| {
        non_null(reconstruction, "reconstruction")?;
        let last = (*reconstruction).result.trace.last().expect("at least one epoch");
        copy_out(&last.weights, out, len)
    })
}

/// `|O|` of the reconstructed object.
///
/// # Safety
/// `reconstruction` must come from this library and `out` be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hf_reconstruction_amplitude(reconstruction: *const HfReconstruction, out: *mut f64, len: usize) -> HfStatus {
    guard(|| {
        non_null(reconstruction, "reconstruction")?;
        copy_out((*reconstruction).result.object_estimate.amplitude().data(), out, len)
    })
}

/// Phase of the reconstructed object in radians.
///
/// # Safety
/// `reconstruction` must come from this library and `out` be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hf_reconstruction_phase(reconstruction: *const HfReconstruction, out: *mut f64, len: usize) -> HfStatus {
    guard(|| {
        non_null(reconstruction, "reconstruction")?;
        copy_out((*reconstruction).result.object_estimate.phase().data(), out, len)
    })
}

/// # Safety
/// `reconstruction` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hf_reconstruction_free(reconstruction: *mut HfReconstruction) {
    if !reconstruction.is_null() {
        drop(Box::from_raw(reconstruction));
    }
}

/// # Safety
/// Both images must be valid for `height * width` reads.
unsafe fn image_pair(reference: *const f64, test: *const f64, height: usize, width: usize) -> Result<ImagePair, Failure> {
    let r = Plane::new(height, width, input_slice(reference, height * width, "reference")?.to_vec())?;
    let t = Plane::new(height, width, input_slice(test, height * width, "test")?.to_vec())?;
    Ok(ImagePair::new(&r, &t)?)
}

/// PSNR in dB of images in [0, 1]; `+inf` when identical.
///
/// # Safety
/// Both images must be valid for `height * width` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn hf_psnr(reference: *const f64, test: *const f64, height: usize, width: usize, out: *mut f64) -> HfStatus {
    guard(|| write(out, psnr(&image_pair(reference, test, height, width)?)))
}

/// Mean SSIM over 11x11 Gaussian windows; images must be at least 11x11.
///
/// # Safety
/// Both images must be valid for `height * width` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn hf_ssim(reference: *const f64, test: *const f64, height: usize, width: usize, out: *mut f64) -> HfStatus {
    guard(|| write(out, ssim(&image_pair(reference, test, height, width)?)?))
}

/// Angular-spectrum propagation of a complex field by `distance` meters.
/// Input and output are split into real and imaginary planes; the output
/// may not alias the input.
///
/// # Safety
/// All four buffers must be valid for `height * width` elements.
#[no_mangle]
pub unsafe extern "C" fn hf_propagate(
    real: *const f64,
    imag: *const f64,
    height: usize,
    width: usize,
    wavelength: f64,
    pixel_pitch: f64,
    distance: f64,
    out_real: *mut f64,
    out_imag: *mut f64,
) -> HfStatus {
    guard(|| {
        let n = height * width;
        let config = OpticalConfig::new(wavelength, pixel_pitch, height, width)?;
        let (re, im) = (input_slice(real, n, "real")?, input_slice(imag, n, "imag")?);
        let data = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let field = propagate(&ComplexField::new(data, config)?, distance);
        copy_out(field.real().data(), out_real, n)?;
        copy_out(field.imag().data(), out_imag, n)
    })
}

/// Reverse-attention weights for `n` candidate losses.
///
/// # Safety
/// `losses` must be valid for `n` reads and `out` for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn hf_attention_weights(losses: *const f64, n: usize, out: *mut f64) -> HfStatus {
    guard(|| {
        let w = reverse_attention_weights(input_slice(losses, n, "losses")?)?;
        copy_out(&w, out, n)
    })
}

/// Gradient descent on a random scalar quadratic ensemble of `n` members.
/// Writes the final iterate and its distance to the ground minimizer.
///
/// # Safety
/// `final_x` and `final_error` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn hf_quadratic_descend(
    n: usize,
    seed: u64,
    kind: HfLossKind,
    x0: f64,
    iterations: usize,
    final_x: *mut f64,
    final_error: *mut f64,
) -> HfStatus {
    guard(|| {
        let kind = match kind {
            HfLossKind::Ground => LossKind::Ground,
            HfLossKind::ReverseAttention => LossKind::ReverseAttention,
            HfLossKind::NonWeighted => LossKind::NonWeighted,
            HfLossKind::Alternating => LossKind::Alternating,
        };
        let ensemble = QuadraticEnsemble::generate(n, seed)?;
        let trace = descend(&ensemble, kind, &[x0], iterations)?;
        write(final_x, trace.final_iterate()[0])?;
        write(final_error, trace.final_error(&ensemble.optimum()))
    })
}
