//! Scalar diffraction with the angular spectrum method.
//!
//! The transfer function for a distance `z` is
//! `exp(2 pi j z / lambda * sqrt(1 - (lambda fx)^2 - (lambda fy)^2))`, sampled on
//! the DFT frequency grid `f = k / (N * pitch)` with DC at index 0. Evanescent
//! frequencies (negative radicand) are set to zero, so `|transfer| <= 1`
//! everywhere and equals 1 on the propagating band.
//!
//! The reference wave is a unit plane wave at normal incidence, so the field
//! leaving the object plane is the transmittance itself.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::{Complex, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::spectral::{frequency_index, Fft2Plan};
use crate::tensor::{Real, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    /// Meters.
    pub wavelength: f64,
    /// Meters.
    pub pixel_pitch: f64,
    pub height: usize,
    pub width: usize,
}

impl OpticalConfig {
    pub fn new(wavelength: f64, pixel_pitch: f64, height: usize, width: usize) -> Result<Self> {
        let cfg = OpticalConfig { wavelength, pixel_pitch, height, width };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidArgument(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if !(self.pixel_pitch > 0.0 && self.pixel_pitch.is_finite()) {
            return Err(Error::InvalidArgument(format!("pixel pitch must be positive, got {}", self.pixel_pitch)));
        }
        if self.height < 2 || self.width < 2 {
            return Err(Error::InvalidArgument(format!("grid must be at least 2x2, got {}x{}", self.height, self.width)));
        }
        Ok(())
    }

    pub fn grid_len(&self) -> usize {
        self.height * self.width
    }

    fn with_grid(&self, height: usize, width: usize) -> Self {
        OpticalConfig { height, width, ..*self }
    }

    /// Radicand `1 - (lambda fx)^2 - (lambda fy)^2` at DFT bin `(ky, kx)`.
    fn radicand(&self, ky: usize, kx: usize) -> f64 {
        let fy = frequency_index(ky, self.height) / (self.height as f64 * self.pixel_pitch);
        let fx = frequency_index(kx, self.width) / (self.width as f64 * self.pixel_pitch);
        1.0 - (self.wavelength * fx).powi(2) - (self.wavelength * fy).powi(2)
    }

    /// Mask of DFT bins on the propagating band.
    pub fn propagating_band(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.grid_len());
        for ky in 0..self.height {
            for kx in 0..self.width {
                mask.push(self.radicand(ky, kx) >= 0.0);
            }
        }
        mask
    }
}

/// Complex wavefront sampled on the grid of an [`OpticalConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    data: Vec<Complex64>,
    config: OpticalConfig,
}

impl ComplexField {
    pub fn new(data: Vec<Complex64>, config: OpticalConfig) -> Result<Self> {
        if data.len() != config.grid_len() {
            return Err(Error::InvalidShape {
                op: "complex field",
                msg: format!("{} samples for a {}x{} grid", data.len(), config.height, config.width),
            });
        }
        Ok(ComplexField { data, config })
    }

    pub fn from_parts(real: &Plane, imag: &Plane, config: OpticalConfig) -> Result<Self> {
        if real.dims() != imag.dims() || real.dims() != (config.height, config.width) {
            return Err(Error::ShapeMismatch {
                op: "complex field",
                lhs: vec![real.height(), real.width()],
                rhs: vec![imag.height(), imag.width()],
            });
        }
        let data = real.data().iter().zip(imag.data()).map(|(&re, &im)| Complex64::new(re, im)).collect();
        Self::new(data, config)
    }

    pub fn uniform(value: Complex64, config: OpticalConfig) -> Self {
        ComplexField { data: vec![value; config.grid_len()], config }
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.config
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn real(&self) -> Plane {
        self.plane_of(|c| c.re)
    }

    pub fn imag(&self) -> Plane {
        self.plane_of(|c| c.im)
    }

    pub fn amplitude(&self) -> Plane {
        self.plane_of(|c| c.norm())
    }

    pub fn phase(&self) -> Plane {
        self.plane_of(|c| c.arg())
    }

    pub fn intensity(&self) -> Plane {
        self.plane_of(|c| c.norm_sqr())
    }

    fn plane_of(&self, f: impl Fn(&Complex64) -> f64) -> Plane {
        Plane::new(self.config.height, self.config.width, self.data.iter().map(f).collect()).expect("grid")
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Remove evanescent spectral content.
    pub fn band_limited(&self) -> ComplexField {
        let plan = Fft2Plan::<f64>::new(self.config.height, self.config.width);
        let mut buf = self.data.clone();
        plan.forward(&mut buf);
        for (v, keep) in buf.iter_mut().zip(self.config.propagating_band()) {
            if !keep {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        plan.inverse(&mut buf);
        ComplexField { data: buf, config: self.config }
    }

    /// Interleaved `[2, H, W]` layout used on the tape.
    pub fn to_pair<T: Real>(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * self.data.len());
        out.extend(self.data.iter().map(|c| T::lit(c.re)));
        out.extend(self.data.iter().map(|c| T::lit(c.im)));
        out
    }

    pub fn from_pair<T: Real>(pair: &[T], config: OpticalConfig) -> Result<Self> {
        let n = config.grid_len();
        if pair.len() != 2 * n {
            return Err(Error::InvalidShape {
                op: "complex field",
                msg: format!("pair of {} values for a {}x{} grid", pair.len(), config.height, config.width),
            });
        }
        let data = (0..n).map(|i| Complex64::new(pair[i].to_f64_lossy(), pair[n + i].to_f64_lossy())).collect();
        Self::new(data, config)
    }
}

/// Angular-spectrum transfer function for one propagation distance.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationKernel {
    distance: f64,
    transfer: Vec<Complex64>,
    config: OpticalConfig,
}

impl PropagationKernel {
    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn transfer(&self) -> &[Complex64] {
        &self.transfer
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.config
    }

    pub fn conj(&self) -> PropagationKernel {
        PropagationKernel {
            distance: -self.distance,
            transfer: self.transfer.iter().map(|c| c.conj()).collect(),
            config: self.config,
        }
    }

    /// Transfer function converted to the tape's element type.
    pub fn transfer_as<T: Real>(&self) -> Arc<[Complex<T>]> {
        self.transfer.iter().map(|c| Complex::new(T::lit(c.re), T::lit(c.im))).collect()
    }
}

pub fn make_kernel(config: &OpticalConfig, z: f64) -> PropagationKernel {
    let k = 2.0 * PI * z / config.wavelength;
    let mut transfer = Vec::with_capacity(config.grid_len());
    for ky in 0..config.height {
        for kx in 0..config.width {
            let r = config.radicand(ky, kx);
            transfer.push(if r >= 0.0 { Complex64::from_polar(1.0, k * r.sqrt()) } else { Complex64::new(0.0, 0.0) });
        }
    }
    PropagationKernel { distance: z, transfer, config: *config }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    None,
    /// Zero-pad to twice the grid in each axis, propagate, crop the centre.
    Double,
}

pub fn propagate(field: &ComplexField, z: f64) -> ComplexField {
    let kernel = make_kernel(field.config(), z);
    propagate_with(field, &kernel).expect("kernel built for this grid")
}

pub fn propagate_with(field: &ComplexField, kernel: &PropagationKernel) -> Result<ComplexField> {
    let (fc, kc) = (field.config(), kernel.config());
    if (fc.height, fc.width) != (kc.height, kc.width) {
        return Err(Error::ShapeMismatch {
            op: "propagate",
            lhs: vec![fc.height, fc.width],
            rhs: vec![kc.height, kc.width],
        });
    }
    let plan = Fft2Plan::<f64>::new(fc.height, fc.width);
    let mut buf = field.data.clone();
    plan.forward(&mut buf);
    for (v, p) in buf.iter_mut().zip(&kernel.transfer) {
        *v *= p;
    }
    plan.inverse(&mut buf);
    Ok(ComplexField { data: buf, config: *fc })
}

pub fn propagate_padded(field: &ComplexField, z: f64, padding: Padding) -> ComplexField {
    match padding {
        Padding::None => propagate(field, z),
        Padding::Double => {
            let cfg = field.config();
            let (h, w) = (cfg.height, cfg.width);
            let (ph, pw) = (2 * h, 2 * w);
            let (oy, ox) = (h / 2, w / 2);
            let mut padded = vec![Complex64::new(0.0, 0.0); ph * pw];
            for y in 0..h {
                padded[(y + oy) * pw + ox..][..w].copy_from_slice(&field.data[y * w..][..w]);
            }
            let big = ComplexField { data: padded, config: cfg.with_grid(ph, pw) };
            let out = propagate(&big, z);
            let mut data = Vec::with_capacity(h * w);
            for y in 0..h {
                data.extend_from_slice(&out.data[(y + oy) * pw + ox..][..w]);
            }
            ComplexField { data, config: *cfg }
        }
    }
}

/// Differentiable propagation of a `[2, H, W]` field on the tape.
pub fn propagate_on_tape<T: Real>(
    tape: &mut Tape<T>,
    field: Var,
    plan: &Arc<Fft2Plan<T>>,
    transfer: &Arc<[Complex<T>]>,
) -> Result<Var> {
    let spectrum = tape.fft2(field, plan, false)?;
    propagate_spectrum_on_tape(tape, spectrum, plan, transfer)
}

/// Second half of [`propagate_on_tape`], for sharing one forward FFT among
/// many candidate distances.
pub fn propagate_spectrum_on_tape<T: Real>(
    tape: &mut Tape<T>,
    spectrum: Var,
    plan: &Arc<Fft2Plan<T>>,
    transfer: &Arc<[Complex<T>]>,
) -> Result<Var> {
    let filtered = tape.spectral_mul(spectrum, transfer)?;
    tape.fft2(filtered, plan, true)
}

/// Recorded sensor intensity.
#[derive(Clone, Debug, PartialEq)]
pub struct Hologram {
    pub intensity: Plane,
    pub config: OpticalConfig,
    /// Simulation metadata; never read by reconstruction.
    pub true_distance: Option<f64>,
    /// Factor the raw intensity was divided by, when normalized.
    pub normalization: Option<f64>,
}

impl Hologram {
    pub fn new(intensity: Plane, config: OpticalConfig) -> Result<Self> {
        if intensity.dims() != (config.height, config.width) {
            return Err(Error::ShapeMismatch {
                op: "hologram",
                lhs: vec![intensity.height(), intensity.width()],
                rhs: vec![config.height, config.width],
            });
        }
        if intensity.data().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("hologram intensity must be finite and non-negative".into()));
        }
        Ok(Hologram { intensity, config, true_distance: None, normalization: None })
    }

    /// Divide by the mean intensity.
    pub fn normalized(&self) -> Hologram {
        if self.normalization.is_some() {
            return self.clone();
        }
        let mean = self.intensity.mean();
        let scale = if mean > 0.0 { mean } else { 1.0 };
        Hologram {
            intensity: self.intensity.map(|v| v / scale),
            normalization: Some(scale),
            ..self.clone()
        }
    }

    /// Add zero-mean Gaussian noise of standard deviation `sigma` (relative to
    /// the mean intensity) and clamp at zero.
    pub fn with_noise(&self, sigma: f64, seed: u64) -> Result<Hologram> {
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let normal = Normal::new(0.0, sigma * self.intensity.mean())
            .map_err(|e| Error::InvalidArgument(format!("noise sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for v in out.intensity.data_mut() {
            *v = (*v + normal.sample(&mut rng)).max(0.0);
        }
        Ok(out)
    }
}

/// How a grayscale image becomes a complex transmittance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectModel {
    /// `t = 1 - absorption * image`.
    Amplitude { absorption: f64 },
    /// `t = exp(j * max_phase * image)`.
    Phase { max_phase: f64 },
}

impl Default for ObjectModel {
    fn default() -> Self {
        ObjectModel::Amplitude { absorption: 0.9 }
    }
}

/// Transmittance for an image with values in [0, 1].
pub fn transmittance_from_image(image: &Plane, config: &OpticalConfig, model: ObjectModel) -> Result<ComplexField> {
    if image.dims() != (config.height, config.width) {
        return Err(Error::ShapeMismatch {
            op: "transmittance",
            lhs: vec![image.height(), image.width()],
            rhs: vec![config.height, config.width],
        });
    }
    let data = match model {
        ObjectModel::Amplitude { absorption } => {
            if !(0.0..=1.0).contains(&absorption) {
                return Err(Error::InvalidArgument(format!("absorption must lie in [0, 1], got {absorption}")));
            }
            image.data().iter().map(|&v| Complex64::new(1.0 - absorption * v.clamp(0.0, 1.0), 0.0)).collect()
        }
        ObjectModel::Phase { max_phase } => {
            image.data().iter().map(|&v| Complex64::from_polar(1.0, max_phase * v.clamp(0.0, 1.0))).collect()
        }
    };
    ComplexField::new(data, *config)
}

/// In-line hologram of a transmittance under unit plane-wave illumination.
pub fn synthesize_hologram(transmittance: &ComplexField, z: f64) -> Result<Hologram> {
    synthesize_hologram_padded(transmittance, z, Padding::None)
}

pub fn synthesize_hologram_padded(transmittance: &ComplexField, z: f64, padding: Padding) -> Result<Hologram> {
    if transmittance.data().iter().any(|c| !(c.norm() <= 1.0 + 1e-12)) {
        return Err(Error::InvalidArgument("transmittance magnitudes must lie in [0, 1]".into()));
    }
    let at_sensor = propagate_padded(transmittance, z, padding);
    let mut holo = Hologram::new(at_sensor.intensity(), *transmittance.config())?;
    holo.true_distance = Some(z);
    Ok(holo)
}
