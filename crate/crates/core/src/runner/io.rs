//! Image, sidecar and CSV persistence.
//!
//! Trace CSV columns, in order: `epoch,candidate_index,distance_m,loss,weight,total`
//! with one row per epoch and candidate.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::CandidateLossReport;
use crate::optics::{Hologram, ObjectModel, OpticalConfig, Padding};
use crate::plane::Plane;

pub const TRACE_HEADER: [&str; 6] = ["epoch", "candidate_index", "distance_m", "loss", "weight", "total"];

fn image_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image { path: path.display().to_string(), msg: e.to_string() }
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv { path: path.display().to_string(), msg: e.to_string() }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Any grayscale-convertible raster (PNG 8/16 bit, PGM, ...) scaled to [0, 1].
pub fn read_image(path: &Path) -> Result<Plane> {
    let img = image::open(path).map_err(|e| image_error(path, e))?.into_luma16();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
    Plane::new(h as usize, w as usize, data)
}

/// 16-bit grayscale PNG of values in [0, 1] (clamped).
pub fn write_image(path: &Path, plane: &Plane) -> Result<()> {
    let raw: Vec<u16> = plane.data().iter().map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(plane.width() as u32, plane.height() as u32, raw).expect("buffer matches dims");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| image_error(path, e))
}

/// Phase in radians stored with `-pi -> 0` and `pi -> 65535`.
pub fn write_phase_image(path: &Path, phase: &Plane) -> Result<()> {
    write_image(path, &phase.map(|p| (p + PI) / (2.0 * PI)))
}

pub fn read_phase_image(path: &Path) -> Result<Plane> {
    Ok(read_image(path)?.map(|v| v * 2.0 * PI - PI))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.display().to_string(), source: e })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.display().to_string(), source: e })
}

pub const HOLOGRAM_IMAGE: &str = "hologram.png";
pub const HOLOGRAM_META: &str = "hologram.json";
pub const TRUTH_IMAGE: &str = "object_amplitude.png";

/// Sidecar written next to a simulated hologram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HologramMeta {
    pub optics: OpticalConfig,
    pub true_distance: Option<f64>,
    /// Mean the raw intensity was divided by, if normalized.
    pub normalization: Option<f64>,
    /// Stored pixel value 65535 corresponds to this intensity.
    pub intensity_scale: f64,
    pub sample: String,
    pub object: ObjectModel,
    pub padding: Padding,
    pub noise: f64,
    pub seed: u64,
    /// Ground-truth amplitude image relative to the sidecar, when known.
    pub truth_image: Option<String>,
}

pub fn write_hologram(dir: &Path, hologram: &Hologram, mut meta: HologramMeta) -> Result<()> {
    ensure_dir(dir)?;
    let (_, max) = hologram.intensity.min_max();
    let scale = if max > 0.0 { max } else { 1.0 };
    meta.intensity_scale = scale;
    meta.optics = hologram.config;
    meta.true_distance = hologram.true_distance;
    meta.normalization = hologram.normalization;
    write_image(&dir.join(HOLOGRAM_IMAGE), &hologram.intensity.map(|v| v / scale))?;
    write_json(&dir.join(HOLOGRAM_META), &meta)
}

pub fn read_hologram(dir: &Path) -> Result<(Hologram, HologramMeta)> {
    let meta: HologramMeta = read_json(&dir.join(HOLOGRAM_META))?;
    let stored = read_image(&dir.join(HOLOGRAM_IMAGE))?;
    let mut hologram = Hologram::new(stored.map(|v| v * meta.intensity_scale), meta.optics)?;
    hologram.true_distance = meta.true_distance;
    hologram.normalization = meta.normalization;
    Ok((hologram, meta))
}

pub fn truth_path(dir: &Path, meta: &HologramMeta) -> Option<PathBuf> {
    meta.truth_image.as_ref().map(|name| dir.join(name))
}

pub fn write_trace(path: &Path, distances: &[f64], trace: &[CandidateLossReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_error(path, e))?;
    for report in trace {
        for (i, (&loss, &weight)) in report.losses.iter().zip(&report.weights).enumerate() {
            w.write_record([
                report.epoch.to_string(),
                i.to_string(),
                format!("{:e}", distances[i]),
                format!("{:e}", loss),
                format!("{:e}", weight),
                format!("{:e}", report.total),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_trace`]; candidate distances are returned alongside.
pub fn read_trace(path: &Path) -> Result<(Vec<f64>, Vec<CandidateLossReport>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    if header != TRACE_HEADER {
        return Err(csv_error(path, format!("unexpected trace header {header:?}")));
    }
    let mut distances: Vec<f64> = Vec::new();
    let mut trace: Vec<CandidateLossReport> = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let field = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| csv_error(path, format!("bad number '{}'", &row[i])))
        };
        let (epoch, index) = (field(0)? as usize, field(1)? as usize);
        if trace.last().is_none_or(|t| t.epoch != epoch) {
            trace.push(CandidateLossReport { epoch, losses: vec![], weights: vec![], total: field(5)? });
        }
        if index == distances.len() {
            distances.push(field(2)?);
        }
        let last = trace.last_mut().expect("pushed above");
        last.losses.push(field(3)?);
        last.weights.push(field(4)?);
    }
    Ok((distances, trace))
}

/// Rows of plain numbers under a header.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
