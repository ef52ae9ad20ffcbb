//! Procedural stand-ins for the test objects: a resolution bar target,
//! cell-like blobs and a dendrite-like branching pattern. Values lie in
//! [0, 1], where 1 marks an absorbing feature.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::runner::io::read_image;

pub const BUILTIN_SAMPLES: [&str; 3] = ["bar-target", "cells", "dendrite"];

/// Groups of three vertical and three horizontal bars with widths 6, 4, 3
/// and 2 pixels on a 128-pixel design grid, rescaled to `size`.
pub fn bar_target(size: usize) -> Plane {
    let mut rects = Vec::new();
    let mut x0 = 8.0;
    for w in [6.0, 4.0, 3.0, 2.0] {
        for k in 0..3 {
            let k = f64::from(k);
            rects.push((10.0, 10.0 + 5.0 * w, x0 + 2.0 * k * w, x0 + 2.0 * k * w + w));
            rects.push((70.0 + 2.0 * k * w, 70.0 + 2.0 * k * w + w, x0, x0 + 5.0 * w));
        }
        x0 += 6.0 * w + 4.0;
    }
    let scale = 128.0 / size as f64;
    Plane::from_fn(size, size, |y, x| {
        let (v, u) = ((y as f64 + 0.5) * scale, (x as f64 + 0.5) * scale);
        let hit = rects.iter().any(|&(y0, y1, x0, x1)| v >= y0 && v < y1 && u >= x0 && u < x1);
        if hit {
            1.0
        } else {
            0.0
        }
    })
}

/// Soft-edged ellipses with a darker nucleus.
pub fn cells(size: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as f64;
    let blobs: Vec<[f64; 5]> = (0..12)
        .map(|_| {
            [
                rng.random_range(0.12..0.88) * n,
                rng.random_range(0.12..0.88) * n,
                rng.random_range(0.04..0.09) * n,
                rng.random_range(0.6..1.0),
                rng.random_range(0.0..PI),
            ]
        })
        .collect();
    Plane::from_fn(size, size, |y, x| {
        let mut v: f64 = 0.0;
        for &[cy, cx, r, aspect, angle] in &blobs {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            let (s, c) = angle.sin_cos();
            let (a, b) = (dx * c + dy * s, (-dx * s + dy * c) / aspect);
            let rho = (a * a + b * b).sqrt() / r;
            let membrane = 0.5 / (1.0 + ((rho - 1.0) * 8.0).exp());
            let nucleus = 0.5 * (-(rho / 0.35).powi(2)).exp();
            v = v.max(membrane + nucleus);
        }
        v.min(1.0)
    })
}

/// Recursive branches grown from the lower edge.
pub fn dendrite(size: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as f64;
    let mut segments = Vec::new();
    let mut stack = vec![(n * 0.5, n * 0.92, -PI / 2.0, n * 0.22, n * 0.018, 0u32)];
    while let Some((ys, xs, angle, length, width, depth)) = stack.pop() {
        let (ye, xe) = (ys + length * angle.sin(), xs + length * angle.cos());
        segments.push((ys, xs, ye, xe, width));
        if depth < 5 {
            for turn in [-1.0, 1.0] {
                let spread = rng.random_range(0.25..0.6);
                let shrink = rng.random_range(0.6..0.8);
                stack.push((ye, xe, angle + turn * spread, length * shrink, (width * 0.75).max(0.6), depth + 1));
            }
        }
    }
    Plane::from_fn(size, size, |y, x| {
        let (py, px) = (y as f64, x as f64);
        let mut v: f64 = 0.0;
        for &(y0, x0, y1, x1, w) in &segments {
            let (dy, dx) = (y1 - y0, x1 - x0);
            let len2 = dy * dy + dx * dx;
            let t = (((py - y0) * dy + (px - x0) * dx) / len2).clamp(0.0, 1.0);
            let d = ((py - y0 - t * dy).powi(2) + (px - x0 - t * dx).powi(2)).sqrt();
            v = v.max(1.0 / (1.0 + ((d - w) * 2.0).exp()));
        }
        v
    })
}

/// A built-in sample by name, or an image file resized to `size x size`.
pub fn load_sample(name: &str, size: usize, seed: u64) -> Result<Plane> {
    if size < 2 {
        return Err(Error::InvalidArgument(format!("sample size must be at least 2, got {size}")));
    }
    match name {
        "bar-target" => Ok(bar_target(size)),
        "cells" => Ok(cells(size, seed)),
        "dendrite" => Ok(dendrite(size, seed)),
        path => {
            let img = read_image(Path::new(path))?;
            Ok(if img.dims() == (size, size) { img } else { img.resized(size, size) })
        }
    }
}
