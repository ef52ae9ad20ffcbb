//! PSNR and SSIM on images with unit dynamic range.

use crate::error::{Error, Result};
use crate::plane::Plane;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Reference and test image, clamped to [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePair {
    reference: Plane,
    test: Plane,
}

impl ImagePair {
    pub fn new(reference: &Plane, test: &Plane) -> Result<Self> {
        if reference.dims() != test.dims() {
            return Err(Error::ShapeMismatch {
                op: "image pair",
                lhs: vec![reference.height(), reference.width()],
                rhs: vec![test.height(), test.width()],
            });
        }
        Ok(ImagePair {
            reference: reference.map(|v| v.clamp(0.0, 1.0)),
            test: test.map(|v| v.clamp(0.0, 1.0)),
        })
    }

    pub fn reference(&self) -> &Plane {
        &self.reference
    }

    pub fn test(&self) -> &Plane {
        &self.test
    }
}

pub fn mse(pair: &ImagePair) -> f64 {
    let (a, b) = (pair.reference.data(), pair.test.data());
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Peak signal-to-noise ratio in dB with peak 1; `f64::INFINITY` for identical images.
pub fn psnr(pair: &ImagePair) -> f64 {
    let m = mse(pair);
    if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / m).log10()
    }
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable "valid" filtering with the SSIM Gaussian window.
fn filter_valid(data: &[f64], h: usize, w: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ho, wo) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * wo];
    for y in 0..h {
        for x in 0..wo {
            rows[y * wo + x] = win.iter().enumerate().map(|(k, &c)| c * data[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            out[y * wo + x] = win.iter().enumerate().map(|(k, &c)| c * rows[(y + k) * wo + x]).sum();
        }
    }
    out
}

/// Mean structural similarity over all fully-covered 11x11 Gaussian windows.
pub fn ssim(pair: &ImagePair) -> Result<f64> {
    let (h, w) = pair.reference.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!("image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")));
    }
    let win = gaussian_window();
    let (x, y) = (pair.reference.data(), pair.test.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, h, w, &win);
    let mu_y = filter_valid(y, h, w, &win);
    let e_xx = filter_valid(&xx, h, w, &win);
    let e_yy = filter_valid(&yy, h, w, &win);
    let e_xy = filter_valid(&xy, h, w, &win);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Plane {
        Plane::from_fn(h, w, |y, x| (y * w + x) as f64 / (h * w) as f64)
    }

    #[test]
    fn identical_images() {
        let a = ramp(16, 16);
        let pair = ImagePair::new(&a, &a).unwrap();
        assert_eq!(psnr(&pair), f64::INFINITY);
        assert_eq!(ssim(&pair).unwrap(), 1.0);
    }

    #[test]
    fn uniform_offset_gives_twenty_db() {
        let a = Plane::filled(12, 12, 0.3);
        let b = Plane::filled(12, 12, 0.4);
        let p = psnr(&ImagePair::new(&a, &b).unwrap());
        assert!((p - 20.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn values_are_clamped() {
        let a = Plane::filled(4, 4, 1.5);
        let b = Plane::filled(4, 4, 1.0);
        assert_eq!(psnr(&ImagePair::new(&a, &b).unwrap()), f64::INFINITY);
    }

    #[test]
    fn errors() {
        let a = Plane::filled(4, 4, 0.0);
        let b = Plane::filled(4, 5, 0.0);
        assert!(ImagePair::new(&a, &b).is_err());
        assert!(ssim(&ImagePair::new(&a, &a).unwrap()).is_err());
    }

    #[test]
    fn constant_images_reduce_to_luminance_term() {
        let (p, q) = (0.2, 0.7);
        let a = Plane::filled(20, 20, p);
        let b = Plane::filled(20, 20, q);
        let c1 = SSIM_K1 * SSIM_K1;
        let expected = (2.0 * p * q + c1) / (p * p + q * q + c1);
        let got = ssim(&ImagePair::new(&a, &b).unwrap()).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }
}
