//! Two-dimensional FFTs on row-major complex buffers.
//!
//! Both directions are unnormalized; callers apply the `1/N` factor where the
//! inverse transform needs it. Frequencies use the standard DFT layout with
//! DC at index 0.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::tensor::Real;

pub struct Fft2Plan<T: Real> {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft2Plan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2Plan")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl<T: Real> Fft2Plan<T> {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2Plan {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// In-place unnormalized transform. `inverse` selects the `e^{+i...}` kernel.
    pub fn process(&self, buf: &mut [Complex<T>], inverse: bool) {
        assert_eq!(buf.len(), self.len(), "buffer does not match plan grid");
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(buf);

        let (h, w) = (self.height, self.width);
        let mut transposed = vec![Complex::new(T::zero(), T::zero()); h * w];
        for y in 0..h {
            for x in 0..w {
                transposed[x * h + y] = buf[y * w + x];
            }
        }
        col.process(&mut transposed);
        for x in 0..w {
            for y in 0..h {
                buf[y * w + x] = transposed[x * h + y];
            }
        }
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.process(buf, false);
    }

    /// Normalized inverse transform.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.process(buf, true);
        let scale = T::one() / T::lit(self.len() as f64);
        for v in buf.iter_mut() {
            *v = *v * scale;
        }
    }
}

/// Signed DFT frequency index for position `k` of an `n`-point transform.
pub fn frequency_index(k: usize, n: usize) -> f64 {
    if k <= (n - 1) / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}
