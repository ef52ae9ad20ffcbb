use crate::error::{Error, Result};

/// Row-major 2-D array of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height * width != data.len() {
            return Err(Error::InvalidShape {
                op: "plane",
                msg: format!("{height}x{width} needs {} values, got {}", height * width, data.len()),
            });
        }
        Ok(Plane { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Plane { height, width, data: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Plane { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Affine rescale to [0, 1]; a constant plane maps to all zeros.
    pub fn min_max_normalized(&self) -> Plane {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        if span <= 0.0 || !span.is_finite() {
            return Plane::filled(self.height, self.width, 0.0);
        }
        self.map(|v| (v - lo) / span)
    }

    /// Bilinear resample to a new size.
    pub fn resized(&self, height: usize, width: usize) -> Plane {
        if (height, width) == self.dims() {
            return self.clone();
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        Plane::from_fn(height, width, |y, x| {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
            let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
            let top = self.get(y0, x0) * (1.0 - tx) + self.get(y0, x1) * tx;
            let bottom = self.get(y1, x0) * (1.0 - tx) + self.get(y1, x1) * tx;
            top * (1.0 - ty) + bottom * ty
        })
    }
}
