use crate::error::{Error, Result};

use super::tape::Conv2dOptions;
use super::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeometry {
    pub fn infer(input: &[usize], weight: &[usize], options: Conv2dOptions) -> Result<Self> {
        let (&[c_in, h, w], &[c_out, c_w, kh, kw]) = (input, weight) else {
            return Err(Error::ShapeMismatch { op: "conv2d", lhs: input.to_vec(), rhs: weight.to_vec() });
        };
        if c_in != c_w {
            return Err(Error::ShapeMismatch { op: "conv2d", lhs: input.to_vec(), rhs: weight.to_vec() });
        }
        if options.stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be positive".into()));
        }
        let (ph, pw) = (h + 2 * options.padding, w + 2 * options.padding);
        if kh == 0 || kw == 0 || kh > ph || kw > pw {
            return Err(Error::InvalidShape {
                op: "conv2d",
                msg: format!("kernel {kh}x{kw} does not fit padded input {ph}x{pw}"),
            });
        }
        Ok(ConvGeometry {
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            stride: options.stride,
            pad: options.padding,
            h_out: (ph - kh) / options.stride + 1,
            w_out: (pw - kw) / options.stride + 1,
        })
    }

    pub fn col_rows(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    pub fn out_spatial(&self) -> usize {
        self.h_out * self.w_out
    }

    /// Input coordinate hit by output `o` and kernel tap `k`, if inside the image.
    #[cfg(test)]
    fn source(o: usize, k: usize, stride: usize, pad: usize, limit: usize) -> Option<usize> {
        (o * stride + k).checked_sub(pad).filter(|&s| s < limit)
    }

    /// Outputs `lo..hi` along one axis whose tap `k` lands inside `0..limit`.
    #[inline]
    fn valid_range(&self, k: usize, limit: usize, outputs: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if k >= self.pad { 0 } else { (self.pad - k).div_ceil(s) };
        let hi = if limit + self.pad > k { ((limit + self.pad - k - 1) / s + 1).min(outputs) } else { 0 };
        (lo, hi.max(lo))
    }
}

/// Unfold `[C, H, W]` into a `[C*kh*kw, H_out*W_out]` patch matrix.
pub(crate) fn im2col<T: Real>(input: &[T], g: &ConvGeometry) -> Vec<T> {
    let spatial = g.out_spatial();
    let mut cols = vec![T::zero(); g.col_rows() * spatial];
    for c in 0..g.c_in {
        let plane = &input[c * g.h * g.w..][..g.h * g.w];
        for ky in 0..g.kh {
            let (y_lo, y_hi) = g.valid_range(ky, g.h, g.h_out);
            for kx in 0..g.kw {
                let (x_lo, x_hi) = g.valid_range(kx, g.w, g.w_out);
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst = &mut cols[row * spatial..][..spatial];
                for oy in y_lo..y_hi {
                    let iy = oy * g.stride + ky - g.pad;
                    let src_row = &plane[iy * g.w..][..g.w];
                    let dst_row = &mut dst[oy * g.w_out..][x_lo..x_hi];
                    let ix0 = x_lo * g.stride + kx - g.pad;
                    if g.stride == 1 {
                        dst_row.copy_from_slice(&src_row[ix0..ix0 + dst_row.len()]);
                    } else {
                        for (d, &v) in dst_row.iter_mut().zip(src_row[ix0..].iter().step_by(g.stride)) {
                            *d = v;
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add patch gradients back onto the input grid.
pub(crate) fn col2im<T: Real>(cols: &[T], g: &ConvGeometry) -> Vec<T> {
    let spatial = g.out_spatial();
    let mut out = vec![T::zero(); g.c_in * g.h * g.w];
    for c in 0..g.c_in {
        let plane = &mut out[c * g.h * g.w..][..g.h * g.w];
        for ky in 0..g.kh {
            let (y_lo, y_hi) = g.valid_range(ky, g.h, g.h_out);
            for kx in 0..g.kw {
                let (x_lo, x_hi) = g.valid_range(kx, g.w, g.w_out);
                let row = (c * g.kh + ky) * g.kw + kx;
                let src = &cols[row * spatial..][..spatial];
                for oy in y_lo..y_hi {
                    let iy = oy * g.stride + ky - g.pad;
                    let src_row = &src[oy * g.w_out..][x_lo..x_hi];
                    let dst_row = &mut plane[iy * g.w..][..g.w];
                    let ix0 = x_lo * g.stride + kx - g.pad;
                    if g.stride == 1 {
                        for (d, &v) in dst_row[ix0..ix0 + src_row.len()].iter_mut().zip(src_row) {
                            *d = *d + v;
                        }
                    } else {
                        for (d, &v) in dst_row[ix0..].iter_mut().step_by(g.stride).zip(src_row) {
                            *d = *d + v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Reference unfold used to cross-check the range arithmetic above.
#[cfg(test)]
fn im2col_naive<T: Real>(input: &[T], g: &ConvGeometry) -> Vec<T> {
    let spatial = g.out_spatial();
    let mut cols = vec![T::zero(); g.col_rows() * spatial];
    for c in 0..g.c_in {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                for oy in 0..g.h_out {
                    for ox in 0..g.w_out {
                        let (Some(iy), Some(ix)) = (
                            ConvGeometry::source(oy, ky, g.stride, g.pad, g.h),
                            ConvGeometry::source(ox, kx, g.stride, g.pad, g.w),
                        ) else {
                            continue;
                        };
                        cols[row * spatial + oy * g.w_out + ox] = input[(c * g.h + iy) * g.w + ix];
                    }
                }
            }
        }
    }
    cols
}
