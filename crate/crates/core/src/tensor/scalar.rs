use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst};
use rustfft::FftNum;

/// Floating-point element type usable on the tape.
///
/// Implemented for `f32` (image-scale reconstruction) and `f64`
/// (gradient checks and the quadratic lab).
pub trait Real:
    Float + FloatConst + FftNum + Sum + Default + Debug + Display + Send + Sync + 'static
{
    const NAME: &'static str;

    fn lit(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// `c = alpha * op(a) * op(b) + beta * c` for row-major matrices, where
    /// `op(a)` is `m x k` and `op(b)` is `k x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_transposed: bool,
        b: &[Self],
        b_transposed: bool,
        beta: Self,
        c: &mut [Self],
    );
}

fn strides(rows: usize, cols: usize, transposed: bool) -> (isize, isize) {
    // Stored matrix is rows x cols when not transposed, cols x rows otherwise.
    if transposed {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

/// Row-major `rows x cols` to row-major `cols x rows`, in cache-sized tiles.
pub(crate) fn transpose<T: Copy + Default>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    const TILE: usize = 16;
    let mut out = vec![T::default(); rows * cols];
    for c0 in (0..cols).step_by(TILE) {
        for r0 in (0..rows).step_by(TILE) {
            let r1 = (r0 + TILE).min(rows);
            for c in c0..(c0 + TILE).min(cols) {
                for (d, r) in out[c * rows + r0..c * rows + r1].iter_mut().zip(r0..r1) {
                    *d = src[r * cols + c];
                }
            }
        }
    }
    out
}

/// Strided packing of a transposed right operand is slow once it no longer
/// fits in cache, so such operands are transposed up front.
const EAGER_TRANSPOSE_LEN: usize = 1 << 14;

macro_rules! impl_real {
    ($t:ty, $name:expr, $gemm:path) => {
        impl Real for $t {
            const NAME: &'static str = $name;

            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_transposed: bool,
                b: &[Self],
                b_transposed: bool,
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                if b_transposed && k * n >= EAGER_TRANSPOSE_LEN {
                    let b = transpose(&b[..k * n], n, k);
                    return Self::gemm(m, k, n, alpha, a, a_transposed, &b, false, beta, c);
                }
                let (rsa, csa) = strides(m, k, a_transposed);
                let (rsb, csb) = strides(k, n, b_transposed);
                // SAFETY: lengths checked above; strides describe in-bounds
                // row-major (or transposed) layouts of those slices.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_real!(f32, "f32", matrixmultiply::sgemm);
impl_real!(f64, "f64", matrixmultiply::dgemm);
