//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use holofocus::optics::{make_kernel, propagate_on_tape, synthesize_hologram_padded, ComplexField, OpticalConfig, Padding};
use holofocus::spectral::Fft2Plan;
use holofocus::tensor::{Conv2dOptions, Tape, Tensor, Var};
use num_complex::{Complex, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Entries in `±[0.1, 1]`, so kinks at zero stay out of the difference stencil.
pub fn away_from_zero(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut t = random(shape, seed);
    for v in t.data_mut() {
        *v = v.signum() * (0.1 + 0.9 * v.abs());
    }
    t
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

/// Reduces the op output to a scalar by a fixed random projection.
fn project(tape: &mut Tape<f64>, out: Var) -> Var {
    let probe = random(tape.shape(out), 0xabc);
    let p = tape.constant(probe);
    let prod = tape.mul(out, p).unwrap();
    tape.sum(prod)
}

/// Largest relative error, over all inputs, between the tape gradient and
/// central differences of a random projection of `f`.
pub fn fd_error<F>(inputs: &[Tensor<f64>], f: F) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let eval = |values: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars);
        let loss = project(&mut tape, out);
        tape.value(loss).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let loss = project(&mut tape, out);
    tape.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (i, var) in vars.iter().enumerate() {
        let analytic = tape.grad(*var).map(|g| g.into_data()).unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        let mut numeric = Vec::with_capacity(inputs[i].numel());
        for j in 0..inputs[i].numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            numeric.push((eval(&plus) - eval(&minus)) / (2.0 * FD_STEP));
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Finite-difference error of every tape op, plus propagation and the
/// hologram loss built from them.
pub fn op_suite() -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut push = |name: &str, err: f64| out.push((name.to_string(), err));

    let pair = || vec![random(&[3, 4], 1), random(&[3, 4], 2)];
    push("add", fd_error(&pair(), |t, v| t.add(v[0], v[1]).unwrap()));
    push("sub", fd_error(&pair(), |t, v| t.sub(v[0], v[1]).unwrap()));
    push("mul", fd_error(&pair(), |t, v| t.mul(v[0], v[1]).unwrap()));
    push("mse", fd_error(&pair(), |t, v| t.mse(v[0], v[1]).unwrap()));
    push(
        "shared input",
        fd_error(&[random(&[5], 3)], |t, v| {
            let sq = t.mul(v[0], v[0]).unwrap();
            t.add(sq, v[0]).unwrap()
        }),
    );

    let x = || vec![random(&[6], 4)];
    push("scale", fd_error(&x(), |t, v| t.scale(v[0], -2.5)));
    push("add_scalar", fd_error(&x(), |t, v| t.add_scalar(v[0], 0.75)));
    push("square", fd_error(&x(), |t, v| t.square(v[0])));
    push("sum", fd_error(&x(), |t, v| t.sum(v[0])));
    push("mean", fd_error(&x(), |t, v| t.mean(v[0])));
    push("tanh", fd_error(&x(), |t, v| t.tanh(v[0])));
    push("sigmoid", fd_error(&x(), |t, v| t.sigmoid(v[0])));
    let kinked = || vec![away_from_zero(&[8], 5)];
    push("relu", fd_error(&kinked(), |t, v| t.relu(v[0])));
    push("leaky_relu", fd_error(&kinked(), |t, v| t.leaky_relu(v[0], 0.1)));

    let three = [random(&[4], 6), random(&[4], 7), random(&[4], 8)];
    push(
        "weighted_sum",
        fd_error(&three, |t, v| {
            let terms: Vec<Var> = v.iter().map(|&x| t.mean(x)).collect();
            t.weighted_sum(&terms, &[0.2, 0.5, 0.3]).unwrap()
        }),
    );
    push("matmul", fd_error(&[random(&[3, 4], 9), random(&[4, 2], 10)], |t, v| t.matmul(v[0], v[1]).unwrap()));

    let convs = [
        (Conv2dOptions { stride: 1, padding: 1 }, true),
        (Conv2dOptions { stride: 2, padding: 1 }, true),
        (Conv2dOptions { stride: 1, padding: 0 }, false),
        (Conv2dOptions { stride: 2, padding: 0 }, true),
    ];
    for (k, (options, with_bias)) in convs.into_iter().enumerate() {
        let seed = 20 + 3 * k as u64;
        let mut ins = vec![random(&[2, 7, 6], seed), random(&[3, 2, 3, 3], seed + 1)];
        if with_bias {
            ins.push(random(&[3], seed + 2));
        }
        let name = format!("conv2d stride {} pad {}{}", options.stride, options.padding, if with_bias { " bias" } else { "" });
        push(&name, fd_error(&ins, |t, v| t.conv2d(v[0], v[1], v.get(2).copied(), options).unwrap()));
    }

    push("upsample", fd_error(&[random(&[2, 3, 4], 30)], |t, v| t.upsample_nearest(v[0], 2).unwrap()));
    push("narrow", fd_error(&[random(&[5, 3], 31)], |t, v| t.narrow(v[0], 1, 3).unwrap()));
    push("concat", fd_error(&[random(&[2, 3], 32), random(&[1, 3], 33)], |t, v| t.concat(&[v[0], v[1]]).unwrap()));
    push("crop", fd_error(&[random(&[2, 5, 6], 34)], |t, v| t.crop(v[0], 3, 4).unwrap()));
    push("reshape", fd_error(&[random(&[2, 6], 35)], |t, v| t.reshape(v[0], vec![3, 4]).unwrap()));

    let plan = Arc::new(Fft2Plan::<f64>::new(4, 6));
    push("fft2", fd_error(&[random(&[2, 4, 6], 40)], |t, v| t.fft2(v[0], &plan, false).unwrap()));
    push("ifft2", fd_error(&[random(&[2, 4, 6], 41)], |t, v| t.fft2(v[0], &plan, true).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let transfer: Arc<[Complex<f64>]> =
        (0..24).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    push("spectral_mul", fd_error(&[random(&[2, 4, 6], 43)], |t, v| t.spectral_mul(v[0], &transfer).unwrap()));
    push("abs2", fd_error(&[random(&[2, 4, 5], 44)], |t, v| t.abs2(v[0]).unwrap()));

    let cfg = OpticalConfig::new(532e-9, 2e-6, 8, 8).unwrap();
    let plan = Arc::new(Fft2Plan::<f64>::new(8, 8));
    let transfer = make_kernel(&cfg, 5e-3).transfer_as::<f64>();
    push("propagate", fd_error(&[random(&[2, 8, 8], 50)], |t, v| propagate_on_tape(t, v[0], &plan, &transfer).unwrap()));
    let target = random(&[8, 8], 51);
    push(
        "hologram loss",
        fd_error(&[random(&[2, 8, 8], 52)], |t, v| {
            let field = propagate_on_tape(t, v[0], &plan, &transfer).unwrap();
            let intensity = t.abs2(field).unwrap();
            let captured = t.constant(target.clone());
            t.mse(intensity, captured).unwrap()
        }),
    );
    out
}

/// First Rayleigh-Sommerfeld integral evaluated as a direct sum over source pixels.
pub fn rayleigh_sommerfeld(source: &ComplexField, z: f64) -> Vec<Complex64> {
    let cfg = source.config();
    let (n, dx) = (cfg.width, cfg.pixel_pitch);
    let k = 2.0 * PI / cfg.wavelength;
    let mut out = vec![Complex64::new(0.0, 0.0); n * cfg.height];
    for (i, &u0) in source.data().iter().enumerate() {
        let (sy, sx) = ((i / n) as f64, (i % n) as f64);
        for (j, o) in out.iter_mut().enumerate() {
            let x = ((j % n) as f64 - sx) * dx;
            let y = ((j / n) as f64 - sy) * dx;
            let r = (x * x + y * y + z * z).sqrt();
            let h = z / (2.0 * PI) * Complex64::from_polar(1.0, k * r) / (r * r) * Complex64::new(1.0 / r, -k);
            *o += u0 * h * dx * dx;
        }
    }
    out
}

/// Relative L2 error of a padded 32x32 hologram against the direct sum.
///
/// The object is a soft disk in a Gaussian aperture with negligible
/// amplitude at the border, at 0.2 um pitch and 1 um distance so the
/// diffraction sum stays cheap and well resolved.
pub fn diffraction_sum_error() -> f64 {
    let n = 32;
    let cfg = OpticalConfig::new(532e-9, 0.2e-6, n, n).unwrap();
    let z = 1e-6;
    let c = n as f64 / 2.0;
    let data = (0..n * n)
        .map(|i| {
            let (y, x) = ((i / n) as f64, (i % n) as f64);
            let r = ((x - c).powi(2) + (y - c).powi(2)).sqrt();
            let disk = 1.0 - 1.0 / (1.0 + (r - 3.0).exp());
            Complex64::new((-(r / 4.0).powi(2)).exp() * disk, 0.0)
        })
        .collect();
    let t = ComplexField::new(data, cfg).unwrap();
    let holo = synthesize_hologram_padded(&t, z, Padding::Double).unwrap();
    let oracle: Vec<f64> = rayleigh_sommerfeld(&t, z).iter().map(|v| v.norm_sqr()).collect();
    let num: f64 = holo.intensity.data().iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = oracle.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

pub fn random_field(cfg: OpticalConfig, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..cfg.grid_len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    ComplexField::new(data, cfg).unwrap()
}

pub fn rms_diff(a: &ComplexField, b: &ComplexField) -> f64 {
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum();
    (s / a.data().len() as f64).sqrt()
}

pub fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `exp(1/L_i) / sum_j exp(1/L_j)` without any shift; `None` once it overflows.
pub fn naive_weights(losses: &[f64]) -> Option<Vec<f64>> {
    let exps: Vec<f64> = losses.iter().map(|l| (1.0 / l).exp()).collect();
    let norm: f64 = exps.iter().sum();
    if exps.iter().all(|e| e.is_finite()) && norm.is_finite() && norm > 0.0 {
        Some(exps.iter().map(|e| e / norm).collect())
    } else {
        None
    }
}
