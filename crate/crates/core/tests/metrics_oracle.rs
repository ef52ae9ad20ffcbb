use holofocus::metrics::{mse, psnr, ssim, ImagePair};
use holofocus::Plane;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct 2-D windowed SSIM with a full 11x11 Gaussian kernel, no separability.
fn ssim_reference(a: &Plane, b: &Plane) -> f64 {
    let (h, w) = a.dims();
    let mut kernel = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0;
    for y in 0..=h - 11 {
        for x in 0..=w - 11 {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, row) in kernel.iter().enumerate() {
                for (j, &kv) in row.iter().enumerate() {
                    let k = kv / total;
                    let (va, vb) = (a.get(y + i, x + j), b.get(y + i, x + j));
                    ma += k * va;
                    mb += k * vb;
                    saa += k * va * va;
                    sbb += k * vb * vb;
                    sab += k * va * vb;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

fn psnr_reference(a: &Plane, b: &Plane) -> f64 {
    let n = a.data().len() as f64;
    let m: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    -10.0 * m.log10()
}

fn noise_image(h: usize, w: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Plane::from_fn(h, w, |_, _| rng.random_range(0.0..1.0))
}

fn smooth_image(h: usize, w: usize) -> Plane {
    Plane::from_fn(h, w, |y, x| 0.5 + 0.4 * ((y as f64 / 5.0).sin() * (x as f64 / 7.0).cos()))
}

#[test]
fn ssim_matches_direct_window_sum() {
    let a = smooth_image(24, 30);
    let b = noise_image(24, 30, 1).map(|v| 0.2 * v);
    let b = Plane::from_fn(24, 30, |y, x| (a.get(y, x) + b.get(y, x) - 0.1).clamp(0.0, 1.0));
    let pair = ImagePair::new(&a, &b).unwrap();
    assert!((ssim(&pair).unwrap() - ssim_reference(&a, &b)).abs() < 1e-9);
}

#[test]
fn psnr_matches_definition() {
    let a = smooth_image(16, 16);
    let b = noise_image(16, 16, 2);
    let pair = ImagePair::new(&a, &b).unwrap();
    assert!((psnr(&pair) - psnr_reference(&a, &b)).abs() < 1e-9);
    assert!((psnr(&pair) + 10.0 * mse(&pair).log10()).abs() < 1e-12);
}

#[test]
fn frozen_values() {
    // constant offset of 0.1 everywhere: MSE 0.01, PSNR 20 dB
    let a = Plane::filled(16, 16, 0.3);
    let b = Plane::filled(16, 16, 0.4);
    let pair = ImagePair::new(&a, &b).unwrap();
    assert!((psnr(&pair) - 20.0).abs() < 1e-9);
    // flat windows: SSIM = (2*0.12 + c1)/(0.09 + 0.16 + c1)
    let c1 = 1e-4;
    let want = (2.0 * 0.3 * 0.4 + c1) / (0.09 + 0.16 + c1);
    assert!((ssim(&pair).unwrap() - want).abs() < 1e-12);
}

#[test]
fn identical_images_hit_the_sentinels() {
    let a = noise_image(20, 20, 3);
    let pair = ImagePair::new(&a, &a).unwrap();
    assert_eq!(psnr(&pair), f64::INFINITY);
    assert!((ssim(&pair).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn negative_image_scores_low() {
    let a = smooth_image(32, 32);
    let neg = a.map(|v| 1.0 - v);
    let s = ssim(&ImagePair::new(&a, &neg).unwrap()).unwrap();
    assert!(s < 0.2, "ssim {s}");
}

#[test]
fn small_images_and_shape_mismatch_are_errors() {
    let a = Plane::filled(10, 20, 0.5);
    assert!(ssim(&ImagePair::new(&a, &a).unwrap()).is_err());
    assert!(ImagePair::new(&a, &Plane::filled(20, 10, 0.5)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_are_symmetric(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (noise_image(14, 13, s1), noise_image(14, 13, s2));
        let ab = ImagePair::new(&a, &b).unwrap();
        let ba = ImagePair::new(&b, &a).unwrap();
        prop_assert_eq!(psnr(&ab), psnr(&ba));
        prop_assert!((ssim(&ab).unwrap() - ssim(&ba).unwrap()).abs() < 1e-12);
        prop_assert!(ssim(&ab).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn more_noise_lowers_psnr(seed in any::<u64>(), sigma in 0.01f64..0.2) {
        let clean = smooth_image(16, 16);
        let noise = noise_image(16, 16, seed);
        let noisy = |s: f64| Plane::from_fn(16, 16, |y, x| clean.get(y, x) + s * (noise.get(y, x) - 0.5));
        let lo = psnr(&ImagePair::new(&clean, &noisy(sigma)).unwrap());
        let hi = psnr(&ImagePair::new(&clean, &noisy(sigma * 2.0)).unwrap());
        prop_assert!(lo > hi);
    }
}
