use std::f64::consts::TAU;

use fan_core::spectral::{
    amplitude, bin_count, frl_decompose, frl_decompose_masked, irdft, rdft, spectral_variance, top_k_indices,
    FrequencyMask,
};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

/// O(L²) reference transform.
fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..bin_count(n))
        .map(|w| {
            x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, v)| {
                let a = -TAU * (w * t) as f64 / n as f64;
                acc + Complex64::new(v * a.cos(), v * a.sin())
            })
        })
        .collect()
}

fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-10.0..10.0)).collect()
}

#[test]
fn round_trip_over_odd_and_even_lengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for len in [8, 95, 96, 97] {
        for _ in 0..50 {
            let x = random_vec(len, &mut rng);
            let back = irdft(&rdft(&x).unwrap(), len).unwrap();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "L={len}: {err:e}");
        }
    }
}

#[test]
fn forward_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for len in [2, 3, 8, 95, 96, 97] {
        let x = random_vec(len, &mut rng);
        let fast = rdft(&x).unwrap();
        for (a, b) in fast.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-9 * len as f64);
        }
    }
}

/// Σ x² = (1/L) Σ_full |z|², with the half-spectrum doubling every bin that
/// has a distinct conjugate partner.
fn parseval_spectral_energy(z: &[Complex64], len: usize) -> f64 {
    let mut e = 0.0;
    for (w, c) in z.iter().enumerate() {
        let twin = w != 0 && 2 * w != len;
        e += if twin { 2.0 } else { 1.0 } * c.norm_sqr();
    }
    e / len as f64
}

#[test]
fn parseval_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for len in [8, 95, 96, 97] {
        for _ in 0..50 {
            let x = random_vec(len, &mut rng);
            let time: f64 = x.iter().map(|v| v * v).sum();
            let freq = parseval_spectral_energy(&rdft(&x).unwrap(), len);
            assert!((time - freq).abs() <= 1e-6 * time, "L={len}");
        }
    }
}

#[test]
fn dc_in_mask_removes_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let len = rng.random_range(4..120);
        let offset = rng.random_range(-50.0..50.0);
        let x = Array2::from_shape_fn((len, 2), |_| offset + rng.random_range(-1.0..1.0));
        let d = frl_decompose(x.view(), 1).unwrap();
        // a large offset makes bin 0 the top bin in every channel
        for c in 0..2 {
            assert_eq!(d.mask.channel(c), &[0]);
            let m = d.x_res.column(c).mean().unwrap();
            assert!(m.abs() < 1e-9, "residual mean {m:e}");
        }
    }
}

#[test]
fn masks_are_deterministic_and_ordered() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let x = Array2::from_shape_fn((64, 3), |_| rng.random_range(-1.0..1.0));
        let a = frl_decompose(x.view(), 4).unwrap();
        let b = frl_decompose(x.view(), 4).unwrap();
        assert_eq!(a, b);
        for c in 0..3 {
            let m = a.mask.channel(c);
            assert!(m.windows(2).all(|p| p[0] < p[1]));
            let amp = amplitude(&rdft(&x.column(c).to_vec()).unwrap(), 64);
            assert_eq!(m, top_k_indices(&amp, 4).unwrap());
        }
    }
}

#[test]
fn decomposition_sums_to_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let len = rng.random_range(2..100);
        let k = rng.random_range(1..10);
        let x = Array2::from_shape_fn((len, 2), |_| rng.random_range(-5.0..5.0));
        let d = frl_decompose(x.view(), k).unwrap();
        let err = (&d.x_non + &d.x_res - &x).mapv(f64::abs).fold(0.0, |a: f64, b| a.max(*b));
        assert!(err < 1e-9);
    }
}

#[test]
fn masked_decomposition_matches_instance_wise_when_masks_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Array2::from_shape_fn((48, 2), |_| rng.random_range(-1.0..1.0));
    let own = frl_decompose(x.view(), 3).unwrap();
    let again = frl_decompose_masked(x.view(), &own.mask).unwrap();
    let err = (&own.x_non - &again.x_non).mapv(f64::abs).fold(0.0, |a: f64, b| a.max(*b));
    assert!(err < 1e-12);
}

/// Window set with `tones` aligned tones whose amplitudes differ per window,
/// over a small noise floor.
fn multi_tone_set(rng: &mut ChaCha8Rng, len: usize, dims: usize, tones: usize, count: usize) -> Vec<Array2<f64>> {
    let mut bins: Vec<usize> = Vec::new();
    while bins.len() < tones {
        let b = rng.random_range(1..len / 2);
        if !bins.contains(&b) {
            bins.push(b);
        }
    }
    (0..count)
        .map(|_| {
            let amps: Vec<f64> = (0..tones * dims).map(|_| rng.random_range(1.0..4.0)).collect();
            let phases: Vec<f64> = (0..tones * dims).map(|_| rng.random_range(0.0..TAU)).collect();
            Array2::from_shape_fn((len, dims), |(t, c)| {
                let mut v = rng.random_range(-0.05..0.05);
                for (j, &b) in bins.iter().enumerate() {
                    let i = c * tones + j;
                    v += amps[i] * (TAU * (b * t) as f64 / len as f64 + phases[i]).cos();
                }
                v
            })
        })
        .collect()
}

#[test]
fn residual_spectral_variance_is_smaller() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let tones = rng.random_range(1..5);
        let set = multi_tone_set(&mut rng, 96, 2, tones, 20);
        let views: Vec<ArrayView2<f64>> = set.iter().map(|w| w.view()).collect();
        let residuals: Vec<Array2<f64>> = set.iter().map(|w| frl_decompose(w.view(), tones).unwrap().x_res).collect();
        let res_views: Vec<ArrayView2<f64>> = residuals.iter().map(|w| w.view()).collect();
        let before = spectral_variance(&views).unwrap();
        let after = spectral_variance(&res_views).unwrap();
        assert!(after < before, "{after} !< {before}");
    }
}

#[test]
fn fixed_mask_rejects_out_of_range_bins() {
    let x = Array2::<f64>::zeros((8, 1));
    assert!(FrequencyMask::new(vec![vec![7]], 1, 5).is_err());
    let m = FrequencyMask::new(vec![vec![4]], 1, 5).unwrap();
    assert!(frl_decompose_masked(x.view(), &m).is_ok());
    let short = Array2::<f64>::zeros((6, 1));
    assert!(frl_decompose_masked(short.view(), &m).is_err());
}
