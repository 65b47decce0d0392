//! Oracle tests for the quality metrics: the library implementations
//! must agree with the independent scalar-loop references in
//! `common/oracles.rs` on random images.

mod common;

use common::oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ticolor::metrics::{msssim, nqm, psnr, ssim, NqmParams, SsimParams};

// ------------------------------------------------------------- the tests

#[test]
fn psnr_matches_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let a = random_raster(&mut rng, 3, 32, 32);
        let b = random_raster(&mut rng, 3, 32, 32);
        let got = psnr(&a, &b, 255.0).unwrap();
        let want = oracle_psnr(&a, &b);
        assert!((got - want).abs() < 1e-6, "psnr {got} vs oracle {want}");
    }
}

#[test]
fn ssim_matches_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for channels in [1, 3] {
        let a = random_raster(&mut rng, channels, 32, 32);
        let b = random_raster(&mut rng, channels, 32, 32);
        let got = ssim(&a, &b, &SsimParams::default()).unwrap();
        let want = oracle_ssim(&a, &b);
        assert!((got - want).abs() < 1e-6, "ssim {got} vs oracle {want}");
    }
}

#[test]
fn msssim_matches_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    // 32x32 exercises the auto level reduction; 96x96 uses more scales
    for (h, w) in [(32, 32), (96, 96)] {
        let a = random_raster(&mut rng, 3, h, w);
        let b = random_raster(&mut rng, 3, h, w);
        let got = msssim(&a, &b, &SsimParams::default()).unwrap();
        let want = oracle_msssim(&a, &b);
        assert!((got - want).abs() < 1e-6, "msssim {got} vs oracle {want} at {h}x{w}");
    }
}

#[test]
fn nqm_matches_naive_dft_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..3 {
        let reference = textured_raster(&mut rng, 1, 32, 32);
        let mut degraded = reference.clone();
        for v in &mut degraded.data {
            *v = (*v + rng.gen_range(-20.0..20.0)).clamp(0.0, 255.0);
        }
        let got = nqm(&degraded, &reference, &NqmParams::default()).unwrap();
        let want = oracle_nqm(&degraded, &reference);
        assert!((got - want).abs() < 1e-4, "nqm {got} vs oracle {want}");
    }
}

#[test]
fn all_metrics_degrade_monotonically_with_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let reference = textured_raster(&mut rng, 3, 64, 64);
    for seed in [100, 200, 300] {
        let scores: Vec<[f64; 4]> = [5.0, 15.0, 25.0]
            .iter()
            .map(|&sigma| {
                let noisy = degrade(&reference, sigma, seed);
                [
                    psnr(&noisy, &reference, 255.0).unwrap(),
                    nqm(&noisy, &reference, &NqmParams::default()).unwrap(),
                    ssim(&noisy, &reference, &SsimParams::default()).unwrap(),
                    msssim(&noisy, &reference, &SsimParams::default()).unwrap(),
                ]
            })
            .collect();
        for metric in 0..4 {
            let name = ["psnr", "nqm", "ssim", "msssim"][metric];
            assert!(
                scores[0][metric] > scores[1][metric] && scores[1][metric] > scores[2][metric],
                "{name} not strictly decreasing (seed {seed}): {:?} {:?} {:?}",
                scores[0][metric],
                scores[1][metric],
                scores[2][metric]
            );
        }
    }
}

#[test]
fn identical_pairs_hit_the_fixed_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let a = textured_raster(&mut rng, 3, 32, 32);
    assert!(psnr(&a, &a, 255.0).unwrap().is_infinite());
    assert!((ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-12);
    assert!((msssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-9);
    assert!(nqm(&a, &a, &NqmParams::default()).unwrap() > 50.0);
}
