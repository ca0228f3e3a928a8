//! Transform, shift and splice checks against direct computation.

mod common;

use common::fixtures::{fixture_phantom, mean_artifact_rmse, FROZEN_RMSE};
use common::oracles::naive_dft;
use motionbias_core::kspace::*;
use motionbias_core::motion::{corrupt_image, MotionTrajectory};
use motionbias_core::rng::SimRng;
use motionbias_core::{ComplexGrid, Image2D, SeverityCategory};
use num_complex::Complex64;
use proptest::prelude::*;

fn random_image(h: usize, w: usize, rng: &mut SimRng) -> Image2D {
    Image2D::from_fn(h, w, |_, _| rng.uniform(-1.0, 1.0) as f32)
}

fn max_abs(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).fold(0.0, f64::max)
}

#[test]
fn fft_matches_naive_dft_all_small_shapes() {
    let mut rng = SimRng::new(11);
    for h in 1..=8 {
        for w in 1..=8 {
            let img = random_image(h, w, &mut rng);
            let got = fft2d(&img);
            let want = naive_dft(h, w, &img.to_f64());
            let err = got.data().iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{h}x{w}: {err}");
        }
    }
}

#[test]
fn odd_and_prime_sizes_roundtrip() {
    let mut rng = SimRng::new(12);
    for (h, w) in [(13, 7), (31, 64), (17, 17), (64, 64), (33, 45)] {
        let img = random_image(h, w, &mut rng);
        let (back, residue) = ifft2d_with_residue(&fft2d(&img));
        assert!(max_abs(img.data(), back.data()) < 1e-6);
        assert!(residue < 1e-9);
    }
}

#[test]
fn integer_shift_is_circular_roll() {
    let mut rng = SimRng::new(13);
    for (h, w) in [(8, 8), (7, 10), (16, 9)] {
        let img = random_image(h, w, &mut rng);
        for (dx, dy) in [(1i64, 0i64), (0, 2), (-3, 1), (2, -2)] {
            let moved = ifft2d(&translate_kspace(&fft2d(&img), Shift2D::new(dx as f64, dy as f64)));
            let rolled = Image2D::from_fn(h, w, |r, c| {
                let sr = (r as i64 - dy).rem_euclid(h as i64) as usize;
                let sc = (c as i64 - dx).rem_euclid(w as i64) as usize;
                img.get(sr, sc)
            });
            assert!(max_abs(moved.data(), rolled.data()) < 1e-6, "{h}x{w} shift ({dx},{dy})");
        }
    }
}

#[test]
fn half_pixel_shift_preserves_energy() {
    let mut rng = SimRng::new(14);
    let img = random_image(16, 16, &mut rng);
    let k = fft2d(&img);
    let s = translate_kspace(&k, Shift2D::new(0.5, -0.5));
    let e = |g: &ComplexGrid| g.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
    assert!((e(&k) - e(&s)).abs() < 1e-9 * e(&k));
}

#[test]
fn splice_boundaries() {
    let mut rng = SimRng::new(15);
    let a = fft2d(&random_image(8, 6, &mut rng));
    let b = fft2d(&random_image(8, 6, &mut rng));
    assert_eq!(splice_kspace(&a, &b, 0).unwrap(), b);
    assert_eq!(splice_kspace(&a, &b, 8).unwrap(), a);
    let mid = splice_kspace(&a, &b, 4).unwrap();
    for r in 0..8 {
        let src = if r < 4 { &a } else { &b };
        assert_eq!(mid.row(r), src.row(r));
    }
    assert!(splice_kspace(&a, &b, 9).is_err());
    let c = ComplexGrid::new(4, 6, vec![Complex64::new(0.0, 0.0); 24]).unwrap();
    assert!(splice_kspace(&a, &c, 2).is_err());
}

#[test]
fn identity_trajectory_is_lossless() {
    let img = fixture_phantom();
    let out = corrupt_image(&img, &MotionTrajectory::identity(img.height())).unwrap();
    assert!(max_abs(img.data(), out.data()) < 1e-6);
    let zero_event = MotionTrajectory {
        event_profile: 0,
        ..MotionTrajectory::identity(img.height())
    };
    let out = corrupt_image(&img, &zero_event).unwrap();
    assert!(max_abs(img.data(), out.data()) < 1e-6);
}

#[test]
fn severity_monotone_and_frozen() {
    let img = fixture_phantom();
    let got: Vec<f64> = SeverityCategory::ALL[1..].iter().map(|&c| mean_artifact_rmse(&img, c)).collect();
    assert!(got[0] < got[1] && got[1] < got[2], "{got:?}");
    for (g, f) in got.iter().zip(FROZEN_RMSE) {
        assert!((g - f).abs() <= 1e-6 * f, "{g} vs frozen {f}");
    }
    assert!(mean_artifact_rmse(&img, SeverityCategory::Minimal) < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roundtrip_any_shape(h in 1usize..24, w in 1usize..24, seed in any::<u64>()) {
        let img = random_image(h, w, &mut SimRng::new(seed));
        let back = ifft2d(&fft2d(&img));
        prop_assert!(max_abs(img.data(), back.data()) < 1e-6);
    }

    #[test]
    fn fft_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut rng = SimRng::new(seed);
        let x = random_image(6, 5, &mut rng);
        let y = random_image(6, 5, &mut rng);
        let sum = Image2D::from_fn(6, 5, |r, c| (a * x.get(r, c) as f64 + y.get(r, c) as f64) as f32);
        let (fx, fy, fs) = (fft2d(&x), fft2d(&y), fft2d(&sum));
        for i in 0..30 {
            let want = fx.data()[i] * a + fy.data()[i];
            prop_assert!((fs.data()[i] - want).norm() < 1e-5);
        }
    }

    #[test]
    fn shift_then_unshift(seed in any::<u64>(), dx in -4.0f64..4.0, dy in -4.0f64..4.0) {
        let img = random_image(9, 12, &mut SimRng::new(seed));
        let k = fft2d(&img);
        let back = translate_kspace(&translate_kspace(&k, Shift2D::new(dx, dy)), Shift2D::new(-dx, -dy));
        for (a, b) in k.data().iter().zip(back.data()) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }
}
