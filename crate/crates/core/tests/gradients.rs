//! Analytic segmenter gradients against central finite differences.

mod common;

use common::gradcheck::{check, fixture, rel_err};
use motionbias_core::segmenter::network::{backward_f64, loss_f64, Network};

#[test]
fn every_parameter_matches_central_difference() {
    for seed in [2024, 7] {
        let (net, image, target) = fixture(seed, 8);
        let r = check(&net, &image, &target);
        assert_eq!(r.checked, 7058);
        assert_eq!(r.smooth_failures, 0, "seed {seed}: {r:?}");
        assert!(r.failures.is_empty(), "seed {seed}: {:?}", r.failures);
    }
}

#[test]
fn small_step_agrees_everywhere() {
    let (net, image, target) = fixture(3, 8);
    let (_, grad) = backward_f64(&net, &image, &target).unwrap();
    let a = grad.flatten();
    let theta = net.flatten();
    let h = 1e-5;
    for i in (0..theta.len()).step_by(7) {
        let mut p = theta.clone();
        p[i] += h;
        let mut m = theta.clone();
        m[i] -= h;
        let n = (loss_f64(&Network::unflatten(&p), &image, &target).unwrap()
            - loss_f64(&Network::unflatten(&m), &image, &target).unwrap())
            / (2.0 * h);
        assert!(rel_err(a[i], n) < 1e-3, "param {i}: {} vs {n}", a[i]);
    }
}

#[test]
fn non_square_input() {
    let (net, _, _) = fixture(5, 8);
    let image = motionbias_core::Image2D::from_fn(8, 12, |r, c| ((r * 3 + c) % 5) as f32 - 2.0);
    let target = motionbias_core::MaskGrid::from_fn(8, 12, |r, c| r > 3 && c > 5);
    let (_, grad) = backward_f64(&net, &image, &target).unwrap();
    let a = grad.flatten();
    let theta = net.flatten();
    let h = 1e-6;
    for i in (0..theta.len()).step_by(31) {
        let mut p = theta.clone();
        p[i] += h;
        let mut m = theta.clone();
        m[i] -= h;
        let n = (loss_f64(&Network::unflatten(&p), &image, &target).unwrap()
            - loss_f64(&Network::unflatten(&m), &image, &target).unwrap())
            / (2.0 * h);
        assert!(rel_err(a[i], n) < 1e-3, "param {i}: {} vs {n}", a[i]);
    }
}
