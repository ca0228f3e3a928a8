//! Central finite-difference oracle for the segmenter gradient.
//!
//! The network is piecewise smooth (ReLU, max-pool). A stencil whose two
//! ends sit in a different activation regime from the centre does not
//! estimate the derivative, so such parameters are re-checked with the step
//! halved until the stencil stays inside one regime.

use motionbias_core::grid::{Image2D, MaskGrid};
use motionbias_core::rng::SimRng;
use motionbias_core::segmenter::network::{backward_f64, loss_and_pattern, Network, SegmenterParams};

pub const STEP: f64 = 1e-3;
pub const TOL: f64 = 1e-3;

#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    /// Stencils at the nominal step that stayed in one regime.
    pub smooth: usize,
    /// Stencils at the nominal step that crossed a kink.
    pub crossed: usize,
    /// Nominal-step mismatches on smooth stencils (must be zero).
    pub smooth_failures: usize,
    /// Parameters still out of tolerance after step reduction, or never smooth.
    pub failures: Vec<(usize, f64, f64)>,
    pub worst_smooth: f64,
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Random parameters (with non-zero biases), input and target for an
/// `n x n` check.
pub fn fixture(seed: u64, n: usize) -> (Network<f64>, Image2D, MaskGrid) {
    let mut rng = SimRng::new(seed);
    let mut net = SegmenterParams::he_uniform(&mut rng).to_f64();
    for l in &mut net.layers {
        for b in &mut l.bias {
            *b = rng.uniform(-0.1, 0.1);
        }
    }
    let image = Image2D::from_fn(n, n, |_, _| rng.uniform(-1.0, 1.0) as f32);
    let lo = n / 4;
    let target = MaskGrid::from_fn(n, n, |r, c| (lo..n - lo).contains(&r) && (lo / 2..n / 2 + lo / 2).contains(&c));
    (net, image, target)
}

pub fn check(net: &Network<f64>, image: &Image2D, target: &MaskGrid) -> GradReport {
    let (_, grad) = backward_f64(net, image, target).unwrap();
    let analytic = grad.flatten();
    let theta = net.flatten();
    let eval = |i: usize, delta: f64| {
        let mut t = theta.clone();
        t[i] += delta;
        loss_and_pattern(&Network::unflatten(&t), image, target).unwrap()
    };
    let (_, centre) = loss_and_pattern(net, image, target).unwrap();
    let mut report = GradReport::default();
    for i in 0..theta.len() {
        report.checked += 1;
        let mut h = STEP;
        let mut first = true;
        loop {
            let (lp, pp) = eval(i, h);
            let (lm, pm) = eval(i, -h);
            let numeric = (lp - lm) / (2.0 * h);
            let e = rel_err(analytic[i], numeric);
            let smooth = pp == centre && pm == centre;
            if first {
                if smooth {
                    report.smooth += 1;
                    report.worst_smooth = report.worst_smooth.max(e);
                    if e >= TOL {
                        report.smooth_failures += 1;
                    }
                } else {
                    report.crossed += 1;
                }
                first = false;
            }
            if smooth {
                if e >= TOL {
                    report.failures.push((i, analytic[i], numeric));
                }
                break;
            }
            h *= 0.5;
            if h < 1e-9 {
                report.failures.push((i, analytic[i], f64::NAN));
                break;
            }
        }
    }
    report
}
