//! Paired image/mask augmentation.
//!
//! Geometric kinds move image and mask together (bilinear for the image,
//! nearest neighbour for the mask). Photometric kinds only touch the image.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::{Image2D, MaskGrid};
use crate::kspace::sample_bilinear;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AugmentKind {
    FlipH,
    FlipV,
    Gamma,
    GaussianNoise,
    GaussianBlur,
    MedianBlur,
    BilateralBlur,
    Crop,
    Affine,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 9] = [
        AugmentKind::FlipH,
        AugmentKind::FlipV,
        AugmentKind::Gamma,
        AugmentKind::GaussianNoise,
        AugmentKind::GaussianBlur,
        AugmentKind::MedianBlur,
        AugmentKind::BilateralBlur,
        AugmentKind::Crop,
        AugmentKind::Affine,
    ];

    pub fn is_geometric(self) -> bool {
        matches!(self, AugmentKind::FlipH | AugmentKind::FlipV | AugmentKind::Crop | AugmentKind::Affine)
    }
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Parameter ranges. Every field is recorded with a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub gamma: (f64, f64),
    /// Upper bound of the noise std as a fraction of the intensity range.
    pub noise_max: f64,
    pub blur_kernels: Vec<usize>,
    /// Smallest fraction of the image area a crop keeps.
    pub crop_min_area: f64,
    pub affine_rotation_deg: f64,
    pub affine_scale: f64,
    pub affine_shear: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            gamma: (0.7, 1.5),
            noise_max: 0.1,
            blur_kernels: vec![3, 5],
            crop_min_area: 0.85,
            affine_rotation_deg: 10.0,
            affine_scale: 0.05,
            affine_shear: 0.05,
        }
    }
}

pub fn flip_h_image(image: &Image2D) -> Image2D {
    let w = image.width();
    Image2D::from_fn(image.height(), w, |r, c| image.get(r, w - 1 - c))
}

pub fn flip_h_mask(mask: &MaskGrid) -> MaskGrid {
    let w = mask.width();
    MaskGrid::from_fn(mask.height(), w, |r, c| mask.get(r, w - 1 - c))
}

pub fn flip_v_image(image: &Image2D) -> Image2D {
    let h = image.height();
    Image2D::from_fn(h, image.width(), |r, c| image.get(h - 1 - r, c))
}

pub fn flip_v_mask(mask: &MaskGrid) -> MaskGrid {
    let h = mask.height();
    MaskGrid::from_fn(h, mask.width(), |r, c| mask.get(h - 1 - r, c))
}

fn intensity_range(image: &Image2D) -> (f32, f32) {
    image
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Gamma curve applied on the min-max rescaled intensities.
pub fn gamma(image: &Image2D, g: f64) -> Image2D {
    let (lo, hi) = intensity_range(image);
    let span = (hi - lo) as f64;
    if span <= 0.0 {
        return image.clone();
    }
    image.map(|v| {
        let t = ((v - lo) as f64 / span).clamp(0.0, 1.0);
        (lo as f64 + span * t.powf(g)) as f32
    })
}

fn clamped(image: &Image2D, r: isize, c: isize) -> f32 {
    let rr = r.clamp(0, image.height() as isize - 1) as usize;
    let cc = c.clamp(0, image.width() as isize - 1) as usize;
    image.get(rr, cc)
}

pub fn gaussian_blur(image: &Image2D, k: usize) -> Image2D {
    let half = (k / 2) as isize;
    let sigma = 0.3 * ((k as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let weights: Vec<f64> = (-half..=half)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = weights.iter().sum();
    let (h, w) = image.shape();
    let horizontal = Image2D::from_fn(h, w, |r, c| {
        let mut acc = 0.0;
        for (i, d) in (-half..=half).enumerate() {
            acc += weights[i] * clamped(image, r as isize, c as isize + d) as f64;
        }
        (acc / norm) as f32
    });
    Image2D::from_fn(h, w, |r, c| {
        let mut acc = 0.0;
        for (i, d) in (-half..=half).enumerate() {
            acc += weights[i] * clamped(&horizontal, r as isize + d, c as isize) as f64;
        }
        (acc / norm) as f32
    })
}

/// Median of the `k x k` neighbourhood, border replicated.
pub fn median_blur(image: &Image2D, k: usize) -> Image2D {
    let half = (k / 2) as isize;
    let mut window = Vec::with_capacity(k * k);
    let (h, w) = image.shape();
    Image2D::from_fn(h, w, |r, c| {
        window.clear();
        for dr in -half..=half {
            for dc in -half..=half {
                window.push(clamped(image, r as isize + dr, c as isize + dc));
            }
        }
        window.sort_by(|a, b| a.total_cmp(b));
        window[window.len() / 2]
    })
}

pub fn bilateral_blur(image: &Image2D, k: usize) -> Image2D {
    let half = (k / 2) as isize;
    let sigma_space = k as f64 / 2.0;
    let (lo, hi) = intensity_range(image);
    let sigma_color = (0.1 * (hi - lo) as f64).max(1e-6);
    let (h, w) = image.shape();
    Image2D::from_fn(h, w, |r, c| {
        let center = image.get(r, c) as f64;
        let (mut acc, mut norm) = (0.0, 0.0);
        for dr in -half..=half {
            for dc in -half..=half {
                let v = clamped(image, r as isize + dr, c as isize + dc) as f64;
                let ws = (-((dr * dr + dc * dc) as f64) / (2.0 * sigma_space * sigma_space)).exp();
                let wc = (-(v - center).powi(2) / (2.0 * sigma_color * sigma_color)).exp();
                acc += ws * wc * v;
                norm += ws * wc;
            }
        }
        (acc / norm) as f32
    })
}

/// Affine resampling by inverse map: output pixel `p` reads the source at
/// `inverse * (p - center) + center + offset`.
struct InverseMap {
    m: [[f64; 2]; 2],
    offset: (f64, f64),
}

impl InverseMap {
    fn source(&self, r: usize, c: usize, cy: f64, cx: f64) -> (f64, f64) {
        let y = r as f64 - cy;
        let x = c as f64 - cx;
        let sy = self.m[0][0] * y + self.m[0][1] * x + cy + self.offset.0;
        let sx = self.m[1][0] * y + self.m[1][1] * x + cx + self.offset.1;
        (sy, sx)
    }

    fn apply(&self, image: &Image2D, mask: &MaskGrid) -> (Image2D, MaskGrid) {
        let (h, w) = image.shape();
        let cy = (h as f64 - 1.0) / 2.0;
        let cx = (w as f64 - 1.0) / 2.0;
        let out_image = Image2D::from_fn(h, w, |r, c| {
            let (sy, sx) = self.source(r, c, cy, cx);
            // clamp so the normalized background extends instead of dropping to 0
            let sy = sy.clamp(0.0, h as f64 - 1.0);
            let sx = sx.clamp(0.0, w as f64 - 1.0);
            sample_bilinear(image, sy, sx) as f32
        });
        let out_mask = MaskGrid::from_fn(h, w, |r, c| {
            let (sy, sx) = self.source(r, c, cy, cx);
            let (ry, rx) = (sy.round(), sx.round());
            ry >= 0.0 && rx >= 0.0 && (ry as usize) < h && (rx as usize) < w && mask.get(ry as usize, rx as usize)
        });
        (out_image, out_mask)
    }
}

/// Crops a `crop_h x crop_w` window at (top, left) and resizes it back.
pub fn crop_resize(image: &Image2D, mask: &MaskGrid, top: usize, left: usize, crop_h: usize, crop_w: usize) -> (Image2D, MaskGrid) {
    let (h, w) = image.shape();
    let sy = crop_h as f64 / h as f64;
    let sx = crop_w as f64 / w as f64;
    // map output pixel centers onto the crop window
    let src = |r: usize, c: usize| -> (f64, f64) {
        (top as f64 + (r as f64 + 0.5) * sy - 0.5, left as f64 + (c as f64 + 0.5) * sx - 0.5)
    };
    let out_image = Image2D::from_fn(h, w, |r, c| {
        let (y, x) = src(r, c);
        sample_bilinear(image, y.clamp(0.0, h as f64 - 1.0), x.clamp(0.0, w as f64 - 1.0)) as f32
    });
    let out_mask = MaskGrid::from_fn(h, w, |r, c| {
        let (y, x) = src(r, c);
        let ry = (y.round().max(0.0) as usize).min(h - 1);
        let rx = (x.round().max(0.0) as usize).min(w - 1);
        mask.get(ry, rx)
    });
    (out_image, out_mask)
}

fn pick_kernel(cfg: &AugmentConfig, rng: &mut SimRng) -> usize {
    if cfg.blur_kernels.is_empty() {
        3
    } else {
        cfg.blur_kernels[rng.below(cfg.blur_kernels.len() as u64) as usize]
    }
}

/// Applies one augmentation with parameters drawn from `cfg`.
pub fn augment(image: &Image2D, mask: &MaskGrid, kind: AugmentKind, cfg: &AugmentConfig, rng: &mut SimRng) -> (Image2D, MaskGrid) {
    assert_eq!(image.shape(), mask.shape(), "augment needs a paired image and mask");
    match kind {
        AugmentKind::FlipH => (flip_h_image(image), flip_h_mask(mask)),
        AugmentKind::FlipV => (flip_v_image(image), flip_v_mask(mask)),
        AugmentKind::Gamma => (gamma(image, rng.uniform(cfg.gamma.0, cfg.gamma.1)), mask.clone()),
        AugmentKind::GaussianNoise => {
            let (lo, hi) = intensity_range(image);
            let sigma = rng.uniform(0.0, cfg.noise_max) * (hi - lo) as f64;
            let noisy = image.map(|v| (v as f64 + sigma * rng.normal()) as f32);
            (noisy, mask.clone())
        }
        AugmentKind::GaussianBlur => (gaussian_blur(image, pick_kernel(cfg, rng)), mask.clone()),
        AugmentKind::MedianBlur => (median_blur(image, pick_kernel(cfg, rng)), mask.clone()),
        AugmentKind::BilateralBlur => (bilateral_blur(image, pick_kernel(cfg, rng)), mask.clone()),
        AugmentKind::Crop => {
            let (h, w) = image.shape();
            let side = rng.uniform(cfg.crop_min_area, 1.0).sqrt();
            let min_h = (cfg.crop_min_area.sqrt() * h as f64).ceil() as usize;
            let min_w = (cfg.crop_min_area.sqrt() * w as f64).ceil() as usize;
            let crop_h = ((side * h as f64).round() as usize).clamp(min_h.min(h), h);
            let crop_w = ((side * w as f64).round() as usize).clamp(min_w.min(w), w);
            let top = rng.range(0, h - crop_h + 1);
            let left = rng.range(0, w - crop_w + 1);
            crop_resize(image, mask, top, left, crop_h, crop_w)
        }
        AugmentKind::Affine => {
            let theta = rng.uniform(-cfg.affine_rotation_deg, cfg.affine_rotation_deg).to_radians();
            let scale = 1.0 + rng.uniform(-cfg.affine_scale, cfg.affine_scale);
            let shear = rng.uniform(-cfg.affine_shear, cfg.affine_shear);
            // forward: rotate * shear * scale, in (y, x) coordinates
            let (s, c) = theta.sin_cos();
            let rot = [[c, s], [-s, c]];
            let fwd = [
                [scale * rot[0][0], scale * (rot[0][0] * shear + rot[0][1])],
                [scale * rot[1][0], scale * (rot[1][0] * shear + rot[1][1])],
            ];
            let det = fwd[0][0] * fwd[1][1] - fwd[0][1] * fwd[1][0];
            let inv = [[fwd[1][1] / det, -fwd[0][1] / det], [-fwd[1][0] / det, fwd[0][0] / det]];
            InverseMap { m: inv, offset: (0.0, 0.0) }.apply(image, mask)
        }
    }
}

/// Training-time augmentation: with probability `prob`, one uniformly chosen
/// kind is applied.
pub fn random_augment(image: &Image2D, mask: &MaskGrid, prob: f64, cfg: &AugmentConfig, rng: &mut SimRng) -> (Image2D, MaskGrid) {
    if prob <= 0.0 || !rng.chance(prob) {
        return (image.clone(), mask.clone());
    }
    let kind = AugmentKind::ALL[rng.below(AugmentKind::ALL.len() as u64) as usize];
    augment(image, mask, kind, cfg, rng)
}
