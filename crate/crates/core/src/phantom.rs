//! Synthetic brain-slice phantoms with ground-truth lesion masks.
//!
//! Brain: a rotated ellipse with a smooth texture built from a handful of
//! Gaussian bumps. Lesion: a bright ellipse whose boundary is perturbed by a
//! few low-order radial harmonics, always inside the brain. Background is 0.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CaseRecord, Image2D, MaskGrid};
use crate::motion::percentile;
use crate::rng::{Purpose, SimRng};

/// Largest relative boundary perturbation of the lesion outline.
pub const LESION_PERTURBATION: f64 = 0.15;

const BASE_INTENSITY: f64 = 0.5;
const MIN_INTENSITY: f64 = 0.05;
const MAX_BUMPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    /// Square image side in pixels.
    pub size: usize,
    /// Brain semi-axis range as a fraction of `size`.
    pub brain_radius_range: (f64, f64),
    /// Lesion semi-axis range as a fraction of the brain's minor semi-axis.
    pub lesion_radius_range: (f64, f64),
    /// Texture bump width as a fraction of `size`.
    pub texture_scale: f64,
    pub lesion_contrast: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            size: 64,
            brain_radius_range: (0.30, 0.38),
            lesion_radius_range: (0.25, 0.45),
            texture_scale: 0.12,
            lesion_contrast: 1.8,
        }
    }
}

impl PhantomConfig {
    pub fn with_size(size: usize) -> Self {
        PhantomConfig {
            size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 32 {
            return Err(Error::validation(format!("phantom size {} < 32", self.size)));
        }
        let (blo, bhi) = self.brain_radius_range;
        if !(blo > 0.0 && blo <= bhi && bhi < 0.5) {
            return Err(Error::validation(format!(
                "brain radius range {blo}..{bhi} must satisfy 0 < lo <= hi < 0.5"
            )));
        }
        let (llo, lhi) = self.lesion_radius_range;
        if !(llo > 0.0 && llo <= lhi && lhi * (1.0 + LESION_PERTURBATION) < 1.0) {
            return Err(Error::validation(format!(
                "lesion radius range {llo}..{lhi} does not fit inside the brain"
            )));
        }
        if self.lesion_contrast.is_nan() || self.lesion_contrast <= 1.0 {
            return Err(Error::validation("lesion contrast must exceed 1"));
        }
        if self.texture_scale.is_nan() || self.texture_scale <= 0.0 {
            return Err(Error::validation("texture scale must be positive"));
        }
        Ok(())
    }
}

/// The sampled shape parameters behind one phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomGeometry {
    pub brain_center: (f64, f64),
    /// Semi-axes (along rotated x, rotated y) in pixels.
    pub brain_axes: (f64, f64),
    pub brain_tilt: f64,
    pub lesion_center: (f64, f64),
    pub lesion_axes: (f64, f64),
    pub lesion_tilt: f64,
    /// (order, amplitude, phase) of each boundary harmonic.
    pub harmonics: Vec<(u32, f64, f64)>,
}

impl PhantomGeometry {
    /// Area of the perturbed lesion ellipse in the continuum:
    /// `pi * a * b * mean(r(theta)^2)`.
    pub fn lesion_area(&self) -> f64 {
        let ms: f64 = 1.0 + self.harmonics.iter().map(|h| h.1 * h.1 / 2.0).sum::<f64>();
        PI * self.lesion_axes.0 * self.lesion_axes.1 * ms
    }

    fn lesion_radius_scale(&self, theta: f64) -> f64 {
        1.0 + self
            .harmonics
            .iter()
            .map(|&(k, amp, phase)| amp * (k as f64 * theta + phase).sin())
            .sum::<f64>()
    }
}

fn ellipse_coords(r: usize, c: usize, center: (f64, f64), tilt: f64) -> (f64, f64) {
    let y = r as f64 - center.0;
    let x = c as f64 - center.1;
    let (s, co) = tilt.sin_cos();
    (x * co + y * s, -x * s + y * co)
}

/// Generates one phantom; severity and split are left unset.
pub fn generate_phantom(cfg: &PhantomConfig, rng: &mut SimRng) -> Result<CaseRecord> {
    Ok(generate_phantom_with_geometry(cfg, rng)?.0)
}

pub fn generate_phantom_with_geometry(cfg: &PhantomConfig, rng: &mut SimRng) -> Result<(CaseRecord, PhantomGeometry)> {
    cfg.validate()?;
    let n = cfg.size;
    let size = n as f64;
    let mid = (size - 1.0) / 2.0;

    let brain_center = (mid + rng.uniform(-0.03, 0.03) * size, mid + rng.uniform(-0.03, 0.03) * size);
    let (blo, bhi) = cfg.brain_radius_range;
    let brain_axes = (rng.uniform(blo, bhi) * size, rng.uniform(blo, bhi) * size);
    let brain_tilt = rng.uniform(0.0, PI);
    let brain_minor = brain_axes.0.min(brain_axes.1);

    let (llo, lhi) = cfg.lesion_radius_range;
    let lesion_axes = (rng.uniform(llo, lhi) * brain_minor, rng.uniform(llo, lhi) * brain_minor);
    let lesion_tilt = rng.uniform(0.0, PI);
    let harmonic_count = 2 + rng.below(2) as usize;
    let per_harmonic = LESION_PERTURBATION / harmonic_count as f64;
    let harmonics: Vec<(u32, f64, f64)> = (0..harmonic_count)
        .map(|i| (3 + i as u32, rng.uniform(0.3, 1.0) * per_harmonic, rng.uniform(0.0, 2.0 * PI)))
        .collect();

    // Keep the perturbed lesion, plus a one-pixel margin, inside the minor circle of the brain.
    let lesion_extent = lesion_axes.0.max(lesion_axes.1) * (1.0 + LESION_PERTURBATION);
    let slack = (brain_minor - lesion_extent - 1.0).max(0.0);
    let offset = slack * rng.next_f64().sqrt();
    let direction = rng.uniform(0.0, 2.0 * PI);
    let lesion_center = (brain_center.0 + offset * direction.sin(), brain_center.1 + offset * direction.cos());

    let geometry = PhantomGeometry {
        brain_center,
        brain_axes,
        brain_tilt,
        lesion_center,
        lesion_axes,
        lesion_tilt,
        harmonics,
    };

    let brain_mask = MaskGrid::from_fn(n, n, |r, c| {
        let (x, y) = ellipse_coords(r, c, brain_center, brain_tilt);
        (x / brain_axes.0).powi(2) + (y / brain_axes.1).powi(2) <= 1.0
    });
    let lesion_mask = MaskGrid::from_fn(n, n, |r, c| {
        if !brain_mask.get(r, c) {
            return false;
        }
        let (x, y) = ellipse_coords(r, c, lesion_center, lesion_tilt);
        let (u, v) = (x / lesion_axes.0, y / lesion_axes.1);
        let rho = (u * u + v * v).sqrt();
        rho <= geometry.lesion_radius_scale(v.atan2(u))
    });
    if brain_mask.is_empty() {
        return Err(Error::validation("sampled brain covers no pixel"));
    }

    // Texture: up to MAX_BUMPS smooth bumps on a flat base.
    let bumps: Vec<(f64, f64, f64, f64)> = (0..4 + rng.below((MAX_BUMPS - 3) as u64) as usize)
        .map(|_| {
            let rho = brain_minor * rng.next_f64().sqrt();
            let phi = rng.uniform(0.0, 2.0 * PI);
            let sigma = cfg.texture_scale * size * rng.uniform(0.5, 1.5);
            let amp = rng.uniform(-0.15, 0.15);
            (brain_center.0 + rho * phi.sin(), brain_center.1 + rho * phi.cos(), sigma, amp)
        })
        .collect();
    let texture = |r: usize, c: usize| -> f64 {
        let mut v = BASE_INTENSITY;
        for &(br, bc, sigma, amp) in &bumps {
            let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
            v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
        }
        v.max(MIN_INTENSITY)
    };

    let mut values = vec![0.0f64; n * n];
    let mut healthy = Vec::new();
    for r in 0..n {
        for c in 0..n {
            if brain_mask.get(r, c) {
                let v = texture(r, c);
                values[r * n + c] = v;
                if !lesion_mask.get(r, c) {
                    healthy.push(v as f32);
                }
            }
        }
    }
    // Anchor the lesion above the value that can become the in-brain median
    // once lesion pixels are included.
    let brain_count = brain_mask.count();
    let lesion_count = lesion_mask.count();
    let anchor = if healthy.is_empty() {
        BASE_INTENSITY
    } else {
        let q = brain_count.div_ceil(2) as f64 / healthy.len() as f64;
        percentile(&mut healthy, q.min(1.0)) as f64
    };
    if lesion_count > 0 {
        let phase = rng.uniform(0.0, 2.0 * PI);
        for r in 0..n {
            for c in 0..n {
                if lesion_mask.get(r, c) {
                    let wobble = 0.5 + 0.5 * ((r as f64 * 0.7 + c as f64 * 0.45) + phase).sin();
                    values[r * n + c] = cfg.lesion_contrast * anchor * (1.0 + 0.1 * wobble);
                }
            }
        }
    }
    let image = Image2D::from_f64(n, n, &values)?;
    let record = CaseRecord::new("phantom", image, brain_mask, lesion_mask)?;
    Ok((record, geometry))
}

pub fn case_id(index: usize) -> String {
    format!("phantom_{index:04}")
}

/// `n` phantoms from per-case derived streams of `seed`.
pub fn generate_cohort(n: usize, cfg: &PhantomConfig, seed: u64) -> Result<Vec<CaseRecord>> {
    if n == 0 {
        return Err(Error::validation("cohort size must be >= 1"));
    }
    (0..n)
        .map(|i| {
            let mut rng = SimRng::derive(seed, Purpose::Phantom, i as u64);
            let mut case = generate_phantom(cfg, &mut rng)?;
            case.case_id = case_id(i);
            Ok(case)
        })
        .collect()
}
