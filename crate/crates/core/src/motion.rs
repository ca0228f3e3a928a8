//! Severity-parameterized rigid motion, the simulated skull, and the
//! two-branch k-space corruption pipeline.
//!
//! A corrupted acquisition is the splice of two spectra: profiles acquired
//! before the motion event come from the original object, profiles after it
//! from the moved object (rotated, then translated). Labels are never moved.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, Image2D, MaskGrid};
use crate::kspace::{fft2d, ifft2d, rotate_image, splice_kspace, translate_kspace, RotationAngle, Shift2D};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityCategory {
    Minimal,
    Mild,
    Moderate,
    Severe,
}

impl SeverityCategory {
    pub const ALL: [SeverityCategory; 4] = [
        SeverityCategory::Minimal,
        SeverityCategory::Mild,
        SeverityCategory::Moderate,
        SeverityCategory::Severe,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SeverityCategory::Minimal => "minimal",
            SeverityCategory::Mild => "mild",
            SeverityCategory::Moderate => "moderate",
            SeverityCategory::Severe => "severe",
        }
    }
}

impl fmt::Display for SeverityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeverityCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeverityCategory::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation(format!("unknown severity {s:?}")))
    }
}

/// Symmetric amplitude bounds of one severity level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionBounds {
    pub max_translation: u32,
    pub max_rotation: u32,
}

pub fn severity_bounds(category: SeverityCategory) -> MotionBounds {
    let (max_translation, max_rotation) = match category {
        SeverityCategory::Minimal => (0, 0),
        SeverityCategory::Mild => (2, 1),
        SeverityCategory::Moderate => (3, 2),
        SeverityCategory::Severe => (4, 3),
    };
    MotionBounds {
        max_translation,
        max_rotation,
    }
}

/// One rigid motion event during the acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionTrajectory {
    pub shift: Shift2D,
    /// Degrees.
    pub angle: RotationAngle,
    /// First profile (k-space row) acquired after the event.
    pub event_profile: usize,
}

impl MotionTrajectory {
    /// No motion: every profile comes from the original position.
    pub fn identity(height: usize) -> Self {
        MotionTrajectory {
            shift: Shift2D::default(),
            angle: RotationAngle::default(),
            event_profile: height,
        }
    }
}

/// Fraction of the profile range in which the motion event may fall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventWindow {
    pub start: f64,
    pub end: f64,
}

impl Default for EventWindow {
    fn default() -> Self {
        EventWindow { start: 0.2, end: 0.8 }
    }
}

/// Samples one event with the default central-60% timing window.
pub fn sample_trajectory(category: SeverityCategory, height: usize, rng: &mut SimRng) -> MotionTrajectory {
    sample_trajectory_in(category, height, EventWindow::default(), rng)
}

pub fn sample_trajectory_in(
    category: SeverityCategory,
    height: usize,
    window: EventWindow,
    rng: &mut SimRng,
) -> MotionTrajectory {
    assert!(height >= 4, "trajectory sampling needs at least 4 profiles");
    if category == SeverityCategory::Minimal {
        return MotionTrajectory::identity(height);
    }
    let bounds = severity_bounds(category);
    let t = bounds.max_translation as f64;
    let r = bounds.max_rotation as f64;
    let dx = rng.uniform(-t, t);
    let dy = rng.uniform(-t, t);
    let angle = rng.uniform(-r, r);
    let lo = ((window.start * height as f64).floor() as usize).min(height - 1);
    let hi = ((window.end * height as f64).floor() as usize).clamp(lo + 1, height);
    let event_profile = rng.range(lo, hi);
    MotionTrajectory {
        shift: Shift2D::new(dx, dy),
        angle: RotationAngle::degrees(angle),
        event_profile,
    }
}

/// Geometry and brightness of the simulated skull ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkullConfig {
    pub thickness: usize,
    /// Multiplier on the 99th percentile of in-brain intensity.
    pub intensity: f64,
    /// Pixels between the brain boundary and the skull's inner edge.
    pub gap: usize,
}

impl Default for SkullConfig {
    fn default() -> Self {
        SkullConfig {
            thickness: 3,
            intensity: 1.2,
            gap: 2,
        }
    }
}

impl SkullConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thickness < 1 {
            return Err(Error::validation("skull thickness must be >= 1"));
        }
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return Err(Error::validation("skull intensity must be positive"));
        }
        Ok(())
    }
}

/// Nearest-rank percentile (`q` in [0, 1]) of a non-empty slice.
pub(crate) fn percentile(values: &mut [f32], q: f64) -> f32 {
    values.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

/// Mask of the skull ring: non-brain pixels whose distance to the nearest
/// brain pixel lies in `(gap, gap + thickness]`. The ring follows the brain
/// outline, so an elliptical brain gets an elliptical annulus.
pub fn skull_mask(brain_mask: &MaskGrid, cfg: &SkullConfig) -> MaskGrid {
    let (h, w) = brain_mask.shape();
    let reach = (cfg.gap + cfg.thickness) as isize;
    let mut best = vec![i64::MAX; h * w];
    for r in 0..h {
        for c in 0..w {
            if !brain_mask.get(r, c) {
                continue;
            }
            let interior = r > 0
                && c > 0
                && r + 1 < h
                && c + 1 < w
                && brain_mask.get(r - 1, c)
                && brain_mask.get(r + 1, c)
                && brain_mask.get(r, c - 1)
                && brain_mask.get(r, c + 1);
            if interior {
                continue;
            }
            for dr in -reach..=reach {
                let rr = r as isize + dr;
                if rr < 0 || rr >= h as isize {
                    continue;
                }
                for dc in -reach..=reach {
                    let cc = c as isize + dc;
                    if cc < 0 || cc >= w as isize {
                        continue;
                    }
                    let idx = rr as usize * w + cc as usize;
                    let d2 = (dr * dr + dc * dc) as i64;
                    if d2 < best[idx] {
                        best[idx] = d2;
                    }
                }
            }
        }
    }
    let inner = (cfg.gap * cfg.gap) as i64;
    let outer = (reach * reach) as i64;
    MaskGrid::from_fn(h, w, |r, c| {
        let d2 = best[r * w + c];
        !brain_mask.get(r, c) && d2 > inner && d2 <= outer
    })
}

/// Paints the skull ring onto a skull-stripped slice.
pub fn add_skull(image: &Image2D, brain_mask: &MaskGrid, cfg: &SkullConfig) -> Result<Image2D> {
    if image.shape() != brain_mask.shape() {
        return Err(Error::shape(format!(
            "image {:?} vs brain mask {:?}",
            image.shape(),
            brain_mask.shape()
        )));
    }
    if brain_mask.is_empty() {
        return Err(Error::validation("cannot place a skull around an empty brain mask"));
    }
    cfg.validate()?;
    let mut inside: Vec<f32> = image
        .data()
        .iter()
        .zip(brain_mask.data())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v)
        .collect();
    let level = (cfg.intensity * percentile(&mut inside, 0.99) as f64) as f32;
    let ring = skull_mask(brain_mask, cfg);
    let mut out = image.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(ring.data()) {
        if m != 0 {
            *v = level;
        }
    }
    Ok(out)
}

/// The spliced k-space of a moving acquisition.
pub fn corrupt_kspace(image: &Image2D, trajectory: &MotionTrajectory) -> Result<ComplexGrid> {
    let pre = fft2d(image);
    let moved = rotate_image(image, trajectory.angle);
    let post = translate_kspace(&fft2d(&moved), trajectory.shift);
    splice_kspace(&pre, &post, trajectory.event_profile)
}

/// Motion-corrupted image: inverse transform of [`corrupt_kspace`].
pub fn corrupt_image(image: &Image2D, trajectory: &MotionTrajectory) -> Result<Image2D> {
    Ok(ifft2d(&corrupt_kspace(image, trajectory)?))
}

/// Root-mean-square difference between two same-shaped images.
pub fn rmse(a: &Image2D, b: &Image2D) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let n = a.data().len() as f64;
    let ss: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    (ss / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(size: usize, radius: f64) -> MaskGrid {
        let c = (size as f64 - 1.0) / 2.0;
        MaskGrid::from_fn(size, size, |r, col| {
            let dy = r as f64 - c;
            let dx = col as f64 - c;
            dx * dx + dy * dy <= radius * radius
        })
    }

    #[test]
    fn bounds_table() {
        let b = |c| {
            let m = severity_bounds(c);
            (m.max_translation, m.max_rotation)
        };
        assert_eq!(b(SeverityCategory::Minimal), (0, 0));
        assert_eq!(b(SeverityCategory::Mild), (2, 1));
        assert_eq!(b(SeverityCategory::Moderate), (3, 2));
        assert_eq!(b(SeverityCategory::Severe), (4, 3));
    }

    #[test]
    fn minimal_is_identity_for_any_seed() {
        for seed in 0..20 {
            let t = sample_trajectory(SeverityCategory::Minimal, 64, &mut SimRng::new(seed));
            assert_eq!(t, MotionTrajectory::identity(64));
        }
    }

    #[test]
    fn severe_is_bounded_and_deterministic() {
        let a = sample_trajectory(SeverityCategory::Severe, 240, &mut SimRng::new(42));
        let b = sample_trajectory(SeverityCategory::Severe, 240, &mut SimRng::new(42));
        assert_eq!(a, b);
        assert!(a.shift.dx.abs() <= 4.0 && a.shift.dy.abs() <= 4.0);
        assert!(a.angle.as_degrees().abs() <= 3.0);
        assert!((48..192).contains(&a.event_profile));
    }

    #[test]
    fn mild_samples_stay_in_bounds() {
        let mut rng = SimRng::new(5);
        let (mut max_t, mut max_r) = (0.0f64, 0.0f64);
        for _ in 0..10_000 {
            let t = sample_trajectory(SeverityCategory::Mild, 64, &mut rng);
            max_t = max_t.max(t.shift.dx.abs()).max(t.shift.dy.abs());
            max_r = max_r.max(t.angle.as_degrees().abs());
            assert!((12..51).contains(&t.event_profile));
        }
        assert!(max_t <= 2.0 && max_r <= 1.0);
        assert!(max_t > 1.9 && max_r > 0.95);
    }

    #[test]
    fn severity_parses() {
        assert_eq!("Moderate".parse::<SeverityCategory>().unwrap(), SeverityCategory::Moderate);
        assert!("extreme".parse::<SeverityCategory>().is_err());
    }

    #[test]
    fn skull_preserves_brain() {
        let brain = disk(48, 15.0);
        let mut rng = SimRng::new(9);
        let img = Image2D::from_fn(48, 48, |r, c| if brain.get(r, c) { rng.uniform(0.2, 1.0) as f32 } else { 0.0 });
        let out = add_skull(&img, &brain, &SkullConfig::default()).unwrap();
        for i in 0..img.data().len() {
            if brain.data()[i] != 0 {
                assert_eq!(img.data()[i], out.data()[i]);
            }
        }
        assert!(out.data().iter().any(|&v| v > 1.0));
    }

    #[test]
    fn skull_ring_area_matches_annulus() {
        let (r, gap, thick) = (20.0f64, 2usize, 3usize);
        let brain = disk(64, r);
        let cfg = SkullConfig {
            thickness: thick,
            intensity: 1.0,
            gap,
        };
        let ring = skull_mask(&brain, &cfg).count() as f64;
        let inner = r + gap as f64;
        let outer = inner + thick as f64;
        let analytic = std::f64::consts::PI * (outer * outer - inner * inner);
        assert!((ring - analytic).abs() / analytic < 0.15, "ring {ring} vs {analytic}");
    }

    #[test]
    fn skull_needs_brain() {
        let img = Image2D::zeros(8, 8);
        let err = add_skull(&img, &MaskGrid::zeros(8, 8), &SkullConfig::default());
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn percentile_nearest_rank() {
        let mut v: Vec<f32> = (1..=100).map(|x| x as f32).collect();
        assert_eq!(percentile(&mut v, 0.99), 99.0);
        assert_eq!(percentile(&mut [5.0], 0.99), 5.0);
    }
}
