//! 2D DFT and rigid-motion operators in k-space.
//!
//! `fft2d` is unnormalized; `ifft2d` carries the `1/(H*W)` factor. Rows of a
//! k-space grid are phase-encode profiles, acquired top to bottom.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, Image2D};

/// In-plane translation in pixels. `dx` moves content towards larger column
/// indices, `dy` towards larger row indices.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Shift2D {
    pub dx: f64,
    pub dy: f64,
}

impl Shift2D {
    pub fn new(dx: f64, dy: f64) -> Self {
        debug_assert!(dx.is_finite() && dy.is_finite());
        Shift2D { dx, dy }
    }

    pub fn is_zero(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }
}

/// In-plane rotation in degrees, normalized to (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RotationAngle(f64);

impl RotationAngle {
    pub fn degrees(theta: f64) -> Self {
        debug_assert!(theta.is_finite());
        let mut t = theta % 360.0;
        if t <= -180.0 {
            t += 360.0;
        } else if t > 180.0 {
            t -= 360.0;
        }
        RotationAngle(t)
    }

    pub fn as_degrees(self) -> f64 {
        self.0
    }

    pub fn as_radians(self) -> f64 {
        self.0.to_radians()
    }
}

fn transform_2d(height: usize, width: usize, data: &mut [Complex64], direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft(width, direction);
    let col_fft = planner.plan_fft(height, direction);
    let scratch_len = row_fft
        .get_inplace_scratch_len()
        .max(col_fft.get_inplace_scratch_len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];

    for row in data.chunks_exact_mut(width) {
        row_fft.process_with_scratch(row, &mut scratch);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for c in 0..width {
        for r in 0..height {
            column[r] = data[r * width + c];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for r in 0..height {
            data[r * width + c] = column[r];
        }
    }
}

/// Unnormalized forward 2D DFT of a real image.
pub fn fft2d(image: &Image2D) -> ComplexGrid {
    let (h, w) = image.shape();
    let mut data: Vec<Complex64> = image
        .data()
        .iter()
        .map(|&v| Complex64::new(v as f64, 0.0))
        .collect();
    transform_2d(h, w, &mut data, FftDirection::Forward);
    ComplexGrid::from_raw(h, w, data)
}

/// Normalized inverse 2D DFT, keeping the full complex result.
pub fn ifft2d_complex(kspace: &ComplexGrid) -> ComplexGrid {
    let (h, w) = kspace.shape();
    let mut data = kspace.data().to_vec();
    transform_2d(h, w, &mut data, FftDirection::Inverse);
    let scale = 1.0 / (h * w) as f64;
    for z in &mut data {
        *z *= scale;
    }
    ComplexGrid::from_raw(h, w, data)
}

/// Real part of the normalized inverse DFT together with the largest
/// discarded imaginary magnitude.
pub fn ifft2d_with_residue(kspace: &ComplexGrid) -> (Image2D, f64) {
    let full = ifft2d_complex(kspace);
    let (h, w) = full.shape();
    let residue = full.data().iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    let real: Vec<f64> = full.data().iter().map(|z| z.re).collect();
    let image = Image2D::from_f64(h, w, &real).expect("inverse DFT of a finite grid is finite");
    (image, residue)
}

/// Real part of the normalized inverse DFT.
pub fn ifft2d(kspace: &ComplexGrid) -> Image2D {
    ifft2d_with_residue(kspace).0
}

/// Signed frequency index in fftshift order: `0..ceil(n/2)` stay positive,
/// the rest wrap to negative. For even `n` the Nyquist bin is `-n/2`.
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Applies the Fourier shift theorem phase ramp
/// `exp(-2*pi*i*(kx*dx/W + ky*dy/H))`.
pub fn translate_kspace(kspace: &ComplexGrid, shift: Shift2D) -> ComplexGrid {
    let (h, w) = kspace.shape();
    if shift.is_zero() {
        return kspace.clone();
    }
    let col_phase: Vec<Complex64> = (0..w)
        .map(|kx| Complex64::from_polar(1.0, -2.0 * PI * signed_frequency(kx, w) * shift.dx / w as f64))
        .collect();
    let mut data = Vec::with_capacity(h * w);
    for ky in 0..h {
        let row_phase = Complex64::from_polar(1.0, -2.0 * PI * signed_frequency(ky, h) * shift.dy / h as f64);
        for (kx, z) in kspace.row(ky).iter().enumerate() {
            data.push(z * row_phase * col_phase[kx]);
        }
    }
    ComplexGrid::from_raw(h, w, data)
}

/// Bilinear sample with zero outside the grid.
pub(crate) fn sample_bilinear(image: &Image2D, y: f64, x: f64) -> f64 {
    let (h, w) = image.shape();
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            image.get(r as usize, c as usize) as f64
        }
    };
    at(y0, x0) * (1.0 - fy) * (1.0 - fx)
        + at(y0, x0 + 1) * (1.0 - fy) * fx
        + at(y0 + 1, x0) * fy * (1.0 - fx)
        + at(y0 + 1, x0 + 1) * fy * fx
}

/// Rotates the object about the pixel-grid center `((H-1)/2, (W-1)/2)`.
///
/// A point at `(x, y) = (col - cx, row - cy)` moves to
/// `(x cos t - y sin t, x sin t + y cos t)`. Each output pixel pulls its value
/// from the inverse-rotated location by bilinear interpolation; samples
/// outside the field of view read as zero.
pub fn rotate_image(image: &Image2D, angle: RotationAngle) -> Image2D {
    if angle.as_degrees() == 0.0 {
        return image.clone();
    }
    let (h, w) = image.shape();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.as_radians().sin_cos();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let x = c as f64 - cx;
            let y = r as f64 - cy;
            // inverse rotation
            let sx = x * cos + y * sin + cx;
            let sy = -x * sin + y * cos + cy;
            out.push(sample_bilinear(image, sy, sx));
        }
    }
    Image2D::from_f64(h, w, &out).expect("bilinear output is finite")
}

/// Rows `[0, event_profile)` from `pre`, rows `[event_profile, H)` from `post`.
pub fn splice_kspace(pre: &ComplexGrid, post: &ComplexGrid, event_profile: usize) -> Result<ComplexGrid> {
    if pre.shape() != post.shape() {
        return Err(Error::shape(format!(
            "pre {:?} vs post {:?}",
            pre.shape(),
            post.shape()
        )));
    }
    let (h, w) = pre.shape();
    if event_profile > h {
        return Err(Error::validation(format!(
            "event profile {event_profile} exceeds {h} profiles"
        )));
    }
    let split = event_profile * w;
    let mut data = Vec::with_capacity(h * w);
    data.extend_from_slice(&pre.data()[..split]);
    data.extend_from_slice(&post.data()[split..]);
    Ok(ComplexGrid::from_raw(h, w, data))
}
