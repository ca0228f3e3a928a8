//! Image, mask and complex grids plus the per-case record.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::SeverityCategory;

/// Real-valued single-contrast slice, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image2D {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_len(height, width, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite pixel at index {i}")));
        }
        Ok(Image2D {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Image2D {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    /// Builds an image from f64 values, rounding to f32.
    pub fn from_f64(height: usize, width: usize, data: &[f64]) -> Result<Self> {
        Self::new(height, width, data.iter().map(|&v| v as f32).collect())
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Image2D {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Applies `f` to each pixel. Non-finite results are clamped to zero.
    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Image2D {
        Image2D {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .map(|&v| {
                    let y = f(v);
                    if y.is_finite() {
                        y
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

/// Binary mask stored as bytes in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskGrid {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl MaskGrid {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_len(height, width, data.len())?;
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::validation(format!(
                "mask value {} at index {i} is not binary",
                data[i]
            )));
        }
        Ok(MaskGrid {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        MaskGrid {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c) as u8);
            }
        }
        MaskGrid {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &MaskGrid) -> bool {
        self.shape() == other.shape()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a == 0 || b != 0)
    }
}

/// Complex k-space grid, row-major. Rows are phase-encode profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        check_len(height, width, data.len())?;
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation(format!("non-finite k-space sample at index {i}")));
        }
        Ok(ComplexGrid {
            height,
            width,
            data,
        })
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        ComplexGrid {
            height,
            width,
            data,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::from_raw(height, width, vec![Complex64::new(0.0, 0.0); height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }
}

fn check_len(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::shape(format!("empty grid {height}x{width}")));
    }
    if height.checked_mul(width) != Some(len) {
        return Err(Error::shape(format!(
            "{len} values cannot fill a {height}x{width} grid"
        )));
    }
    Ok(())
}

/// Data split a case belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

/// One slice with its brain and lesion labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub case_id: String,
    pub image: Image2D,
    pub brain_mask: MaskGrid,
    pub lesion_mask: MaskGrid,
    pub severity: Option<SeverityCategory>,
    pub split: Option<Split>,
}

impl CaseRecord {
    pub fn new(
        case_id: impl Into<String>,
        image: Image2D,
        brain_mask: MaskGrid,
        lesion_mask: MaskGrid,
    ) -> Result<Self> {
        let case_id = case_id.into();
        if image.shape() != brain_mask.shape() || image.shape() != lesion_mask.shape() {
            return Err(Error::shape(format!(
                "case {case_id}: image {:?}, brain {:?}, lesion {:?}",
                image.shape(),
                brain_mask.shape(),
                lesion_mask.shape()
            )));
        }
        if !lesion_mask.is_subset_of(&brain_mask) {
            return Err(Error::validation(format!(
                "case {case_id}: lesion extends outside the brain mask"
            )));
        }
        Ok(CaseRecord {
            case_id,
            image,
            brain_mask,
            lesion_mask,
            severity: None,
            split: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(Image2D::new(2, 3, vec![0.0; 5]), Err(Error::Shape(_))));
        assert!(matches!(MaskGrid::new(0, 3, vec![]), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_non_finite_and_non_binary() {
        assert!(Image2D::new(1, 2, vec![0.0, f32::NAN]).is_err());
        assert!(MaskGrid::new(1, 2, vec![0, 2]).is_err());
    }

    #[test]
    fn case_requires_lesion_inside_brain() {
        let img = Image2D::zeros(2, 2);
        let brain = MaskGrid::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        let lesion = MaskGrid::new(2, 2, vec![0, 0, 1, 0]).unwrap();
        assert!(CaseRecord::new("a", img.clone(), brain.clone(), lesion).is_err());
        let lesion = MaskGrid::new(2, 2, vec![0, 1, 0, 0]).unwrap();
        assert!(CaseRecord::new("a", img, brain, lesion).is_ok());
    }
}
