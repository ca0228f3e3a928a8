//! The `MRT1` flat tensor format.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                                              |
//! |--------|------|----------------------------------------------------|
//! | 0      | 4    | magic `b"MRT1"`                                    |
//! | 4      | 2    | version, u16 = 1                                   |
//! | 6      | 1    | dtype: 1 = f32 real, 2 = u8 mask, 3 = f32 complex  |
//! | 7      | 1    | ndim, u8 = 2                                       |
//! | 8      | 8    | dims as u32: height, width                         |
//! | 16     | ..   | row-major payload                                  |
//!
//! Complex payloads interleave (re, im) pairs. Complex grids are held in f64
//! in memory, so writing one rounds every component to f32.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, Image2D, MaskGrid};

pub const MAGIC: &[u8; 4] = b"MRT1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    Real = 1,
    Mask = 2,
    Complex = 3,
}

impl DType {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DType::Real),
            2 => Some(DType::Mask),
            3 => Some(DType::Complex),
            _ => None,
        }
    }

    fn element_size(self) -> usize {
        match self {
            DType::Real => 4,
            DType::Mask => 1,
            DType::Complex => 8,
        }
    }
}

/// Any grid that can live in an `MRT1` file.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Image(Image2D),
    Mask(MaskGrid),
    Complex(ComplexGrid),
}

impl Tensor {
    pub fn dtype(&self) -> DType {
        match self {
            Tensor::Image(_) => DType::Real,
            Tensor::Mask(_) => DType::Mask,
            Tensor::Complex(_) => DType::Complex,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Tensor::Image(g) => g.shape(),
            Tensor::Mask(g) => g.shape(),
            Tensor::Complex(g) => g.shape(),
        }
    }

    pub fn into_image(self) -> Option<Image2D> {
        match self {
            Tensor::Image(g) => Some(g),
            _ => None,
        }
    }

    pub fn into_mask(self) -> Option<MaskGrid> {
        match self {
            Tensor::Mask(g) => Some(g),
            _ => None,
        }
    }

    pub fn into_complex(self) -> Option<ComplexGrid> {
        match self {
            Tensor::Complex(g) => Some(g),
            _ => None,
        }
    }
}

impl From<Image2D> for Tensor {
    fn from(g: Image2D) -> Self {
        Tensor::Image(g)
    }
}

impl From<MaskGrid> for Tensor {
    fn from(g: MaskGrid) -> Self {
        Tensor::Mask(g)
    }
}

impl From<ComplexGrid> for Tensor {
    fn from(g: ComplexGrid) -> Self {
        Tensor::Complex(g)
    }
}

/// Serializes a tensor to its exact on-disk bytes.
pub fn encode(tensor: &Tensor) -> Vec<u8> {
    let (h, w) = tensor.shape();
    let dtype = tensor.dtype();
    let mut out = Vec::with_capacity(HEADER_LEN + h * w * dtype.element_size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype as u8);
    out.push(2);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    match tensor {
        Tensor::Image(g) => {
            for v in g.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Tensor::Mask(g) => out.extend_from_slice(g.data()),
        Tensor::Complex(g) => {
            for z in g.data() {
                out.extend_from_slice(&(z.re as f32).to_le_bytes());
                out.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
    }
    out
}

/// Parses `MRT1` bytes. `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad(format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dtype = DType::from_code(bytes[6]).ok_or_else(|| bad(format!("unknown dtype {}", bytes[6])))?;
    if bytes[7] != 2 {
        return Err(bad(format!("ndim {} (only 2 is supported)", bytes[7])));
    }
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(dtype.element_size()))
        .ok_or_else(|| bad("dims overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(bad(format!(
            "payload is {} bytes, {h}x{w} {dtype:?} needs {expected}",
            payload.len()
        )));
    }
    let f32_at = |i: usize| f32::from_le_bytes(payload[i..i + 4].try_into().unwrap());
    let tensor = match dtype {
        DType::Real => {
            let data = (0..h * w).map(|i| f32_at(4 * i)).collect();
            Tensor::Image(Image2D::new(h, w, data).map_err(|e| bad(e.to_string()))?)
        }
        DType::Mask => {
            if let Some(i) = payload.iter().position(|&b| b > 1) {
                return Err(bad(format!("mask byte {} at payload offset {i}", payload[i])));
            }
            Tensor::Mask(MaskGrid::new(h, w, payload.to_vec()).map_err(|e| bad(e.to_string()))?)
        }
        DType::Complex => {
            let data = (0..h * w)
                .map(|i| Complex64::new(f32_at(8 * i) as f64, f32_at(8 * i + 4) as f64))
                .collect();
            Tensor::Complex(ComplexGrid::new(h, w, data).map_err(|e| bad(e.to_string()))?)
        }
    };
    Ok(tensor)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(tensor)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image2D> {
    let path = path.as_ref();
    read_tensor(path)?.into_image().ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        reason: "expected an f32 image".into(),
    })
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskGrid> {
    let path = path.as_ref();
    read_tensor(path)?.into_mask().ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        reason: "expected a u8 mask".into(),
    })
}
