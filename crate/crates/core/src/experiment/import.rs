//! Conversion of externally produced slices into tensor files.
//!
//! Accepted inputs: delimited text (`.csv`, `.txt`: one row per line,
//! comma or whitespace separated), binary or ASCII PGM (`.pgm`), and raw
//! little-endian f32 (`.raw`, dimensions supplied by the caller).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Image2D, MaskGrid};
use crate::tensor_io::{write_tensor, Tensor};

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Row-major values and dimensions of a slice file.
pub fn read_slice(path: &Path, raw_dims: Option<(usize, usize)>) -> Result<(usize, usize, Vec<f64>)> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match ext.as_str() {
        "csv" | "txt" => parse_text(path, &bytes),
        "pgm" => parse_pgm(path, &bytes),
        "raw" => {
            let (h, w) = raw_dims.ok_or_else(|| Error::validation("raw input needs --height and --width"))?;
            if bytes.len() != h * w * 4 {
                return Err(format_err(path, format!("{} bytes, expected {} for {h}x{w} f32", bytes.len(), h * w * 4)));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            Ok((h, w, data))
        }
        other => Err(Error::validation(format!(
            "{}: unsupported extension {other:?} (csv, txt, pgm, raw)",
            path.display()
        ))),
    }
}

fn parse_text(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let text = std::str::from_utf8(bytes).map_err(|_| format_err(path, "not UTF-8 text"))?;
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| format_err(path, format!("line {}: bad number {t:?}", i + 1))))
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(format_err(path, format!("line {}: {} values, expected {w}", i + 1, row.len())))
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| format_err(path, "no data rows"))?;
    Ok((height, width, data))
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    // header: magic, width, height, maxval, separated by whitespace/comments
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated PGM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| format_err(path, format!("bad PGM header field {s:?}")));
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(path, "PGM maxval must be in 1..=65535"));
    }
    let n = w * h;
    let data: Vec<f64> = match tokens[0].as_str() {
        "P5" => {
            let body = &bytes[(pos + 1).min(bytes.len())..];
            let size = if maxval < 256 { 1 } else { 2 };
            if body.len() < n * size {
                return Err(format_err(path, "truncated PGM raster"));
            }
            if size == 1 {
                body[..n].iter().map(|&b| b as f64).collect()
            } else {
                body[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64).collect()
            }
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[pos..]);
            let v: Vec<f64> = text
                .split_whitespace()
                .take(n)
                .map(|t| t.parse::<f64>().map_err(|_| format_err(path, format!("bad PGM value {t:?}"))))
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(format_err(path, "truncated PGM raster"));
            }
            v
        }
        other => return Err(format_err(path, format!("unsupported PGM magic {other:?}"))),
    };
    Ok((h, w, data))
}

/// Converts `input` to an MRT1 file. With `as_mask`, non-zero values
/// become 1.
pub fn import_slice(input: &Path, output: &Path, as_mask: bool, raw_dims: Option<(usize, usize)>) -> Result<Tensor> {
    let (h, w, data) = read_slice(input, raw_dims)?;
    let tensor = if as_mask {
        Tensor::Mask(MaskGrid::new(h, w, data.iter().map(|&v| (v != 0.0) as u8).collect())?)
    } else {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(format_err(input, "non-finite intensity"));
        }
        Tensor::Image(Image2D::from_f64(h, w, &data)?)
    };
    write_tensor(output, &tensor)?;
    Ok(tensor)
}
