//! Overlap scores and their summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MaskGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceResult {
    pub case_id: String,
    pub dice: f64,
}

/// `2|P∩T| / (|P| + |T|)`; two empty masks score 1.
pub fn dice_score(pred: &MaskGrid, truth: &MaskGrid) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!("prediction {:?} vs truth {:?}", pred.shape(), truth.shape())));
    }
    let (mut inter, mut total) = (0usize, 0usize);
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        inter += (p & t) as usize;
        total += (p + t) as usize;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::validation("cannot summarize an empty list"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(Summary { mean, std, n })
}
