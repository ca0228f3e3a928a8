//! Training-data ordering: shuffled versus severity curriculum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::SeverityCategory;
use crate::rng::{Purpose, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderingStrategy {
    Shuffled,
    Curriculum,
}

impl fmt::Display for OrderingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderingStrategy::Shuffled => "shuffled",
            OrderingStrategy::Curriculum => "curriculum",
        })
    }
}

impl FromStr for OrderingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shuffled" => Ok(OrderingStrategy::Shuffled),
            "curriculum" => Ok(OrderingStrategy::Curriculum),
            other => Err(Error::validation(format!("unknown strategy {other:?}"))),
        }
    }
}

/// How the curriculum treats epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurriculumSchedule {
    /// Every epoch presents all cases, grouped minimal -> severe.
    #[default]
    PerEpoch,
    /// Category k joins at epoch k (0-based); earlier epochs skip harder cases.
    Staged,
}

/// Visiting order for one epoch as indices into `severities`.
///
/// Shuffled: a uniform permutation. Curriculum: contiguous blocks in
/// severity order, each block permuted. Both are deterministic in
/// `(strategy, epoch, seed)`.
pub fn order_epoch(
    severities: &[Option<SeverityCategory>],
    strategy: OrderingStrategy,
    epoch: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    order_epoch_with(severities, strategy, CurriculumSchedule::PerEpoch, epoch, seed)
}

pub fn order_epoch_with(
    severities: &[Option<SeverityCategory>],
    strategy: OrderingStrategy,
    schedule: CurriculumSchedule,
    epoch: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let known: Vec<SeverityCategory> = severities
        .iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::validation(format!("case at position {i} has no severity"))))
        .collect::<Result<_>>()?;
    let mut rng = SimRng::derive(seed, Purpose::Ordering, epoch as u64);
    let mut order: Vec<usize> = (0..known.len()).collect();
    rng.shuffle(&mut order);
    if strategy == OrderingStrategy::Curriculum {
        // stable sort keeps the random within-category permutation
        order.sort_by_key(|&i| known[i]);
        if schedule == CurriculumSchedule::Staged {
            order.retain(|&i| known[i].index() <= epoch);
        }
    }
    Ok(order)
}
