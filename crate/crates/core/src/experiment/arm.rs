//! The five training/testing arms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curriculum::OrderingStrategy;
use crate::error::{Error, Result};
use crate::manifest::ImageVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentArm {
    /// No skull, no motion: upper bound.
    ShuffledNoSkullClean,
    ShuffledSkullClean,
    /// Trained on clean skull images, tested on motion-corrupted ones.
    ShuffledSkullCleanOnMotion,
    ShuffledSkullMotion,
    CurriculumSkullMotion,
}

impl ExperimentArm {
    pub const ALL: [ExperimentArm; 5] = [
        ExperimentArm::ShuffledNoSkullClean,
        ExperimentArm::ShuffledSkullClean,
        ExperimentArm::ShuffledSkullCleanOnMotion,
        ExperimentArm::ShuffledSkullMotion,
        ExperimentArm::CurriculumSkullMotion,
    ];

    /// Directory and file stem.
    pub fn slug(self) -> &'static str {
        match self {
            ExperimentArm::ShuffledNoSkullClean => "shuffled_noskull_clean",
            ExperimentArm::ShuffledSkullClean => "shuffled_skull_clean",
            ExperimentArm::ShuffledSkullCleanOnMotion => "shuffled_skull_clean_on_motion",
            ExperimentArm::ShuffledSkullMotion => "shuffled_skull_motion",
            ExperimentArm::CurriculumSkullMotion => "curriculum_skull_motion",
        }
    }

    /// Compact label used in tables (s/c = shuffled/curriculum,
    /// S/nS = skull/no skull, C/M = clean/motion).
    pub fn label(self) -> &'static str {
        match self {
            ExperimentArm::ShuffledNoSkullClean => "s_nSC",
            ExperimentArm::ShuffledSkullClean => "s_SC",
            ExperimentArm::ShuffledSkullCleanOnMotion => "s_SC>M",
            ExperimentArm::ShuffledSkullMotion => "s_SM",
            ExperimentArm::CurriculumSkullMotion => "c_SM",
        }
    }

    pub fn strategy(self) -> OrderingStrategy {
        match self {
            ExperimentArm::CurriculumSkullMotion => OrderingStrategy::Curriculum,
            _ => OrderingStrategy::Shuffled,
        }
    }

    /// Image variant used for training and validation.
    pub fn train_variant(self) -> ImageVariant {
        match self {
            ExperimentArm::ShuffledNoSkullClean => ImageVariant::Original,
            ExperimentArm::ShuffledSkullClean | ExperimentArm::ShuffledSkullCleanOnMotion => ImageVariant::Skull,
            ExperimentArm::ShuffledSkullMotion | ExperimentArm::CurriculumSkullMotion => ImageVariant::Motion,
        }
    }

    pub fn test_variant(self) -> ImageVariant {
        match self {
            ExperimentArm::ShuffledNoSkullClean => ImageVariant::Original,
            ExperimentArm::ShuffledSkullClean => ImageVariant::Skull,
            _ => ImageVariant::Motion,
        }
    }
}

impl fmt::Display for ExperimentArm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ExperimentArm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        ExperimentArm::ALL
            .into_iter()
            .find(|a| a.slug() == key || a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = ExperimentArm::ALL.iter().map(|a| a.slug()).collect();
                Error::validation(format!("unknown arm {s:?}; expected one of {}", names.join(", ")))
            })
    }
}
