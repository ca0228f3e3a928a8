//! Simulation of rigid-body motion artifacts in k-space, a small reference
//! segmenter trained under shuffled or curriculum ordering, and the
//! statistics used to compare training arms.

pub mod augment;
pub mod curriculum;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod kspace;
pub mod manifest;
pub mod motion;
pub mod phantom;
pub mod rng;
pub mod segmenter;
pub mod stats;
pub mod tensor_io;

pub use error::{Error, Result};
pub use grid::{CaseRecord, ComplexGrid, Image2D, MaskGrid, Split};
pub use kspace::{RotationAngle, Shift2D};
pub use motion::{MotionTrajectory, SeverityCategory, SkullConfig};
pub use phantom::PhantomConfig;
pub use rng::SimRng;
