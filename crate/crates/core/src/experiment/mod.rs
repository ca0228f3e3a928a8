//! End-to-end experiment driver used by the command line tool.

pub mod arm;
pub mod import;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use arm::ExperimentArm;
pub use pipeline::{corrupt_manifest, run_arms, split_manifest, write_cohort, ArmRun, CaseDice, PipelineConfig};
pub use report::{report_runs, RunReport};
