//! Inputs shared by the kernel benchmarks.

use motionbias_core::dataset::{preprocess, Sample};
use motionbias_core::phantom::generate_cohort;
use motionbias_core::rng::SimRng;
use motionbias_core::segmenter::SegmenterParams;
use motionbias_core::PhantomConfig;

/// Preprocessed phantoms of side `size` (a multiple of 4).
pub fn samples(n: usize, size: usize) -> Vec<Sample> {
    generate_cohort(n, &PhantomConfig::with_size(size), 1)
        .unwrap()
        .iter()
        .map(|c| preprocess(c, size).unwrap())
        .collect()
}

pub fn params() -> SegmenterParams {
    SegmenterParams::he_uniform(&mut SimRng::new(1))
}
