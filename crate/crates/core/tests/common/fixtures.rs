//! Pinned fixtures shared by the motion tests and the acceptance run.

use motionbias_core::motion::{add_skull, corrupt_image, rmse, sample_trajectory};
use motionbias_core::phantom::generate_cohort;
use motionbias_core::rng::{Purpose, SimRng};
use motionbias_core::{Image2D, PhantomConfig, SeverityCategory, SkullConfig};

pub const SEVERITY_SEEDS: u64 = 20;

/// First case of the 64x64 seed-7 cohort with the default skull added.
pub fn fixture_phantom() -> Image2D {
    let case = generate_cohort(1, &PhantomConfig::with_size(64), 7).unwrap().remove(0);
    add_skull(&case.image, &case.brain_mask, &SkullConfig::default()).unwrap()
}

/// Mean RMSE between the fixture and its corrupted copy over seeds 1..=20.
pub fn mean_artifact_rmse(image: &Image2D, category: SeverityCategory) -> f64 {
    let total: f64 = (1..=SEVERITY_SEEDS)
        .map(|s| {
            let mut rng = SimRng::derive(s, Purpose::Fixture, category.index() as u64);
            let traj = sample_trajectory(category, image.height(), &mut rng);
            rmse(image, &corrupt_image(image, &traj).unwrap())
        })
        .sum();
    total / SEVERITY_SEEDS as f64
}

/// Calibrated mean RMSE of the fixture for Mild, Moderate, Severe.
pub const FROZEN_RMSE: [f64; 3] = [0.1567357710072091, 0.19280154501015542, 0.2132312152509687];
