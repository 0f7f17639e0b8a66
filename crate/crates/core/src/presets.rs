//! Ready-made scenario and configuration pairs for the stress conditions the
//! examples and tests exercise.

use crate::config::PipelineConfig;
use crate::map::ClassId;
use crate::simulator::{ScenarioSpec, Trajectory, ViewpointMode};

/// Exact detections, no drift, arbitrary vehicle frame. The area grows with
/// the object count so density stays roughly constant.
pub fn noiseless(seed: u64, ref_object_count: usize) -> (ScenarioSpec, PipelineConfig) {
    let side = (ref_object_count as f64 / 0.005).sqrt().max(60.0);
    let spec = ScenarioSpec {
        seed,
        ref_object_count,
        area: [side, side],
        random_frame: true,
        ..ScenarioSpec::default()
    };
    let mut cfg = PipelineConfig::kitti();
    // Small maps split four ways leave submaps below the inlier threshold.
    cfg.k = 1;
    cfg.epsilon = 0.1;
    (spec, cfg)
}

/// Four out of five detections come from phantom objects absent from the
/// reference; centroids carry 0.3 m noise.
///
/// Consistency is tightened to 1 m and only the dominant parking class is
/// scored, which keeps spurious cliques built from phantoms from winning
/// the RMSE comparison.
pub fn outlier_stress(seed: u64) -> (ScenarioSpec, PipelineConfig) {
    let spec = ScenarioSpec {
        seed,
        ref_object_count: 600,
        sensor_range: 30.0,
        outlier_fraction: 0.8,
        centroid_noise_sigma: 0.3,
        random_frame: true,
        ..ScenarioSpec::default()
    };
    let mut cfg = PipelineConfig::kitti();
    cfg.epsilon = 1.0;
    cfg.rmse_class_filter = Some(vec![ClassId(0)]);
    (spec, cfg)
}

/// Single-class rock field driven out and back; the reference holds what
/// was seen on the way out and the vehicle observes only on the way back.
pub fn reversed_traverse(seed: u64) -> (ScenarioSpec, PipelineConfig) {
    let spec = ScenarioSpec {
        seed,
        ref_object_count: 200,
        area: [150.0, 40.0],
        classes: vec!["rock".into()],
        class_distribution: vec![1.0],
        trajectory: Trajectory::OutAndBack,
        sensor_range: 20.0,
        centroid_noise_sigma: 0.3,
        viewpoint_mode: ViewpointMode::Reversed,
        random_frame: true,
        ..ScenarioSpec::default()
    };
    (spec, PipelineConfig::katwijk())
}

/// Three laps of a loop of roughly 2 km with 1% odometry drift.
pub fn drifting_loop(seed: u64) -> (ScenarioSpec, PipelineConfig) {
    let spec = ScenarioSpec {
        seed,
        ref_object_count: 400,
        area: [300.0, 250.0],
        trajectory: Trajectory::Loop { laps: 3 },
        centroid_noise_sigma: 0.3,
        drift_rate: 0.01,
        ..ScenarioSpec::default()
    };
    let mut cfg = PipelineConfig::kitti();
    cfg.restrict_margin = 20.0;
    (spec, cfg)
}
