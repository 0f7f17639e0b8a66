//! Seeded scenario generator and run evaluation.
//!
//! A scenario places semantic objects over a rectangular area, drives a
//! planar vehicle along a trajectory pattern and emits, per step, the
//! detections in the vehicle body frame together with a drift-corrupted
//! odometry pose and the exact ground-truth pose. Spurious detections come
//! from a persistent set of phantom objects that are absent from the
//! reference map.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::geometry::{rotation_angle, Point3, RigidTransform};
use crate::localizer::LocalizationEvent;
use crate::map::{ClassId, ClassSet, Frame, ObjectId, ObjectMap, SemanticObject};
use crate::pipeline::StepInput;

/// Heading bias (rad per meter) per unit of `drift_rate`.
const HEADING_BIAS_PER_METER: f64 = 0.004;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum Trajectory {
    /// Ellipse inscribed in the central 80% of the area.
    Loop {
        #[serde(default = "one")]
        laps: usize,
    },
    /// Straight pass along the long axis and back along the same line.
    OutAndBack,
    /// Lawnmower pattern with `lanes` parallel passes.
    Grid { lanes: usize },
    /// Polyline through explicit `[x, y]` waypoints.
    Waypoints { points: Vec<[f64; 2]> },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewpointMode {
    /// The reference map is the true object layout.
    Same,
    /// Reference built from the first half of the run, vehicle observes only
    /// during the second half.
    Reversed,
    /// Reference centroids carry annotation jitter.
    AerialJitter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub ref_object_count: usize,
    /// `[width, height]` in meters, origin at the lower-left corner.
    pub area: [f64; 2],
    pub classes: Vec<String>,
    pub class_distribution: Vec<f64>,
    pub trajectory: Trajectory,
    #[serde(default = "default_step_length")]
    pub step_length: f64,
    #[serde(default = "default_step_time")]
    pub step_time: f64,
    pub sensor_range: f64,
    #[serde(default)]
    pub centroid_noise_sigma: f64,
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default)]
    pub missing_fraction: f64,
    #[serde(default)]
    pub drift_rate: f64,
    #[serde(default = "default_viewpoint")]
    pub viewpoint_mode: ViewpointMode,
    /// Use an arbitrary SE(3) frame for the vehicle's odometry origin.
    #[serde(default)]
    pub random_frame: bool,
    /// Object heights are drawn from `[0, max_object_height]`.
    #[serde(default = "default_height")]
    pub max_object_height: f64,
    /// Minimum spacing between any two placed objects, real or phantom.
    #[serde(default = "default_separation")]
    pub min_separation: f64,
    /// Reference centroid jitter in aerial mode.
    #[serde(default = "default_jitter")]
    pub reference_jitter_sigma: f64,
}

fn default_step_length() -> f64 {
    2.0
}
fn default_step_time() -> f64 {
    0.2
}
fn default_viewpoint() -> ViewpointMode {
    ViewpointMode::Same
}
fn default_height() -> f64 {
    2.0
}
fn default_separation() -> f64 {
    2.0
}
fn default_jitter() -> f64 {
    0.5
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            ref_object_count: 200,
            area: [200.0, 200.0],
            classes: vec!["parking".into(), "sign".into()],
            class_distribution: vec![0.8, 0.2],
            trajectory: Trajectory::Loop { laps: 1 },
            step_length: default_step_length(),
            step_time: default_step_time(),
            sensor_range: 30.0,
            centroid_noise_sigma: 0.0,
            outlier_fraction: 0.0,
            missing_fraction: 0.0,
            drift_rate: 0.0,
            viewpoint_mode: ViewpointMode::Same,
            random_frame: false,
            max_object_height: default_height(),
            min_separation: default_separation(),
            reference_jitter_sigma: default_jitter(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("could not place {0} objects with the requested separation")]
    Crowded(usize),
    #[error("scenario parse error: {0}")]
    Parse(String),
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        let fractions = [self.outlier_fraction, self.missing_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad("fractions must lie in [0, 1]");
        }
        let nonneg = [
            self.centroid_noise_sigma,
            self.drift_rate,
            self.max_object_height,
            self.min_separation,
            self.reference_jitter_sigma,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("sigmas, drift rate, heights and separations must be finite and >= 0");
        }
        if !(self.area.iter().all(|v| v.is_finite() && *v > 0.0)) {
            return bad("area dimensions must be > 0");
        }
        if !(self.step_length > 0.0 && self.step_time > 0.0 && self.sensor_range > 0.0) {
            return bad("step length, step time and sensor range must be > 0");
        }
        if self.classes.is_empty() || self.classes.len() != self.class_distribution.len() {
            return bad("class_distribution needs one weight per class");
        }
        if self.class_distribution.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.class_distribution.iter().sum::<f64>() <= 0.0
        {
            return bad("class weights must be >= 0 with a positive sum");
        }
        ClassSet::new(self.classes.clone()).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        match &self.trajectory {
            Trajectory::Loop { laps } if *laps == 0 => return bad("loop needs at least one lap"),
            Trajectory::Grid { lanes } if *lanes == 0 => return bad("grid needs at least one lane"),
            Trajectory::Waypoints { points } if points.len() < 2 => {
                return bad("waypoint trajectory needs at least two points")
            }
            _ => {}
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let spec: Self = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn class_set(&self) -> ClassSet {
        ClassSet::new(self.classes.clone()).expect("validated class set")
    }

    /// Path waypoints in the xy plane.
    fn waypoints(&self) -> Vec<[f64; 2]> {
        let [w, h] = self.area;
        match &self.trajectory {
            Trajectory::Loop { laps } => {
                let (cx, cy, ax, ay) = (w / 2.0, h / 2.0, 0.4 * w, 0.4 * h);
                let segments = 720 * laps;
                (0..=segments)
                    .map(|i| {
                        let a = TAU * i as f64 / 720.0 - PI / 2.0;
                        [cx + ax * a.cos(), cy + ay * a.sin()]
                    })
                    .collect()
            }
            Trajectory::OutAndBack => {
                if w >= h {
                    vec![[0.1 * w, h / 2.0], [0.9 * w, h / 2.0], [0.1 * w, h / 2.0]]
                } else {
                    vec![[w / 2.0, 0.1 * h], [w / 2.0, 0.9 * h], [w / 2.0, 0.1 * h]]
                }
            }
            Trajectory::Grid { lanes } => {
                let mut pts = Vec::new();
                for lane in 0..*lanes {
                    let y = h * (lane as f64 + 0.5) / *lanes as f64;
                    let (a, b) = if lane % 2 == 0 { (0.1 * w, 0.9 * w) } else { (0.9 * w, 0.1 * w) };
                    pts.push([a, y]);
                    pts.push([b, y]);
                }
                pts
            }
            Trajectory::Waypoints { points } => points.clone(),
        }
    }

    /// Ground-truth planar poses sampled every `step_length` meters.
    pub fn ground_truth_poses(&self) -> Vec<RigidTransform> {
        let wp = self.waypoints();
        let mut poses = Vec::new();
        let mut carry = 0.0;
        for seg in wp.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            if len == 0.0 {
                continue;
            }
            let yaw = dy.atan2(dx);
            let mut s = carry;
            while s < len {
                let f = s / len;
                poses.push(RigidTransform::from_yaw(yaw, Vector3::new(a[0] + f * dx, a[1] + f * dy, 0.0)));
                s += self.step_length;
            }
            carry = s - len;
        }
        if let (Some(last), Some(&end)) = (poses.last().copied(), wp.last()) {
            poses.push(RigidTransform::from_yaw(last.yaw(), Vector3::new(end[0], end[1], 0.0)));
        }
        poses
    }
}

/// A generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub classes: ClassSet,
    pub reference_map: ObjectMap,
    /// Per step, detections in the vehicle body frame.
    pub observation_batches: Vec<Vec<SemanticObject>>,
    /// Per step, drift-corrupted pose in the local odometry frame.
    pub odometry: Vec<RigidTransform>,
    /// Per step, true pose in the reference frame.
    pub ground_truth: Vec<RigidTransform>,
    pub times: Vec<f64>,
    /// True local-to-reference alignment at the start of the run.
    pub alignment: RigidTransform,
    /// Detection ids that belong to phantom objects.
    pub outlier_ids: BTreeSet<ObjectId>,
    /// Every true object in the world, including ones outside the reference.
    pub world: Vec<SemanticObject>,
}

impl ScenarioRun {
    pub fn len(&self) -> usize {
        self.odometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.odometry.is_empty()
    }

    pub fn step_inputs(&self) -> impl Iterator<Item = StepInput<'_>> + '_ {
        (0..self.len()).map(move |i| StepInput {
            step: i,
            time: self.times[i],
            odometry: self.odometry[i],
            detections: &self.observation_batches[i],
        })
    }

    /// Number of distinct true (non-phantom) objects detected up to and
    /// including `step`.
    pub fn true_objects_seen(&self, step: usize) -> usize {
        let mut ids = BTreeSet::new();
        for batch in &self.observation_batches[..=step.min(self.len().saturating_sub(1))] {
            ids.extend(batch.iter().map(|o| o.id).filter(|id| !self.outlier_ids.contains(id)));
        }
        ids.len()
    }
}

fn sample_class(rng: &mut ChaCha8Rng, dist: &WeightedIndex<f64>) -> ClassId {
    ClassId(dist.sample(rng) as u16)
}

fn place(
    rng: &mut ChaCha8Rng,
    spec: &ScenarioSpec,
    count: usize,
    taken: &mut Vec<Point3>,
) -> Result<Vec<Point3>, ScenarioError> {
    let sep2 = spec.min_separation * spec.min_separation;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = None;
        for _ in 0..1000 {
            let p = Point3::new(
                rng.random_range(0.0..spec.area[0]),
                rng.random_range(0.0..spec.area[1]),
                if spec.max_object_height > 0.0 {
                    rng.random_range(0.0..spec.max_object_height)
                } else {
                    0.0
                },
            );
            let clear = taken
                .iter()
                .all(|q| (q.xy() - p.xy()).norm_squared() >= sep2);
            if clear {
                placed = Some(p);
                break;
            }
        }
        let p = placed.ok_or(ScenarioError::Crowded(count))?;
        taken.push(p);
        out.push(p);
    }
    Ok(out)
}

fn random_frame(rng: &mut ChaCha8Rng) -> RigidTransform {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis };
    RigidTransform::from_axis_angle(
        axis,
        rng.random_range(-PI..PI),
        Vector3::new(
            rng.random_range(-100.0..100.0),
            rng.random_range(-100.0..100.0),
            rng.random_range(-10.0..10.0),
        ),
    )
}

/// Generates a run. Identical specs give identical runs.
pub fn generate(spec: &ScenarioSpec) -> Result<ScenarioRun, ScenarioError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes = spec.class_set();
    let class_dist = WeightedIndex::new(spec.class_distribution.iter().copied())
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;

    let mut taken = Vec::new();
    let positions = place(&mut rng, spec, spec.ref_object_count, &mut taken)?;
    let world: Vec<SemanticObject> = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| SemanticObject {
            id: ObjectId(i as u64),
            class: sample_class(&mut rng, &class_dist),
            centroid: p,
        })
        .collect();

    let f = spec.outlier_fraction;
    let phantom_count = if f >= 1.0 {
        spec.ref_object_count
    } else {
        (spec.ref_object_count as f64 * f / (1.0 - f)).round() as usize
    };
    let phantom_positions = place(&mut rng, spec, phantom_count, &mut taken)?;
    let base = spec.ref_object_count as u64;
    let phantoms: Vec<SemanticObject> = phantom_positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| SemanticObject {
            id: ObjectId(base + i as u64),
            class: sample_class(&mut rng, &class_dist),
            centroid: p,
        })
        .collect();
    let outlier_ids: BTreeSet<ObjectId> = phantoms.iter().map(|o| o.id).collect();

    let ground_truth = spec.ground_truth_poses();
    let n = ground_truth.len();
    let frame = if spec.random_frame {
        random_frame(&mut rng)
    } else {
        RigidTransform::identity()
    };
    let alignment = ground_truth
        .first()
        .copied()
        .unwrap_or_default()
        .compose(&frame);

    // Odometry: integrate true body-frame increments with a heading bias and
    // step-length noise.
    let bias_sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let heading_bias = bias_sign * spec.drift_rate * HEADING_BIAS_PER_METER;
    let step_noise = Normal::new(0.0, spec.drift_rate.max(0.0)).expect("finite sigma");
    let mut odometry = Vec::with_capacity(n);
    if n > 0 {
        odometry.push(alignment.inverse().compose(&ground_truth[0]));
    }
    for t in 1..n {
        let delta = ground_truth[t - 1].inverse().compose(&ground_truth[t]);
        let step = delta.translation().norm();
        let drifted = if spec.drift_rate > 0.0 {
            let scale = 1.0 + step_noise.sample(&mut rng);
            let yaw = delta.yaw() + heading_bias * step;
            RigidTransform::from_yaw(yaw, delta.translation() * scale)
        } else {
            delta
        };
        let prev = odometry[t - 1];
        odometry.push(prev.compose(&drifted));
    }

    let (reference_map, observe_from) = match spec.viewpoint_mode {
        ViewpointMode::Same => (
            ObjectMap::from_trusted(Frame::Reference, world.clone()),
            0,
        ),
        ViewpointMode::AerialJitter => {
            let jitter = Normal::new(0.0, spec.reference_jitter_sigma).expect("finite sigma");
            let objects = world
                .iter()
                .map(|o| SemanticObject {
                    centroid: o.centroid
                        + Vector3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), 0.0),
                    ..*o
                })
                .collect();
            (ObjectMap::from_trusted(Frame::Reference, objects), 0)
        }
        ViewpointMode::Reversed => {
            let half = n / 2;
            let noise = Normal::new(0.0, spec.centroid_noise_sigma).expect("finite sigma");
            let r2 = spec.sensor_range * spec.sensor_range;
            let objects = world
                .iter()
                .filter(|o| {
                    ground_truth[..half]
                        .iter()
                        .any(|p| (p.translation().xy() - o.centroid.xy()).norm_squared() <= r2)
                })
                .copied()
                .collect::<Vec<_>>()
                .into_iter()
                .map(|o| SemanticObject {
                    centroid: o.centroid
                        + Vector3::new(
                            noise.sample(&mut rng),
                            noise.sample(&mut rng),
                            noise.sample(&mut rng),
                        ),
                    ..o
                })
                .collect();
            (ObjectMap::from_trusted(Frame::Reference, objects), half)
        }
    };

    let noise = Normal::new(0.0, spec.centroid_noise_sigma).expect("finite sigma");
    let r2 = spec.sensor_range * spec.sensor_range;
    let mut observation_batches = Vec::with_capacity(n);
    for (t, pose) in ground_truth.iter().enumerate() {
        let mut batch = Vec::new();
        if t >= observe_from {
            let inv = pose.inverse();
            let visible = world
                .iter()
                .filter(|_| f < 1.0)
                .chain(phantoms.iter())
                .filter(|o| (o.centroid.xy() - pose.translation().xy()).norm_squared() <= r2);
            for o in visible {
                if spec.missing_fraction > 0.0 && rng.random_bool(spec.missing_fraction) {
                    continue;
                }
                let mut body = inv.apply(&o.centroid);
                if spec.centroid_noise_sigma > 0.0 {
                    body += Vector3::new(
                        noise.sample(&mut rng),
                        noise.sample(&mut rng),
                        noise.sample(&mut rng),
                    );
                }
                batch.push(SemanticObject { centroid: body, ..*o });
            }
            // Detector output carries no meaningful order.
            batch.shuffle(&mut rng);
        }
        observation_batches.push(batch);
    }
    let times = (0..n).map(|t| t as f64 * spec.step_time).collect();

    Ok(ScenarioRun {
        spec: spec.clone(),
        classes,
        reference_map,
        observation_batches,
        odometry,
        ground_truth,
        times,
        alignment,
        outlier_ids,
        world,
    })
}

/// Position and orientation error between an estimate and the truth.
/// In planar mode z is dropped and orientation is compared by yaw.
pub fn pose_error(estimate: &RigidTransform, truth: &RigidTransform, planar: bool) -> (f64, f64) {
    if planar {
        let dp = (estimate.translation().xy() - truth.translation().xy()).norm();
        let mut dyaw = (estimate.yaw() - truth.yaw()).rem_euclid(TAU);
        if dyaw > PI {
            dyaw = TAU - dyaw;
        }
        (dp, dyaw.to_degrees())
    } else {
        let dp = (estimate.translation() - truth.translation()).norm();
        let dr = rotation_angle(&(estimate.rotation().transpose() * truth.rotation()));
        (dp, dr.to_degrees())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventError {
    pub step: usize,
    pub position_error: f64,
    pub orientation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub step: usize,
    /// Odometry distance traveled at this step (m).
    pub distance: f64,
    pub with_relocalization: f64,
    /// Error when only the first accepted transform is ever used.
    pub global_only: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub localized: bool,
    pub event_errors: Vec<EventError>,
    pub series: Vec<SeriesPoint>,
    pub mean_error_with_relocalization: Option<f64>,
    pub mean_error_global_only: Option<f64>,
    pub distance_to_localize: Option<f64>,
    pub objects_to_localize: Option<usize>,
}

/// Compares a localization run with the scenario's ground truth.
///
/// `estimated_poses[i]` is the global pose estimate after step `i`.
pub fn evaluate_run(
    run: &ScenarioRun,
    events: &[LocalizationEvent],
    estimated_poses: &[Option<RigidTransform>],
    planar: bool,
) -> RunMetrics {
    evaluate_against(&run.odometry, &run.ground_truth, &odometry_distances(&run.odometry), events, estimated_poses, planar)
}

pub(crate) fn odometry_distances(odometry: &[RigidTransform]) -> Vec<f64> {
    let mut d = 0.0;
    let mut out = Vec::with_capacity(odometry.len());
    for (i, p) in odometry.iter().enumerate() {
        if i > 0 {
            d += (p.translation() - odometry[i - 1].translation()).norm();
        }
        out.push(d);
    }
    out
}

pub(crate) fn evaluate_against(
    odometry: &[RigidTransform],
    ground_truth: &[RigidTransform],
    distances: &[f64],
    events: &[LocalizationEvent],
    estimated_poses: &[Option<RigidTransform>],
    planar: bool,
) -> RunMetrics {
    let Some(first) = events.first() else {
        return RunMetrics {
            localized: false,
            event_errors: Vec::new(),
            series: Vec::new(),
            mean_error_with_relocalization: None,
            mean_error_global_only: None,
            distance_to_localize: None,
            objects_to_localize: None,
        };
    };
    let event_errors = events
        .iter()
        .filter(|e| e.step < ground_truth.len())
        .map(|e| {
            let est = e.transform.compose(&odometry[e.step]);
            let (p, o) = pose_error(&est, &ground_truth[e.step], planar);
            EventError {
                step: e.step,
                position_error: p,
                orientation_error: o,
            }
        })
        .collect();
    let series: Vec<SeriesPoint> = (first.step..ground_truth.len().min(estimated_poses.len()))
        .filter_map(|t| {
            let est = estimated_poses[t]?;
            let global_only = first.transform.compose(&odometry[t]);
            Some(SeriesPoint {
                step: t,
                distance: distances[t],
                with_relocalization: pose_error(&est, &ground_truth[t], planar).0,
                global_only: pose_error(&global_only, &ground_truth[t], planar).0,
            })
        })
        .collect();
    let mean = |f: fn(&SeriesPoint) -> f64| {
        (!series.is_empty()).then(|| series.iter().map(f).sum::<f64>() / series.len() as f64)
    };
    RunMetrics {
        localized: true,
        event_errors,
        mean_error_with_relocalization: mean(|s| s.with_relocalization),
        mean_error_global_only: mean(|s| s.global_only),
        series,
        distance_to_localize: Some(first.distance_traveled),
        objects_to_localize: Some(first.objects_in_map),
    }
}
