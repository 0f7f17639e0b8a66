//! Vehicle map maintenance and reference map preparation.

use std::collections::HashMap;

use crate::config::Window;
use crate::geometry::{Point3, RigidTransform};
use crate::map::{Frame, ObjectId, ObjectMap, SemanticObject};

/// A pose sample on the vehicle's odometry trail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometrySample {
    pub step: usize,
    pub time: f64,
    pub pose: RigidTransform,
}

/// The vehicle's own object map in its local odometry frame, with the
/// odometry trail that produced it.
#[derive(Debug, Clone, Default)]
pub struct VehicleMapState {
    full_map: ObjectMap,
    observation_counts: HashMap<ObjectId, u32>,
    odometry_trail: Vec<OdometrySample>,
    distance_traveled: f64,
    next_id: u64,
}

impl VehicleMapState {
    pub fn new() -> Self {
        Self {
            full_map: ObjectMap::new(Frame::Vehicle),
            ..Default::default()
        }
    }

    /// Objects ordered from least to most recently seen.
    pub fn full_map(&self) -> &ObjectMap {
        &self.full_map
    }

    pub fn odometry_trail(&self) -> &[OdometrySample] {
        &self.odometry_trail
    }

    pub fn distance_traveled(&self) -> f64 {
        self.distance_traveled
    }

    pub fn observation_count(&self, id: ObjectId) -> u32 {
        self.observation_counts.get(&id).copied().unwrap_or(0)
    }

    pub fn latest_pose(&self) -> Option<&RigidTransform> {
        self.odometry_trail.last().map(|s| &s.pose)
    }

    /// Appends an odometry sample; distance grows by the translation step.
    pub fn record_pose(&mut self, step: usize, time: f64, pose: RigidTransform) {
        if let Some(last) = self.odometry_trail.last() {
            self.distance_traveled += (pose.translation() - last.pose.translation()).norm();
        }
        self.odometry_trail.push(OdometrySample { step, time, pose });
    }

    /// Fuses a batch of local-frame detections into the map.
    ///
    /// Each detection is matched against the objects that existed before the
    /// batch: the nearest same-class object within `fusion_radius` absorbs
    /// it (running mean over its observation count) and moves to the newest
    /// end of the order. Unmatched detections are appended with a fresh id.
    pub fn fuse_observations(&mut self, new_objects: &[SemanticObject], fusion_radius: f64) {
        let existing = self.full_map.len();
        let mut refreshed: Vec<usize> = Vec::new();
        let mut appended: Vec<SemanticObject> = Vec::new();
        for obs in new_objects {
            let hit = self.full_map.objects()[..existing]
                .iter()
                .enumerate()
                .filter(|(_, o)| o.class == obs.class)
                .map(|(i, o)| (i, (o.centroid - obs.centroid).norm()))
                .filter(|&(_, d)| d <= fusion_radius)
                // nearest; ties go to the most recently seen
                .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            match hit {
                Some((i, _)) => {
                    let object = &mut self.full_map.objects_mut()[i];
                    let count = self.observation_counts.entry(object.id).or_insert(1);
                    let n = f64::from(*count);
                    object.centroid = (object.centroid * n + obs.centroid) / (n + 1.0);
                    *count += 1;
                    if !refreshed.contains(&i) {
                        refreshed.push(i);
                    }
                }
                None => {
                    let id = ObjectId(self.next_id);
                    self.next_id += 1;
                    self.observation_counts.insert(id, 1);
                    appended.push(SemanticObject { id, ..*obs });
                }
            }
        }
        if !refreshed.is_empty() {
            let objects = self.full_map.objects_mut();
            let mut moved = Vec::with_capacity(refreshed.len());
            let mut kept = Vec::with_capacity(objects.len());
            for (i, o) in objects.drain(..).enumerate() {
                if refreshed.contains(&i) {
                    moved.push((refreshed.iter().position(|&r| r == i).unwrap(), o));
                } else {
                    kept.push(o);
                }
            }
            moved.sort_by_key(|(pos, _)| *pos);
            kept.extend(moved.into_iter().map(|(_, o)| o));
            *objects = kept;
        }
        self.full_map.objects_mut().extend(appended);
    }

    /// The `r` most recently seen objects, oldest first.
    pub fn recent_window(&self, r: Window) -> ObjectMap {
        recent_window(&self.full_map, r)
    }
}

pub fn recent_window(map: &ObjectMap, r: Window) -> ObjectMap {
    let start = map.len().saturating_sub(r.limit());
    ObjectMap::from_trusted(map.frame(), map.objects()[start..].to_vec())
}

/// Splits a map into `k` slabs along its longest bounding-box axis. Every
/// interior border is widened by `overlap_fraction` of the slab width on
/// both sides. `k = 1` returns the map unchanged.
pub fn split_submaps(ref_map: &ObjectMap, k: usize, overlap_fraction: f64) -> Vec<ObjectMap> {
    let k = k.max(1);
    let Some((lo, hi)) = ref_map.bounds().filter(|_| k > 1) else {
        return vec![ref_map.clone()];
    };
    let extent = hi - lo;
    let axis = extent.iamax();
    let width = extent[axis] / k as f64;
    if width <= 0.0 {
        let mut out = vec![ref_map.clone()];
        out.extend((1..k).map(|_| ObjectMap::new(ref_map.frame())));
        return out;
    }
    let pad = overlap_fraction * width;
    (0..k)
        .map(|i| {
            // Outer slabs are open-ended so rounding cannot drop the extremes.
            let start = if i == 0 {
                f64::NEG_INFINITY
            } else {
                lo[axis] + i as f64 * width - pad
            };
            let end = if i + 1 == k {
                f64::INFINITY
            } else {
                lo[axis] + (i + 1) as f64 * width + pad
            };
            ref_map.filtered(|o| {
                let c = o.centroid[axis];
                c >= start && c < end
            })
        })
        .collect()
}

/// Reference objects inside the bounding box of the vehicle window mapped
/// through `t_cur`, expanded by `margin` on every side.
pub fn restrict_reference(
    ref_map: &ObjectMap,
    t_cur: &RigidTransform,
    veh_window: &ObjectMap,
    margin: f64,
) -> ObjectMap {
    if margin == f64::INFINITY {
        return ref_map.clone();
    }
    let mut mapped = veh_window.iter().map(|o| t_cur.apply(&o.centroid));
    let Some(first) = mapped.next() else {
        return ObjectMap::new(ref_map.frame());
    };
    let (lo, hi) = mapped.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p)));
    let m = Point3::repeat(margin);
    let (lo, hi) = (lo - m, hi + m);
    ref_map.filtered(|o| {
        (0..3).all(|a| o.centroid[a] >= lo[a] && o.centroid[a] <= hi[a])
    })
}
