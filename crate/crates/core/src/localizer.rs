//! Acceptance logic for global localization and guided relocalization.
//!
//! The localizer starts in [`Mode::GlobalSearch`]. A batch of per-submap
//! candidates is accepted when at least one passes both the inlier and RMSE
//! thresholds; the winner is the candidate with the most inliers among those
//! whose RMSE lies within `(1 + alpha)` of the best valid RMSE. After that the
//! localizer is [`Mode::Guided`] and each new candidate must differ from the
//! current transform's RMSE by more than `delta`, not be worse than it by more
//! than the alpha band, and stay within a drift-dependent distance of it.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::geometry::RigidTransform;
use crate::map::ObjectId;
use crate::registration::CandidateRegistration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    GlobalSearch,
    Guided,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::GlobalSearch => "global",
            Mode::Guided => "guided",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LocalizerError {
    #[error("vehicle is not localized yet")]
    NotLocalized,
}

/// When and where along the run a decision is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stamp {
    pub step: usize,
    pub time: f64,
    /// Odometry distance since the start of the run (m).
    pub distance_traveled: f64,
    /// Vehicle map size at decision time.
    pub objects_in_map: usize,
}

/// An accepted registration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEvent {
    pub step: usize,
    pub time: f64,
    pub mode: Mode,
    pub transform: RigidTransform,
    pub inlier_count: usize,
    pub rmse: f64,
    pub submap_id: usize,
    pub distance_traveled: f64,
    pub objects_in_map: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    NotGuided,
    Unusable,
    /// `|e_cand − e_cur| <= delta`.
    InsufficientChange,
    /// `e_cand > (1 + alpha) e_cur`.
    WorseRmse,
    /// Translation or rotation gap beyond the loosened similarity bounds.
    TooDissimilar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accepted,
    Rejected(Rejection),
}

/// RMSE acceptance threshold after `distance_traveled` meters.
pub fn tau_rmse_at(cfg: &PipelineConfig, distance_traveled: f64) -> f64 {
    cfg.tau_rmse_base + cfg.tau_rmse_growth * distance_traveled.max(0.0)
}

/// Index of the winning candidate, if any.
///
/// Valid candidates have at least `tau_in` inliers and a usable transform.
/// With `e_min` the smallest valid RMSE, nothing is selected when
/// `e_min > tau_rmse`; otherwise the winner maximizes inlier count among
/// valid candidates with `rmse <= (1 + alpha) e_min`, breaking ties by lower
/// RMSE and then lower submap id.
pub fn select_global(
    candidates: &[CandidateRegistration],
    cfg: &PipelineConfig,
    distance_traveled: f64,
) -> Option<usize> {
    let valid: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].inlier_count >= cfg.tau_in && candidates[i].is_usable())
        .collect();
    let best_rmse = valid
        .iter()
        .map(|&i| candidates[i].rmse)
        .min_by(f64::total_cmp)?;
    if best_rmse > tau_rmse_at(cfg, distance_traveled) {
        return None;
    }
    let band = (1.0 + cfg.alpha) * best_rmse;
    valid
        .into_iter()
        .filter(|&i| candidates[i].rmse <= band)
        .min_by(|&a, &b| {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            cb.inlier_count
                .cmp(&ca.inlier_count)
                .then(ca.rmse.total_cmp(&cb.rmse))
                .then(ca.submap_id.cmp(&cb.submap_id))
        })
}

/// Evaluates the three guided acceptance predicates.
pub fn check_guided(
    e_cand: f64,
    e_cur: f64,
    t_cand: &RigidTransform,
    t_cur: &RigidTransform,
    distance_since_accept: f64,
    cfg: &PipelineConfig,
) -> Result<(), Rejection> {
    if !e_cand.is_finite() {
        return Err(Rejection::Unusable);
    }
    if (e_cand - e_cur).abs() <= cfg.delta {
        return Err(Rejection::InsufficientChange);
    }
    if e_cand > (1.0 + cfg.alpha) * e_cur {
        return Err(Rejection::WorseRmse);
    }
    let d = distance_since_accept.max(0.0);
    let (dt, dr) = t_cand.distance_to(t_cur);
    let max_dt = cfg.translation_similarity_base + cfg.translation_similarity_growth * d;
    let max_dr = cfg.rotation_similarity_base + cfg.rotation_similarity_growth * d;
    if dt > max_dt || dr > max_dr {
        return Err(Rejection::TooDissimilar);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerState {
    mode: Mode,
    t_cur: Option<RigidTransform>,
    last_inliers: Vec<(ObjectId, ObjectId)>,
    distance_at_last_accept: f64,
    event_log: Vec<LocalizationEvent>,
}

impl Default for LocalizerState {
    fn default() -> Self {
        Self::new()
    }
}

impl LocalizerState {
    pub fn new() -> Self {
        Self {
            mode: Mode::GlobalSearch,
            t_cur: None,
            last_inliers: Vec::new(),
            distance_at_last_accept: 0.0,
            event_log: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn t_cur(&self) -> Option<&RigidTransform> {
        self.t_cur.as_ref()
    }

    /// Inliers of the last accepted registration as `(reference id, vehicle id)`.
    pub fn last_inliers(&self) -> &[(ObjectId, ObjectId)] {
        &self.last_inliers
    }

    pub fn distance_at_last_accept(&self) -> f64 {
        self.distance_at_last_accept
    }

    pub fn event_log(&self) -> &[LocalizationEvent] {
        &self.event_log
    }

    fn accept(&mut self, c: &CandidateRegistration, transform: RigidTransform, stamp: Stamp) {
        let mode = self.mode;
        self.mode = Mode::Guided;
        self.t_cur = Some(transform);
        self.last_inliers = c.inlier_ids.clone();
        self.distance_at_last_accept = stamp.distance_traveled;
        self.event_log.push(LocalizationEvent {
            step: stamp.step,
            time: stamp.time,
            mode,
            transform,
            inlier_count: c.inlier_count,
            rmse: c.rmse,
            submap_id: c.submap_id,
            distance_traveled: stamp.distance_traveled,
            objects_in_map: stamp.objects_in_map,
        });
    }

    /// Applies the global acceptance rule to one batch of candidates.
    pub fn global_localize(
        &mut self,
        candidates: &[CandidateRegistration],
        cfg: &PipelineConfig,
        stamp: Stamp,
    ) -> Option<&LocalizationEvent> {
        let winner = &candidates[select_global(candidates, cfg, stamp.distance_traveled)?];
        let transform = winner.transform.expect("valid candidates carry a transform");
        self.accept(winner, transform, stamp);
        self.event_log.last()
    }

    /// Guided acceptance test. `e_cur` is the current transform's RMSE on the
    /// same evaluation window the candidate was scored on.
    pub fn guided_relocalize(
        &mut self,
        candidate: &CandidateRegistration,
        e_cur: f64,
        cfg: &PipelineConfig,
        stamp: Stamp,
    ) -> Decision {
        let Some(t_cur) = self.t_cur.filter(|_| self.mode == Mode::Guided) else {
            return Decision::Rejected(Rejection::NotGuided);
        };
        let Some(t_cand) = candidate.transform.filter(|_| candidate.is_usable()) else {
            return Decision::Rejected(Rejection::Unusable);
        };
        let since = stamp.distance_traveled - self.distance_at_last_accept;
        match check_guided(candidate.rmse, e_cur, &t_cand, &t_cur, since, cfg) {
            Ok(()) => {
                self.accept(candidate, t_cand, stamp);
                Decision::Accepted
            }
            Err(r) => Decision::Rejected(r),
        }
    }

    /// Vehicle pose in the reference frame given its local odometry pose.
    pub fn current_global_pose(
        &self,
        local_pose: &RigidTransform,
    ) -> Result<RigidTransform, LocalizerError> {
        match (self.mode, &self.t_cur) {
            (Mode::Guided, Some(t)) => Ok(t.compose(local_pose)),
            _ => Err(LocalizerError::NotLocalized),
        }
    }
}
