//! Online localization session: ingests odometry and detections step by
//! step and runs periodic registrations through the localizer.

use rayon::prelude::*;

use crate::config::{ConfigError, PipelineConfig};
use crate::consistency::Association;
use crate::geometry::RigidTransform;
use crate::localizer::{Decision, LocalizationEvent, LocalizerState, Mode, Stamp};
use crate::map::{ObjectId, ObjectMap, SemanticObject};
use crate::map_manager::{restrict_reference, split_submaps, VehicleMapState};
use crate::registration::{register_submap, CandidateRegistration, RmseScorer, Scoring};

/// Input for one time step. Detections are expressed in the vehicle body
/// frame at `odometry`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput<'a> {
    pub step: usize,
    pub time: f64,
    pub odometry: RigidTransform,
    pub detections: &'a [SemanticObject],
}

/// What happened during one step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOutcome {
    pub attempted: bool,
    pub accepted: Option<LocalizationEvent>,
    pub guided_decision: Option<Decision>,
    /// Global pose estimate after this step, once localized.
    pub estimate: Option<RigidTransform>,
}

#[derive(Debug, Clone)]
pub struct Session {
    cfg: PipelineConfig,
    reference: ObjectMap,
    submaps: Vec<ObjectMap>,
    scorer: RmseScorer,
    vehicle: VehicleMapState,
    localizer: LocalizerState,
    steps_seen: usize,
}

impl Session {
    pub fn new(reference: ObjectMap, cfg: PipelineConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let submaps = split_submaps(&reference, cfg.k, cfg.submap_overlap_fraction);
        let scorer = RmseScorer::new(&reference, cfg.rmse_class_filter.as_deref());
        Ok(Self {
            cfg,
            reference,
            submaps,
            scorer,
            vehicle: VehicleMapState::new(),
            localizer: LocalizerState::new(),
            steps_seen: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn reference(&self) -> &ObjectMap {
        &self.reference
    }

    pub fn submaps(&self) -> &[ObjectMap] {
        &self.submaps
    }

    pub fn vehicle(&self) -> &VehicleMapState {
        &self.vehicle
    }

    pub fn localizer(&self) -> &LocalizerState {
        &self.localizer
    }

    pub fn ingest(&mut self, input: StepInput<'_>) -> StepOutcome {
        self.vehicle.record_pose(input.step, input.time, input.odometry);
        let local: Vec<SemanticObject> = input
            .detections
            .iter()
            .map(|o| SemanticObject {
                centroid: input.odometry.apply(&o.centroid),
                ..*o
            })
            .collect();
        self.vehicle.fuse_observations(&local, self.cfg.fusion_radius);
        self.steps_seen += 1;

        let mut outcome = StepOutcome::default();
        if self.steps_seen.is_multiple_of(self.cfg.registration_period) {
            let stamp = Stamp {
                step: input.step,
                time: input.time,
                distance_traveled: self.vehicle.distance_traveled(),
                objects_in_map: self.vehicle.full_map().len(),
            };
            match self.localizer.mode() {
                Mode::GlobalSearch => {
                    if let Some(event) = self.try_global(stamp) {
                        outcome.attempted = true;
                        outcome.accepted = event;
                    }
                }
                Mode::Guided => {
                    if let Some(decision) = self.try_guided(stamp) {
                        outcome.attempted = true;
                        if decision == Decision::Accepted {
                            outcome.accepted = self.localizer.event_log().last().cloned();
                        }
                        outcome.guided_decision = Some(decision);
                    }
                }
            }
        }
        outcome.estimate = self.localizer.current_global_pose(&input.odometry).ok();
        outcome
    }

    /// Candidate registrations of the current window against every submap.
    pub fn global_candidates(&self) -> Vec<CandidateRegistration> {
        let window = self.vehicle.recent_window(self.cfg.r);
        let full = self.vehicle.full_map();
        let scoring = Scoring {
            scorer: &self.scorer,
            eval_window: full,
        };
        let run = |(i, submap): (usize, &ObjectMap)| {
            register_submap(submap, i, &window, scoring, &self.cfg, None)
        };
        if self.cfg.parallel {
            self.submaps.par_iter().enumerate().map(run).collect()
        } else {
            self.submaps.iter().enumerate().map(run).collect()
        }
    }

    fn try_global(&mut self, stamp: Stamp) -> Option<Option<LocalizationEvent>> {
        if self.vehicle.recent_window(self.cfg.r).len() < self.cfg.tau_in {
            return None;
        }
        let candidates = self.global_candidates();
        Some(
            self.localizer
                .global_localize(&candidates, &self.cfg, stamp)
                .cloned(),
        )
    }

    fn try_guided(&mut self, stamp: Stamp) -> Option<Decision> {
        let t_cur = *self.localizer.t_cur()?;
        let window = self.vehicle.recent_window(self.cfg.r);
        let eval = self.vehicle.recent_window(self.cfg.r_prime);
        let restricted = restrict_reference(&self.reference, &t_cur, &window, self.cfg.restrict_margin);
        if restricted.is_empty() || window.len() < 3 {
            return None;
        }
        let prior = prior_indices(self.localizer.last_inliers(), &restricted, &window);
        let scoring = Scoring {
            scorer: &self.scorer,
            eval_window: &eval,
        };
        let candidate = register_submap(&restricted, 0, &window, scoring, &self.cfg, Some(&prior));
        let e_cur = self.scorer.rmse(&t_cur, &eval).unwrap_or(f64::INFINITY);
        Some(
            self.localizer
                .guided_relocalize(&candidate, e_cur, &self.cfg, stamp),
        )
    }
}

/// Re-expresses id pairs as indices into the given maps, dropping pairs
/// whose objects are absent.
fn prior_indices(
    pairs: &[(ObjectId, ObjectId)],
    reference: &ObjectMap,
    window: &ObjectMap,
) -> Vec<Association> {
    let ref_pos: std::collections::HashMap<ObjectId, usize> =
        reference.iter().enumerate().map(|(i, o)| (o.id, i)).collect();
    let veh_pos: std::collections::HashMap<ObjectId, usize> =
        window.iter().enumerate().map(|(i, o)| (o.id, i)).collect();
    pairs
        .iter()
        .filter_map(|(r, v)| {
            Some(Association {
                ref_index: *ref_pos.get(r)?,
                veh_index: *veh_pos.get(v)?,
            })
        })
        .collect()
}

/// Everything a finished session produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub events: Vec<LocalizationEvent>,
    /// One entry per ingested step, `None` before the first localization.
    pub estimates: Vec<Option<RigidTransform>>,
    pub steps: Vec<usize>,
}

/// Runs a whole sequence of steps through a fresh session.
pub fn run_session<'a>(
    reference: ObjectMap,
    cfg: PipelineConfig,
    inputs: impl IntoIterator<Item = StepInput<'a>>,
) -> Result<SessionOutput, ConfigError> {
    let mut session = Session::new(reference, cfg)?;
    let mut estimates = Vec::new();
    let mut steps = Vec::new();
    for input in inputs {
        steps.push(input.step);
        estimates.push(session.ingest(input).estimate);
    }
    Ok(SessionOutput {
        events: session.localizer().event_log().to_vec(),
        estimates,
        steps,
    })
}
