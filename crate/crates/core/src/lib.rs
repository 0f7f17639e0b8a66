//! Semantic object map localization.
//!
//! A vehicle builds a map of semantic objects (class label plus centroid) in
//! its own odometry frame and registers it against a prior reference map.
//! Registration is correspondence-free: every same-class object pair is a
//! candidate association, pairwise distance consistency links associations
//! into a graph, and the maximum clique of that graph is the inlier set.

pub mod clique;
pub mod config;
pub mod consistency;
pub mod geometry;
pub mod localizer;
pub mod map;
pub mod map_manager;
pub mod pipeline;
pub mod presets;
pub mod registration;
pub mod simulator;
mod spatial;
pub mod tooling;

pub use clique::{max_clique, AdjacencyMatrix, Budget, CliqueResult, MaxCliqueSolver};
pub use config::{PipelineConfig, Profile, Window};
pub use consistency::{build_candidate_associations, build_graph, Association, ConsistencyGraph};
pub use geometry::{Point3, RigidTransform};
pub use localizer::{LocalizationEvent, LocalizerState, Mode};
pub use map::{ClassId, ClassSet, Frame, ObjectId, ObjectMap, SemanticObject};
pub use pipeline::{run_session, Session, SessionOutput, StepInput};
pub use registration::{compute_rmse, fit_rigid, register_maps, register_submap, CandidateRegistration};
pub use simulator::{generate, ScenarioRun, ScenarioSpec};
