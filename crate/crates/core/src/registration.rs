//! Rigid fitting of clique correspondences and RMSE scoring of candidates.

use std::time::Duration;

use nalgebra::Matrix3;

use crate::clique::{Budget, MaxCliqueSolver};
use crate::config::PipelineConfig;
use crate::consistency::{build_candidate_associations, build_graph_with, Association};
use crate::geometry::{Point3, RigidTransform};
use crate::map::{ClassId, ObjectId, ObjectMap};
use crate::spatial::ClassIndex;

/// Ratio of the second to the first principal spread below which a point
/// set is treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RegistrationError {
    #[error("need at least 3 correspondences, got {0}")]
    InsufficientCorrespondences(usize),
    #[error("correspondences are collinear or coincident")]
    DegenerateGeometry,
    #[error("no vehicle object has a same-class reference neighbour")]
    NoScoreableObjects,
}

/// Least-squares rigid transform taking each `source` onto its `target`:
/// minimizes `Σ ‖R·source + t − target‖²` (Arun et al., SVD of the
/// cross-covariance with a determinant correction).
pub fn fit_rigid(pairs: &[(Point3, Point3)]) -> Result<RigidTransform, RegistrationError> {
    if pairs.len() < 3 {
        return Err(RegistrationError::InsufficientCorrespondences(pairs.len()));
    }
    let n = pairs.len() as f64;
    let src_mean = pairs.iter().map(|(s, _)| s).sum::<Point3>() / n;
    let dst_mean = pairs.iter().map(|(_, d)| d).sum::<Point3>() / n;

    let mut cross = Matrix3::zeros();
    let mut src_spread = Matrix3::zeros();
    let mut dst_spread = Matrix3::zeros();
    for (s, d) in pairs {
        let sc = s - src_mean;
        let dc = d - dst_mean;
        cross += sc * dc.transpose();
        src_spread += sc * sc.transpose();
        dst_spread += dc * dc.transpose();
    }
    if is_collinear(&src_spread) || is_collinear(&dst_spread) {
        return Err(RegistrationError::DegenerateGeometry);
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd u");
    let v = svd.v_t.expect("svd v_t").transpose();
    let mut rotation = v * u.transpose();
    if rotation.determinant() < 0.0 {
        let mut v = v;
        let weakest = svd.singular_values.imin();
        v.column_mut(weakest).neg_mut();
        rotation = v * u.transpose();
    }
    let translation = dst_mean - rotation * src_mean;
    Ok(RigidTransform::from_approximate(rotation, translation))
}

fn is_collinear(spread: &Matrix3<f64>) -> bool {
    let mut eig: Vec<f64> = spread
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig[0] == 0.0 || eig[1] <= COLLINEAR_RATIO * eig[0]
}

/// Nearest-neighbour RMSE scorer over a fixed reference map.
#[derive(Debug, Clone)]
pub struct RmseScorer {
    index: ClassIndex,
    filter: Option<Vec<ClassId>>,
}

impl RmseScorer {
    pub fn new(reference: &ObjectMap, class_filter: Option<&[ClassId]>) -> Self {
        Self {
            index: ClassIndex::new(reference),
            filter: class_filter.map(<[ClassId]>::to_vec),
        }
    }

    /// Root mean squared distance from each transformed vehicle object to the
    /// nearest reference object of its class. Objects outside the class
    /// filter, or whose class has no reference representative, are skipped.
    pub fn rmse(&self, t: &RigidTransform, window: &ObjectMap) -> Result<f64, RegistrationError> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for o in window {
            if self.filter.as_ref().is_some_and(|f| !f.contains(&o.class)) {
                continue;
            }
            if let Some(d2) = self.index.nearest_sq(o.class, &t.apply(&o.centroid)) {
                sum += d2;
                count += 1;
            }
        }
        if count == 0 {
            return Err(RegistrationError::NoScoreableObjects);
        }
        Ok((sum / count as f64).sqrt())
    }
}

pub fn compute_rmse(
    t: &RigidTransform,
    veh_window: &ObjectMap,
    ref_map: &ObjectMap,
    class_filter: Option<&[ClassId]>,
) -> Result<f64, RegistrationError> {
    RmseScorer::new(ref_map, class_filter).rmse(t, veh_window)
}

/// One registration result against one reference (sub)map.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRegistration {
    pub submap_id: usize,
    /// Absent when the clique was too small or degenerate to fit.
    pub transform: Option<RigidTransform>,
    /// Clique members, indexing the submap and vehicle window used.
    pub inliers: Vec<Association>,
    /// The same pairs as stable `(reference id, vehicle id)`.
    pub inlier_ids: Vec<(ObjectId, ObjectId)>,
    pub inlier_count: usize,
    /// Infinite when the candidate could not be scored.
    pub rmse: f64,
    pub certified_exact: bool,
}

impl CandidateRegistration {
    pub fn is_usable(&self) -> bool {
        self.transform.is_some() && self.rmse.is_finite()
    }
}

/// Objects the RMSE of a candidate is computed on, and the reference they
/// are scored against.
#[derive(Debug, Clone, Copy)]
pub struct Scoring<'a> {
    pub scorer: &'a RmseScorer,
    pub eval_window: &'a ObjectMap,
}

/// Associates, builds the consistency graph, solves for the maximum clique,
/// fits the transform and scores it.
pub fn register_submap(
    ref_submap: &ObjectMap,
    submap_id: usize,
    veh_window: &ObjectMap,
    scoring: Scoring<'_>,
    cfg: &PipelineConfig,
    prior: Option<&[Association]>,
) -> CandidateRegistration {
    let associations = build_candidate_associations(ref_submap, veh_window, prior);
    let graph = build_graph_with(&associations, ref_submap, veh_window, cfg.epsilon, cfg.parallel);
    let solver = MaxCliqueSolver {
        budget: Budget {
            time: cfg.clique_budget_ms.map(Duration::from_millis),
            nodes: None,
        },
        parallel: cfg.parallel,
    };
    let clique = solver.solve(graph.adjacency());
    let inliers: Vec<Association> = clique.members.iter().map(|&v| graph.vertices()[v]).collect();
    let inlier_ids = inliers
        .iter()
        .map(|a| (ref_submap.objects()[a.ref_index].id, veh_window.objects()[a.veh_index].id))
        .collect();
    let pairs: Vec<(Point3, Point3)> = inliers
        .iter()
        .map(|a| {
            (
                veh_window.objects()[a.veh_index].centroid,
                ref_submap.objects()[a.ref_index].centroid,
            )
        })
        .collect();
    let transform = fit_rigid(&pairs).ok();
    let rmse = transform
        .and_then(|t| scoring.scorer.rmse(&t, scoring.eval_window).ok())
        .unwrap_or(f64::INFINITY);
    CandidateRegistration {
        submap_id,
        transform,
        inlier_count: inliers.len(),
        inliers,
        inlier_ids,
        rmse,
        certified_exact: clique.certified_exact,
    }
}

/// Registers a whole vehicle map to a whole reference map, scoring the
/// candidate on the vehicle map itself.
pub fn register_maps(
    ref_map: &ObjectMap,
    veh_map: &ObjectMap,
    cfg: &PipelineConfig,
) -> CandidateRegistration {
    let scorer = RmseScorer::new(ref_map, cfg.rmse_class_filter.as_deref());
    register_submap(
        ref_map,
        0,
        veh_map,
        Scoring {
            scorer: &scorer,
            eval_window: veh_map,
        },
        cfg,
        None,
    )
}
