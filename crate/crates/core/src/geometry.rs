//! Rigid-body transforms in SE(3).
//!
//! A [`RigidTransform`] maps points from one frame into another as
//! `x' = R x + t`. Throughout the crate the convention is that registration
//! transforms map the vehicle (local odometry) frame into the reference
//! (global) frame.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Tolerance on `|RᵀR − I|` entries and `|det R − 1|`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

pub type Point3 = Vector3<f64>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("rotation matrix is not orthonormal with det +1 (max deviation {deviation:e})")]
    InvalidRotation { deviation: f64 },
    #[error("transform contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotations that are not proper
    /// orthonormal matrices within [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let deviation = rotation_deviation(&rotation);
        if deviation > ROTATION_TOLERANCE {
            return Err(GeometryError::InvalidRotation { deviation });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds a transform from any finite 3×3 matrix by projecting it onto
    /// the nearest rotation.
    pub fn from_approximate(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rotation = if rotation_deviation(&rotation) > ROTATION_TOLERANCE {
            nearest_rotation(&rotation)
        } else {
            rotation
        };
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation of `angle` radians about the unit `axis`, followed by `translation`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        let rotation = *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix();
        Self::from_approximate(rotation, translation)
    }

    /// Planar pose: yaw about +z and an (x, y, z) translation.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        #[rustfmt::skip]
        let rotation = Matrix3::new(
            c, -s, 0.0,
            s,  c, 0.0,
            0.0, 0.0, 1.0,
        );
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Heading of the rotated x axis projected onto the xy plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::from_approximate(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// Euclidean translation gap (meters) and geodesic rotation angle (degrees).
    pub fn distance_to(&self, other: &RigidTransform) -> (f64, f64) {
        let dt = (self.translation - other.translation).norm();
        let relative = self.rotation.transpose() * other.rotation;
        (dt, rotation_angle(&relative).to_degrees())
    }

    pub fn is_finite(&self) -> bool {
        self.rotation
            .iter()
            .chain(self.translation.iter())
            .all(|v| v.is_finite())
    }
}

/// Composition helper matching the free-function form used elsewhere.
pub fn compose(t1: &RigidTransform, t2: &RigidTransform) -> RigidTransform {
    t1.compose(t2)
}

pub fn transform_distance(t1: &RigidTransform, t2: &RigidTransform) -> (f64, f64) {
    t1.distance_to(t2)
}

/// Rotation angle in radians of a rotation matrix.
///
/// Uses `atan2(sin, cos)` with the sine taken from the skew part, which stays
/// accurate for angles near zero where `acos` of the trace loses half the
/// significant digits.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let skew = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let sin = 0.5 * skew.norm();
    sin.atan2(cos)
}

fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    ortho.max((r.determinant() - 1.0).abs())
}

/// Nearest proper rotation in the Frobenius sense.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        let weakest = svd.singular_values.imin();
        u.column_mut(weakest).neg_mut();
        r = u * v_t;
    }
    r
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = t.rotation;
        Self {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = GeometryError;

    fn try_from(repr: TransformRepr) -> Result<Self, Self::Error> {
        let r = repr.rotation;
        let rotation = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        RigidTransform::new(rotation, Vector3::from(repr.translation))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rz(angle: f64) -> RigidTransform {
        RigidTransform::from_yaw(angle, Vector3::zeros())
    }

    #[test]
    fn compose_identity_and_inverse() {
        let t = RigidTransform::from_axis_angle(
            Vector3::new(1.0, 2.0, 3.0),
            0.7,
            Vector3::new(4.0, -1.0, 2.5),
        );
        let id = RigidTransform::identity();
        let (dt, dr) = compose(&id, &t).distance_to(&t);
        assert!(dt < 1e-12 && dr < 1e-9);
        let (dt, dr) = compose(&t, &t.inverse()).distance_to(&id);
        assert!(dt < 1e-9 && dr < 1e-9);
    }

    #[test]
    fn quarter_turns_compose_to_half_turn() {
        let (dt, dr) = compose(&rz(FRAC_PI_2), &rz(FRAC_PI_2)).distance_to(&rz(PI));
        assert!(dt < 1e-12 && dr < 1e-9);
    }

    #[test]
    fn distance_examples() {
        let a = RigidTransform::identity();
        let b = RigidTransform::from_translation(Vector3::new(3.0, 4.0, 0.0));
        assert_eq!(a.distance_to(&a), (0.0, 0.0));
        let (dt, dr) = a.distance_to(&b);
        assert!((dt - 5.0).abs() < 1e-12 && dr.abs() < 1e-12);
        let (dt, dr) = rz(FRAC_PI_2).distance_to(&a);
        assert!(dt.abs() < 1e-12 && (dr - 90.0).abs() < 1e-9);
    }

    #[test]
    fn small_angles_are_resolved() {
        let angle = 1e-10_f64;
        let (_, dr) = rz(angle).distance_to(&RigidTransform::identity());
        assert!((dr - angle.to_degrees()).abs() < 1e-15);
    }

    #[test]
    fn rejects_reflections_and_scaling() {
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidTransform::new(reflect, Vector3::zeros()),
            Err(GeometryError::InvalidRotation { .. })
        ));
        let scaled = Matrix3::identity() * 1.001;
        assert!(RigidTransform::new(scaled, Vector3::zeros()).is_err());
        let nan = Vector3::new(f64::NAN, 0.0, 0.0);
        assert_eq!(
            RigidTransform::new(Matrix3::identity(), nan),
            Err(GeometryError::NonFinite)
        );
    }

    #[test]
    fn drifted_rotation_is_reprojected() {
        let mut m = *rz(0.3).rotation();
        m[(0, 1)] += 1e-6;
        let t = RigidTransform::from_approximate(m, Vector3::zeros());
        assert!(rotation_deviation(t.rotation()) < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let t = RigidTransform::from_axis_angle(
            Vector3::new(0.0, 1.0, 1.0),
            1.1,
            Vector3::new(1.0, 2.0, 3.0),
        );
        let s = serde_json::to_string(&t).unwrap();
        let back: RigidTransform = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
    }
}
