//! Semantic objects and object maps.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, RigidTransform};

/// Index into the configured class set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u16);

/// Identifier unique within one map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u64);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MapError {
    #[error("object {0} has a non-finite centroid")]
    NonFiniteCentroid(ObjectId),
    #[error("duplicate object id {0}")]
    DuplicateId(ObjectId),
    #[error("class {class} of object {id} is not in the class set")]
    UnknownClass { id: ObjectId, class: ClassId },
    #[error("unknown class name `{0}`")]
    UnknownClassName(String),
    #[error("class set is empty or has duplicate names")]
    InvalidClassSet,
}

/// Ordered list of class names; a class id is the position of its name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new<I, S>(names: I) -> Result<Self, MapError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let unique: HashSet<&str> = names.iter().map(String::as_str).collect();
        let well_formed = names
            .iter()
            .all(|n| !n.is_empty() && !n.chars().any(char::is_whitespace));
        if names.is_empty() || unique.len() != names.len() || !well_formed {
            return Err(MapError::InvalidClassSet);
        }
        Ok(Self { names })
    }

    /// Classes named `class0 .. class{n-1}`.
    pub fn numbered(n: usize) -> Self {
        Self {
            names: (0..n.max(1)).map(|i| format!("class{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, class: ClassId) -> bool {
        (class.0 as usize) < self.names.len()
    }

    pub fn name(&self, class: ClassId) -> Option<&str> {
        self.names.get(class.0 as usize).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Result<ClassId, MapError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ClassId(i as u16))
            .ok_or_else(|| MapError::UnknownClassName(name.to_string()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticObject {
    pub id: ObjectId,
    pub class: ClassId,
    pub centroid: Point3,
}

impl SemanticObject {
    pub fn new(id: u64, class: u16, centroid: Point3) -> Self {
        Self {
            id: ObjectId(id),
            class: ClassId(class),
            centroid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// The vehicle's local odometry frame.
    #[default]
    Vehicle,
    /// The global frame of the reference map.
    Reference,
}

impl Frame {
    pub fn as_str(self) -> &'static str {
        match self {
            Frame::Vehicle => "vehicle",
            Frame::Reference => "reference",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vehicle" => Some(Frame::Vehicle),
            "reference" => Some(Frame::Reference),
            _ => None,
        }
    }
}

/// Insertion-ordered collection of semantic objects in a single frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectMap {
    frame: Frame,
    objects: Vec<SemanticObject>,
}

impl ObjectMap {
    pub fn new(frame: Frame) -> Self {
        Self {
            frame,
            objects: Vec::new(),
        }
    }

    /// Validates id uniqueness and finiteness.
    pub fn from_objects(frame: Frame, objects: Vec<SemanticObject>) -> Result<Self, MapError> {
        let mut seen = HashSet::with_capacity(objects.len());
        for o in &objects {
            if !o.centroid.iter().all(|v| v.is_finite()) {
                return Err(MapError::NonFiniteCentroid(o.id));
            }
            if !seen.insert(o.id) {
                return Err(MapError::DuplicateId(o.id));
            }
        }
        Ok(Self { frame, objects })
    }

    /// Like [`ObjectMap::from_objects`], additionally checking every class
    /// against `classes`.
    pub fn from_objects_in(
        frame: Frame,
        objects: Vec<SemanticObject>,
        classes: &ClassSet,
    ) -> Result<Self, MapError> {
        if let Some(o) = objects.iter().find(|o| !classes.contains(o.class)) {
            return Err(MapError::UnknownClass {
                id: o.id,
                class: o.class,
            });
        }
        Self::from_objects(frame, objects)
    }

    pub(crate) fn from_trusted(frame: Frame, objects: Vec<SemanticObject>) -> Self {
        Self { frame, objects }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn objects(&self) -> &[SemanticObject] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&SemanticObject> {
        self.objects.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SemanticObject> {
        self.objects.iter()
    }

    pub fn position_of(&self, id: ObjectId) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    /// Appends an object; fails on a duplicate id or non-finite centroid.
    pub fn push(&mut self, object: SemanticObject) -> Result<(), MapError> {
        if !object.centroid.iter().all(|v| v.is_finite()) {
            return Err(MapError::NonFiniteCentroid(object.id));
        }
        if self.objects.iter().any(|o| o.id == object.id) {
            return Err(MapError::DuplicateId(object.id));
        }
        self.objects.push(object);
        Ok(())
    }

    pub(crate) fn objects_mut(&mut self) -> &mut Vec<SemanticObject> {
        &mut self.objects
    }

    /// Keeps the objects for which `keep` returns true, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&SemanticObject) -> bool) -> ObjectMap {
        ObjectMap::from_trusted(
            self.frame,
            self.objects.iter().filter(|o| keep(o)).copied().collect(),
        )
    }

    /// Axis-aligned bounding box `(min, max)`, `None` for an empty map.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = self.objects.first()?.centroid;
        Some(self.objects.iter().fold((first, first), |(lo, hi), o| {
            (lo.inf(&o.centroid), hi.sup(&o.centroid))
        }))
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }
}

impl<'a> IntoIterator for &'a ObjectMap {
    type Item = &'a SemanticObject;
    type IntoIter = std::slice::Iter<'a, SemanticObject>;

    fn into_iter(self) -> Self::IntoIter {
        self.objects.iter()
    }
}

/// Maps every centroid through `t`; ids, classes, order and frame tag are kept.
pub fn apply_transform(t: &RigidTransform, map: &ObjectMap) -> ObjectMap {
    ObjectMap::from_trusted(
        map.frame,
        map.objects
            .iter()
            .map(|o| SemanticObject {
                centroid: t.apply(&o.centroid),
                ..*o
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn single(x: f64, y: f64, z: f64) -> ObjectMap {
        ObjectMap::from_objects(
            Frame::Vehicle,
            vec![SemanticObject::new(7, 1, Vector3::new(x, y, z))],
        )
        .unwrap()
    }

    #[test]
    fn apply_transform_examples() {
        let m = single(1.0, 0.0, 0.0);
        assert_eq!(apply_transform(&RigidTransform::identity(), &m), m);

        let half = RigidTransform::from_yaw(PI, Vector3::zeros());
        let c = apply_transform(&half, &m).objects()[0].centroid;
        assert!((c - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);

        let quarter = RigidTransform::from_yaw(FRAC_PI_2, Vector3::new(2.0, 0.0, 0.0));
        let out = apply_transform(&quarter, &m);
        assert!((out.objects()[0].centroid - Vector3::new(2.0, 1.0, 0.0)).norm() < 1e-12);
        assert_eq!(out.objects()[0].id, ObjectId(7));
        assert_eq!(out.objects()[0].class, ClassId(1));
    }

    #[test]
    fn rejects_duplicates_and_nan() {
        let a = SemanticObject::new(1, 0, Vector3::zeros());
        assert_eq!(
            ObjectMap::from_objects(Frame::Vehicle, vec![a, a]),
            Err(MapError::DuplicateId(ObjectId(1)))
        );
        let bad = SemanticObject::new(2, 0, Vector3::new(f64::INFINITY, 0.0, 0.0));
        assert!(ObjectMap::from_objects(Frame::Vehicle, vec![bad]).is_err());
        let classes = ClassSet::new(["rock"]).unwrap();
        let foreign = SemanticObject::new(3, 4, Vector3::zeros());
        assert!(matches!(
            ObjectMap::from_objects_in(Frame::Vehicle, vec![foreign], &classes),
            Err(MapError::UnknownClass { .. })
        ));
    }

    #[test]
    fn class_set_lookup() {
        let c = ClassSet::new(["parking", "sign"]).unwrap();
        assert_eq!(c.id("sign").unwrap(), ClassId(1));
        assert_eq!(c.name(ClassId(0)), Some("parking"));
        assert!(c.id("tree").is_err());
        assert!(ClassSet::new(["a", "a"]).is_err());
        assert!(ClassSet::new(["has space"]).is_err());
    }

    #[test]
    fn bounds_cover_all_objects() {
        let m = ObjectMap::from_objects(
            Frame::Reference,
            vec![
                SemanticObject::new(0, 0, Vector3::new(1.0, -2.0, 0.5)),
                SemanticObject::new(1, 0, Vector3::new(-3.0, 4.0, 0.0)),
            ],
        )
        .unwrap();
        let (lo, hi) = m.bounds().unwrap();
        assert_eq!(lo, Vector3::new(-3.0, -2.0, 0.0));
        assert_eq!(hi, Vector3::new(1.0, 4.0, 0.5));
        assert!(ObjectMap::new(Frame::Vehicle).bounds().is_none());
    }
}
