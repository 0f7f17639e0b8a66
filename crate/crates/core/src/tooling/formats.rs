//! Line-oriented text formats for maps, observation streams, trajectories
//! and event logs.
//!
//! Every file starts with a `semloc-<kind> <version>` line followed by
//! `key value...` header lines and then one record per line. Blank lines and
//! lines starting with `#` are ignored. Floats are written with the shortest
//! representation that parses back to the same value, so write-then-read is
//! exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::geometry::RigidTransform;
use crate::localizer::{LocalizationEvent, Mode};
use crate::map::{ClassSet, Frame, ObjectId, ObjectMap, SemanticObject};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl FormatError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            path: String::new(),
            line,
            message: message.into(),
        }
    }

    fn in_file(self, file: &Path) -> Self {
        match self {
            FormatError::Parse { line, message, .. } => FormatError::Parse {
                path: file.display().to_string(),
                line,
                message,
            },
            other => other,
        }
    }
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Splits a file into its header and data lines, checking the magic line.
struct Lines<'a> {
    headers: Vec<(usize, &'a str, Vec<&'a str>)>,
    records: Vec<(usize, Vec<&'a str>)>,
}

fn split<'a>(text: &'a str, kind: &str) -> Result<Lines<'a>, FormatError> {
    let mut content = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (n, magic) = content.next().ok_or_else(|| FormatError::at(1, "empty file"))?;
    let magic_expected = format!("semloc-{kind}");
    let mut parts = magic.split_whitespace();
    if parts.next() != Some(magic_expected.as_str()) {
        return Err(FormatError::at(n, format!("expected `{magic_expected} {FORMAT_VERSION}`")));
    }
    match parts.next().map(str::parse::<u32>) {
        Some(Ok(FORMAT_VERSION)) => {}
        Some(Ok(v)) => return Err(FormatError::at(n, format!("unsupported version {v}"))),
        _ => return Err(FormatError::at(n, "missing or malformed version")),
    }
    let mut headers = Vec::new();
    let mut records = Vec::new();
    for (n, line) in content {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if records.is_empty() && fields[0].chars().next().is_some_and(char::is_alphabetic) {
            headers.push((n, fields[0], fields[1..].to_vec()));
        } else {
            records.push((n, fields));
        }
    }
    Ok(Lines { headers, records })
}

impl<'a> Lines<'a> {
    fn header(&self, key: &str) -> Result<&[&'a str], FormatError> {
        self.headers
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|(_, _, v)| v.as_slice())
            .ok_or_else(|| FormatError::at(1, format!("missing `{key}` header")))
    }

    fn classes(&self) -> Result<ClassSet, FormatError> {
        let line = self.headers.iter().find(|(_, k, _)| *k == "classes").map_or(1, |h| h.0);
        ClassSet::new(self.header("classes")?.iter().copied())
            .map_err(|e| FormatError::at(line, e.to_string()))
    }

    fn frame(&self) -> Result<Frame, FormatError> {
        let v = self.header("frame")?;
        let line = self.headers.iter().find(|(_, k, _)| *k == "frame").map_or(1, |h| h.0);
        match v {
            [f] => Frame::parse(f).ok_or_else(|| FormatError::at(line, format!("unknown frame `{f}`"))),
            _ => Err(FormatError::at(line, "frame header takes one value")),
        }
    }
}

fn field<T: std::str::FromStr>(line: usize, fields: &[&str], i: usize, name: &str) -> Result<T, FormatError> {
    let raw = fields
        .get(i)
        .ok_or_else(|| FormatError::at(line, format!("missing field `{name}`")))?;
    raw.parse()
        .map_err(|_| FormatError::at(line, format!("bad {name} `{raw}`")))
}

fn finite(line: usize, fields: &[&str], i: usize, name: &str) -> Result<f64, FormatError> {
    let v: f64 = field(line, fields, i, name)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FormatError::at(line, format!("{name} must be finite")))
    }
}

fn expect_len(line: usize, fields: &[&str], n: usize) -> Result<(), FormatError> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(FormatError::at(line, format!("expected {n} fields, found {}", fields.len())))
    }
}

fn point(line: usize, fields: &[&str], at: usize) -> Result<Vector3<f64>, FormatError> {
    Ok(Vector3::new(
        finite(line, fields, at, "x")?,
        finite(line, fields, at + 1, "y")?,
        finite(line, fields, at + 2, "z")?,
    ))
}

fn transform(line: usize, fields: &[&str], at: usize) -> Result<RigidTransform, FormatError> {
    let t = point(line, fields, at)?;
    let mut r = [0.0; 9];
    for (k, slot) in r.iter_mut().enumerate() {
        *slot = finite(line, fields, at + 3 + k, "rotation entry")?;
    }
    RigidTransform::new(Matrix3::from_row_slice(&r), t)
        .map_err(|e| FormatError::at(line, e.to_string()))
}

fn push_transform(out: &mut String, t: &RigidTransform) {
    let p = t.translation();
    let _ = write!(out, " {} {} {}", p.x, p.y, p.z);
    let r = t.rotation();
    for i in 0..3 {
        for j in 0..3 {
            let _ = write!(out, " {}", r[(i, j)]);
        }
    }
}

const TRANSFORM_COLUMNS: &str = "tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22";

// ---- maps ----

pub fn map_to_string(map: &ObjectMap, classes: &ClassSet) -> String {
    let mut out = format!(
        "semloc-map {FORMAT_VERSION}\nframe {}\nclasses {}\n# id class x y z\n",
        map.frame().as_str(),
        classes.names().join(" ")
    );
    for o in map {
        let name = classes.name(o.class).unwrap_or("?");
        let _ = writeln!(out, "{} {} {} {} {}", o.id, name, o.centroid.x, o.centroid.y, o.centroid.z);
    }
    out
}

pub fn map_from_str(text: &str) -> Result<(ObjectMap, ClassSet), FormatError> {
    let lines = split(text, "map")?;
    let classes = lines.classes()?;
    let frame = lines.frame()?;
    let mut map = ObjectMap::new(frame);
    for (n, f) in &lines.records {
        expect_len(*n, f, 5)?;
        let id: u64 = field(*n, f, 0, "id")?;
        let class = classes.id(f[1]).map_err(|e| FormatError::at(*n, e.to_string()))?;
        let object = SemanticObject {
            id: ObjectId(id),
            class,
            centroid: point(*n, f, 2)?,
        };
        map.push(object).map_err(|e| FormatError::at(*n, e.to_string()))?;
    }
    Ok((map, classes))
}

pub fn write_map(path: &Path, map: &ObjectMap, classes: &ClassSet) -> Result<(), FormatError> {
    write(path, &map_to_string(map, classes))
}

pub fn read_map(path: &Path) -> Result<(ObjectMap, ClassSet), FormatError> {
    map_from_str(&read(path)?).map_err(|e| e.in_file(path))
}

// ---- observations ----

/// Per-step detections in the vehicle body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLog {
    pub classes: ClassSet,
    /// `(step, detections)` in ascending step order; steps without
    /// detections may be absent.
    pub batches: Vec<(usize, Vec<SemanticObject>)>,
}

impl ObservationLog {
    pub fn batch(&self, step: usize) -> &[SemanticObject] {
        self.batches
            .binary_search_by_key(&step, |(s, _)| *s)
            .map_or(&[], |i| &self.batches[i].1)
    }
}

pub fn observations_to_string(log: &ObservationLog) -> String {
    let mut out = format!(
        "semloc-observations {FORMAT_VERSION}\nclasses {}\n# step id class x y z (body frame)\n",
        log.classes.names().join(" ")
    );
    for (step, batch) in &log.batches {
        for o in batch {
            let name = log.classes.name(o.class).unwrap_or("?");
            let _ = writeln!(out, "{step} {} {name} {} {} {}", o.id, o.centroid.x, o.centroid.y, o.centroid.z);
        }
    }
    out
}

pub fn observations_from_str(text: &str) -> Result<ObservationLog, FormatError> {
    let lines = split(text, "observations")?;
    let classes = lines.classes()?;
    let mut batches: Vec<(usize, Vec<SemanticObject>)> = Vec::new();
    for (n, f) in &lines.records {
        expect_len(*n, f, 6)?;
        let step: usize = field(*n, f, 0, "step")?;
        let id: u64 = field(*n, f, 1, "id")?;
        let class = classes.id(f[2]).map_err(|e| FormatError::at(*n, e.to_string()))?;
        let object = SemanticObject {
            id: ObjectId(id),
            class,
            centroid: point(*n, f, 3)?,
        };
        match batches.last_mut() {
            Some((s, batch)) if *s == step => batch.push(object),
            Some((s, _)) if *s > step => {
                return Err(FormatError::at(*n, "steps must be non-decreasing"));
            }
            _ => batches.push((step, vec![object])),
        }
    }
    Ok(ObservationLog { classes, batches })
}

pub fn write_observations(path: &Path, log: &ObservationLog) -> Result<(), FormatError> {
    write(path, &observations_to_string(log))
}

pub fn read_observations(path: &Path) -> Result<ObservationLog, FormatError> {
    observations_from_str(&read(path)?).map_err(|e| e.in_file(path))
}

// ---- trajectories ----

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub frame: Frame,
    /// `(step, time, pose)` in strictly ascending step order.
    pub poses: Vec<(usize, f64, RigidTransform)>,
}

pub fn trajectory_to_string(log: &TrajectoryLog) -> String {
    let mut out = format!(
        "semloc-trajectory {FORMAT_VERSION}\nframe {}\n# step time {TRANSFORM_COLUMNS}\n",
        log.frame.as_str()
    );
    for (step, time, pose) in &log.poses {
        let _ = write!(out, "{step} {time}");
        push_transform(&mut out, pose);
        out.push('\n');
    }
    out
}

pub fn trajectory_from_str(text: &str) -> Result<TrajectoryLog, FormatError> {
    let lines = split(text, "trajectory")?;
    let frame = lines.frame()?;
    let mut poses: Vec<(usize, f64, RigidTransform)> = Vec::new();
    for (n, f) in &lines.records {
        expect_len(*n, f, 14)?;
        let step: usize = field(*n, f, 0, "step")?;
        if poses.last().is_some_and(|(s, _, _)| *s >= step) {
            return Err(FormatError::at(*n, "steps must be strictly increasing"));
        }
        poses.push((step, finite(*n, f, 1, "time")?, transform(*n, f, 2)?));
    }
    Ok(TrajectoryLog { frame, poses })
}

pub fn write_trajectory(path: &Path, log: &TrajectoryLog) -> Result<(), FormatError> {
    write(path, &trajectory_to_string(log))
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryLog, FormatError> {
    trajectory_from_str(&read(path)?).map_err(|e| e.in_file(path))
}

// ---- events ----

pub fn events_to_string(events: &[LocalizationEvent]) -> String {
    let mut out = format!(
        "semloc-events {FORMAT_VERSION}\n# step time mode inliers rmse submap distance objects {TRANSFORM_COLUMNS}\n"
    );
    for e in events {
        let _ = write!(
            out,
            "{} {} {} {} {} {} {} {}",
            e.step,
            e.time,
            e.mode.as_str(),
            e.inlier_count,
            e.rmse,
            e.submap_id,
            e.distance_traveled,
            e.objects_in_map
        );
        push_transform(&mut out, &e.transform);
        out.push('\n');
    }
    out
}

pub fn events_from_str(text: &str) -> Result<Vec<LocalizationEvent>, FormatError> {
    let lines = split(text, "events")?;
    lines
        .records
        .iter()
        .map(|(n, f)| {
            expect_len(*n, f, 20)?;
            let mode = match f[2] {
                "global" => Mode::GlobalSearch,
                "guided" => Mode::Guided,
                other => return Err(FormatError::at(*n, format!("unknown mode `{other}`"))),
            };
            Ok(LocalizationEvent {
                step: field(*n, f, 0, "step")?,
                time: finite(*n, f, 1, "time")?,
                mode,
                inlier_count: field(*n, f, 3, "inliers")?,
                rmse: finite(*n, f, 4, "rmse")?,
                submap_id: field(*n, f, 5, "submap")?,
                distance_traveled: finite(*n, f, 6, "distance")?,
                objects_in_map: field(*n, f, 7, "objects")?,
                transform: transform(*n, f, 8)?,
            })
        })
        .collect()
}

pub fn write_events(path: &Path, events: &[LocalizationEvent]) -> Result<(), FormatError> {
    write(path, &events_to_string(events))
}

pub fn read_events(path: &Path) -> Result<Vec<LocalizationEvent>, FormatError> {
    events_from_str(&read(path)?).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes() -> ClassSet {
        ClassSet::new(["parking", "sign"]).unwrap()
    }

    #[test]
    fn map_round_trip_is_exact() {
        let map = ObjectMap::from_objects(
            Frame::Reference,
            vec![
                SemanticObject::new(7, 1, Vector3::new(0.1 + 0.2, -1e-300, 123456.789)),
                SemanticObject::new(2, 0, Vector3::new(1.0 / 3.0, 2.0, -0.0)),
            ],
        )
        .unwrap();
        let text = map_to_string(&map, &classes());
        let (back, cls) = map_from_str(&text).unwrap();
        assert_eq!(back, map);
        assert_eq!(cls, classes());
    }

    #[test]
    fn map_errors_name_the_line() {
        let text = "semloc-map 1\nframe reference\nclasses parking\n0 parking 1 2 3\n1 tree 1 2 3\n";
        match map_from_str(text) {
            Err(FormatError::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("tree"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let dup = "semloc-map 1\nframe reference\nclasses parking\n0 parking 1 2 3\n0 parking 1 2 4\n";
        assert!(matches!(map_from_str(dup), Err(FormatError::Parse { line: 5, .. })));
        assert!(map_from_str("semloc-map 2\nframe reference\nclasses a\n").is_err());
        assert!(map_from_str("semloc-trajectory 1\n").is_err());
        let short = "semloc-map 1\nframe reference\nclasses parking\n0 parking 1 2\n";
        assert!(matches!(map_from_str(short), Err(FormatError::Parse { line: 4, .. })));
    }

    #[test]
    fn observations_round_trip() {
        let log = ObservationLog {
            classes: classes(),
            batches: vec![
                (0, vec![SemanticObject::new(1, 0, Vector3::new(1.0, 2.0, 3.0))]),
                (3, vec![
                    SemanticObject::new(1, 0, Vector3::new(0.5, 2.0, 3.0)),
                    SemanticObject::new(9, 1, Vector3::new(-4.0, 0.25, 0.0)),
                ]),
            ],
        };
        let back = observations_from_str(&observations_to_string(&log)).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.batch(3).len(), 2);
        assert!(back.batch(1).is_empty());
    }

    #[test]
    fn trajectory_and_events_round_trip() {
        let t = RigidTransform::from_axis_angle(Vector3::new(0.2, 1.0, -0.3), 1.234, Vector3::new(1.5, -2.0, 0.1));
        let log = TrajectoryLog {
            frame: Frame::Vehicle,
            poses: vec![(0, 0.0, RigidTransform::identity()), (1, 0.2, t)],
        };
        assert_eq!(trajectory_from_str(&trajectory_to_string(&log)).unwrap(), log);

        let events = vec![LocalizationEvent {
            step: 4,
            time: 0.8,
            mode: Mode::Guided,
            transform: t,
            inlier_count: 13,
            rmse: 0.4123,
            submap_id: 2,
            distance_traveled: 8.5,
            objects_in_map: 40,
        }];
        assert_eq!(events_from_str(&events_to_string(&events)).unwrap(), events);
    }

    #[test]
    fn trajectory_rejects_non_rotation() {
        let text = "semloc-trajectory 1\nframe vehicle\n0 0 0 0 0 2 0 0 0 1 0 0 0 1\n";
        assert!(matches!(trajectory_from_str(text), Err(FormatError::Parse { line: 3, .. })));
        let order = "semloc-trajectory 1\nframe vehicle\n1 0 0 0 0 1 0 0 0 1 0 0 0 1\n1 0 0 0 0 1 0 0 0 1 0 0 0 1\n";
        assert!(matches!(trajectory_from_str(order), Err(FormatError::Parse { line: 4, .. })));
    }
}
