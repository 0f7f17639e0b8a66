//! Run reports: per-event records plus summary statistics derived from them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::localizer::{LocalizationEvent, Mode};
use crate::simulator::{RunMetrics, SeriesPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    #[serde(flatten)]
    pub event: LocalizationEvent,
    /// Present when ground truth was available.
    pub position_error: Option<f64>,
    pub orientation_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Stats {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Some(Self {
            mean: sorted.iter().sum::<f64>() / n as f64,
            median,
            max: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub localized: bool,
    pub event_count: usize,
    pub global_events: usize,
    pub guided_events: usize,
    pub position_error: Option<Stats>,
    pub orientation_error: Option<Stats>,
    pub distance_to_localize: Option<f64>,
    pub objects_to_localize: Option<usize>,
}

impl Summary {
    pub fn from_events(events: &[EventRecord]) -> Self {
        let positions: Vec<f64> = events.iter().filter_map(|e| e.position_error).collect();
        let orientations: Vec<f64> = events.iter().filter_map(|e| e.orientation_error).collect();
        let first = events.first().map(|e| &e.event);
        Self {
            localized: !events.is_empty(),
            event_count: events.len(),
            global_events: events.iter().filter(|e| e.event.mode == Mode::GlobalSearch).count(),
            guided_events: events.iter().filter(|e| e.event.mode == Mode::Guided).count(),
            position_error: Stats::of(&positions),
            orientation_error: Stats::of(&orientations),
            distance_to_localize: first.map(|e| e.distance_traveled),
            objects_to_localize: first.map(|e| e.objects_in_map),
        }
    }
}

/// Trajectory-level comparison of guided relocalization against replaying
/// only the first accepted transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub mean_error_with_relocalization: f64,
    pub mean_error_global_only: f64,
    pub final_error_with_relocalization: f64,
    pub final_error_global_only: f64,
}

impl Ablation {
    pub fn from_series(series: &[SeriesPoint]) -> Option<Self> {
        let last = series.last()?;
        let n = series.len() as f64;
        Some(Self {
            mean_error_with_relocalization: series.iter().map(|s| s.with_relocalization).sum::<f64>() / n,
            mean_error_global_only: series.iter().map(|s| s.global_only).sum::<f64>() / n,
            final_error_with_relocalization: last.with_relocalization,
            final_error_global_only: last.global_only,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    /// Errors computed in the xy plane with yaw-only orientation.
    pub planar: bool,
    pub steps: usize,
    pub has_ground_truth: bool,
    pub events: Vec<EventRecord>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Ablation>,
}

impl RunReport {
    /// Builds a report from a session's events and, when available, the
    /// metrics computed against ground truth.
    pub fn new(
        config: PipelineConfig,
        planar: bool,
        steps: usize,
        events: &[LocalizationEvent],
        metrics: Option<&RunMetrics>,
        with_ablation: bool,
    ) -> Self {
        let records: Vec<EventRecord> = events
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let err = metrics.and_then(|m| m.event_errors.get(i));
                EventRecord {
                    event: e.clone(),
                    position_error: err.map(|x| x.position_error),
                    orientation_error: err.map(|x| x.orientation_error),
                }
            })
            .collect();
        let ablation = if with_ablation {
            metrics.and_then(|m| Ablation::from_series(&m.series))
        } else {
            None
        };
        Self {
            config,
            planar,
            steps,
            has_ground_truth: metrics.is_some(),
            summary: Summary::from_events(&records),
            events: records,
            ablation,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// True when the stored summary matches one recomputed from the events.
    pub fn is_self_consistent(&self) -> bool {
        Summary::from_events(&self.events) == self.summary
    }
}

/// `step distance with_relocalization global_only`, tab separated.
pub fn series_tsv(series: &[SeriesPoint]) -> String {
    let mut out = String::from("step\tdistance\twith_relocalization\tglobal_only\n");
    for s in series {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", s.step, s.distance, s.with_relocalization, s.global_only);
    }
    out
}

/// Per-event errors for box plots, tab separated.
pub fn event_errors_tsv(events: &[EventRecord]) -> String {
    let mut out = String::from("step\tmode\tposition_error\torientation_error\n");
    for e in events {
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| v.to_string());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            e.event.step,
            e.event.mode.as_str(),
            fmt(e.position_error),
            fmt(e.orientation_error)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;

    fn record(step: usize, mode: Mode, err: Option<f64>) -> EventRecord {
        EventRecord {
            event: LocalizationEvent {
                step,
                time: step as f64,
                mode,
                transform: RigidTransform::identity(),
                inlier_count: 12,
                rmse: 1.0,
                submap_id: 0,
                distance_traveled: 2.0 * step as f64,
                objects_in_map: 10 * step,
            },
            position_error: err,
            orientation_error: err.map(|e| e / 10.0),
        }
    }

    #[test]
    fn stats_examples() {
        assert_eq!(Stats::of(&[]), None);
        let s = Stats::of(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((s.mean, s.median, s.max), (4.0, 2.5, 10.0));
        assert_eq!(Stats::of(&[5.0]).unwrap().median, 5.0);
    }

    #[test]
    fn summary_from_events() {
        let events = vec![
            record(4, Mode::GlobalSearch, Some(1.0)),
            record(9, Mode::Guided, Some(3.0)),
            record(14, Mode::Guided, Some(2.0)),
        ];
        let s = Summary::from_events(&events);
        assert!(s.localized);
        assert_eq!((s.event_count, s.global_events, s.guided_events), (3, 1, 2));
        assert_eq!(s.position_error.unwrap().median, 2.0);
        assert_eq!(s.distance_to_localize, Some(8.0));
        assert_eq!(s.objects_to_localize, Some(40));
        let empty = Summary::from_events(&[]);
        assert!(!empty.localized && empty.position_error.is_none());
    }

    #[test]
    fn json_round_trip_and_self_consistency() {
        let events = vec![record(4, Mode::GlobalSearch, None)];
        let report = RunReport {
            config: PipelineConfig::kitti(),
            planar: false,
            steps: 10,
            has_ground_truth: false,
            summary: Summary::from_events(&events),
            events,
            ablation: None,
        };
        let back = RunReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
        assert!(back.is_self_consistent());
        let mut tampered = back;
        tampered.summary.event_count = 2;
        assert!(!tampered.is_self_consistent());
    }
}
