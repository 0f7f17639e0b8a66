//! The `localize`, `simulate` and `evaluate` commands as library calls.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ConfigError, PipelineConfig, Profile};
use crate::geometry::RigidTransform;
use crate::localizer::LocalizationEvent;
use crate::map::{ClassSet, Frame, ObjectMap, SemanticObject};
use crate::pipeline::{run_session, SessionOutput, StepInput};
use crate::simulator::{evaluate_against, generate, odometry_distances, RunMetrics, ScenarioError, ScenarioRun, ScenarioSpec};

use super::formats::{self, FormatError, ObservationLog, TrajectoryLog};
use super::report::{event_errors_tsv, series_tsv, RunReport};

pub const EXIT_LOCALIZED: i32 = 0;
pub const EXIT_NOT_LOCALIZED: i32 = 2;
pub const EXIT_INPUT_ERROR: i32 = 3;

pub const REFERENCE_FILE: &str = "reference.map";
pub const OBSERVATIONS_FILE: &str = "observations.obs";
pub const ODOMETRY_FILE: &str = "odometry.traj";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.traj";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const EVENTS_FILE: &str = "events.log";
pub const REPORT_FILE: &str = "report.json";
pub const SERIES_FILE: &str = "error_vs_distance.tsv";
pub const EVENT_ERRORS_FILE: &str = "event_errors.tsv";

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ToolError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INPUT_ERROR
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ToolError + '_ {
    move |source| ToolError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), ToolError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Everything needed to replay a run from files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub classes: ClassSet,
    pub reference: ObjectMap,
    pub observations: ObservationLog,
    pub odometry: TrajectoryLog,
    pub ground_truth: Option<TrajectoryLog>,
}

impl RunFiles {
    pub fn from_run(run: &ScenarioRun) -> Self {
        let steps = 0..run.len();
        Self {
            classes: run.classes.clone(),
            reference: run.reference_map.clone(),
            observations: ObservationLog {
                classes: run.classes.clone(),
                batches: steps
                    .clone()
                    .filter(|&t| !run.observation_batches[t].is_empty())
                    .map(|t| (t, run.observation_batches[t].clone()))
                    .collect(),
            },
            odometry: TrajectoryLog {
                frame: Frame::Vehicle,
                poses: steps.clone().map(|t| (t, run.times[t], run.odometry[t])).collect(),
            },
            ground_truth: Some(TrajectoryLog {
                frame: Frame::Reference,
                poses: steps.map(|t| (t, run.times[t], run.ground_truth[t])).collect(),
            }),
        }
    }

    /// Reads and cross-checks a set of run files.
    pub fn read(
        reference: &Path,
        observations: &Path,
        odometry: &Path,
        ground_truth: Option<&Path>,
    ) -> Result<Self, ToolError> {
        let (reference, classes) = formats::read_map(reference)?;
        let mut observations = formats::read_observations(observations)?;
        let odometry = formats::read_trajectory(odometry)?;
        let ground_truth = ground_truth.map(formats::read_trajectory).transpose()?;

        // Express observation classes in the reference's class ids.
        if observations.classes != classes {
            for (_, batch) in &mut observations.batches {
                for o in batch.iter_mut() {
                    let name = observations.classes.name(o.class).unwrap_or("?");
                    o.class = classes.id(name).map_err(|_| {
                        ToolError::Input(format!("observation class `{name}` is not in the reference map"))
                    })?;
                }
            }
            observations.classes = classes.clone();
        }
        let steps: Vec<usize> = odometry.poses.iter().map(|p| p.0).collect();
        if let Some((s, _)) = observations
            .batches
            .iter()
            .find(|(s, _)| steps.binary_search(s).is_err())
        {
            return Err(ToolError::Input(format!("observations at step {s} have no odometry pose")));
        }
        if let Some(gt) = &ground_truth {
            let gt_steps: Vec<usize> = gt.poses.iter().map(|p| p.0).collect();
            if gt_steps != steps {
                return Err(ToolError::Input("ground truth steps differ from odometry steps".into()));
            }
        }
        Ok(Self {
            classes,
            reference: reference.with_frame(Frame::Reference),
            observations,
            odometry,
            ground_truth,
        })
    }

    pub fn read_dir(dir: &Path) -> Result<Self, ToolError> {
        let gt = dir.join(GROUND_TRUTH_FILE);
        Self::read(
            &dir.join(REFERENCE_FILE),
            &dir.join(OBSERVATIONS_FILE),
            &dir.join(ODOMETRY_FILE),
            gt.exists().then_some(gt.as_path()),
        )
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), ToolError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        formats::write_map(&dir.join(REFERENCE_FILE), &self.reference, &self.classes)?;
        formats::write_observations(&dir.join(OBSERVATIONS_FILE), &self.observations)?;
        formats::write_trajectory(&dir.join(ODOMETRY_FILE), &self.odometry)?;
        if let Some(gt) = &self.ground_truth {
            formats::write_trajectory(&dir.join(GROUND_TRUTH_FILE), gt)?;
        }
        Ok(())
    }

    pub fn inputs(&self) -> impl Iterator<Item = StepInput<'_>> + '_ {
        self.odometry.poses.iter().map(move |&(step, time, odometry)| StepInput {
            step,
            time,
            odometry,
            detections: self.observations.batch(step),
        })
    }

    fn odometry_poses(&self) -> Vec<RigidTransform> {
        self.odometry.poses.iter().map(|p| p.2).collect()
    }

    /// Metrics against ground truth. Event steps are mapped onto positions
    /// in the odometry timeline.
    pub fn metrics(
        &self,
        events: &[LocalizationEvent],
        estimates: &[Option<RigidTransform>],
        planar: bool,
    ) -> Option<RunMetrics> {
        let gt = self.ground_truth.as_ref()?;
        let truth: Vec<RigidTransform> = gt.poses.iter().map(|p| p.2).collect();
        let odometry = self.odometry_poses();
        let positions: Vec<LocalizationEvent> = events
            .iter()
            .filter_map(|e| {
                let index = self.odometry.poses.binary_search_by_key(&e.step, |p| p.0).ok()?;
                Some(LocalizationEvent { step: index, ..e.clone() })
            })
            .collect();
        let mut metrics = evaluate_against(
            &odometry,
            &truth,
            &odometry_distances(&odometry),
            &positions,
            estimates,
            planar,
        );
        for (m, e) in metrics.event_errors.iter_mut().zip(events) {
            m.step = e.step;
        }
        for s in &mut metrics.series {
            s.step = self.odometry.poses[s.step].0;
        }
        Some(metrics)
    }

    /// Pose estimates per odometry sample implied by an event log: the
    /// latest event at or before each step applied to its odometry pose.
    pub fn estimates_from_events(&self, events: &[LocalizationEvent]) -> Vec<Option<RigidTransform>> {
        let mut next = 0;
        let mut current: Option<RigidTransform> = None;
        self.odometry
            .poses
            .iter()
            .map(|&(step, _, pose)| {
                while next < events.len() && events[next].step <= step {
                    current = Some(events[next].transform);
                    next += 1;
                }
                current.map(|t| t.compose(&pose))
            })
            .collect()
    }
}

/// Where `localize` gets its run from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Generate the run from a scenario spec.
    Scenario(PathBuf),
    /// A directory holding the standard run file names.
    RunDir(PathBuf),
    Files {
        reference: PathBuf,
        observations: PathBuf,
        odometry: PathBuf,
        ground_truth: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeOptions {
    pub source: Source,
    pub config: Option<PathBuf>,
    pub profile: Option<Profile>,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    pub planar: bool,
    pub ablation: bool,
    /// Receives the event log and report, plus the run files when the run
    /// was generated from a scenario.
    pub out_dir: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl LocalizeOptions {
    pub fn new(source: Source) -> Self {
        Self {
            source,
            config: None,
            profile: None,
            seed: None,
            planar: false,
            ablation: false,
            out_dir: None,
            report: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalizeOutcome {
    pub report: RunReport,
    pub output: SessionOutput,
    pub exit_code: i32,
}

pub fn load_config(path: Option<&Path>, profile: Option<Profile>) -> Result<PipelineConfig, ToolError> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p, profile)?,
        None => PipelineConfig::profile(profile.unwrap_or(Profile::Kitti)),
    })
}

pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioSpec, ToolError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut spec = ScenarioSpec::from_toml_str(&text)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}

pub fn localize(opts: &LocalizeOptions) -> Result<LocalizeOutcome, ToolError> {
    let cfg = load_config(opts.config.as_deref(), opts.profile)?;
    let (files, generated) = match &opts.source {
        Source::Scenario(path) => {
            let run = generate(&load_scenario(path, opts.seed)?)?;
            (RunFiles::from_run(&run), Some(run.spec))
        }
        Source::RunDir(dir) => (RunFiles::read_dir(dir)?, None),
        Source::Files {
            reference,
            observations,
            odometry,
            ground_truth,
        } => (
            RunFiles::read(reference, observations, odometry, ground_truth.as_deref())?,
            None,
        ),
    };

    let output = run_session(files.reference.clone(), cfg.clone(), files.inputs())?;
    let metrics = files.metrics(&output.events, &output.estimates, opts.planar);
    let report = RunReport::new(
        cfg,
        opts.planar,
        output.steps.len(),
        &output.events,
        metrics.as_ref(),
        opts.ablation,
    );

    if let Some(dir) = &opts.out_dir {
        if let Some(spec) = &generated {
            files.write_dir(dir)?;
            write_file(&dir.join(SCENARIO_FILE), &spec.to_toml_string())?;
        }
        formats::write_events(&dir.join(EVENTS_FILE), &output.events)?;
        write_file(&dir.join(REPORT_FILE), &report.to_json())?;
    }
    if let Some(path) = &opts.report {
        write_file(path, &report.to_json())?;
    }
    let exit_code = if report.summary.localized {
        EXIT_LOCALIZED
    } else {
        EXIT_NOT_LOCALIZED
    };
    Ok(LocalizeOutcome {
        report,
        output,
        exit_code,
    })
}

/// Generates a scenario and writes its run files plus the resolved spec.
pub fn simulate(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<ScenarioRun, ToolError> {
    let run = generate(&load_scenario(spec_path, seed)?)?;
    RunFiles::from_run(&run).write_dir(out_dir)?;
    write_file(&out_dir.join(SCENARIO_FILE), &run.spec.to_toml_string())?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOptions {
    pub run_dir: PathBuf,
    /// Defaults to `events.log` inside the run directory.
    pub events: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Config echoed in the report when the run directory has no report of
    /// its own.
    pub config: Option<PathBuf>,
    pub profile: Option<Profile>,
    pub planar: bool,
    pub ablation: bool,
    /// Receives the tabular plot series.
    pub series_dir: Option<PathBuf>,
}

impl EvaluateOptions {
    pub fn new(run_dir: impl Into<PathBuf>) -> Self {
        Self {
            run_dir: run_dir.into(),
            events: None,
            report: None,
            config: None,
            profile: None,
            planar: false,
            ablation: false,
            series_dir: None,
        }
    }
}

/// Recomputes a report from a run directory and its event log.
pub fn evaluate(opts: &EvaluateOptions) -> Result<RunReport, ToolError> {
    let files = RunFiles::read_dir(&opts.run_dir)?;
    let events_path = opts
        .events
        .clone()
        .unwrap_or_else(|| opts.run_dir.join(EVENTS_FILE));
    let events = formats::read_events(&events_path)?;
    let existing = opts.run_dir.join(REPORT_FILE);
    let cfg = if opts.config.is_none() && existing.exists() {
        let text = fs::read_to_string(&existing).map_err(io_err(&existing))?;
        RunReport::from_json(&text)
            .map_err(|e| ToolError::Input(format!("{}: {e}", existing.display())))?
            .config
    } else {
        load_config(opts.config.as_deref(), opts.profile)?
    };
    let estimates = files.estimates_from_events(&events);
    let metrics = files.metrics(&events, &estimates, opts.planar);
    let report = RunReport::new(
        cfg,
        opts.planar,
        files.odometry.poses.len(),
        &events,
        metrics.as_ref(),
        opts.ablation,
    );
    if let Some(dir) = &opts.series_dir {
        if let Some(m) = &metrics {
            write_file(&dir.join(SERIES_FILE), &series_tsv(&m.series))?;
        }
        write_file(&dir.join(EVENT_ERRORS_FILE), &event_errors_tsv(&report.events))?;
    }
    if let Some(path) = &opts.report {
        write_file(path, &report.to_json())?;
    }
    Ok(report)
}

/// Body-frame detections for a set of reference objects seen from `pose`.
/// Handy for hand-built runs.
pub fn detections_from(pose: &RigidTransform, objects: &[SemanticObject]) -> Vec<SemanticObject> {
    let inv = pose.inverse();
    objects
        .iter()
        .map(|o| SemanticObject {
            centroid: inv.apply(&o.centroid),
            ..*o
        })
        .collect()
}
