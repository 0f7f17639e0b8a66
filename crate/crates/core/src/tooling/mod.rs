//! File formats, run reports and the command implementations behind the
//! `semloc` binary.

pub mod commands;
pub mod formats;
pub mod report;

pub use commands::{
    evaluate, localize, simulate, EvaluateOptions, LocalizeOptions, LocalizeOutcome, RunFiles, Source,
    ToolError, EXIT_INPUT_ERROR, EXIT_LOCALIZED, EXIT_NOT_LOCALIZED,
};
pub use report::RunReport;
