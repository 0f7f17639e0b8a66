//! The file-based workflow behind the command-line tool: simulate a run into
//! a directory, localize from the files, then rebuild the report from the
//! event log.

use std::path::PathBuf;

use semloc::tooling::{self, EvaluateOptions, LocalizeOptions, Source};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/small_loop.toml");
    let dir = std::env::temp_dir().join("semloc-file-workflow");
    std::fs::create_dir_all(&dir)?;

    let run = tooling::simulate(&scenario, &dir, None)?;
    println!("simulated {} steps into {}", run.len(), dir.display());
    for entry in std::fs::read_dir(&dir)? {
        let entry = entry?;
        println!("  {:<20} {:>8} bytes", entry.file_name().to_string_lossy(), entry.metadata()?.len());
    }

    let mut opts = LocalizeOptions::new(Source::RunDir(dir.clone()));
    opts.out_dir = Some(dir.clone());
    opts.ablation = true;
    let outcome = tooling::localize(&opts)?;
    let summary = &outcome.report.summary;
    println!(
        "localize: exit code {}, {} events ({} global, {} guided)",
        outcome.exit_code, summary.event_count, summary.global_events, summary.guided_events
    );

    let mut eval = EvaluateOptions::new(&dir);
    eval.ablation = true;
    eval.series_dir = Some(dir.clone());
    let report = tooling::evaluate(&eval)?;
    println!(
        "evaluate: summary matches localize: {}, self-consistent: {}",
        report.summary == *summary,
        report.is_self_consistent()
    );
    if let Some(p) = &report.summary.position_error {
        println!("position error mean {:.3} m, median {:.3} m, max {:.3} m", p.mean, p.median, p.max);
    }
    println!("\n{}", std::fs::read_to_string(dir.join(tooling::commands::EVENTS_FILE))?);
    Ok(())
}
