//! Guided relocalization against odometry drift: compares the pose error of
//! the full pipeline with replaying only the first global alignment.

use semloc::presets::drifting_loop;
use semloc::simulator::{evaluate_run, generate};
use semloc::{run_session, Mode};

fn main() {
    let (spec, cfg) = drifting_loop(1);
    let run = generate(&spec).expect("valid scenario");
    let out = run_session(run.reference_map.clone(), cfg, run.step_inputs()).expect("valid config");
    let metrics = evaluate_run(&run, &out.events, &out.estimates, false);

    for e in &out.events {
        let tag = if e.mode == Mode::GlobalSearch { "global" } else { "guided" };
        println!(
            "{tag:>6} step {:>4} at {:>6.0} m: {} inliers, rmse {:.2} m",
            e.step, e.distance_traveled, e.inlier_count, e.rmse
        );
    }
    println!("\n distance   guided  global-only");
    for p in metrics.series.iter().step_by(50) {
        println!("{:>7.0} m {:>7.2} m {:>9.2} m", p.distance, p.with_relocalization, p.global_only);
    }
    if let (Some(a), Some(b)) = (metrics.mean_error_with_relocalization, metrics.mean_error_global_only) {
        println!("\nmean error: {a:.2} m with relocalization, {b:.2} m global only (ratio {:.2})", a / b);
    }
}
