//! Localization when four out of five detections are phantoms that have no
//! counterpart in the reference map.

use semloc::presets::outlier_stress;
use semloc::simulator::{evaluate_run, generate};
use semloc::Session;

fn main() {
    let seeds = 0..5;
    for seed in seeds {
        let (spec, cfg) = outlier_stress(seed);
        let run = generate(&spec).expect("valid scenario");
        let detections: usize = run.observation_batches.iter().map(Vec::len).sum();
        let phantom: usize = run
            .observation_batches
            .iter()
            .flatten()
            .filter(|o| run.outlier_ids.contains(&o.id))
            .count();

        let mut session = Session::new(run.reference_map.clone(), cfg).expect("valid config");
        let event = run.step_inputs().find_map(|input| session.ingest(input).accepted);
        let metrics = evaluate_run(&run, event.as_slice(), &[], false);
        match (event, metrics.event_errors.first()) {
            (Some(e), Some(err)) => println!(
                "seed {seed}: {:.0}% phantom detections, localized at step {} with {} inliers, error {:.2} m / {:.2} deg",
                100.0 * phantom as f64 / detections as f64,
                e.step,
                e.inlier_count,
                err.position_error,
                err.orientation_error
            ),
            _ => println!("seed {seed}: never localized"),
        }
    }
}
