//! Out-and-back drive through a rock field: the reference holds what was
//! mapped on the way out, and the vehicle localizes while facing the other
//! way on the return leg.

use semloc::presets::reversed_traverse;
use semloc::simulator::{evaluate_run, generate};
use semloc::Session;

fn main() {
    for seed in 0..5 {
        let (spec, cfg) = reversed_traverse(seed);
        let run = generate(&spec).expect("valid scenario");
        let first_seen = run.observation_batches.iter().position(|b| !b.is_empty());
        let mut session = Session::new(run.reference_map.clone(), cfg).expect("valid config");
        let event = run.step_inputs().find_map(|input| session.ingest(input).accepted);
        let metrics = evaluate_run(&run, event.as_slice(), &[], false);
        match (event, metrics.event_errors.first()) {
            (Some(e), Some(err)) => {
                let heading_out = run.ground_truth[0].yaw().to_degrees();
                let heading_now = run.ground_truth[e.step].yaw().to_degrees();
                println!(
                    "seed {seed}: observing from step {}, localized at step {} (heading {heading_now:.0} deg vs {heading_out:.0} deg outbound), error {:.2} m",
                    first_seen.unwrap_or(0),
                    e.step,
                    err.position_error
                );
            }
            _ => println!("seed {seed}: never localized"),
        }
    }
}
