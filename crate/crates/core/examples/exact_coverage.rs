//! Solve one coverage instance exactly and turn the chosen directions into
//! primitive actions.
//!
//! ```text
//! cargo run --release --example exact_coverage -- [sensors] [targets] [seed]
//! ```

use hitmac::baselines::{exact_coverage_assignment, CoverageInstance};
use hitmac::env::{EnvConfig, WorldState};

fn main() -> hitmac::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(4) as usize;
    let m = args.get(1).copied().unwrap_or(5) as usize;
    let seed = args.get(2).copied().unwrap_or(0);
    let env = EnvConfig::default().with_counts(n, m);
    let (state, _) = WorldState::reset_with_seed(&env, seed)?;

    let instance = CoverageInstance::from_state(&state, &env);
    let best = exact_coverage_assignment(&instance);
    for (i, sensor) in state.sensors.iter().enumerate() {
        println!(
            "sensor {i} at ({:6.1}, {:6.1}) facing {:7.2}°: direction {:?}",
            sensor.x,
            sensor.y,
            sensor.delta(),
            best.directions[i]
        );
    }
    for (k, t) in state.targets.iter().enumerate() {
        let mark = if best.covered[k] { "covered" } else { "missed" };
        println!("target {k} at ({:6.1}, {:6.1}): {mark}", t.x, t.y);
    }
    println!("objective {} of {m}; actions {:?}", best.objective, best.actions());
    Ok(())
}
