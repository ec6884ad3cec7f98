//! Coverage of the training-free policies on one layout.
//!
//! ```text
//! cargo run --release --example simulate_baselines -- [sensors] [targets] [episodes]
//! ```

use hitmac::env::EnvConfig;
use hitmac::eval::{evaluate, GoalSource, Hierarchy, Policy};
use hitmac::training::FrozenExecutor;

fn main() -> hitmac::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(4);
    let m = args.get(1).copied().unwrap_or(5);
    let episodes = args.get(2).copied().unwrap_or(20) as u64;
    let env = EnvConfig::default().with_counts(n, m);

    println!("{n} sensors, {m} targets, {episodes} episodes");
    for policy in [Policy::Random, Policy::Scripted, Policy::Ilp] {
        let s = evaluate(&env, 0, episodes, &mut policy.clone(), |_| Ok(()))?;
        println!(
            "{:<14} CR {:5.1}% ± {:4.1}  AG {:6.2} ± {:5.2}",
            policy.to_string(),
            100.0 * s.cr_mean,
            100.0 * s.cr_std,
            s.ag_mean,
            s.ag_std
        );
    }
    let mut coin = Hierarchy::new(GoalSource::Random, FrozenExecutor::Scripted);
    let s = evaluate(&env, 0, episodes, &mut coin, |_| Ok(()))?;
    println!("{:<14} CR {:5.1}% ± {:4.1}", "random goals", 100.0 * s.cr_mean, 100.0 * s.cr_std);
    let mut near = Hierarchy::new(GoalSource::Distance, FrozenExecutor::Scripted);
    let s = evaluate(&env, 0, episodes, &mut near, |_| Ok(()))?;
    println!("{:<14} CR {:5.1}% ± {:4.1}", "distance goals", 100.0 * s.cr_mean, 100.0 * s.cr_std);
    Ok(())
}
