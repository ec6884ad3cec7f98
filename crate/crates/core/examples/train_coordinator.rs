//! Stage two with scripted executors, then a matched-seed comparison against
//! a coordinator that assigns goals by coin flip.
//!
//! ```text
//! cargo run --release --example train_coordinator -- [episodes] [seed] [lr]
//! ```

use hitmac::env::EnvConfig;
use hitmac::eval::{evaluate, GoalSource, Hierarchy};
use hitmac::nn::ParamStore;
use hitmac::policy::{CoordinatorNet, COORDINATOR_PREFIX};
use hitmac::training::{train_coordinator, FrozenExecutor, Stage, TrainConfig};

fn main() -> hitmac::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let episodes = args.first().and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let lr = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(TrainConfig::default().lr);
    let env = EnvConfig::default().with_counts(2, 3);
    let config = TrainConfig {
        stage: Stage::Coordinator,
        episodes,
        seed,
        workers: 1,
        lr,
        ..TrainConfig::default()
    };

    let result = train_coordinator(&env, &config, &FrozenExecutor::Scripted)?;
    if let Some((first, last)) = result.reward_trend(0.1) {
        println!("macro-reward first 10%: {first:+.3}  last 10%: {last:+.3}");
    }

    let store = ParamStore::from_checkpoint(&result.checkpoint, COORDINATOR_PREFIX)?;
    let net = CoordinatorNet::from_store(&store)?;
    let mut learned = Hierarchy::new(GoalSource::Learned(net, store), FrozenExecutor::Scripted);
    let mut random = Hierarchy::new(GoalSource::Random, FrozenExecutor::Scripted);
    let mut distance = Hierarchy::new(GoalSource::Distance, FrozenExecutor::Scripted);
    let eval_seed = 1000 + seed;
    let a = evaluate(&env, eval_seed, 20, &mut learned, |_| Ok(()))?;
    let b = evaluate(&env, eval_seed, 20, &mut random, |_| Ok(()))?;
    let c = evaluate(&env, eval_seed, 20, &mut distance, |_| Ok(()))?;
    println!("learned goals: CR {:.1}% ± {:.1}", 100.0 * a.cr_mean, 100.0 * a.cr_std);
    println!("random goals:  CR {:.1}% ± {:.1}", 100.0 * b.cr_mean, 100.0 * b.cr_std);
    println!("distance goals: CR {:.1}% ± {:.1}", 100.0 * c.cr_mean, 100.0 * c.cr_std);
    Ok(())
}
