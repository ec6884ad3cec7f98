//! Train a coordinator on a 4x5 layout, then evaluate it as the number of
//! targets changes, next to the exact per-step solver.
//!
//! ```text
//! cargo run --release --example generalization_sweep -- [episodes] [sweep]
//! ```

use hitmac::env::EnvConfig;
use hitmac::eval::{run_sweep, write_eval_csv, GoalSource, Hierarchy, Sweep};
use hitmac::nn::ParamStore;
use hitmac::policy::{CoordinatorNet, COORDINATOR_PREFIX};
use hitmac::training::{train_coordinator, FrozenExecutor, Stage, TrainConfig};

fn main() -> hitmac::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let sweep: Sweep = args.next().as_deref().unwrap_or("targets=3..7").parse()?;
    let env = EnvConfig::default();
    let config = TrainConfig {
        stage: Stage::Coordinator,
        episodes,
        workers: 1,
        ..TrainConfig::default()
    };
    let result = train_coordinator(&env, &config, &FrozenExecutor::Scripted)?;
    let store = ParamStore::from_checkpoint(&result.checkpoint, COORDINATOR_PREFIX)?;
    let net = CoordinatorNet::from_store(&store)?;
    let hierarchy = Hierarchy::new(GoalSource::Learned(net, store), FrozenExecutor::Scripted);
    let rows = run_sweep(&env, Some(&sweep), 7, 10, &hierarchy)?;
    write_eval_csv(std::io::stdout().lock(), &rows, None)?;
    Ok(())
}
