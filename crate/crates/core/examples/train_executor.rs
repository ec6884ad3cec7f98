//! Stage one on the two-sensor, three-target layout.
//!
//! ```text
//! cargo run --release --example train_executor -- [episodes] [seed] [sgd|adam] [lr]
//! ```

use hitmac::env::EnvConfig;
use hitmac::nn::OptimizerKind;
use hitmac::training::{train_executor, TrainConfig};

fn main() -> hitmac::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let episodes = args.first().and_then(|s| s.parse().ok()).unwrap_or(300);
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let optimizer = match args.get(2).map(String::as_str) {
        Some("adam") => OptimizerKind::Adam,
        _ => OptimizerKind::Sgd,
    };
    let env = EnvConfig::default().with_counts(2, 3);
    let mut config = TrainConfig {
        episodes,
        seed,
        workers: 1,
        optimizer,
        ..TrainConfig::default()
    };
    if let Some(lr) = args.get(3).and_then(|s| s.parse().ok()) {
        config.lr = lr;
    }

    let result = train_executor(&env, &config)?;
    let block = (result.progress.len() / 10).max(1);
    for chunk in result.progress.chunks(block) {
        let mean = chunk.iter().map(|r| r.mean_reward).sum::<f64>() / chunk.len() as f64;
        let team = chunk.iter().map(|r| r.team_reward).sum::<f64>() / chunk.len() as f64;
        println!(
            "episodes {:>6}..{:<6} executor reward {mean:+.3}  team reward {team:+.3}",
            chunk[0].episode,
            chunk[chunk.len() - 1].episode
        );
    }
    if let Some((first, last)) = result.reward_trend(0.1) {
        println!("first 10%: {first:+.3}  last 10%: {last:+.3}  gain {:+.3}", last - first);
    }
    println!("{} updates", result.updates);
    Ok(())
}
