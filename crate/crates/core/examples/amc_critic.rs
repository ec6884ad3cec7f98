//! Encode one observation with an untrained coordinator, show the assignment
//! probabilities and how the team value splits over sensor-target pairs.
//!
//! ```text
//! cargo run --release --example amc_critic -- [sensors] [targets]
//! ```

use hitmac::env::{EnvConfig, WorldState};
use hitmac::policy::CoordinatorNet;

fn main() -> hitmac::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(2);
    let m = args.get(1).copied().unwrap_or(3);
    let env = EnvConfig::default().with_counts(n, m);
    let (_, obs) = WorldState::reset_with_seed(&env, 1)?;
    let (net, store) = CoordinatorNet::init(64, 1)?;

    let h = net.encode(&store, &obs)?;
    println!("H is {}x{}", h.rows(), h.cols());
    let (value, parts) = net.amc_value(&store, &h)?;
    let probs = {
        let mut g = hitmac::nn::Graph::new();
        let bound = net.bind(&mut g, &store);
        let hv = g.constant(h.clone());
        let logits = bound.assignment_logits(&mut g, hv)?;
        let p = g.sigmoid(logits);
        g.value(p).data().to_vec()
    };
    for i in 0..n {
        for j in 0..m {
            let e = i * m + j;
            println!(
                "pair ({i}, {j})  rho {:5.2}  alpha {:+5.2}  p {:.3}  contribution {:+.4}",
                obs.get(i, j)[2],
                obs.get(i, j)[3],
                probs[e],
                parts[e]
            );
        }
    }
    println!("team value {value:+.4} = sum of {} contributions", parts.len());
    Ok(())
}
