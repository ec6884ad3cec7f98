//! Finite-difference check of both training losses, with per-array errors.
//!
//! ```text
//! cargo run --release --example loss_gradcheck -- [hidden] [steps]
//! ```

use hitmac::env::EnvConfig;
use hitmac::nn::Probe;
use hitmac::training::{loss_grad_check, Stage};

fn main() -> hitmac::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let hidden = args.first().copied().unwrap_or(32);
    let steps = args.get(1).copied().unwrap_or(10);
    let env = EnvConfig::default().with_counts(2, 3);
    for stage in [Stage::Executor, Stage::Coordinator] {
        let r = loss_grad_check(stage, &env, hidden, 0, steps, 1e-4, Probe::All)?;
        println!("{stage:?}: {} entries, max relative error {:.2e}", r.checked, r.max_rel_error);
        if let Some((name, idx)) = &r.worst {
            let (ad, fd) = r.worst_values;
            println!("  worst {name}[{idx}]: analytic {ad:.6e}, numeric {fd:.6e}");
        }
        for (name, err) in &r.per_param {
            println!("  {name:<36} {err:.2e}");
        }
    }
    Ok(())
}
