//! Record an episode as JSON lines, read it back and recompute its metrics.
//!
//! ```text
//! cargo run --release --example trace_metrics -- [path]
//! ```

use std::fs::File;
use std::io::BufReader;

use hitmac::env::{metrics, read_trace_jsonl, EnvConfig};
use hitmac::eval::{run_episode, Policy};

fn main() -> hitmac::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("hitmac-trace.jsonl").display().to_string());
    let env = EnvConfig::default();
    let trace = run_episode(&env, 3, 0, &mut Policy::Scripted)?;
    trace.write_jsonl(File::create(&path)?, None)?;

    let replay = read_trace_jsonl(BufReader::new(File::open(&path)?))?;
    let again = &replay[0];
    assert_eq!(again, &trace);
    let m = metrics(again)?;
    println!("{} steps written to {path}", again.len());
    println!(
        "CR {:.1}%  mean cost {:.3}  AG {:.2}",
        100.0 * m.coverage_rate,
        m.mean_cost,
        m.average_gain
    );
    Ok(())
}
