//! Replays one THz rollout of the initial GRANT policy with Ka and Ku link
//! budgets substituted.
//!
//! cargo run --release --example compare_bands -- [steps]

use terasat::harness::{compare_bands, ExperimentConfig};
use terasat::link::BandPreset;

fn main() -> terasat::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let rows = compare_bands(&ExperimentConfig::default(), None, steps, &BandPreset::ALL)?;
    let thz = rows[0].t_avg_ms;
    for r in &rows {
        println!(
            "{:<4} T_avg {:>12.1} ms  T_max {:>12.1} ms  U {:.3}  x{:.1} vs THz",
            r.band,
            r.t_avg_ms,
            r.t_max_ms,
            r.u,
            r.t_avg_ms / thz
        );
    }
    Ok(())
}
