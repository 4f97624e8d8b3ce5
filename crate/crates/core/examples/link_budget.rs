//! Rate of a single ISL against distance for the three band presets.
//!
//! cargo run --release --example link_budget

use terasat::harness::{link_budget, ExperimentConfig};
use terasat::link::BandPreset;

fn main() -> terasat::Result<()> {
    let cfg = ExperimentConfig::default();
    println!("{:>8} {:>5} {:>11} {:>10} {:>12}", "d_km", "band", "phase", "SINR_dB", "rate_Gbps");
    for d in [500.0, 1000.0, 1969.9, 3000.0] {
        for row in link_budget(&cfg, &BandPreset::ALL, d, 16, 10.0)? {
            let sinr = row.mean_sinr_db.map_or("-".to_string(), |s| format!("{s:.1}"));
            println!("{:>8.1} {:>5} {:>11} {:>10} {:>12.5}", d, row.band, row.phase, sinr, row.rate_gbps);
        }
    }
    Ok(())
}
