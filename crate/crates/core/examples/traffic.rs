//! Self-similar task arrivals: sample statistics against the configured
//! mean, spread and Hurst exponent.
//!
//! cargo run --release --example traffic -- [slots]

use terasat::harness::ExperimentConfig;
use terasat::traffic::{fgn_autocovariance, generate_counts};

fn main() -> terasat::Result<()> {
    let slots: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4096);
    let cfg = ExperimentConfig::default().traffic;
    let counts = generate_counts(&cfg, 10, slots)?;
    let all: Vec<f64> = counts.iter().flatten().map(|&c| c as f64).collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    println!("mean {mean:.2} tasks/slot (target {})", cfg.mean_tasks_per_slot);
    println!("relative std {:.3} (target {})", var.sqrt() / mean, cfg.relative_std);
    println!("lag  sample_acf  fgn_acf");
    for lag in [1, 2, 4, 8, 16] {
        let mut acc = 0.0;
        let mut m = 0.0;
        for row in &counts {
            for w in row.windows(lag + 1) {
                acc += (w[0] as f64 - mean) * (w[lag] as f64 - mean);
                m += 1.0;
            }
        }
        println!("{lag:>3} {:>11.3} {:>8.3}", acc / m / var, fgn_autocovariance(cfg.hurst, lag));
    }
    Ok(())
}
