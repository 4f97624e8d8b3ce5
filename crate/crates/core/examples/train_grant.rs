//! Trains the GCN actor-critic on the default scenario and prints the
//! converged usage and latency next to the fixed baselines.
//!
//! cargo run --release --example train_grant -- [steps] [seed]

use terasat::harness::{run_seed, seed_dir, ExperimentConfig, PolicyKind, RunOptions};

fn main() -> terasat::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(390);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = std::env::temp_dir().join("terasat_train_grant");
    for policy in [PolicyKind::Full, PolicyKind::Uniform, PolicyKind::Grant] {
        let mut cfg = ExperimentConfig { policy, ..ExperimentConfig::default() };
        cfg.train.steps = steps;
        let opts = RunOptions {
            steps,
            train: policy == PolicyKind::Grant,
            out_dir: Some(seed_dir(&out, policy, seed)),
            ..RunOptions::default()
        };
        let (s, _) = run_seed(&cfg, seed, &opts)?;
        println!(
            "{:<10} U {:.3} (first {:.3})  T_avg {:>8.1} ms  T_max {:>8.1} ms  {:.1} ms/step  {} params",
            s.policy,
            s.converged_u,
            s.initial_u,
            s.converged_t_avg_ms,
            s.converged_t_max_ms,
            s.wall_s_per_step * 1e3,
            s.param_count
        );
    }
    println!("metrics under {}", out.display());
    Ok(())
}
