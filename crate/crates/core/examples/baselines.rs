//! Short runs of the fixed baselines and the fully connected MADDPG
//! critic, reporting size and per-step cost next to GRANT.
//!
//! cargo run --release --example baselines -- [steps]

use terasat::harness::{run_seed, seed_dir, ExperimentConfig, PolicyKind, RunOptions};

fn main() -> terasat::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = std::env::temp_dir().join("terasat_baselines");
    for policy in [PolicyKind::Uniform, PolicyKind::Full, PolicyKind::MaddpgFc, PolicyKind::Grant] {
        let cfg = ExperimentConfig { policy, ..ExperimentConfig::default() };
        let opts = RunOptions {
            steps,
            train: matches!(policy, PolicyKind::MaddpgFc | PolicyKind::Grant),
            out_dir: Some(seed_dir(&out, policy, 0)),
            ..RunOptions::default()
        };
        let (s, _) = run_seed(&cfg, 0, &opts)?;
        println!(
            "{:<8} {:>10} params  {:>8.1} ms/step  U {:.3}  T_avg {:.1} ms",
            s.policy,
            s.param_count,
            s.wall_s_per_step * 1e3,
            s.converged_u,
            s.converged_t_avg_ms
        );
    }
    Ok(())
}
