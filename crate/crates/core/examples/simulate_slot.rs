//! One slot of the edge-computing network under the two fixed operating
//! points, with per-source delays and resource usage.
//!
//! cargo run --release --example simulate_slot

use terasat::baselines::static_action;
use terasat::harness::{Env, ExperimentConfig};

fn main() -> terasat::Result<()> {
    let cfg = ExperimentConfig::default();
    let mut env = Env::new(&cfg, 1)?;
    println!("arrivals {:?}", env.arrivals(0)?);
    for (name, local) in [("full-resource, local", true), ("uniform, spread", false)] {
        let action = static_action(env.graph(), local);
        let r = env.apply(0, &action)?;
        let o = &r.outcome;
        println!(
            "{name}: U {:.3} (P {:.3}, S {:.3})  T_avg {:.1} ms  T_max {:.1} ms  reward {:.3}",
            o.usage.u,
            o.usage.u_p,
            o.usage.u_s,
            o.t_avg_s * 1e3,
            o.t_max_s * 1e3,
            o.reward
        );
        let ms: Vec<String> = o.source_delay_s.iter().map(|d| format!("{:.0}", d * 1e3)).collect();
        println!("  per-source ms [{}]", ms.join(", "));
    }
    Ok(())
}
