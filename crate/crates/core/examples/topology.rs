//! Walker-Delta geometry: ground-station access windows, the routing tree
//! toward the access satellite, and the pruned graph the agent sees.
//!
//! cargo run --release --example topology

use terasat::constellation::build_walker;
use terasat::harness::{dump_topology, ExperimentConfig};

fn main() -> terasat::Result<()> {
    let cfg = ExperimentConfig::default();
    let c = build_walker(&cfg.constellation)?;
    println!(
        "{} satellites, period {:.1} min, in-plane chord {:.1} km",
        c.len(),
        c.period_s() / 60.0,
        c.intra_plane_chord_km()
    );
    for w in c.access_windows(&cfg.ground_station, 0.0, 3600.0, 10.0)? {
        println!(
            "  access plane {:>2} slot {:>2}: {:>7.0} s .. {:>7.0} s ({:.0} s)",
            w.satellite.plane,
            w.satellite.slot,
            w.start_s,
            w.end_s,
            w.duration_s()
        );
    }
    let d = dump_topology(&cfg)?;
    let max_hops = d.sources.iter().map(|&s| hops(&d, s)).max().unwrap_or(0);
    println!(
        "gs satellite {}, sources {:?}\ninvolved {} nodes, {} edges, longest route {} hops",
        d.gs_sat,
        d.sources,
        d.involved.len(),
        d.edges.len(),
        max_hops
    );
    Ok(())
}

fn hops(d: &terasat::harness::TopologyDump, from: usize) -> usize {
    let mut at = from;
    let mut n = 0;
    while let Some(next) = d.involved.iter().find(|x| x.flat == at).and_then(|x| x.next_hop) {
        at = next;
        n += 1;
    }
    n
}
