//! Inspection outputs: the frozen involved topology and per-band link budgets.

use super::config::ExperimentConfig;
use super::env::{build_scenario, sim_params};
use crate::error::{Error, Result};
use crate::geo::Vec3;
use crate::link::{BandPreset, LinkModel, Phase};
use crate::sim::Endpoint;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyNode {
    pub flat: usize,
    pub plane: usize,
    pub slot: usize,
    pub is_source: bool,
    pub is_gs_sat: bool,
    /// Flat index of the outcome next hop; `None` for the downlink to ground.
    pub next_hop: Option<usize>,
    pub isl_neighbors: [usize; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyDump {
    pub config_hash: String,
    pub t0_s: f64,
    pub constellation_size: usize,
    pub gs_sat: usize,
    pub sources: Vec<usize>,
    pub involved: Vec<TopologyNode>,
    /// GCN edges as flat-index pairs.
    pub edges: Vec<(usize, usize)>,
}

pub fn dump_topology(cfg: &ExperimentConfig) -> Result<TopologyDump> {
    let s = build_scenario(cfg)?;
    let inv = &s.graph.inv;
    let involved = inv
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let id = s.constellation.id(k);
            Ok(TopologyNode {
                flat: k,
                plane: id.plane,
                slot: id.slot,
                is_source: s.sources.contains(&k),
                is_gs_sat: k == s.gs_sat,
                next_hop: match inv.next_hop[i] {
                    Some(Endpoint::Sat(j)) => Some(inv.nodes[j]),
                    _ => None,
                },
                isl_neighbors: s.constellation.neighbors_flat(k)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TopologyDump {
        config_hash: cfg.hash(),
        t0_s: s.t0,
        constellation_size: s.constellation.len(),
        gs_sat: s.gs_sat,
        sources: s.sources.clone(),
        involved,
        edges: inv.edges.iter().map(|&(a, b)| (inv.nodes[a], inv.nodes[b])).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetRow {
    pub band: String,
    pub phase: String,
    pub distance_km: f64,
    pub subarrays: usize,
    pub power_w: f64,
    pub bandwidth_hz: f64,
    pub mean_sinr_db: Option<f64>,
    pub rate_gbps: f64,
}

/// Rate of one ISL between two satellites at the constellation altitude,
/// `distance_km` apart, with `power_w` split evenly over the sub-bands.
pub fn link_budget(
    cfg: &ExperimentConfig,
    bands: &[BandPreset],
    distance_km: f64,
    subarrays: usize,
    power_w: f64,
) -> Result<Vec<LinkBudgetRow>> {
    let r = cfg.constellation.earth_radius_km + cfg.constellation.altitude_km;
    if !(distance_km > 0.0 && distance_km < 2.0 * r) {
        return Err(Error::Domain(format!("distance {distance_km} km outside (0, {}) km", 2.0 * r)));
    }
    if subarrays == 0 || subarrays > cfg.link.array.max_tx_subarrays {
        return Err(Error::Domain(format!("sub-arrays must lie in 1..={}", cfg.link.array.max_tx_subarrays)));
    }
    if !(power_w >= 0.0 && power_w <= cfg.link.budget.max_power_w) {
        return Err(Error::Domain(format!("power must lie in [0, {}] W", cfg.link.budget.max_power_w)));
    }
    // Chord of length d on the orbit sphere.
    let half = (distance_km / (2.0 * r)).asin();
    let tx = Vec3::new(r * half.cos(), -r * half.sin(), 0.0);
    let rx = Vec3::new(r * half.cos(), r * half.sin(), 0.0);
    let mut rows = Vec::new();
    for &band in bands {
        let params = sim_params(cfg, band)?;
        for (phase, plan) in [(Phase::Offloading, &params.plan_offload), (Phase::Outcome, &params.plan_outcome)] {
            let model = LinkModel {
                plan,
                array: &params.array,
                budget: &params.budget,
                earth_radius_km: cfg.constellation.earth_radius_km,
            };
            let powers = vec![power_w / plan.subbands() as f64; plan.subbands()];
            let ev = model.evaluate(tx, rx, subarrays, &powers, 0.0)?;
            rows.push(LinkBudgetRow {
                band: band.name().into(),
                phase: match phase {
                    Phase::Offloading => "offloading".into(),
                    Phase::Outcome => "outcome".into(),
                },
                distance_km,
                subarrays,
                power_w,
                bandwidth_hz: plan.bandwidth_hz,
                mean_sinr_db: ev.mean_sinr_db(),
                rate_gbps: ev.rate_bps / 1e9,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_dump_matches_the_scenario() {
        let cfg = ExperimentConfig::default();
        let d = dump_topology(&cfg).unwrap();
        assert_eq!(d.constellation_size, 1584);
        assert_eq!(d.sources.len(), 10);
        assert_eq!(d.involved.iter().filter(|n| n.is_source).count(), 10);
        assert_eq!(d.involved.iter().filter(|n| n.is_gs_sat).count(), 1);
        let gs = d.involved.iter().find(|n| n.is_gs_sat).unwrap();
        assert_eq!((gs.flat, gs.next_hop), (d.gs_sat, None));
        let flats: std::collections::BTreeSet<usize> = d.involved.iter().map(|n| n.flat).collect();
        for n in &d.involved {
            if let Some(j) = n.next_hop {
                assert!(flats.contains(&j) && n.isl_neighbors.contains(&j));
            }
        }
    }

    #[test]
    fn link_budget_orders_bands_by_rate() {
        let cfg = ExperimentConfig::default();
        let rows = link_budget(&cfg, &BandPreset::ALL, 1969.9, 16, 10.0).unwrap();
        assert_eq!(rows.len(), 6);
        let rate = |b: &str, p: &str| rows.iter().find(|r| r.band == b && r.phase == p).unwrap().rate_gbps;
        for p in ["offloading", "outcome"] {
            assert!(rate("thz", p) > rate("ka", p) && rate("ka", p) > rate("ku", p));
        }
        assert!(matches!(link_budget(&cfg, &BandPreset::ALL, 0.0, 16, 10.0), Err(Error::Domain(_))));
        assert!(matches!(link_budget(&cfg, &BandPreset::ALL, 1000.0, 65, 10.0), Err(Error::Domain(_))));
    }
}
