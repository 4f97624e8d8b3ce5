//! Involved-satellite pruning and per-phase state features.

use crate::constellation::{Constellation, GroundStation, RoutingTree};
use crate::error::{Error, Result};
use crate::nn::{normalized_adjacency, Mat, SparseMat};
use crate::sim::{Endpoint, SecNetwork, SlotOutcome};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub const OFFLOAD_FEATURES: usize = 9;
pub const OUTCOME_FEATURES: usize = 8;
/// SINR features are `dB / SINR_SCALE_DB`.
pub const SINR_SCALE_DB: f64 = 60.0;

/// Satellites that can carry traffic in the frozen window, in ascending flat
/// index. Local index `i` refers to `nodes[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvolvedSet {
    pub nodes: Vec<usize>,
    pub sources: Vec<usize>,
    pub gs_sat: Option<usize>,
    /// Per source, its four ISL neighbors in ascending flat order.
    pub offload_targets: Vec<Vec<usize>>,
    pub next_hop: Vec<Option<Endpoint>>,
    /// Per node, local index of each of its four ISL neighbors if involved.
    pub isl_slots: Vec<[Option<usize>; 4]>,
    /// Undirected edges between adjacent hops of any offload or outcome route.
    pub edges: Vec<(usize, usize)>,
}

impl InvolvedSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn local(&self, flat: usize) -> Option<usize> {
        self.nodes.binary_search(&flat).ok()
    }

    pub fn adjacency(&self) -> Result<Arc<SparseMat>> {
        Ok(Arc::new(normalized_adjacency(self.len(), &self.edges)?))
    }

    /// Slot topology over the involved nodes with positions frozen at `t`.
    pub fn network(&self, c: &Constellation, gs: &GroundStation, t: f64) -> SecNetwork {
        SecNetwork {
            positions: self.nodes.iter().map(|&k| c.position_flat(k, t)).collect(),
            ground: c.ground_position(gs, t),
            order_keys: self.nodes.clone(),
            sources: self.sources.clone(),
            offload_targets: self.offload_targets.clone(),
            next_hop: self.next_hop.clone(),
            earth_radius_km: c.config().earth_radius_km,
        }
    }
}

/// Sources, their neighbors, every hop on the outcome routes of those
/// potential servers, and the GS satellite. Sources are flat indices.
pub fn prune_involved(c: &Constellation, sources: &[usize], tree: &RoutingTree) -> Result<InvolvedSet> {
    if sources.is_empty() {
        return Ok(InvolvedSet {
            nodes: vec![],
            sources: vec![],
            gs_sat: None,
            offload_targets: vec![],
            next_hop: vec![],
            isl_slots: vec![],
            edges: vec![],
        });
    }
    let mut seen = BTreeSet::new();
    for (i, s) in sources.iter().enumerate() {
        if *s >= c.len() {
            return Err(Error::Topology(format!("source {s} outside the constellation")));
        }
        if sources[..i].contains(s) {
            return Err(Error::Topology(format!("source {s} listed twice")));
        }
    }
    let mut flat_edges = BTreeSet::new();
    let mut servers = Vec::new();
    for &s in sources {
        servers.push(s);
        for nb in c.neighbors_flat(s)? {
            servers.push(nb);
            flat_edges.insert((s.min(nb), s.max(nb)));
        }
    }
    seen.insert(tree.root);
    for &start in &servers {
        let mut cur = start;
        seen.insert(cur);
        while cur != tree.root {
            let nxt = tree.next[cur]
                .ok_or_else(|| Error::Routing(format!("no next hop at satellite {cur}")))?;
            flat_edges.insert((cur.min(nxt), cur.max(nxt)));
            if !seen.insert(nxt) {
                // Joined a branch whose path to the root is already recorded.
                break;
            }
            cur = nxt;
        }
    }
    let nodes: Vec<usize> = seen.into_iter().collect();
    let local: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let loc = |k: usize| local[&k];
    let mut isl_slots = Vec::with_capacity(nodes.len());
    let mut next_hop = Vec::with_capacity(nodes.len());
    for &k in &nodes {
        let nb = c.neighbors_flat(k)?;
        isl_slots.push(nb.map(|j| local.get(&j).copied()));
        next_hop.push(Some(match tree.next[k] {
            Some(j) => Endpoint::Sat(loc(j)),
            None => Endpoint::Ground,
        }));
    }
    Ok(InvolvedSet {
        sources: sources.iter().map(|&s| loc(s)).collect(),
        gs_sat: Some(loc(tree.root)),
        offload_targets: sources
            .iter()
            .map(|&s| Ok(c.neighbors_flat(s)?.iter().map(|&j| loc(j)).collect()))
            .collect::<Result<_>>()?,
        next_hop,
        isl_slots,
        edges: flat_edges.into_iter().map(|(a, b)| (loc(a), loc(b))).collect(),
        nodes,
    })
}

/// Normalization constants for the state features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureScale {
    pub planes: usize,
    pub sats_per_plane: usize,
    pub mean_demand_bytes: f64,
    pub outcome_ratio: f64,
    pub task_size_bytes: u64,
}

/// Node features of both phases.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub offload: Mat,
    pub outcome: Mat,
}

fn sinr_feature(v: Option<f64>) -> f64 {
    v.map_or(0.0, |db| db / SINR_SCALE_DB)
}

/// Offloading phase: `[n_p, n_s, L_e, 4 x SINR, phi_off, phi_gs]`.
/// Outcome phase drops `phi_off`. SINRs and outcome loads come from the
/// previous slot; `L_e` of the offloading phase is this slot's arrivals.
pub fn encode_state(
    c: &Constellation,
    inv: &InvolvedSet,
    scale: &FeatureScale,
    arrivals: &[u32],
    previous: &SlotOutcome,
) -> Result<Observation> {
    if arrivals.len() != inv.sources.len() {
        return Err(Error::Dimension(format!(
            "{} arrival counts for {} sources",
            arrivals.len(),
            inv.sources.len()
        )));
    }
    let n = inv.len();
    let mut off = Mat::zeros(n, OFFLOAD_FEATURES);
    let mut out = Mat::zeros(n, OUTCOME_FEATURES);
    let np = (scale.planes.max(2) - 1) as f64;
    let ns = (scale.sats_per_plane.max(2) - 1) as f64;
    let outcome_norm = (scale.outcome_ratio * scale.mean_demand_bytes).max(1.0);
    for (i, &k) in inv.nodes.iter().enumerate() {
        let id = c.id(k);
        let is_gs = f64::from(u8::from(inv.gs_sat == Some(i)));
        let src = inv.sources.iter().position(|&s| s == i);
        let load = src.map_or(0.0, |p| {
            arrivals[p] as f64 * scale.task_size_bytes as f64 / scale.mean_demand_bytes
        });
        let mut to_sinr = [0.0; 4];
        let mut ot_sinr = [0.0; 4];
        for (slot, nb) in inv.isl_slots[i].iter().enumerate() {
            if let Some(j) = nb {
                let key = (i, Endpoint::Sat(*j));
                to_sinr[slot] = sinr_feature(previous.offload_links.get(&key).and_then(|l| l.mean_sinr_db));
                ot_sinr[slot] = sinr_feature(previous.outcome_links.get(&key).and_then(|l| l.mean_sinr_db));
            }
        }
        let ot_load = inv.next_hop[i]
            .and_then(|e| previous.outcome_links.get(&(i, e)))
            .map_or(0.0, |l| l.bytes_in as f64 / outcome_norm);
        let head = [id.plane as f64 / np, id.slot as f64 / ns];
        let row = off.row_mut(i);
        row[..2].copy_from_slice(&head);
        row[2] = load;
        row[3..7].copy_from_slice(&to_sinr);
        row[7] = f64::from(u8::from(src.is_some()));
        row[8] = is_gs;
        let row = out.row_mut(i);
        row[..2].copy_from_slice(&head);
        row[2] = ot_load;
        row[3..7].copy_from_slice(&ot_sinr);
        row[7] = is_gs;
    }
    Ok(Observation { offload: off, outcome: out })
}
