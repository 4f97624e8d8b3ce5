//! One simulation slot of the satellite edge computing network.
//!
//! A slot has two phases on disjoint bands. In the offloading phase every
//! source splits its arriving tasks between itself and its four ISL neighbors.
//! Each computing server then processes its load and forwards the (smaller)
//! outcome along a fixed route to the GS-connected satellite, which delivers it
//! to the ground station. Relays serve outcome chunks first-in-first-out.

use crate::error::{Error, Result};
use crate::geo::{Vec3, SPEED_OF_LIGHT_KM_S};
use crate::link::{ArrayConfig, BandPlan, LinkBudgetParams, LinkModel};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

/// Slack on simplex sums and budget checks for incoming ratios.
pub const RATIO_TOLERANCE: f64 = 1e-6;
/// Guard against floating noise flipping a ceil/floor across an integer.
const ROUNDING_GUARD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeParams {
    pub cycles_per_byte: f64,
    pub cpu_hz: f64,
    /// Outcome size relative to the processed input.
    pub outcome_ratio: f64,
}

impl Default for ComputeParams {
    fn default() -> Self {
        Self {
            cycles_per_byte: 330.0,
            cpu_hz: 2e9,
            outcome_ratio: 0.1,
        }
    }
}

impl ComputeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cycles_per_byte > 0.0) {
            return Err(Error::config("compute.cycles_per_byte", "must be positive"));
        }
        if !(self.cpu_hz > 0.0) {
            return Err(Error::config("compute.cpu_hz", "must be positive"));
        }
        if !(self.outcome_ratio >= 0.0 && self.outcome_ratio <= 1.0) {
            return Err(Error::config("compute.outcome_ratio", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub chi1: f64,
    pub latency_threshold_s: f64,
    /// Penalty slope (1/s) up to the threshold.
    pub w_below: f64,
    /// Penalty slope (1/s) for the part above the threshold.
    pub w_above: f64,
    pub kappa: f64,
    /// Per-source delays above this knee enter the reward log-compressed, so
    /// the penalty keeps a slope however bad the slot gets.
    pub delay_knee_s: f64,
    /// Stand-in for an infinite (starved) delay before compression.
    pub starved_delay_s: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            chi1: 3.0,
            latency_threshold_s: 0.1,
            w_below: 10.0,
            w_above: 50.0,
            kappa: 0.5,
            delay_knee_s: 1.0,
            starved_delay_s: 1e4,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_below > 0.0 && self.w_above >= self.w_below) {
            return Err(Error::config("reward.w_above/w_below", "need w_above >= w_below > 0"));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::config("reward.kappa", "must lie in [0, 1]"));
        }
        if !(self.latency_threshold_s >= 0.0 && self.chi1 >= 0.0) {
            return Err(Error::config("reward", "threshold and chi1 must be non-negative"));
        }
        if !(self.delay_knee_s > 0.0 && self.starved_delay_s.is_finite() && self.starved_delay_s >= self.delay_knee_s) {
            return Err(Error::config("reward.delay_knee_s", "need 0 < knee <= starved delay < inf"));
        }
        Ok(())
    }

    /// Delay as seen by the reward: identity up to the knee, then
    /// `knee * (1 + ln(d / knee))`. Continuous, strictly increasing, finite.
    pub fn effective_delay(&self, d: f64) -> f64 {
        let d = if d.is_finite() { d } else { self.starved_delay_s };
        if d <= self.delay_knee_s {
            d
        } else {
            self.delay_knee_s * (1.0 + (d / self.delay_knee_s).ln())
        }
    }
}

pub fn computation_delay(bytes: u64, p: &ComputeParams) -> f64 {
    bytes as f64 * p.cycles_per_byte / p.cpu_hz
}

pub fn outcome_size(bytes: u64, p: &ComputeParams) -> u64 {
    let x = p.outcome_ratio * bytes as f64;
    (x - ROUNDING_GUARD).ceil().max(0.0) as u64
}

pub fn reward(usage: f64, t_avg_s: f64, rp: &RewardParams) -> f64 {
    let below = t_avg_s.min(rp.latency_threshold_s);
    let above = (t_avg_s - rp.latency_threshold_s).max(0.0);
    -(rp.chi1 * usage + rp.w_below * below + rp.w_above * above)
}

/// Task split of one source: what it keeps and what each neighbor receives.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffloadRow {
    pub keep: u32,
    pub to_neighbors: Vec<u32>,
}

impl OffloadRow {
    pub fn total(&self) -> u32 {
        self.keep + self.to_neighbors.iter().sum::<u32>()
    }
}

/// One row per source, in the network's source order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffloadAssignment {
    pub rows: Vec<OffloadRow>,
}

fn check_simplex(ratios: &[f64], what: &str) -> Result<()> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Action(format!("{what}: ratios must be finite and non-negative")));
    }
    Ok(())
}

/// `ratios[0]` is the self share, the rest follow the neighbor order. Neighbors
/// take `min(remaining, ceil(ratio * n))` in order; the source keeps the rest.
pub fn quantize_offload(ratios: &[f64], n_tasks: u32) -> Result<OffloadRow> {
    check_simplex(ratios, "offload")?;
    let sum: f64 = ratios.iter().sum();
    if ratios.is_empty() || (sum - 1.0).abs() > RATIO_TOLERANCE {
        return Err(Error::Action(format!("offload ratios sum to {sum}, not 1")));
    }
    let mut remaining = n_tasks;
    let to_neighbors = ratios[1..]
        .iter()
        .map(|r| {
            let want = (r * n_tasks as f64 - ROUNDING_GUARD).ceil().max(0.0) as u32;
            let give = want.min(remaining);
            remaining -= give;
            give
        })
        .collect();
    Ok(OffloadRow {
        keep: remaining,
        to_neighbors,
    })
}

/// One sub-array per active link plus `floor(ratio * (max - links))` extra.
pub fn quantize_subarrays(ratios: &[f64], max_subarrays: usize) -> Result<Vec<usize>> {
    check_simplex(ratios, "sub-array")?;
    let links = ratios.len();
    if links > max_subarrays {
        return Err(Error::Action(format!(
            "{links} active links exceed {max_subarrays} sub-arrays"
        )));
    }
    let sum: f64 = ratios.iter().sum();
    if sum > 1.0 + RATIO_TOLERANCE {
        return Err(Error::Action(format!("sub-array ratios sum to {sum} > 1")));
    }
    let spare = (max_subarrays - links) as f64;
    let out: Vec<usize> = ratios
        .iter()
        .map(|r| 1 + (r * spare + ROUNDING_GUARD).floor() as usize)
        .collect();
    if out.iter().sum::<usize>() > max_subarrays {
        return Err(Error::Action("sub-array quantization overflowed the budget".into()));
    }
    Ok(out)
}

/// Power ratios (sum at most 1) to watts whose sum never exceeds `p_max`.
pub fn quantize_power(ratios: &[f64], p_max: f64) -> Result<Vec<f64>> {
    check_simplex(ratios, "power")?;
    let sum: f64 = ratios.iter().sum();
    if sum > 1.0 + RATIO_TOLERANCE {
        return Err(Error::Action(format!("power ratios sum to {sum} > 1")));
    }
    let norm = if sum > 1.0 { sum } else { 1.0 };
    let mut watts: Vec<f64> = ratios.iter().map(|r| r / norm * p_max).collect();
    // Margin so that any summation order (per link, per transmitter) stays
    // within the budget.
    while watts.iter().sum::<f64>() > p_max * (1.0 - 1e-12) {
        for w in watts.iter_mut() {
            *w *= 1.0 - 1e-12;
        }
    }
    Ok(watts)
}

/// Receiving end of a link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    Sat(usize),
    Ground,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkAlloc {
    pub subarrays: usize,
    pub power_w: Vec<f64>,
}

/// Allocations of one phase keyed by `(transmitter, receiver)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkAllocation {
    pub links: BTreeMap<(usize, Endpoint), LinkAlloc>,
}

impl LinkAllocation {
    pub fn insert(&mut self, tx: usize, rx: Endpoint, alloc: LinkAlloc) {
        self.links.insert((tx, rx), alloc);
    }

    /// Per transmitter: (total used power in W, total sub-arrays).
    pub fn per_transmitter(&self, psi_threshold_w: f64) -> BTreeMap<usize, (f64, usize)> {
        let mut out: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for ((tx, _), a) in &self.links {
            let e = out.entry(*tx).or_default();
            e.0 += a
                .power_w
                .iter()
                .filter(|p| **p > psi_threshold_w)
                .sum::<f64>();
            e.1 += a.subarrays;
        }
        out
    }
}

/// Frozen topology of one slot, in local node indices.
#[derive(Clone, Debug)]
pub struct SecNetwork {
    pub positions: Vec<Vec3>,
    pub ground: Vec3,
    /// Global ordering key per node (flat satellite index); breaks FIFO ties.
    pub order_keys: Vec<usize>,
    pub sources: Vec<usize>,
    /// Per source, offload targets in the order used by `OffloadRow::to_neighbors`.
    pub offload_targets: Vec<Vec<usize>>,
    /// Outcome next hop of every node that may compute or relay.
    pub next_hop: Vec<Option<Endpoint>>,
    pub earth_radius_km: f64,
}

impl SecNetwork {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn endpoint_position(&self, e: Endpoint) -> Vec3 {
        match e {
            Endpoint::Sat(j) => self.positions[j],
            Endpoint::Ground => self.ground,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.order_keys.len() != n || self.next_hop.len() != n {
            return Err(Error::Dimension("network node tables disagree in length".into()));
        }
        if self.offload_targets.len() != self.sources.len() {
            return Err(Error::Dimension("one offload target list per source".into()));
        }
        let in_range = |j: usize| j < n;
        if !self.sources.iter().all(|&s| in_range(s))
            || !self.offload_targets.iter().flatten().all(|&j| in_range(j))
        {
            return Err(Error::Topology("node index out of range".into()));
        }
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(Endpoint::Sat(j)) = self.next_hop[cur] {
                if !in_range(j) || steps > n {
                    return Err(Error::Routing(format!("outcome route from node {start} is broken")));
                }
                cur = j;
                steps += 1;
            }
        }
        Ok(())
    }
}

/// Everything besides topology and actions that a slot depends on.
#[derive(Clone, Debug)]
pub struct SimParams {
    pub compute: ComputeParams,
    pub array: ArrayConfig,
    pub budget: LinkBudgetParams,
    pub plan_offload: BandPlan,
    pub plan_outcome: BandPlan,
    pub reward: RewardParams,
    pub task_size_bytes: u64,
    pub interference_w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathDelay {
    pub source: usize,
    pub server: usize,
    pub tasks: u32,
    pub delay_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkStats {
    pub rate_bps: f64,
    pub mean_sinr_db: Option<f64>,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub max_backlog_bytes: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransmitterUsage {
    pub node: usize,
    pub outcome_phase: bool,
    pub power_ratio: f64,
    pub subarray_ratio: f64,
}

impl TransmitterUsage {
    pub fn usage(&self) -> f64 {
        0.5 * (self.power_ratio + self.subarray_ratio)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub per_transmitter: Vec<TransmitterUsage>,
    pub u: f64,
    pub u_p: f64,
    pub u_s: f64,
    pub power_w_mean: f64,
    pub subarrays_mean: f64,
}

#[derive(Clone, Debug)]
pub struct SlotOutcome {
    pub paths: Vec<PathDelay>,
    /// Largest path delay per source; `INFINITY` marks a starved link.
    pub source_delay_s: Vec<f64>,
    pub t_avg_s: f64,
    pub t_max_s: f64,
    pub usage: UsageSummary,
    pub reward: f64,
    pub infinite_delay: bool,
    pub offload_links: BTreeMap<(usize, Endpoint), LinkStats>,
    pub outcome_links: BTreeMap<(usize, Endpoint), LinkStats>,
}

/// Per-transmitter `U_P`, `U_S` and their network means over both phases.
pub fn resource_usage(
    alloc_offload: &LinkAllocation,
    alloc_outcome: &LinkAllocation,
    p_max: f64,
    s_max: usize,
    psi_threshold_w: f64,
) -> UsageSummary {
    let mut per = Vec::new();
    for (outcome_phase, alloc) in [(false, alloc_offload), (true, alloc_outcome)] {
        for (node, (p, s)) in alloc.per_transmitter(psi_threshold_w) {
            per.push(TransmitterUsage {
                node,
                outcome_phase,
                power_ratio: p / p_max,
                subarray_ratio: s as f64 / s_max as f64,
            });
        }
    }
    let n = per.len().max(1) as f64;
    let u_p = per.iter().map(|t| t.power_ratio).sum::<f64>() / n;
    let u_s = per.iter().map(|t| t.subarray_ratio).sum::<f64>() / n;
    UsageSummary {
        u: 0.5 * (u_p + u_s),
        u_p,
        u_s,
        power_w_mean: u_p * p_max,
        subarrays_mean: u_s * s_max as f64,
        per_transmitter: per,
    }
}

/// Structural constraint audit: task conservation and per-transmitter budgets.
pub fn check_constraints(
    arrivals: &[u32],
    assignment: &OffloadAssignment,
    alloc_offload: &LinkAllocation,
    alloc_outcome: &LinkAllocation,
    p_max: f64,
    s_max: usize,
    psi_threshold_w: f64,
) -> Vec<String> {
    let mut violations = Vec::new();
    if arrivals.len() != assignment.rows.len() {
        violations.push(format!(
            "{} arrival counts for {} assignment rows",
            arrivals.len(),
            assignment.rows.len()
        ));
    }
    for (k, (row, n)) in assignment.rows.iter().zip(arrivals).enumerate() {
        if row.total() != *n {
            violations.push(format!("source {k}: {} tasks assigned, {n} arrived", row.total()));
        }
    }
    for (phase, alloc) in [("offloading", alloc_offload), ("outcome", alloc_outcome)] {
        for ((tx, rx), a) in &alloc.links {
            if a.subarrays == 0 {
                violations.push(format!("{phase}: link {tx}->{rx:?} has no sub-array"));
            }
            if a.power_w.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                violations.push(format!("{phase}: link {tx}->{rx:?} has invalid power"));
            }
        }
        for (tx, (p, s)) in alloc.per_transmitter(psi_threshold_w) {
            if p > p_max {
                violations.push(format!("{phase}: node {tx} uses {p} W > {p_max} W"));
            }
            if s > s_max {
                violations.push(format!("{phase}: node {tx} uses {s} > {s_max} sub-arrays"));
            }
        }
    }
    violations
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    source_key: usize,
    server_key: usize,
    path: usize,
    node: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed for a min-heap: earliest first, then ascending source and server keys.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.source_key.cmp(&self.source_key))
            .then_with(|| other.server_key.cmp(&self.server_key))
            .then_with(|| other.path.cmp(&self.path))
    }
}

struct LinkState {
    rate_bps: f64,
    prop_s: f64,
    free_at: f64,
    stats: LinkStats,
}

fn evaluate_links(
    net: &SecNetwork,
    alloc: &LinkAllocation,
    model: &LinkModel<'_>,
    interference_w: f64,
) -> Result<BTreeMap<(usize, Endpoint), LinkState>> {
    let mut out = BTreeMap::new();
    for ((tx, rx), a) in &alloc.links {
        if *tx >= net.len() {
            return Err(Error::Topology(format!("allocation for unknown node {tx}")));
        }
        let from = net.positions[*tx];
        let to = net.endpoint_position(*rx);
        let ev = model.evaluate(from, to, a.subarrays, &a.power_w, interference_w)?;
        out.insert(
            (*tx, *rx),
            LinkState {
                rate_bps: ev.rate_bps,
                prop_s: from.distance(to) / SPEED_OF_LIGHT_KM_S,
                free_at: 0.0,
                stats: LinkStats {
                    rate_bps: ev.rate_bps,
                    mean_sinr_db: ev.mean_sinr_db(),
                    bytes_in: 0,
                    bytes_out: 0,
                    max_backlog_bytes: 0.0,
                },
            },
        );
    }
    Ok(out)
}

/// Runs one slot and returns delays, usage and reward.
pub fn simulate_slot(
    net: &SecNetwork,
    arrivals: &[u32],
    assignment: &OffloadAssignment,
    alloc_offload: &LinkAllocation,
    alloc_outcome: &LinkAllocation,
    params: &SimParams,
) -> Result<SlotOutcome> {
    net.validate()?;
    let p_max = params.budget.max_power_w;
    let s_max = params.array.max_tx_subarrays;
    let violations = check_constraints(
        arrivals,
        assignment,
        alloc_offload,
        alloc_outcome,
        p_max,
        s_max,
        params.budget.psi_threshold_w,
    );
    if let Some(v) = violations.first() {
        return Err(Error::Action(v.clone()));
    }
    for (k, row) in assignment.rows.iter().enumerate() {
        if row.to_neighbors.len() != net.offload_targets[k].len() {
            return Err(Error::Dimension(format!("source {k}: offload row width mismatch")));
        }
    }
    let model_to = LinkModel {
        plan: &params.plan_offload,
        array: &params.array,
        budget: &params.budget,
        earth_radius_km: net.earth_radius_km,
    };
    let model_ot = LinkModel {
        plan: &params.plan_outcome,
        ..model_to.clone()
    };
    let mut links_to = evaluate_links(net, alloc_offload, &model_to, params.interference_w)?;
    let mut links_ot = evaluate_links(net, alloc_outcome, &model_ot, params.interference_w)?;

    let size = params.task_size_bytes;
    // (source index, server node, tasks)
    let mut chunks: Vec<(usize, usize, u32)> = Vec::new();
    let mut load = vec![0u64; net.len()];
    for (k, row) in assignment.rows.iter().enumerate() {
        let src = net.sources[k];
        if row.keep > 0 {
            chunks.push((k, src, row.keep));
            load[src] += row.keep as u64 * size;
        }
        for (&tasks, &j) in row.to_neighbors.iter().zip(&net.offload_targets[k]) {
            if tasks > 0 {
                chunks.push((k, j, tasks));
                load[j] += tasks as u64 * size;
            }
        }
    }

    let mut heap = BinaryHeap::new();
    let mut delivered = vec![f64::NAN; chunks.len()];
    let mut infinite = false;
    for (path, &(k, server, tasks)) in chunks.iter().enumerate() {
        let src = net.sources[k];
        let bytes = tasks as u64 * size;
        let arrive = if server == src {
            0.0
        } else {
            let link = links_to.get_mut(&(src, Endpoint::Sat(server))).ok_or_else(|| {
                Error::Action(format!("no offloading allocation for link {src}->{server}"))
            })?;
            link.stats.bytes_in += bytes;
            if link.rate_bps > 0.0 {
                link.stats.bytes_out += bytes;
                bytes as f64 * 8.0 / link.rate_bps + link.prop_s
            } else {
                f64::INFINITY
            }
        };
        let ready = arrive + computation_delay(load[server], &params.compute);
        if !ready.is_finite() {
            infinite = true;
            delivered[path] = f64::INFINITY;
            continue;
        }
        if outcome_size(bytes, &params.compute) == 0 {
            delivered[path] = ready;
            continue;
        }
        heap.push(Event {
            time: ready,
            source_key: net.order_keys[src],
            server_key: net.order_keys[server],
            path,
            node: server,
        });
    }

    while let Some(ev) = heap.pop() {
        let (_, server, tasks) = chunks[ev.path];
        let bytes = outcome_size(tasks as u64 * size, &params.compute);
        let next = net.next_hop[ev.node].ok_or_else(|| {
            Error::Routing(format!("node {} holds outcome data but has no next hop", ev.node))
        })?;
        let link = links_ot.get_mut(&(ev.node, next)).ok_or_else(|| {
            Error::Action(format!("no outcome allocation for link {}->{next:?}", ev.node))
        })?;
        link.stats.bytes_in += bytes;
        if link.rate_bps <= 0.0 {
            infinite = true;
            delivered[ev.path] = f64::INFINITY;
            continue;
        }
        let wait = (link.free_at - ev.time).max(0.0);
        link.stats.max_backlog_bytes = link.stats.max_backlog_bytes.max(wait * link.rate_bps / 8.0);
        let finish = ev.time + wait + bytes as f64 * 8.0 / link.rate_bps;
        link.free_at = finish;
        link.stats.bytes_out += bytes;
        let arrive = finish + link.prop_s;
        match next {
            Endpoint::Ground => delivered[ev.path] = arrive,
            Endpoint::Sat(j) => heap.push(Event {
                time: arrive,
                node: j,
                server_key: net.order_keys[server],
                ..ev
            }),
        }
    }

    let paths: Vec<PathDelay> = chunks
        .iter()
        .zip(&delivered)
        .map(|(&(source, server, tasks), &d)| PathDelay {
            source,
            server,
            tasks,
            delay_s: d,
        })
        .collect();
    let mut source_delay = vec![0.0f64; net.sources.len()];
    for p in &paths {
        source_delay[p.source] = source_delay[p.source].max(p.delay_s);
    }
    let n_src = source_delay.len().max(1) as f64;
    let t_avg = source_delay.iter().sum::<f64>() / n_src;
    let t_max = source_delay.iter().copied().fold(0.0, f64::max);
    let effective_avg = source_delay
        .iter()
        .map(|&d| params.reward.effective_delay(d))
        .sum::<f64>()
        / n_src;
    let usage = resource_usage(alloc_offload, alloc_outcome, p_max, s_max, params.budget.psi_threshold_w);
    let r = reward(usage.u, effective_avg, &params.reward);
    Ok(SlotOutcome {
        paths,
        source_delay_s: source_delay,
        t_avg_s: t_avg,
        t_max_s: t_max,
        reward: r,
        usage,
        infinite_delay: infinite,
        offload_links: links_to.into_iter().map(|(k, v)| (k, v.stats)).collect(),
        outcome_links: links_ot.into_iter().map(|(k, v)| (k, v.stats)).collect(),
    })
}
