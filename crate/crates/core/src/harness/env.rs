//! Frozen-window scenario and the step-wise environment around `simulate_slot`.

use super::config::ExperimentConfig;
use crate::agent::{encode_state, prune_involved, quantize_action, FeatureScale, Graph, JointAction, Observation, Quantized};
use crate::baselines::static_action;
use crate::constellation::{build_walker, Constellation};
use crate::error::{Error, Result};
use crate::link::{BandPlan, BandPreset, InterferenceModel, Phase};
use crate::sim::{check_constraints, simulate_slot, SecNetwork, SimParams, SlotOutcome};
use crate::traffic::generate_counts;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;

/// Uniformly random satellites, skipping any candidate adjacent to (or equal
/// to) one already chosen. Deterministic per seed.
pub fn select_sources(c: &Constellation, n: usize, seed: u64) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = Vec::with_capacity(n);
    let mut blocked = BTreeSet::new();
    for k in order {
        if chosen.len() == n {
            break;
        }
        if blocked.contains(&k) {
            continue;
        }
        chosen.push(k);
        blocked.insert(k);
        blocked.extend(c.neighbors_flat(k)?);
    }
    if chosen.len() < n {
        return Err(Error::config("n_sources", format!("only {} non-adjacent sources fit", chosen.len())));
    }
    Ok(chosen)
}

/// Topology of one access window, frozen at `start_time_s`.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub constellation: Constellation,
    pub t0: f64,
    pub gs_sat: usize,
    pub sources: Vec<usize>,
    pub graph: Graph,
    pub network: SecNetwork,
    pub scale: FeatureScale,
}

pub fn build_scenario(cfg: &ExperimentConfig) -> Result<Scenario> {
    cfg.validate()?;
    let c = build_walker(&cfg.constellation)?;
    let t0 = cfg.start_time_s;
    let gs_id = c.gs_access_satellite(&cfg.ground_station, t0, None)?;
    let gs_sat = c.flat(gs_id);
    let sources = select_sources(&c, cfg.n_sources, cfg.source_selection.seed)?;
    let tree = c.routing_tree(gs_id, cfg.routing.eta, t0)?;
    let inv = prune_involved(&c, &sources, &tree)?;
    let network = inv.network(&c, &cfg.ground_station, t0);
    let graph = Graph::new(inv, cfg.link.subbands)?;
    let scale = FeatureScale {
        planes: cfg.constellation.planes,
        sats_per_plane: cfg.constellation.sats_per_plane,
        mean_demand_bytes: cfg.traffic.mean_demand_bytes(),
        outcome_ratio: cfg.compute.outcome_ratio,
        task_size_bytes: cfg.traffic.task_size_bytes,
    };
    Ok(Scenario { constellation: c, t0, gs_sat, sources, graph, network, scale })
}

pub fn sim_params(cfg: &ExperimentConfig, band: BandPreset) -> Result<SimParams> {
    let plan = |phase| BandPlan::new(band, phase, cfg.link.subbands, cfg.link.bandwidth_hz, &cfg.link.absorption);
    Ok(SimParams {
        compute: cfg.compute.clone(),
        array: cfg.link.array.clone(),
        budget: cfg.link.budget.clone(),
        plan_offload: plan(Phase::Offloading)?,
        plan_outcome: plan(Phase::Outcome)?,
        reward: cfg.reward.clone(),
        task_size_bytes: cfg.traffic.task_size_bytes,
        interference_w: 0.0,
    })
}

/// Result of applying one action.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub quantized: Quantized,
    pub outcome: SlotOutcome,
    pub interference_w: f64,
}

#[derive(Clone, Debug)]
pub struct Env {
    pub scenario: Scenario,
    pub params: SimParams,
    /// `[source][step]`, one extra step for the final next-state.
    pub traffic: Vec<Vec<u32>>,
    interference: InterferenceModel,
    rng: ChaCha8Rng,
}

impl Env {
    pub fn new(cfg: &ExperimentConfig, steps: usize) -> Result<Self> {
        let scenario = build_scenario(cfg)?;
        let traffic = generate_counts(&cfg.traffic, scenario.sources.len(), steps + 1)?;
        Ok(Self {
            params: sim_params(cfg, cfg.band)?,
            interference: cfg.link.budget.interference.clone(),
            rng: ChaCha8Rng::seed_from_u64(cfg.traffic.seed ^ 0x005e_ed1f),
            scenario,
            traffic,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.scenario.graph
    }

    pub fn steps_available(&self) -> usize {
        self.traffic.first().map_or(0, |t| t.len().saturating_sub(1))
    }

    pub fn arrivals(&self, step: usize) -> Result<Vec<u32>> {
        self.traffic
            .iter()
            .map(|row| {
                row.get(step)
                    .copied()
                    .ok_or_else(|| Error::State(format!("no traffic generated for step {step}")))
            })
            .collect()
    }

    fn draw_interference(&mut self) -> f64 {
        match self.interference {
            InterferenceModel::None => 0.0,
            InterferenceModel::Fixed { mean_w } => mean_w,
            InterferenceModel::Gaussian { mean_w, std_w } => {
                (mean_w + std_w * self.rng.sample::<f64, _>(StandardNormal)).max(0.0)
            }
        }
    }

    /// Quantizes, audits and simulates one action at `step`.
    pub fn apply(&mut self, step: usize, action: &JointAction) -> Result<StepResult> {
        let arrivals = self.arrivals(step)?;
        let g = &self.scenario.graph;
        let q = quantize_action(
            action,
            &g.inv,
            &arrivals,
            self.params.array.max_tx_subarrays,
            self.params.budget.max_power_w,
        )?;
        let violations = check_constraints(
            &arrivals,
            &q.assignment,
            &q.offload,
            &q.outcome,
            self.params.budget.max_power_w,
            self.params.array.max_tx_subarrays,
            self.params.budget.psi_threshold_w,
        );
        if let Some(v) = violations.first() {
            return Err(Error::Action(format!("step {step}: {v}")));
        }
        let interference_w = self.draw_interference();
        self.params.interference_w = interference_w;
        let outcome = simulate_slot(&self.scenario.network, &arrivals, &q.assignment, &q.offload, &q.outcome, &self.params)?;
        Ok(StepResult { quantized: q, outcome, interference_w })
    }

    /// Slot realized under the full-resource, local-compute operating point;
    /// supplies the "previous slot" statistics for the first observation.
    pub fn bootstrap(&mut self) -> Result<SlotOutcome> {
        let action = static_action(&self.scenario.graph, true);
        let arrivals = self.arrivals(0)?;
        let q = quantize_action(
            &action,
            &self.scenario.graph.inv,
            &arrivals,
            self.params.array.max_tx_subarrays,
            self.params.budget.max_power_w,
        )?;
        let mut params = self.params.clone();
        params.interference_w = 0.0;
        simulate_slot(&self.scenario.network, &arrivals, &q.assignment, &q.offload, &q.outcome, &params)
    }

    pub fn observe(&self, step: usize, previous: &SlotOutcome) -> Result<Observation> {
        let s = &self.scenario;
        encode_state(&s.constellation, &s.graph.inv, &s.scale, &self.arrivals(step)?, previous)
    }
}
