//! GCN actors for both phases and a mean-pooled GCN critic.

use super::action::{
    offload_action_width, outcome_action_width, pow_ot_width, pow_to_width, OFFLOAD_WIDTH,
    SUB_OT_WIDTH, SUB_TO_WIDTH,
};
use super::state::{Observation, OFFLOAD_FEATURES, OUTCOME_FEATURES};
use super::{apply_safe_biases, ActionVars, ActorCritic, Graph, HeadBiases};
use crate::error::{Error, Result};
use crate::nn::{Activation, Dense, GcnLayer, ParamSet, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrantDims {
    pub hidden: usize,
    pub critic_hidden: usize,
    /// Uniform init range of head weights; small so the safe biases dominate.
    pub head_init: f64,
}

impl Default for GrantDims {
    fn default() -> Self {
        Self { hidden: 128, critic_hidden: 128, head_init: 3e-3 }
    }
}

impl GrantDims {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.critic_hidden == 0 {
            return Err(Error::config("agent.hidden", "widths must be positive"));
        }
        if !(self.head_init >= 0.0) {
            return Err(Error::config("agent.head_init", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct PhaseActor {
    gcn: [GcnLayer; 2],
    heads: Vec<Dense>,
}

impl PhaseActor {
    fn embed(&self, tape: &mut Tape, bound: &[Var], g: &Graph, x: Var) -> Result<Var> {
        let h = self.gcn[0].forward(tape, bound, &g.adj, x)?;
        self.gcn[1].forward(tape, bound, &g.adj, h)
    }

    fn heads(&self, tape: &mut Tape, bound: &[Var], h: Var) -> Result<Vec<Var>> {
        self.heads
            .iter()
            .map(|d| {
                let logits = d.forward(tape, bound, h)?;
                tape.softmax(logits)
            })
            .collect()
    }
}

/// Parameter-shared graph model: one GCN actor per phase plus the critic.
#[derive(Clone, Debug)]
pub struct GrantModel {
    offload: PhaseActor,
    outcome: PhaseActor,
    critic_gcn: [GcnLayer; 2],
    critic_fc: Dense,
    critic_out: Dense,
    actor: ParamSet,
    critic: ParamSet,
    subbands: usize,
}

impl GrantModel {
    pub fn new(dims: &GrantDims, subbands: usize, seed: u64) -> Result<Self> {
        dims.validate()?;
        if subbands == 0 {
            return Err(Error::config("link.subbands", "must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = dims.hidden;
        let relu = Activation::Relu;
        let id = Activation::Identity;
        let mut actor = ParamSet::default();
        let lim = Some(dims.head_init);
        let offload = PhaseActor {
            gcn: [
                GcnLayer::new(&mut actor, "to.gcn0", OFFLOAD_FEATURES, h, relu, &mut rng),
                GcnLayer::new(&mut actor, "to.gcn1", h, h, relu, &mut rng),
            ],
            heads: vec![
                Dense::new(&mut actor, "to.offload", h, OFFLOAD_WIDTH, id, lim, &mut rng),
                Dense::new(&mut actor, "to.sub", h, SUB_TO_WIDTH, id, lim, &mut rng),
                Dense::new(&mut actor, "to.pow", h, pow_to_width(subbands), id, lim, &mut rng),
            ],
        };
        let outcome = PhaseActor {
            gcn: [
                GcnLayer::new(&mut actor, "ot.gcn0", OUTCOME_FEATURES, h, relu, &mut rng),
                GcnLayer::new(&mut actor, "ot.gcn1", h, h, relu, &mut rng),
            ],
            heads: vec![
                Dense::new(&mut actor, "ot.sub", h, SUB_OT_WIDTH, id, lim, &mut rng),
                Dense::new(&mut actor, "ot.pow", h, pow_ot_width(subbands), id, lim, &mut rng),
            ],
        };
        let c = dims.critic_hidden;
        let width = OFFLOAD_FEATURES
            + OUTCOME_FEATURES
            + offload_action_width(subbands)
            + outcome_action_width(subbands);
        let mut critic = ParamSet::default();
        let critic_gcn = [
            GcnLayer::new(&mut critic, "critic.gcn0", width, c, relu, &mut rng),
            GcnLayer::new(&mut critic, "critic.gcn1", c, c, relu, &mut rng),
        ];
        let critic_fc = Dense::new(&mut critic, "critic.fc", c, c, relu, None, &mut rng);
        let critic_out = Dense::new(&mut critic, "critic.out", c, 1, id, None, &mut rng);
        let mut model = Self { offload, outcome, critic_gcn, critic_fc, critic_out, actor, critic, subbands };
        model.safe_init();
        Ok(model)
    }

    pub fn subbands(&self) -> usize {
        self.subbands
    }
}

impl ActorCritic for GrantModel {
    fn name(&self) -> &'static str {
        "grant"
    }

    fn actor(&self) -> &ParamSet {
        &self.actor
    }

    fn actor_mut(&mut self) -> &mut ParamSet {
        &mut self.actor
    }

    fn critic(&self) -> &ParamSet {
        &self.critic
    }

    fn critic_mut(&mut self) -> &mut ParamSet {
        &mut self.critic
    }

    fn critic_output_bias(&self) -> usize {
        self.critic_out.b
    }

    fn safe_init(&mut self) {
        let heads = HeadBiases {
            offload: self.offload.heads[0].b,
            sub_to: self.offload.heads[1].b,
            pow_to: self.offload.heads[2].b,
            sub_ot: self.outcome.heads[0].b,
            pow_ot: self.outcome.heads[1].b,
        };
        apply_safe_biases(&mut self.actor, &[heads]);
    }

    fn actor_forward(&self, tape: &mut Tape, bound: &[Var], obs: &Observation, g: &Graph) -> Result<ActionVars> {
        if g.subbands != self.subbands {
            return Err(Error::Dimension("graph and model disagree on sub-bands".into()));
        }
        let x = tape.leaf(obs.offload.clone());
        let h = self.offload.embed(tape, bound, g, x)?;
        let hs = tape.select_rows(h, &g.inv.sources)?;
        let to = self.offload.heads(tape, bound, hs)?;
        let x = tape.leaf(obs.outcome.clone());
        let h = self.outcome.embed(tape, bound, g, x)?;
        let ot = self.outcome.heads(tape, bound, h)?;
        Ok(ActionVars { offload: to[0], sub_to: to[1], pow_to: to[2], sub_ot: ot[0], pow_ot: ot[1] })
    }

    fn critic_forward(&self, tape: &mut Tape, bound: &[Var], obs: &Observation, g: &Graph, actions: Var) -> Result<Var> {
        let xo = tape.leaf(obs.offload.clone());
        let xt = tape.leaf(obs.outcome.clone());
        let x = tape.concat_cols(&[xo, xt, actions])?;
        let h = self.critic_gcn[0].forward(tape, bound, &g.adj, x)?;
        let h = self.critic_gcn[1].forward(tape, bound, &g.adj, h)?;
        let pooled = tape.mean_rows(h)?;
        let h = self.critic_fc.forward(tape, bound, pooled)?;
        self.critic_out.forward(tape, bound, h)
    }
}
