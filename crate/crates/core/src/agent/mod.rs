//! Actor-critic agents for joint offloading and resource allocation.

pub mod action;
pub mod ddpg;
pub mod grant;
pub mod state;

pub use action::{explore, explore_group, quantize_action, JointAction, Quantized};
pub use ddpg::{td_target, Ddpg, LearnStats, TrainConfig};
pub use grant::{GrantDims, GrantModel};
pub use state::{encode_state, prune_involved, FeatureScale, InvolvedSet, Observation};

use crate::error::Result;
use crate::nn::{Checkpoint, Mat, ParamSet, SparseMat, Tape, Var};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Frozen graph context shared by every step of a window.
#[derive(Clone, Debug)]
pub struct Graph {
    pub inv: InvolvedSet,
    pub adj: Arc<SparseMat>,
    pub subbands: usize,
}

impl Graph {
    pub fn new(inv: InvolvedSet, subbands: usize) -> Result<Self> {
        let adj = inv.adjacency()?;
        Ok(Self { inv, adj, subbands })
    }
}

/// Tape variables of the five action heads.
#[derive(Clone, Copy, Debug)]
pub struct ActionVars {
    pub offload: Var,
    pub sub_to: Var,
    pub pow_to: Var,
    pub sub_ot: Var,
    pub pow_ot: Var,
}

impl ActionVars {
    pub fn vars(&self) -> [Var; 5] {
        [self.offload, self.sub_to, self.pow_to, self.sub_ot, self.pow_ot]
    }

    pub fn values(&self, tape: &Tape) -> JointAction {
        JointAction {
            offload: tape.value(self.offload).clone(),
            sub_to: tape.value(self.sub_to).clone(),
            pow_to: tape.value(self.pow_to).clone(),
            sub_ot: tape.value(self.sub_ot).clone(),
            pow_ot: tape.value(self.pow_ot).clone(),
        }
    }
}

/// Output-layer bias handles of the five heads.
#[derive(Clone, Copy, Debug)]
pub struct HeadBiases {
    pub offload: usize,
    pub sub_to: usize,
    pub pow_to: usize,
    pub sub_ot: usize,
    pub pow_ot: usize,
}

pub const SAFE_SLACK_BIAS: f64 = -4.0;
pub const SAFE_SELF_BIAS: f64 = 2.0;

/// Biases that use most of every budget and keep tasks mostly local: slack
/// logits at -4, used components at 0, and the self-compute logit at +2.
pub fn apply_safe_biases(params: &mut ParamSet, heads: &[HeadBiases]) {
    for h in heads {
        let set_last = |m: &mut Mat| {
            m.data.iter_mut().for_each(|v| *v = 0.0);
            if let Some(v) = m.data.last_mut() {
                *v = SAFE_SLACK_BIAS;
            }
        };
        set_last(&mut params.values[h.sub_to]);
        set_last(&mut params.values[h.pow_to]);
        set_last(&mut params.values[h.sub_ot]);
        set_last(&mut params.values[h.pow_ot]);
        let off = &mut params.values[h.offload];
        off.data.iter_mut().for_each(|v| *v = 0.0);
        off.data[0] = SAFE_SELF_BIAS;
    }
}

/// Networks trained by `Ddpg`: actors for both phases and one critic.
pub trait ActorCritic {
    fn name(&self) -> &'static str;
    fn actor(&self) -> &ParamSet;
    fn actor_mut(&mut self) -> &mut ParamSet;
    fn critic(&self) -> &ParamSet;
    fn critic_mut(&mut self) -> &mut ParamSet;
    fn critic_output_bias(&self) -> usize;
    fn safe_init(&mut self);
    fn actor_forward(&self, tape: &mut Tape, bound: &[Var], obs: &Observation, g: &Graph) -> Result<ActionVars>;
    /// `actions` holds per-node action features (see `JointAction::node_features`).
    fn critic_forward(&self, tape: &mut Tape, bound: &[Var], obs: &Observation, g: &Graph, actions: Var) -> Result<Var>;

    fn param_count(&self) -> usize {
        self.actor().count() + self.critic().count()
    }
}

/// One on-policy experience.
#[derive(Clone, Debug)]
pub struct Transition {
    pub obs: Observation,
    pub action: JointAction,
    pub reward: f64,
    pub next_obs: Observation,
}

/// Common interface of learning and fixed policies.
pub trait Policy {
    fn name(&self) -> &str;
    fn act(&mut self, obs: &Observation, g: &Graph, explore: bool, rng: &mut ChaCha8Rng) -> Result<JointAction>;
    /// `None` for policies that do not learn.
    fn learn(&mut self, tr: &Transition, g: &Graph) -> Result<Option<LearnStats>>;
    fn param_count(&self) -> usize;
    fn checkpoint(&self, step: usize) -> Option<Checkpoint>;
    fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()>;
    fn actor_lr(&self) -> f64 {
        0.0
    }
}
