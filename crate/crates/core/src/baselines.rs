//! Reference policies: fixed heuristics and per-satellite fully connected actors.

use crate::agent::action::{
    offload_action_width, outcome_action_width, pow_ot_width, pow_to_width, OFFLOAD_WIDTH,
    SUB_OT_WIDTH, SUB_TO_WIDTH,
};
use crate::agent::state::{OFFLOAD_FEATURES, OUTCOME_FEATURES};
use crate::agent::{
    apply_safe_biases, ActionVars, ActorCritic, Graph, HeadBiases, JointAction, LearnStats,
    Observation, Policy, Transition,
};
use crate::error::{Error, Result};
use crate::nn::{Activation, Checkpoint, Dense, Mat, ParamSet, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn filled(rows: usize, row: &[f64]) -> Mat {
    Mat { rows, cols: row.len(), data: row.repeat(rows) }
}

/// Equal split of every budget with zero slack; `local_only` keeps all tasks
/// at the source, otherwise tasks are spread evenly over self and neighbors.
pub fn static_action(g: &Graph, local_only: bool) -> JointAction {
    let k = g.subbands;
    let n_src = g.inv.sources.len();
    let n = g.inv.len();
    let offload = if local_only {
        vec![1.0, 0.0, 0.0, 0.0, 0.0]
    } else {
        vec![1.0 / OFFLOAD_WIDTH as f64; OFFLOAD_WIDTH]
    };
    let mut sub_to = vec![0.25; 4];
    sub_to.push(0.0);
    let mut pow_to = vec![1.0 / (4 * k) as f64; 4 * k];
    pow_to.push(0.0);
    let mut pow_ot = vec![1.0 / k as f64; k];
    pow_ot.push(0.0);
    JointAction {
        offload: filled(n_src, &offload),
        sub_to: filled(n_src, &sub_to),
        pow_to: filled(n_src, &pow_to),
        sub_ot: filled(n, &[1.0, 0.0]),
        pow_ot: filled(n, &pow_ot),
    }
}

/// Stateless policy that always returns `static_action`.
#[derive(Clone, Debug)]
pub struct StaticPolicy {
    pub local_only: bool,
}

impl StaticPolicy {
    pub fn uniform() -> Self {
        Self { local_only: false }
    }

    pub fn full_resource() -> Self {
        Self { local_only: true }
    }
}

impl Policy for StaticPolicy {
    fn name(&self) -> &str {
        if self.local_only { "full" } else { "uniform" }
    }

    fn act(&mut self, _obs: &Observation, g: &Graph, _explore: bool, _rng: &mut ChaCha8Rng) -> Result<JointAction> {
        Ok(static_action(g, self.local_only))
    }

    fn learn(&mut self, _tr: &Transition, _g: &Graph) -> Result<Option<LearnStats>> {
        Ok(None)
    }

    fn param_count(&self) -> usize {
        0
    }

    fn checkpoint(&self, _step: usize) -> Option<Checkpoint> {
        None
    }

    fn load_checkpoint(&mut self, _ck: &Checkpoint) -> Result<()> {
        Err(Error::Input(format!("policy {} has no parameters to load", self.name())))
    }
}

#[derive(Clone, Debug)]
struct FcActor {
    hidden: [Dense; 2],
    heads: Vec<Dense>,
}

impl FcActor {
    fn new(
        params: &mut ParamSet,
        name: &str,
        fan_in: usize,
        hidden: usize,
        head_widths: &[usize],
        head_init: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let relu = Activation::Relu;
        Self {
            hidden: [
                Dense::new(params, &format!("{name}.fc0"), fan_in, hidden, relu, None, rng),
                Dense::new(params, &format!("{name}.fc1"), hidden, hidden, relu, None, rng),
            ],
            heads: head_widths
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    Dense::new(params, &format!("{name}.head{i}"), hidden, *w, Activation::Identity, Some(head_init), rng)
                })
                .collect(),
        }
    }

    fn forward(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Result<Vec<Var>> {
        let h = self.hidden[0].forward(tape, bound, x)?;
        let h = self.hidden[1].forward(tape, bound, h)?;
        self.heads
            .iter()
            .map(|d| {
                let l = d.forward(tape, bound, h)?;
                tape.softmax(l)
            })
            .collect()
    }
}

/// One private fully connected actor per acting satellite and a centralized
/// fully connected critic over all involved satellites' states and actions.
#[derive(Clone, Debug)]
pub struct MaddpgFcModel {
    offload_actors: Vec<FcActor>,
    outcome_actors: Vec<FcActor>,
    critic_layers: [Dense; 2],
    critic_out: Dense,
    actor: ParamSet,
    critic: ParamSet,
    nodes: Vec<usize>,
    sources: Vec<usize>,
    subbands: usize,
}

impl MaddpgFcModel {
    pub fn new(g: &Graph, hidden: usize, head_init: f64, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::config("agent.hidden", "must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = g.subbands;
        let mut actor = ParamSet::default();
        let offload_actors = g
            .inv
            .sources
            .iter()
            .map(|&i| {
                FcActor::new(
                    &mut actor,
                    &format!("to{}", g.inv.nodes[i]),
                    OFFLOAD_FEATURES,
                    hidden,
                    &[OFFLOAD_WIDTH, SUB_TO_WIDTH, pow_to_width(k)],
                    head_init,
                    &mut rng,
                )
            })
            .collect();
        let outcome_actors = g
            .inv
            .nodes
            .iter()
            .map(|&flat| {
                FcActor::new(
                    &mut actor,
                    &format!("ot{flat}"),
                    OUTCOME_FEATURES,
                    hidden,
                    &[SUB_OT_WIDTH, pow_ot_width(k)],
                    head_init,
                    &mut rng,
                )
            })
            .collect();
        let width = g.inv.len()
            * (OFFLOAD_FEATURES + OUTCOME_FEATURES + offload_action_width(k) + outcome_action_width(k));
        let mut critic = ParamSet::default();
        let relu = Activation::Relu;
        let critic_layers = [
            Dense::new(&mut critic, "critic.fc0", width, hidden, relu, None, &mut rng),
            Dense::new(&mut critic, "critic.fc1", hidden, hidden, relu, None, &mut rng),
        ];
        let critic_out = Dense::new(&mut critic, "critic.out", hidden, 1, Activation::Identity, None, &mut rng);
        let mut m = Self {
            offload_actors,
            outcome_actors,
            critic_layers,
            critic_out,
            actor,
            critic,
            nodes: g.inv.nodes.clone(),
            sources: g.inv.sources.clone(),
            subbands: k,
        };
        m.safe_init();
        Ok(m)
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.inv.nodes != self.nodes || g.inv.sources != self.sources || g.subbands != self.subbands {
            return Err(Error::Unsupported(
                "per-satellite actors cannot follow a change of the involved set".into(),
            ));
        }
        Ok(())
    }
}

impl ActorCritic for MaddpgFcModel {
    fn name(&self) -> &'static str {
        "maddpg_fc"
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
        // Offload and outcome actors are paired only for bias bookkeeping.
        let mut heads = Vec::new();
        for (i, ot) in self.outcome_actors.iter().enumerate() {
            let to = self.offload_actors.get(i).unwrap_or(&self.offload_actors[0]);
            heads.push(HeadBiases {
                offload: to.heads[0].b,
                sub_to: to.heads[1].b,
                pow_to: to.heads[2].b,
                sub_ot: ot.heads[0].b,
                pow_ot: ot.heads[1].b,
            });
        }
        if !self.offload_actors.is_empty() {
            apply_safe_biases(&mut self.actor, &heads);
        }
    }

    fn actor_forward(&self, tape: &mut Tape, bound: &[Var], obs: &Observation, g: &Graph) -> Result<ActionVars> {
        self.check_graph(g)?;
        let xo = tape.leaf(obs.offload.clone());
        let xt = tape.leaf(obs.outcome.clone());
        let mut to: [Vec<Var>; 3] = Default::default();
        for (actor, &i) in self.offload_actors.iter().zip(&g.inv.sources) {
            let x = tape.select_rows(xo, &[i])?;
            for (slot, v) in to.iter_mut().zip(actor.forward(tape, bound, x)?) {
                slot.push(v);
            }
        }
        let mut ot: [Vec<Var>; 2] = Default::default();
        for (i, actor) in self.outcome_actors.iter().enumerate() {
            let x = tape.select_rows(xt, &[i])?;
            for (slot, v) in ot.iter_mut().zip(actor.forward(tape, bound, x)?) {
                slot.push(v);
            }
        }
        Ok(ActionVars {
            offload: tape.concat_rows(&to[0])?,
            sub_to: tape.concat_rows(&to[1])?,
            pow_to: tape.concat_rows(&to[2])?,
            sub_ot: tape.concat_rows(&ot[0])?,
            pow_ot: tape.concat_rows(&ot[1])?,
        })
    }

    fn critic_forward(&self, tape: &mut Tape, bound: &[Var], obs: &Observation, g: &Graph, actions: Var) -> Result<Var> {
        self.check_graph(g)?;
        let xo = tape.leaf(obs.offload.clone());
        let xt = tape.leaf(obs.outcome.clone());
        let x = tape.concat_cols(&[xo, xt, actions])?;
        let (r, c) = tape.value(x).shape();
        let flat = tape.reshape(x, 1, r * c)?;
        let h = self.critic_layers[0].forward(tape, bound, flat)?;
        let h = self.critic_layers[1].forward(tape, bound, h)?;
        self.critic_out.forward(tape, bound, h)
    }
}
