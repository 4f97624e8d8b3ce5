//! On-policy deterministic actor-critic training shared by all learning agents.

use super::action::{explore, JointAction};
use super::state::Observation;
use super::{ActorCritic, Graph, Policy, Transition};
use crate::error::{Error, Result};
use crate::nn::{Adam, Checkpoint, Mat, ParamSet, Tape};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub kappa: f64,
    pub steps: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub actor_lr_decay: f64,
    pub decay_every: usize,
    /// Exploration std as a fraction of the largest ratio in each group.
    pub noise_std: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// Start the critic's output bias at the first TD target's fixed point
    /// `r / (1 - kappa)` instead of zero.
    pub critic_bias_warm_start: bool,
    /// Adam epsilon of the actor optimizer. Gradients well below it move the
    /// actor proportionally instead of at the full normalized step.
    pub actor_adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            steps: 390,
            actor_lr: 2e-3,
            critic_lr: 1e-3,
            actor_lr_decay: 0.95,
            decay_every: 3,
            noise_std: 0.05,
            seed: 0,
            checkpoint_every: 50,
            critic_bias_warm_start: true,
            actor_adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::config("train.kappa", "must lie in [0, 1]"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::config("train.actor_lr/critic_lr", "must be positive"));
        }
        if !(self.actor_lr_decay > 0.0 && self.actor_lr_decay <= 1.0) || self.decay_every == 0 {
            return Err(Error::config("train.actor_lr_decay", "decay in (0, 1] every >= 1 steps"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("train.noise_std", "must be non-negative"));
        }
        if !(self.actor_adam_eps > 0.0) {
            return Err(Error::config("train.actor_adam_eps", "must be positive"));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::config("train.checkpoint_every", "must be at least 1"));
        }
        Ok(())
    }
}

pub fn td_target(reward: f64, q_next: f64, kappa: f64) -> f64 {
    reward + kappa * q_next
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnStats {
    pub critic_loss: f64,
    pub q_value: f64,
    pub actor_lr: f64,
}

/// Deterministic policy-gradient trainer around an `ActorCritic` model.
#[derive(Clone, Debug)]
pub struct Ddpg<M> {
    pub model: M,
    pub cfg: TrainConfig,
    actor_opt: Adam,
    critic_opt: Adam,
    updates: usize,
}

impl<M: ActorCritic> Ddpg<M> {
    pub fn new(model: M, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            actor_opt: Adam::new(cfg.actor_lr).with_eps(cfg.actor_adam_eps),
            critic_opt: Adam::new(cfg.critic_lr),
            model,
            cfg,
            updates: 0,
        })
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Deterministic actor output.
    pub fn policy(&self, obs: &Observation, g: &Graph) -> Result<JointAction> {
        let mut tape = Tape::new();
        let bound = self.model.actor().bind(&mut tape);
        let vars = self.model.actor_forward(&mut tape, &bound, obs, g)?;
        Ok(vars.values(&tape))
    }

    pub fn q_value(&self, obs: &Observation, g: &Graph, action: &JointAction) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.model.critic().bind(&mut tape);
        let a = tape.leaf(action.node_features(&g.inv)?);
        let q = self.model.critic_forward(&mut tape, &bound, obs, g, a)?;
        Ok(tape.value(q).data[0])
    }

    /// `dQ/da` at `action`, split per head.
    pub fn action_gradient(&self, obs: &Observation, g: &Graph, action: &JointAction) -> Result<(f64, JointAction)> {
        let mut tape = Tape::new();
        let bound = self.model.critic().bind(&mut tape);
        let a = tape.leaf(action.node_features(&g.inv)?);
        let q = self.model.critic_forward(&mut tape, &bound, obs, g, a)?;
        tape.backward(q)?;
        let grad = JointAction::split_node_features(&tape.grad_or_zero(a)?, &g.inv, g.subbands)?;
        Ok((tape.value(q).data[0], grad))
    }

    /// One Adam step of the critic toward `target` at `(obs, action)`.
    pub fn critic_step(&mut self, obs: &Observation, g: &Graph, action: &JointAction, target: f64) -> Result<(f64, f64)> {
        let mut tape = Tape::new();
        let bound = self.model.critic().bind(&mut tape);
        let a = tape.leaf(action.node_features(&g.inv)?);
        let q = self.model.critic_forward(&mut tape, &bound, obs, g, a)?;
        let q_val = tape.value(q).data[0];
        let loss = tape.mse(q, Mat::scalar(target))?;
        tape.backward(loss)?;
        let grads = self.model.critic().grads(&tape, &bound)?;
        self.critic_opt.step(self.model.critic_mut(), &grads)?;
        Ok((tape.value(loss).data[0], q_val))
    }

    /// One Adam ascent step of both actors on `Q(obs, pi(obs))`, critic fixed.
    pub fn actor_step(&mut self, obs: &Observation, g: &Graph) -> Result<()> {
        let mut tape = Tape::new();
        let bound = self.model.actor().bind(&mut tape);
        let vars = self.model.actor_forward(&mut tape, &bound, obs, g)?;
        let (_, dq) = self.action_gradient(obs, g, &vars.values(&tape))?;
        // Negated so that descent on the surrogate ascends Q.
        let mut terms = Vec::new();
        for (v, d) in vars.vars().into_iter().zip(dq.groups()) {
            terms.push(tape.dot(v, d.map(|x| -x))?);
        }
        let mut loss = terms[0];
        for t in &terms[1..] {
            loss = tape.add(loss, *t)?;
        }
        tape.backward(loss)?;
        let grads = self.model.actor().grads(&tape, &bound)?;
        self.actor_opt.step(self.model.actor_mut(), &grads)
    }

    pub fn train_step(&mut self, tr: &Transition, g: &Graph) -> Result<LearnStats> {
        let next_action = self.policy(&tr.next_obs, g)?;
        if self.updates == 0 && self.cfg.critic_bias_warm_start {
            let fixed_point = tr.reward / (1.0 - self.cfg.kappa).max(1e-6);
            let b = self.model.critic_output_bias();
            self.model.critic_mut().values[b].data[0] = fixed_point;
        }
        let q_next = self.q_value(&tr.next_obs, g, &next_action)?;
        let y = td_target(tr.reward, q_next, self.cfg.kappa);
        if !y.is_finite() {
            return Err(Error::Training(format!("non-finite TD target at update {}", self.updates)));
        }
        let (critic_loss, q_value) = self.critic_step(&tr.obs, g, &tr.action, y)?;
        self.actor_step(&tr.obs, g)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.decay_every) {
            self.actor_opt.lr *= self.cfg.actor_lr_decay;
        }
        Ok(LearnStats { critic_loss, q_value, actor_lr: self.actor_opt.lr })
    }
}

fn load_into(dst: &mut ParamSet, src: &ParamSet, what: &str) -> Result<()> {
    if !dst.same_layout(src) {
        return Err(Error::Input(format!("checkpoint {what} layout does not match the model")));
    }
    *dst = src.clone();
    Ok(())
}

impl<M: ActorCritic> Policy for Ddpg<M> {
    fn name(&self) -> &str {
        self.model.name()
    }

    fn act(&mut self, obs: &Observation, g: &Graph, explore_on: bool, rng: &mut ChaCha8Rng) -> Result<JointAction> {
        let mut a = self.policy(obs, g)?;
        if explore_on {
            explore(&mut a, self.cfg.noise_std, rng);
        }
        Ok(a)
    }

    fn learn(&mut self, tr: &Transition, g: &Graph) -> Result<Option<LearnStats>> {
        self.train_step(tr, g).map(Some)
    }

    fn param_count(&self) -> usize {
        self.model.param_count()
    }

    fn checkpoint(&self, step: usize) -> Option<Checkpoint> {
        let mut ck = Checkpoint::new(self.model.name(), step);
        ck.networks.insert("actor".into(), self.model.actor().clone());
        ck.networks.insert("critic".into(), self.model.critic().clone());
        Some(ck)
    }

    fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        if ck.policy != self.model.name() {
            return Err(Error::Input(format!(
                "checkpoint is for policy {:?}, not {:?}",
                ck.policy,
                self.model.name()
            )));
        }
        load_into(self.model.actor_mut(), ck.network("actor")?, "actor")?;
        load_into(self.model.critic_mut(), ck.network("critic")?, "critic")
    }

    fn actor_lr(&self) -> f64 {
        self.actor_opt.lr
    }
}
