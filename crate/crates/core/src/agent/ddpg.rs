//! Vanilla DDPG: one critic, deterministic tanh actor, Gaussian exploration
//! noise, target networks updated after every step.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::gdm::{critic_spec, read_hyper, write_hyper};
use super::{
    check_finite, mse_with_grad, obs_row, read_adam, write_adam, Action, Agent, AgentError, AgentHyper, AgentKind,
    Batch, TrainLosses, ACTION_DIM,
};
use crate::nn::{soft_update, Activation, AdamState, Checkpoint, Mlp, MlpSpec, OutputActivation, Tensor};

fn actor_spec(obs_dim: usize, hidden: &[usize]) -> MlpSpec {
    let mut widths = vec![obs_dim];
    widths.extend_from_slice(hidden);
    widths.push(ACTION_DIM);
    MlpSpec::new(widths, Activation::Relu, OutputActivation::Tanh)
}

pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    pub hyper: AgentHyper,
    actor_adam: AdamState,
    critic_adam: AdamState,
    steps: u64,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hyper: AgentHyper, rng: &mut R) -> Result<Self, AgentError> {
        hyper.validate()?;
        let actor = Mlp::new(actor_spec(obs_dim, &hyper.shared.hidden), rng)?;
        let critic = Mlp::new(critic_spec(obs_dim, &hyper.shared.hidden), rng)?;
        Ok(Self {
            actor_adam: AdamState::new(actor.params(), hyper.shared.actor_lr),
            critic_adam: AdamState::new(critic.params(), hyper.shared.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            hyper,
            steps: 0,
        })
    }

    pub fn select_action(&self, obs: &[f64], rng: &mut dyn RngCore, explore: bool) -> Result<Action, AgentError> {
        let out = self.actor.forward(&obs_row(obs))?;
        let mut action = [out.data()[0], out.data()[1]];
        if explore {
            for a in &mut action {
                let eps: f64 = rng.sample(StandardNormal);
                *a = (*a + eps * self.hyper.ddpg.exploration_noise_std).clamp(-1.0, 1.0);
            }
        }
        Ok(action)
    }

    /// Critic regression to `r + gamma (1 - done) Q'(s', mu'(s'))`, actor
    /// ascent on `Q(s, mu(s))`, then Polyak updates of both targets.
    pub fn ddpg_train_step(&mut self, batch: &Batch) -> Result<(f64, f64), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Config("empty batch".into()));
        }
        let gamma = self.hyper.shared.gamma;
        let next_actions = self.actor_target.forward(&batch.next_obs)?;
        let q_next = self.critic_target.forward(&Tensor::hcat(&[&batch.next_obs, &next_actions])?)?;
        let targets: Vec<f64> = (0..batch.len())
            .map(|i| batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * q_next.data()[i])
            .collect();
        let cache = self.critic.forward_cached(&Tensor::hcat(&[&batch.obs, &batch.actions])?)?;
        let (critic_loss, g) = mse_with_grad(cache.output(), &targets);
        check_finite("critic loss", critic_loss)?;
        let (grads, _) = self.critic.backward(&cache, &g)?;
        self.critic_adam.step(self.critic.params_mut(), &grads)?;

        let (actor_loss, actor_grads) = self.actor_loss_and_grads(&batch.obs)?;
        check_finite("actor loss", actor_loss)?;
        self.actor_adam.step(self.actor.params_mut(), &actor_grads)?;

        let polyak = self.hyper.shared.polyak;
        soft_update(self.actor.params(), self.actor_target.params_mut(), polyak)?;
        soft_update(self.critic.params(), self.critic_target.params_mut(), polyak)?;
        self.steps += 1;
        Ok((critic_loss, actor_loss))
    }

    /// `-mean Q(s, mu(s))` and its actor-parameter gradients.
    pub fn actor_loss_and_grads(&self, obs: &Tensor) -> Result<(f64, Vec<Tensor>), AgentError> {
        let actor_cache = self.actor.forward_cached(obs)?;
        let input = Tensor::hcat(&[obs, actor_cache.output()])?;
        let critic_cache = self.critic.forward_cached(&input)?;
        let b = obs.rows() as f64;
        let loss = -critic_cache.output().data().iter().sum::<f64>() / b;
        let upstream = Tensor::new(vec![obs.rows(), 1], vec![-1.0 / b; obs.rows()])?;
        let (_, input_grad) = self.critic.backward(&critic_cache, &upstream)?;
        let grad_action = input_grad.columns(obs.cols(), obs.cols() + ACTION_DIM);
        let (grads, _) = self.actor.backward(&actor_cache, &grad_action)?;
        Ok((loss, grads))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, AgentError> {
        let obs_dim = ckpt.scalar("meta.obs_dim")? as usize;
        let hyper = read_hyper(ckpt)?;
        let aspec = actor_spec(obs_dim, &hyper.shared.hidden);
        let cspec = critic_spec(obs_dim, &hyper.shared.hidden);
        let (na, nc) = (aspec.param_shapes().len(), cspec.param_shapes().len());
        Ok(Self {
            actor: Mlp::from_params(aspec.clone(), ckpt.get_all("actor", na)?)?,
            actor_target: Mlp::from_params(aspec, ckpt.get_all("actor_target", na)?)?,
            critic: Mlp::from_params(cspec.clone(), ckpt.get_all("q1", nc)?)?,
            critic_target: Mlp::from_params(cspec, ckpt.get_all("q1_target", nc)?)?,
            actor_adam: read_adam(ckpt, "adam.actor", na)?,
            critic_adam: read_adam(ckpt, "adam.q1", nc)?,
            steps: ckpt.u64("meta.critic_steps")?,
            hyper,
        })
    }
}

impl Agent for DdpgAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Ddpg
    }

    fn obs_dim(&self) -> usize {
        self.actor.spec().input_width()
    }

    fn act(&self, obs: &[f64], rng: &mut dyn RngCore, explore: bool) -> Result<Action, AgentError> {
        self.select_action(obs, rng, explore)
    }

    fn train_step(&mut self, batch: &Batch, _rng: &mut dyn RngCore) -> Result<TrainLosses, AgentError> {
        let (critic, actor) = self.ddpg_train_step(batch)?;
        Ok(TrainLosses { critic, actor: Some(actor) })
    }

    fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.insert_scalar("meta.kind", AgentKind::Ddpg.code());
        c.insert_scalar("meta.obs_dim", self.obs_dim() as f64);
        c.insert_u64("meta.critic_steps", self.steps);
        write_hyper(&mut c, &self.hyper);
        c.insert_all("actor", self.actor.params());
        c.insert_all("actor_target", self.actor_target.params());
        c.insert_all("q1", self.critic.params());
        c.insert_all("q1_target", self.critic_target.params());
        write_adam(&mut c, "adam.actor", &self.actor_adam);
        write_adam(&mut c, "adam.q1", &self.critic_adam);
        c
    }
}
