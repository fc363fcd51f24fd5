//! Diffusion actor with TD3 machinery: twin critics, clipped double-Q
//! targets, target-policy smoothing, delayed actor updates and Polyak
//! averaged target networks.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::diffusion::{make_schedule, ChainNoise, DiffusionSchedule, GdmActor};
use super::{
    check_finite, mse_with_grad, obs_row, read_adam, write_adam, Action, Agent, AgentError, AgentHyper, AgentKind,
    Batch, TrainLosses, ACTION_DIM,
};
use crate::nn::{soft_update, Activation, AdamState, Checkpoint, Mlp, MlpSpec, OutputActivation, Tensor};

pub(crate) fn critic_spec(obs_dim: usize, hidden: &[usize]) -> MlpSpec {
    let mut widths = vec![obs_dim + ACTION_DIM];
    widths.extend_from_slice(hidden);
    widths.push(1);
    MlpSpec::new(widths, Activation::Relu, OutputActivation::None)
}

/// Two online critics `Q(obs ⊕ action)` and their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub polyak: f64,
}

impl CriticPair {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], polyak: f64, rng: &mut R) -> Result<Self, AgentError> {
        let spec = critic_spec(obs_dim, hidden);
        let q1 = Mlp::new(spec.clone(), rng)?;
        let q2 = Mlp::new(spec, rng)?;
        Ok(Self { q1_target: q1.clone(), q2_target: q2.clone(), q1, q2, polyak })
    }

    pub fn soft_update(&mut self) -> Result<(), AgentError> {
        soft_update(self.q1.params(), self.q1_target.params_mut(), self.polyak)?;
        soft_update(self.q2.params(), self.q2_target.params_mut(), self.polyak)?;
        Ok(())
    }
}

pub struct GdmAgent {
    pub actor: GdmActor,
    pub actor_target: GdmActor,
    pub critics: CriticPair,
    pub hyper: AgentHyper,
    actor_adam: AdamState,
    q1_adam: AdamState,
    q2_adam: AdamState,
    critic_steps: u64,
}

impl GdmAgent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hyper: AgentHyper, rng: &mut R) -> Result<Self, AgentError> {
        hyper.validate()?;
        let schedule = make_schedule(hyper.gdm.t_steps, hyper.gdm.beta_min, hyper.gdm.beta_max)?;
        let actor = GdmActor::new(obs_dim, &hyper.shared.hidden, schedule, rng)?;
        let critics = CriticPair::new(obs_dim, &hyper.shared.hidden, hyper.shared.polyak, rng)?;
        Ok(Self::assemble(actor, critics, hyper))
    }

    fn assemble(actor: GdmActor, critics: CriticPair, hyper: AgentHyper) -> Self {
        let actor_adam = AdamState::new(actor.noise_net.params(), hyper.shared.actor_lr);
        let q1_adam = AdamState::new(critics.q1.params(), hyper.shared.critic_lr);
        let q2_adam = AdamState::new(critics.q2.params(), hyper.shared.critic_lr);
        Self { actor_target: actor.clone(), actor, critics, hyper, actor_adam, q1_adam, q2_adam, critic_steps: 0 }
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.actor.schedule
    }

    /// One TD step on both critics. Returns the mean of their MSE losses.
    pub fn critic_train_step(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<f64, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Config("empty batch".into()));
        }
        let targets = self.td_targets(batch, rng)?;
        let input = Tensor::hcat(&[&batch.obs, &batch.actions])?;
        let c1 = self.critics.q1.forward_cached(&input)?;
        let c2 = self.critics.q2.forward_cached(&input)?;
        let (l1, g1) = mse_with_grad(c1.output(), &targets);
        let (l2, g2) = mse_with_grad(c2.output(), &targets);
        let loss = check_finite("critic loss", 0.5 * (l1 + l2))?;
        let (grads1, _) = self.critics.q1.backward(&c1, &g1)?;
        let (grads2, _) = self.critics.q2.backward(&c2, &g2)?;
        self.q1_adam.step(self.critics.q1.params_mut(), &grads1)?;
        self.q2_adam.step(self.critics.q2.params_mut(), &grads2)?;
        self.critic_steps += 1;
        Ok(loss)
    }

    /// `y = r + gamma (1 - done) min(Q1', Q2')(s', a')` with a smoothed
    /// target-actor action `a'`.
    pub fn td_targets(&self, batch: &Batch, rng: &mut dyn RngCore) -> Result<Vec<f64>, AgentError> {
        let g = &self.hyper.gdm;
        let mut next_actions = self.actor_target.sample_action(&batch.next_obs, rng, false)?;
        for a in next_actions.data_mut() {
            let eps: f64 = rng.sample::<f64, _>(StandardNormal) * g.target_noise_std;
            *a = (*a + eps.clamp(-g.target_noise_clip, g.target_noise_clip)).clamp(-1.0, 1.0);
        }
        let input = Tensor::hcat(&[&batch.next_obs, &next_actions])?;
        let q1 = self.critics.q1_target.forward(&input)?;
        let q2 = self.critics.q2_target.forward(&input)?;
        let gamma = self.hyper.shared.gamma;
        Ok((0..batch.len())
            .map(|i| batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * q1.data()[i].min(q2.data()[i]))
            .collect())
    }

    /// `-mean Q1(s, actor(s))` under fixed chain noise, with noise-net gradients.
    pub fn actor_loss_and_grads(&self, obs: &Tensor, noise: &ChainNoise) -> Result<(f64, Vec<Tensor>), AgentError> {
        let trace = self.actor.run_chain(obs, noise)?;
        let input = Tensor::hcat(&[obs, &trace.action])?;
        let cache = self.critics.q1.forward_cached(&input)?;
        let b = obs.rows() as f64;
        let loss = -cache.output().data().iter().sum::<f64>() / b;
        let upstream = Tensor::new(vec![obs.rows(), 1], vec![-1.0 / b; obs.rows()])?;
        let (_, input_grad) = self.critics.q1.backward(&cache, &upstream)?;
        let obs_dim = obs.cols();
        let grad_action = input_grad.columns(obs_dim, obs_dim + ACTION_DIM);
        let grads = self.actor.backward_chain(&trace, &grad_action)?;
        Ok((loss, grads))
    }

    /// Actor step through the reparameterized chain, then Polyak updates of
    /// every target network.
    pub fn actor_train_step(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<f64, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Config("empty batch".into()));
        }
        let noise = ChainNoise::draw(batch.len(), self.actor.schedule.t_steps, true, rng);
        let (loss, grads) = self.actor_loss_and_grads(&batch.obs, &noise)?;
        check_finite("actor loss", loss)?;
        self.actor_adam.step(self.actor.noise_net.params_mut(), &grads)?;
        self.update_targets()?;
        Ok(loss)
    }

    pub fn update_targets(&mut self) -> Result<(), AgentError> {
        soft_update(
            self.actor.noise_net.params(),
            self.actor_target.noise_net.params_mut(),
            self.critics.polyak,
        )?;
        self.critics.soft_update()
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, AgentError> {
        let obs_dim = ckpt.scalar("meta.obs_dim")? as usize;
        let hyper = read_hyper(ckpt)?;
        let schedule = make_schedule(hyper.gdm.t_steps, hyper.gdm.beta_min, hyper.gdm.beta_max)?;
        let stored = ckpt.get("schedule.betas")?;
        if stored.data() != schedule.betas.as_slice() {
            return Err(AgentError::Config("checkpoint schedule disagrees with its hyperparameters".into()));
        }
        let mut actor_widths = vec![obs_dim + ACTION_DIM + super::EMBED_DIM];
        actor_widths.extend_from_slice(&hyper.shared.hidden);
        actor_widths.push(ACTION_DIM);
        let actor_spec = MlpSpec::new(actor_widths, Activation::Silu, OutputActivation::None);
        let n_actor = actor_spec.param_shapes().len();
        let cspec = critic_spec(obs_dim, &hyper.shared.hidden);
        let n_critic = cspec.param_shapes().len();
        let net = |name: &str, spec: &MlpSpec, n: usize| -> Result<Mlp, AgentError> {
            Ok(Mlp::from_params(spec.clone(), ckpt.get_all(name, n)?)?)
        };
        let actor = GdmActor::from_net(net("actor", &actor_spec, n_actor)?, schedule.clone(), obs_dim)?;
        let actor_target = GdmActor::from_net(net("actor_target", &actor_spec, n_actor)?, schedule, obs_dim)?;
        let critics = CriticPair {
            q1: net("q1", &cspec, n_critic)?,
            q2: net("q2", &cspec, n_critic)?,
            q1_target: net("q1_target", &cspec, n_critic)?,
            q2_target: net("q2_target", &cspec, n_critic)?,
            polyak: hyper.shared.polyak,
        };
        Ok(Self {
            actor,
            actor_target,
            critics,
            actor_adam: read_adam(ckpt, "adam.actor", n_actor)?,
            q1_adam: read_adam(ckpt, "adam.q1", n_critic)?,
            q2_adam: read_adam(ckpt, "adam.q2", n_critic)?,
            critic_steps: ckpt.u64("meta.critic_steps")?,
            hyper,
        })
    }
}

impl Agent for GdmAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Gdm
    }

    fn obs_dim(&self) -> usize {
        self.actor.obs_dim
    }

    fn act(&self, obs: &[f64], rng: &mut dyn RngCore, explore: bool) -> Result<Action, AgentError> {
        let out = self.actor.sample_action(&obs_row(obs), rng, explore)?;
        let mut action = [out.data()[0], out.data()[1]];
        if explore && self.hyper.gdm.additive_exploration {
            for a in &mut action {
                let eps: f64 = rng.sample(StandardNormal);
                *a = (*a + eps * self.hyper.gdm.exploration_noise_std).clamp(-1.0, 1.0);
            }
        }
        Ok(action)
    }

    fn train_step(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<TrainLosses, AgentError> {
        let critic = self.critic_train_step(batch, rng)?;
        let actor = if self.critic_steps % self.hyper.gdm.policy_delay as u64 == 0 {
            Some(self.actor_train_step(batch, rng)?)
        } else {
            None
        };
        Ok(TrainLosses { critic, actor })
    }

    fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.insert_scalar("meta.kind", AgentKind::Gdm.code());
        c.insert_scalar("meta.obs_dim", self.actor.obs_dim as f64);
        c.insert_u64("meta.critic_steps", self.critic_steps);
        write_hyper(&mut c, &self.hyper);
        c.insert("schedule.betas", Tensor::new(vec![self.actor.schedule.t_steps], self.actor.schedule.betas.clone()).expect("finite"));
        c.insert_all("actor", self.actor.noise_net.params());
        c.insert_all("actor_target", self.actor_target.noise_net.params());
        c.insert_all("q1", self.critics.q1.params());
        c.insert_all("q2", self.critics.q2.params());
        c.insert_all("q1_target", self.critics.q1_target.params());
        c.insert_all("q2_target", self.critics.q2_target.params());
        write_adam(&mut c, "adam.actor", &self.actor_adam);
        write_adam(&mut c, "adam.q1", &self.q1_adam);
        write_adam(&mut c, "adam.q2", &self.q2_adam);
        c
    }
}

pub(crate) fn write_hyper(c: &mut Checkpoint, h: &AgentHyper) {
    let s = &h.shared;
    let hidden: Vec<f64> = s.hidden.iter().map(|&w| w as f64).collect();
    c.insert("hyper.hidden", Tensor::new(vec![hidden.len()], hidden).expect("finite"));
    for (k, v) in [
        ("gamma", s.gamma),
        ("actor_lr", s.actor_lr),
        ("critic_lr", s.critic_lr),
        ("batch_size", s.batch_size as f64),
        ("buffer_capacity", s.buffer_capacity as f64),
        ("polyak", s.polyak),
        ("gdm.t_steps", h.gdm.t_steps as f64),
        ("gdm.beta_min", h.gdm.beta_min),
        ("gdm.beta_max", h.gdm.beta_max),
        ("gdm.policy_delay", h.gdm.policy_delay as f64),
        ("gdm.target_noise_std", h.gdm.target_noise_std),
        ("gdm.target_noise_clip", h.gdm.target_noise_clip),
        ("gdm.exploration_noise_std", h.gdm.exploration_noise_std),
        ("gdm.additive_exploration", if h.gdm.additive_exploration { 1.0 } else { 0.0 }),
        ("ddpg.exploration_noise_std", h.ddpg.exploration_noise_std),
    ] {
        c.insert_scalar(format!("hyper.{k}"), v);
    }
}

pub(crate) fn read_hyper(c: &Checkpoint) -> Result<AgentHyper, AgentError> {
    let f = |k: &str| c.scalar(&format!("hyper.{k}"));
    let mut h = AgentHyper::default();
    h.shared.hidden = c.get("hyper.hidden")?.data().iter().map(|&w| w as usize).collect();
    h.shared.gamma = f("gamma")?;
    h.shared.actor_lr = f("actor_lr")?;
    h.shared.critic_lr = f("critic_lr")?;
    h.shared.batch_size = f("batch_size")? as usize;
    h.shared.buffer_capacity = f("buffer_capacity")? as usize;
    h.shared.polyak = f("polyak")?;
    h.gdm.t_steps = f("gdm.t_steps")? as usize;
    h.gdm.beta_min = f("gdm.beta_min")?;
    h.gdm.beta_max = f("gdm.beta_max")?;
    h.gdm.policy_delay = f("gdm.policy_delay")? as usize;
    h.gdm.target_noise_std = f("gdm.target_noise_std")?;
    h.gdm.target_noise_clip = f("gdm.target_noise_clip")?;
    h.gdm.exploration_noise_std = f("gdm.exploration_noise_std")?;
    h.gdm.additive_exploration = f("gdm.additive_exploration")? != 0.0;
    h.ddpg.exploration_noise_std = f("ddpg.exploration_noise_std")?;
    h.validate()?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Transition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_hyper() -> AgentHyper {
        let mut h = AgentHyper::default();
        h.shared.hidden = vec![16, 16];
        h.shared.batch_size = 8;
        h
    }

    fn batch(reward: f64, done: bool) -> Batch {
        let t = Transition { obs: vec![0.3, -0.2], action: [0.5, -0.5], reward, next_obs: vec![0.1, 0.4], done };
        Batch::from_transitions(&vec![&t; 8])
    }

    #[test]
    fn gamma_zero_critic_regresses_to_reward() {
        let mut h = small_hyper();
        h.shared.gamma = 0.0;
        h.shared.critic_lr = 3e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = GdmAgent::new(2, h, &mut rng).unwrap();
        let b = batch(0.7, false);
        for _ in 0..2000 {
            agent.critic_train_step(&b, &mut rng).unwrap();
        }
        let q = agent.critics.q1.forward(&Tensor::hcat(&[&b.obs, &b.actions]).unwrap()).unwrap();
        assert!((q.data()[0] - 0.7).abs() < 1e-3, "q = {}", q.data()[0]);
    }

    #[test]
    fn terminal_transitions_do_not_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let agent = GdmAgent::new(2, small_hyper(), &mut rng).unwrap();
        let y = agent.td_targets(&batch(0.25, true), &mut rng).unwrap();
        assert!(y.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn clipped_double_q_takes_the_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let agent = GdmAgent::new(2, small_hyper(), &mut rng).unwrap();
        let b = batch(0.0, false);
        let gamma = agent.hyper.shared.gamma;
        // Rebuild the smoothed target action with the same stream.
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let y = agent.td_targets(&b, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let mut a = agent.actor_target.sample_action(&b.next_obs, &mut r2, false).unwrap();
        let g = &agent.hyper.gdm;
        for v in a.data_mut() {
            let eps: f64 = r2.sample::<f64, _>(StandardNormal) * g.target_noise_std;
            *v = (*v + eps.clamp(-g.target_noise_clip, g.target_noise_clip)).clamp(-1.0, 1.0);
        }
        let input = Tensor::hcat(&[&b.next_obs, &a]).unwrap();
        let q1 = agent.critics.q1_target.forward(&input).unwrap();
        let q2 = agent.critics.q2_target.forward(&input).unwrap();
        for i in 0..b.len() {
            assert!(y[i] <= gamma * q1.data()[i] + 1e-15);
            assert!(y[i] <= gamma * q2.data()[i] + 1e-15);
        }
    }

    #[test]
    fn constant_critic_freezes_actor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = GdmAgent::new(2, small_hyper(), &mut rng).unwrap();
        let last = agent.critics.q1.params().len() - 2;
        agent.critics.q1.params_mut()[last].data_mut().fill(0.0);
        let before = agent.actor.noise_net.clone();
        agent.actor_train_step(&batch(1.0, false), &mut rng).unwrap();
        assert_eq!(agent.actor.noise_net, before);
    }

    #[test]
    fn full_polyak_copies_online_nets() {
        let mut h = small_hyper();
        h.shared.polyak = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = GdmAgent::new(2, h, &mut rng).unwrap();
        let b = batch(1.0, false);
        agent.critic_train_step(&b, &mut rng).unwrap();
        agent.actor_train_step(&b, &mut rng).unwrap();
        assert_eq!(agent.actor_target.noise_net, agent.actor.noise_net);
        assert_eq!(agent.critics.q1_target, agent.critics.q1);
        assert_eq!(agent.critics.q2_target, agent.critics.q2);
    }

    #[test]
    fn actor_updates_respect_policy_delay() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut agent = GdmAgent::new(2, small_hyper(), &mut rng).unwrap();
        let b = batch(1.0, false);
        let pattern: Vec<bool> = (0..4).map(|_| agent.train_step(&b, &mut rng).unwrap().actor.is_some()).collect();
        assert_eq!(pattern, vec![false, true, false, true]);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut agent = GdmAgent::new(2, small_hyper(), &mut rng).unwrap();
        let b = batch(0.5, false);
        for _ in 0..3 {
            agent.train_step(&b, &mut rng).unwrap();
        }
        let ckpt = agent.to_checkpoint();
        let restored = GdmAgent::from_checkpoint(&Checkpoint::from_bytes(&ckpt.to_bytes()).unwrap()).unwrap();
        assert_eq!(restored.to_checkpoint(), ckpt);
    }
}
