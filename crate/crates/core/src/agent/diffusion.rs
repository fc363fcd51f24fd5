//! Conditional denoising-diffusion actor.
//!
//! Sampling starts from `x_T ~ N(0, I)` and applies, for `t = T, ..., 1`,
//!
//! ```text
//! x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps(obs, x_t, t)) / sqrt(alpha_t) + sigma_t z
//! ```
//!
//! with `sigma_t = sqrt(beta_t)` and `z ~ N(0, I)` only when sampling
//! stochastically and `t > 1`. The action is `tanh(x_0)`; intermediate
//! states are left unbounded.
//!
//! All randomness is drawn up front into a [`ChainNoise`], so the chain is a
//! deterministic, differentiable function of the noise-net parameters once
//! the noise is fixed.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{AgentError, ACTION_DIM};
use crate::nn::{Activation, ForwardCache, Mlp, MlpSpec, OutputActivation, Tensor};

/// `tanh` rounds to exactly 1 beyond |x| ~ 19; actions stay strictly inside.
const MAX_ACTION: f64 = 1.0 - f64::EPSILON;

/// Width of the sinusoidal timestep embedding.
pub const EMBED_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    pub t_steps: usize,
    /// `betas[t - 1]` is `beta_t`.
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

/// Linearly spaced betas from `beta_min` to `beta_max`.
pub fn make_schedule(t_steps: usize, beta_min: f64, beta_max: f64) -> Result<DiffusionSchedule, AgentError> {
    if t_steps == 0 {
        return Err(AgentError::Config("diffusion needs at least one step".into()));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(AgentError::Config(format!(
            "need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
        )));
    }
    let betas: Vec<f64> = (0..t_steps)
        .map(|i| {
            if t_steps == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * i as f64 / (t_steps - 1) as f64
            }
        })
        .collect();
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let alpha_bars: Vec<f64> = alphas
        .iter()
        .scan(1.0, |acc, a| {
            *acc *= a;
            Some(*acc)
        })
        .collect();
    assert!(alpha_bars.windows(2).all(|w| w[1] < w[0]), "alpha_bar must strictly decrease");
    Ok(DiffusionSchedule { t_steps, betas, alphas, alpha_bars })
}

impl DiffusionSchedule {
    fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    /// Coefficient on the predicted noise, `beta_t / sqrt(1 - alpha_bar_t)`.
    fn eps_coeff(&self, t: usize) -> f64 {
        self.beta(t) / (1.0 - self.alpha_bar(t)).sqrt()
    }
}

/// `[sin(w_k s), cos(w_k s)]` for `s = t / T` and `w_k = 100^(k / 7)`,
/// `k = 0..8`.
pub fn timestep_embedding(t: usize, t_steps: usize) -> [f64; EMBED_DIM] {
    let s = t as f64 / t_steps as f64;
    let mut out = [0.0; EMBED_DIM];
    for k in 0..EMBED_DIM / 2 {
        let w = 100f64.powf(k as f64 / (EMBED_DIM / 2 - 1) as f64);
        out[2 * k] = (w * s).sin();
        out[2 * k + 1] = (w * s).cos();
    }
    out
}

/// Every random draw one sampling pass consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainNoise {
    pub x_t: Tensor,
    /// `z[t - 2]` is injected at step `t` (`t >= 2`). Empty when sampling
    /// deterministically.
    pub z: Vec<Tensor>,
}

impl ChainNoise {
    /// Draws `x_T` first, then `z_T, ..., z_2` when `stochastic`.
    pub fn draw<R: Rng + ?Sized>(batch: usize, t_steps: usize, stochastic: bool, rng: &mut R) -> Self {
        let normal = |rng: &mut R| {
            let data = (0..batch * ACTION_DIM).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            Tensor::new(vec![batch, ACTION_DIM], data).expect("finite normals")
        };
        let x_t = normal(rng);
        let mut z = Vec::new();
        if stochastic {
            // Stored in draw order t = T..2, then flipped so z[t - 2] is step t.
            for _ in (2..=t_steps).rev() {
                z.push(normal(rng));
            }
            z.reverse();
        }
        Self { x_t, z }
    }

    pub fn zeros(batch: usize) -> Self {
        Self { x_t: Tensor::zeros(vec![batch, ACTION_DIM]), z: Vec::new() }
    }
}

/// Intermediate values of one sampling pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    /// Noise-net caches in execution order, `t = T` first.
    caches: Vec<ForwardCache>,
    pub x0: Tensor,
    pub action: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdmActor {
    pub noise_net: Mlp,
    pub schedule: DiffusionSchedule,
    pub obs_dim: usize,
}

impl GdmActor {
    /// Noise net `obs ⊕ x_t ⊕ emb(t) -> hidden (SiLU) -> ACTION_DIM`.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        schedule: DiffusionSchedule,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        let mut widths = vec![obs_dim + ACTION_DIM + EMBED_DIM];
        widths.extend_from_slice(hidden);
        widths.push(ACTION_DIM);
        let spec = MlpSpec::new(widths, Activation::Silu, OutputActivation::None);
        Ok(Self { noise_net: Mlp::new(spec, rng)?, schedule, obs_dim })
    }

    pub fn from_net(noise_net: Mlp, schedule: DiffusionSchedule, obs_dim: usize) -> Result<Self, AgentError> {
        let spec = noise_net.spec();
        if spec.input_width() != obs_dim + ACTION_DIM + EMBED_DIM || spec.output_width() != ACTION_DIM {
            return Err(AgentError::Config(format!(
                "noise net widths {:?} do not fit obs_dim {obs_dim}",
                spec.layer_widths
            )));
        }
        Ok(Self { noise_net, schedule, obs_dim })
    }

    /// Run the reverse chain on `obs` (`[batch, obs_dim]`) with fixed noise.
    pub fn run_chain(&self, obs: &Tensor, noise: &ChainNoise) -> Result<ChainTrace, AgentError> {
        let batch = obs.rows();
        if obs.cols() != self.obs_dim || noise.x_t.rows() != batch {
            return Err(AgentError::Config(format!(
                "actor expects [{batch}, {}] observations, got {:?}",
                self.obs_dim,
                obs.shape()
            )));
        }
        let t_steps = self.schedule.t_steps;
        let mut x = noise.x_t.clone();
        let mut caches = Vec::with_capacity(t_steps);
        for t in (1..=t_steps).rev() {
            let emb = timestep_embedding(t, t_steps);
            let mut input = Tensor::zeros(vec![batch, self.obs_dim + ACTION_DIM + EMBED_DIM]);
            for r in 0..batch {
                let row = input.row_mut(r);
                row[..self.obs_dim].copy_from_slice(obs.row(r));
                row[self.obs_dim..self.obs_dim + ACTION_DIM].copy_from_slice(x.row(r));
                row[self.obs_dim + ACTION_DIM..].copy_from_slice(&emb);
            }
            let cache = self.noise_net.forward_cached(&input)?;
            let c = self.schedule.eps_coeff(t);
            let inv_sqrt_alpha = 1.0 / self.schedule.alpha(t).sqrt();
            let eps = cache.output().data();
            for (j, xv) in x.data_mut().iter_mut().enumerate() {
                *xv = (*xv - c * eps[j]) * inv_sqrt_alpha;
            }
            if t > 1 {
                if let Some(z) = noise.z.get(t - 2) {
                    let sigma = self.schedule.beta(t).sqrt();
                    for (xv, zv) in x.data_mut().iter_mut().zip(z.data()) {
                        *xv += sigma * zv;
                    }
                }
            }
            caches.push(cache);
        }
        let mut action = x.clone();
        for v in action.data_mut() {
            *v = v.tanh().clamp(-MAX_ACTION, MAX_ACTION);
        }
        if !action.all_finite() {
            return Err(AgentError::Numeric("diffusion chain produced a non-finite action".into()));
        }
        Ok(ChainTrace { caches, x0: x, action })
    }

    /// Draw fresh noise from `rng` and sample actions in `(-1, 1)^2`.
    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &Tensor, rng: &mut R, stochastic: bool) -> Result<Tensor, AgentError> {
        let noise = ChainNoise::draw(obs.rows(), self.schedule.t_steps, stochastic, rng);
        Ok(self.run_chain(obs, &noise)?.action)
    }

    /// Noise-net parameter gradients of `sum(grad_action * action)`.
    pub fn backward_chain(&self, trace: &ChainTrace, grad_action: &Tensor) -> Result<Vec<crate::nn::Tensor>, AgentError> {
        let t_steps = self.schedule.t_steps;
        let mut grads = self.noise_net.zero_grads();
        // d/dx_0 through the tanh squash.
        let mut g = grad_action.clone();
        for (gv, a) in g.data_mut().iter_mut().zip(trace.action.data()) {
            *gv *= 1.0 - a * a;
        }
        // caches[0] is t = T, so step t lives at index T - t.
        for t in 1..=t_steps {
            let cache = &trace.caches[t_steps - t];
            let inv_sqrt_alpha = 1.0 / self.schedule.alpha(t).sqrt();
            let mut upstream = g.clone();
            upstream.scale(-self.schedule.eps_coeff(t) * inv_sqrt_alpha);
            let (layer_grads, input_grad) = self.noise_net.backward(cache, &upstream)?;
            for (acc, lg) in grads.iter_mut().zip(&layer_grads) {
                acc.add_assign(lg);
            }
            for r in 0..g.rows() {
                let through_eps = &input_grad.row(r)[self.obs_dim..self.obs_dim + ACTION_DIM];
                for (gv, e) in g.row_mut(r).iter_mut().zip(through_eps) {
                    *gv = *gv * inv_sqrt_alpha + e;
                }
            }
        }
        Ok(grads)
    }
}
