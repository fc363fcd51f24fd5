use gdmwifi_core::agent::{AgentHyper, ChainNoise, DdpgAgent, GdmAgent};
use gdmwifi_core::nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hyper() -> AgentHyper {
    let mut h = AgentHyper::default();
    h.shared.hidden = vec![12, 12];
    h
}

fn random_obs(rng: &mut ChaCha8Rng, batch: usize, dim: usize) -> Tensor {
    Tensor::new(vec![batch, dim], (0..batch * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

#[test]
fn diffusion_chain_gradient_matches_finite_differences() {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut agent = GdmAgent::new(7, hyper(), &mut rng).unwrap();
        let obs = random_obs(&mut rng, 6, 7);
        let noise = ChainNoise::draw(6, agent.schedule().t_steps, true, &mut rng);
        let (_, grads) = agent.actor_loss_and_grads(&obs, &noise).unwrap();
        for _ in 0..50 {
            let t = rng.random_range(0..grads.len());
            let j = rng.random_range(0..grads[t].len());
            let orig = agent.actor.noise_net.params()[t].data()[j];
            agent.actor.noise_net.params_mut()[t].data_mut()[j] = orig + h;
            let plus = agent.actor_loss_and_grads(&obs, &noise).unwrap().0;
            agent.actor.noise_net.params_mut()[t].data_mut()[j] = orig - h;
            let minus = agent.actor_loss_and_grads(&obs, &noise).unwrap().0;
            agent.actor.noise_net.params_mut()[t].data_mut()[j] = orig;
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_err(grads[t].data()[j], fd));
        }
    }
    assert!(worst < 1e-3, "worst relative error {worst:e}");
}

#[test]
fn ddpg_actor_gradient_matches_finite_differences() {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut agent = DdpgAgent::new(7, hyper(), &mut rng).unwrap();
    let obs = random_obs(&mut rng, 6, 7);
    let (_, grads) = agent.actor_loss_and_grads(&obs).unwrap();
    for _ in 0..100 {
        let t = rng.random_range(0..grads.len());
        let j = rng.random_range(0..grads[t].len());
        let orig = agent.actor.params()[t].data()[j];
        agent.actor.params_mut()[t].data_mut()[j] = orig + h;
        let plus = agent.actor_loss_and_grads(&obs).unwrap().0;
        agent.actor.params_mut()[t].data_mut()[j] = orig - h;
        let minus = agent.actor_loss_and_grads(&obs).unwrap().0;
        agent.actor.params_mut()[t].data_mut()[j] = orig;
        worst = worst.max(rel_err(grads[t].data()[j], (plus - minus) / (2.0 * h)));
    }
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn sampled_actions_are_bounded_and_seeded() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agent = GdmAgent::new(7, hyper(), &mut rng).unwrap();
    // Blow up the weights so the chain saturates.
    for p in agent.actor.noise_net.params_mut() {
        for v in p.data_mut() {
            *v *= 25.0;
        }
    }
    let obs = random_obs(&mut rng, 64, 7);
    for stochastic in [false, true] {
        let a = agent.actor.sample_action(&obs, &mut ChaCha8Rng::seed_from_u64(8), stochastic).unwrap();
        let b = agent.actor.sample_action(&obs, &mut ChaCha8Rng::seed_from_u64(8), stochastic).unwrap();
        assert!(a.data().iter().all(|v| v.abs() < 1.0));
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
