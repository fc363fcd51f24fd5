use gdmwifi_core::env::{EnvConfig, Environment, Roster, StationMix, WlanEnv, OBS_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_config(rng: &mut ChaCha8Rng) -> EnvConfig {
    let n_min = rng.random_range(1..=40);
    let mix = StationMix {
        wifi6_fraction: rng.random_range(0.0..=1.0),
        tcp_fraction: rng.random_range(0.0..=1.0),
        saturated: rng.random_bool(0.5),
        offered_load_mbps: rng.random_range(1.0..60.0),
        ..StationMix::default()
    };
    let mut cfg = EnvConfig {
        roster: Roster::Generated { n_min, n_max: n_min + rng.random_range(0..=10), mix },
        interval_us: rng.random_range(2_000.0..20_000.0),
        burn_in_ampdu: rng.random_range(1..=64),
        ..EnvConfig::default()
    };
    cfg.sim.per = rng.random_range(0.0..0.3);
    cfg
}

#[test]
fn reset_features_are_finite_and_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let cfg = random_config(&mut rng);
        let mut env = WlanEnv::new(cfg).unwrap();
        let obs = env.reset(rng.random()).unwrap();
        assert_eq!(obs.len(), OBS_DIM);
        assert!(obs.iter().all(|v| v.is_finite()), "trial {trial}: {obs:?}");
        for &f in &obs[1..4] {
            assert!((0.0..=1.0).contains(&f), "trial {trial}: {obs:?}");
        }
        assert!((-1.0..=1.0).contains(&obs[5]) && (-1.0..=1.0).contains(&obs[6]));
    }
}
