use gdmwifi_core::nn::{Activation, Mlp, MlpSpec, OutputActivation, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spec(rng: &mut ChaCha8Rng) -> MlpSpec {
    let depth = rng.random_range(2..=4);
    let widths = (0..depth).map(|_| rng.random_range(1..=7)).collect();
    let activation = [Activation::Relu, Activation::Tanh, Activation::Silu][rng.random_range(0..3)];
    let output = if rng.random_bool(0.5) { OutputActivation::Tanh } else { OutputActivation::None };
    MlpSpec::new(widths, activation, output)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

/// Straight-line forward pass written against the raw parameter layout.
fn reference_forward(spec: &MlpSpec, params: &[Tensor], x: &[f64]) -> Vec<f64> {
    let mut act = x.to_vec();
    let layers = spec.layer_widths.len() - 1;
    for l in 0..layers {
        let (fan_in, fan_out) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
        let w = params[2 * l].data();
        let b = params[2 * l + 1].data();
        let mut next = vec![0.0; fan_out];
        for o in 0..fan_out {
            let mut z = b[o];
            for i in 0..fan_in {
                z += w[o * fan_in + i] * act[i];
            }
            next[o] = if l + 1 == layers {
                match spec.output_activation {
                    OutputActivation::None => z,
                    OutputActivation::Tanh => z.tanh(),
                }
            } else {
                match spec.activation {
                    Activation::Relu => {
                        if z > 0.0 {
                            z
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => z.tanh(),
                    Activation::Silu => z / (1.0 + (-z).exp()),
                }
            };
        }
        act = next;
    }
    act
}

fn weighted_loss(spec: &MlpSpec, params: &[Tensor], x: &Tensor, up: &Tensor) -> f64 {
    (0..x.rows())
        .map(|r| {
            reference_forward(spec, params, x.row(r)).iter().zip(up.row(r)).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn forward_matches_reference_implementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let spec = MlpSpec::new(vec![4, 9, 6, 3], Activation::Silu, OutputActivation::None);
        let net = Mlp::new(spec.clone(), &mut rng).unwrap();
        let x = random_matrix(&mut rng, 5, 4);
        let out = net.forward(&x).unwrap();
        for r in 0..5 {
            let expected = reference_forward(&spec, net.params(), x.row(r));
            for (a, b) in out.row(r).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let spec = random_spec(&mut rng);
        let net = Mlp::new(spec.clone(), &mut rng).unwrap();
        let batch = rng.random_range(1..=4);
        let x = random_matrix(&mut rng, batch, spec.input_width());
        let up = random_matrix(&mut rng, batch, spec.output_width());
        let (grads, gx) = net.gradients(&x, &up).unwrap();
        for _ in 0..100 {
            let mut params = net.params().to_vec();
            let t = rng.random_range(0..params.len());
            let j = rng.random_range(0..params[t].len());
            let orig = params[t].data()[j];
            params[t].data_mut()[j] = orig + h;
            let plus = weighted_loss(&spec, &params, &x, &up);
            params[t].data_mut()[j] = orig - h;
            let minus = weighted_loss(&spec, &params, &x, &up);
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_err(grads[t].data()[j], fd));
        }
        // Input gradient too.
        for j in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[j] += h;
            let mut xm = x.clone();
            xm.data_mut()[j] -= h;
            let fd = (weighted_loss(&spec, net.params(), &xp, &up) - weighted_loss(&spec, net.params(), &xm, &up))
                / (2.0 * h);
            worst = worst.max(rel_err(gx.data()[j], fd));
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}
