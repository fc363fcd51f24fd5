use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Silu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    None,
    Tanh,
}

/// Layer widths from input to output, with one hidden activation shared by
/// every hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, output_activation: OutputActivation) -> Self {
        Self { layer_widths, activation, output_activation }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_widths.len() < 2 {
            return Err(NnError::Shape("an MLP needs at least input and output widths".into()));
        }
        if self.layer_widths.contains(&0) {
            return Err(NnError::Shape(format!("zero-width layer in {:?}", self.layer_widths)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated")
    }

    pub fn layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// Parameter shapes in storage order: `W0 [out, in], b0 [out], W1, b1, ...`.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.layer_widths
            .windows(2)
            .flat_map(|w| [vec![w[1], w[0]], vec![w[1]]])
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Silu => z * sigmoid(z),
        }
    }

    /// Derivative at pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Silu => {
                let s = sigmoid(z);
                s * (1.0 + z * (1.0 - s))
            }
        }
    }
}

/// Per-layer values a backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Tensor>,
    /// Pre-activation of every layer.
    pre: Vec<Tensor>,
    output: Tensor,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

/// A multilayer perceptron: spec plus its parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<Tensor>,
}

impl Mlp {
    /// Weights and biases uniform in `±sqrt(1 / fan_in)`.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self, NnError> {
        spec.validate()?;
        let params = spec
            .layer_widths
            .windows(2)
            .flat_map(|w| {
                let bound = (1.0 / w[0] as f64).sqrt();
                [vec![w[1], w[0]], vec![w[1]]]
                    .into_iter()
                    .map(|shape| {
                        let len = shape.iter().product();
                        let data = (0..len).map(|_| rng.random_range(-bound..=bound)).collect();
                        Tensor::new(shape, data).expect("finite init")
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<Tensor>) -> Result<Self, NnError> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() {
            return Err(NnError::Shape(format!("expected {} parameter tensors, got {}", shapes.len(), params.len())));
        }
        for (i, (shape, p)) in shapes.iter().zip(&params).enumerate() {
            if p.shape() != shape.as_slice() {
                return Err(NnError::Shape(format!(
                    "layer {} {}: expected {shape:?}, got {:?}",
                    i / 2,
                    if i % 2 == 0 { "weight" } else { "bias" },
                    p.shape()
                )));
            }
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(Tensor::zeros_like).collect()
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        Ok(self.forward_cached(input)?.output)
    }

    pub fn forward_cached(&self, input: &Tensor) -> Result<ForwardCache, NnError> {
        if input.shape().len() != 2 || input.cols() != self.spec.input_width() {
            return Err(NnError::Shape(format!(
                "layer 0 expects [batch, {}] input, got {:?}",
                self.spec.input_width(),
                input.shape()
            )));
        }
        let layers = self.spec.layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut x = input.clone();
        for layer in 0..layers {
            let z = linear(&x, &self.params[2 * layer], &self.params[2 * layer + 1]);
            let last = layer + 1 == layers;
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = if last {
                    match self.spec.output_activation {
                        OutputActivation::None => *v,
                        OutputActivation::Tanh => v.tanh(),
                    }
                } else {
                    self.spec.activation.apply(*v)
                };
            }
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok(ForwardCache { inputs, pre, output: x })
    }

    /// Parameter gradients and input gradient for `sum(upstream * output)`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Tensor) -> Result<(Vec<Tensor>, Tensor), NnError> {
        if upstream.shape() != cache.output.shape() {
            return Err(NnError::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                cache.output.shape()
            )));
        }
        let layers = self.spec.layers();
        let mut grads = self.zero_grads();
        let mut delta = upstream.clone();
        for layer in (0..layers).rev() {
            let z = &cache.pre[layer];
            if layer + 1 == layers {
                if self.spec.output_activation == OutputActivation::Tanh {
                    for (d, y) in delta.data_mut().iter_mut().zip(cache.output.data()) {
                        *d *= 1.0 - y * y;
                    }
                }
            } else {
                for (d, &zv) in delta.data_mut().iter_mut().zip(z.data()) {
                    *d *= self.spec.activation.derivative(zv);
                }
            }
            let x = &cache.inputs[layer];
            let w = &self.params[2 * layer];
            let (gw, rest) = grads[2 * layer..].split_at_mut(1);
            accumulate_weight_grad(&mut gw[0], &mut rest[0], &delta, x);
            delta = propagate(&delta, w);
        }
        Ok((grads, delta))
    }

    /// Recompute the forward pass on `input` and backpropagate `upstream`.
    pub fn gradients(&self, input: &Tensor, upstream: &Tensor) -> Result<(Vec<Tensor>, Tensor), NnError> {
        let cache = self.forward_cached(input)?;
        self.backward(&cache, upstream)
    }
}

/// `x W^T + b` for `x: [batch, in]`, `W: [out, in]`.
fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (batch, fan_in) = (x.rows(), x.cols());
    let fan_out = w.shape()[0];
    let mut out = Tensor::zeros(vec![batch, fan_out]);
    let wd = w.data();
    for r in 0..batch {
        let xr = x.row(r);
        let orow = out.row_mut(r);
        for (o, (slot, bias)) in orow.iter_mut().zip(b.data()).enumerate() {
            let wr = &wd[o * fan_in..(o + 1) * fan_in];
            *slot = bias + wr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    out
}

fn accumulate_weight_grad(gw: &mut Tensor, gb: &mut Tensor, delta: &Tensor, x: &Tensor) {
    let fan_in = x.cols();
    let gwd = gw.data_mut();
    let gbd = gb.data_mut();
    for r in 0..delta.rows() {
        let xr = x.row(r);
        for (o, &d) in delta.row(r).iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gbd[o] += d;
            for (g, xv) in gwd[o * fan_in..(o + 1) * fan_in].iter_mut().zip(xr) {
                *g += d * xv;
            }
        }
    }
}

/// `delta W` : gradient with respect to the layer input.
fn propagate(delta: &Tensor, w: &Tensor) -> Tensor {
    let fan_in = w.shape()[1];
    let wd = w.data();
    let mut out = Tensor::zeros(vec![delta.rows(), fan_in]);
    for r in 0..delta.rows() {
        let orow = out.row_mut(r);
        for (o, &d) in delta.row(r).iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (slot, wv) in orow.iter_mut().zip(&wd[o * fan_in..(o + 1) * fan_in]) {
                *slot += d * wv;
            }
        }
    }
    out
}
