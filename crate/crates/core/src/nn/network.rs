use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::init::{gaussian_vec, InitSpec};
use super::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Softmax,
    /// Forward-only quantizer with sign(0) = +1.
    Sign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Shape and options of one dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub bias: bool,
    pub batch_norm: bool,
    /// Straight-through gradient for `Sign` layers (identity on [-1, 1]).
    pub ste: bool,
}

impl LayerSpec {
    pub fn new(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            activation,
            bias: true,
            batch_norm: false,
            ste: false,
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn with_batch_norm(mut self) -> Self {
        self.batch_norm = true;
        self
    }

    pub fn with_ste(mut self) -> Self {
        self.ste = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: 0.1,
            epsilon: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub spec: LayerSpec,
    /// outputs × inputs
    pub weights: Tensor,
    pub bias: Vec<f64>,
    pub bn: Option<BatchNorm>,
}

impl DenseLayer {
    pub fn new(spec: LayerSpec, weights: Tensor, bias: Vec<f64>) -> Result<Self> {
        if weights.shape() != (spec.outputs, spec.inputs) || bias.len() != spec.outputs {
            return Err(Error::Shape(format!(
                "layer {}->{} got weights {:?} and bias {}",
                spec.inputs,
                spec.outputs,
                weights.shape(),
                bias.len()
            )));
        }
        let bn = spec.batch_norm.then(|| BatchNorm::new(spec.outputs));
        Ok(Self {
            spec,
            weights,
            bias,
            bn,
        })
    }
}

struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    train: bool,
}

struct LayerCache {
    input: Tensor,
    bn: Option<BnCache>,
    pre: Tensor,
    out: Tensor,
}

/// Per-layer activations recorded by [`Network::forward`].
pub struct Cache {
    layers: Vec<LayerCache>,
    generation: u64,
}

impl Cache {
    pub fn output(&self) -> &Tensor {
        &self.layers.last().expect("network has layers").out
    }

    /// Pre-activation values of layer `i` (after batch norm).
    pub fn pre_activation(&self, i: usize) -> &Tensor {
        &self.layers[i].pre
    }

    pub fn activation(&self, i: usize) -> &Tensor {
        &self.layers[i].out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weights: Tensor,
    pub bias: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    /// Gradient with respect to the network input.
    pub input: Tensor,
}

impl Gradients {
    /// Flat views in the same order as [`Network::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for g in &self.layers {
            v.push(g.weights.data());
            v.push(&g.bias);
            v.push(&g.gamma);
            v.push(&g.beta);
        }
        v
    }
}

/// Feed-forward stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
    generation: u64,
}

impl Network {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].spec.outputs != w[1].spec.inputs {
                return Err(Error::Shape(format!(
                    "layer chain {} -> {} does not connect",
                    w[0].spec.outputs, w[1].spec.inputs
                )));
            }
        }
        Ok(Self {
            layers,
            generation: 0,
        })
    }

    /// Gaussian weights with the given std-dev for every layer.
    pub fn with_init(specs: &[LayerSpec], init: &InitSpec) -> Result<Self> {
        init.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
        let layers = specs
            .iter()
            .map(|s| {
                let w = Tensor::from_vec(
                    s.outputs,
                    s.inputs,
                    gaussian_vec(&mut rng, s.outputs * s.inputs, init.sigma_theta),
                )?;
                let b = if s.bias {
                    gaussian_vec(&mut rng, s.outputs, init.sigma_b)
                } else {
                    vec![0.0; s.outputs]
                };
                DenseLayer::new(*s, w, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    /// Gaussian weights with std-dev 1/sqrt(fan_in), zero biases.
    pub fn with_fan_in_init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|s| {
                let sigma = 1.0 / (s.inputs as f64).sqrt();
                let w = Tensor::from_vec(
                    s.outputs,
                    s.inputs,
                    gaussian_vec(&mut rng, s.outputs * s.inputs, sigma),
                )?;
                DenseLayer::new(*s, w, vec![0.0; s.outputs])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").spec.outputs
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Runs the network. In `Train` mode batch norm uses batch statistics and
    /// updates its running averages.
    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Cache> {
        if input.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        input.ensure_finite("network input")?;
        self.generation = self.generation.wrapping_add(1);
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (li, layer) in self.layers.iter_mut().enumerate() {
            let mut z = x.matmul_t(&layer.weights)?;
            if layer.spec.bias {
                add_row_vector(&mut z, &layer.bias);
            }
            let bn_cache = match layer.bn.as_mut() {
                Some(bn) => Some(batch_norm_forward(bn, &mut z, mode)),
                None => None,
            };
            let out = activate(layer.spec.activation, &z);
            if !out.is_finite() {
                return Err(Error::NonFinite(format!("activation of layer {li}")));
            }
            caches.push(LayerCache {
                input: x,
                bn: bn_cache,
                pre: z,
                out: out.clone(),
            });
            x = out;
        }
        Ok(Cache {
            layers: caches,
            generation: self.generation,
        })
    }

    /// Eval-mode forward returning only the output.
    pub fn predict(&mut self, input: &Tensor) -> Result<Tensor> {
        let cache = self.forward(input, Mode::Eval)?;
        Ok(cache.layers.into_iter().last().expect("nonempty").out)
    }

    /// Eval-mode forward through a shared reference; leaves running
    /// statistics and cache generation untouched.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        if input.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        let mut x = input.clone();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = x.matmul_t(&layer.weights)?;
            if layer.spec.bias {
                add_row_vector(&mut z, &layer.bias);
            }
            if let Some(bn) = &layer.bn {
                // same arithmetic as the eval branch of the BN forward pass
                let inv_std: Vec<f64> =
                    bn.running_var.iter().map(|v| 1.0 / (v + bn.epsilon).sqrt()).collect();
                for r in 0..z.rows() {
                    for (j, v) in z.row_mut(r).iter_mut().enumerate() {
                        let xhat = (*v - bn.running_mean[j]) * inv_std[j];
                        *v = bn.gamma[j] * xhat + bn.beta[j];
                    }
                }
            }
            x = activate(layer.spec.activation, &z);
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("activation of layer {li}")));
            }
        }
        Ok(x)
    }

    /// Backpropagates `output_grad` (dLoss/dOutput) through the cached pass.
    pub fn backward(&self, cache: &Cache, output_grad: &Tensor) -> Result<Gradients> {
        if cache.generation != self.generation || cache.layers.len() != self.layers.len() {
            return Err(Error::InvalidParameter(
                "stale cache: network ran again or was modified since this forward pass".into(),
            ));
        }
        if output_grad.shape() != cache.output().shape() {
            return Err(Error::Shape(format!(
                "output gradient {:?} vs output {:?}",
                output_grad.shape(),
                cache.output().shape()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = output_grad.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            let mut dz = activation_backward(layer.spec, &lc.pre, &lc.out, &g);
            let (dgamma, dbeta) = match (&layer.bn, &lc.bn) {
                (Some(bn), Some(bc)) => batch_norm_backward(bn, bc, &mut dz),
                _ => (Vec::new(), Vec::new()),
            };
            let dw = dz.t_matmul(&lc.input)?;
            let db = if layer.spec.bias {
                column_sums(&dz)
            } else {
                vec![0.0; layer.spec.outputs]
            };
            g = dz.matmul(&layer.weights)?;
            grads.push(LayerGrads {
                weights: dw,
                bias: db,
                gamma: dgamma,
                beta: dbeta,
            });
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: g,
        })
    }

    /// Mutable flat parameter views: per layer weights, bias, gamma, beta.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            v.push(l.weights.data_mut());
            v.push(&mut l.bias);
            match l.bn.as_mut() {
                Some(bn) => {
                    v.push(&mut bn.gamma);
                    v.push(&mut bn.beta);
                }
                None => {
                    v.push(&mut []);
                    v.push(&mut []);
                }
            }
        }
        // parameters changed (or may change) under the caller: invalidate caches
        self.generation = self.generation.wrapping_add(1);
        v
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weights.data().len()
                    + l.bias.len()
                    + l.bn.as_ref().map_or(0, |b| b.gamma.len() * 2)
            })
            .sum()
    }
}

fn add_row_vector(t: &mut Tensor, b: &[f64]) {
    for r in 0..t.rows() {
        for (x, bi) in t.row_mut(r).iter_mut().zip(b) {
            *x += bi;
        }
    }
}

fn column_sums(t: &Tensor) -> Vec<f64> {
    let mut s = vec![0.0; t.cols()];
    for r in 0..t.rows() {
        for (acc, x) in s.iter_mut().zip(t.row(r)) {
            *acc += x;
        }
    }
    s
}

pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn activate(act: Activation, z: &Tensor) -> Tensor {
    match act {
        Activation::Linear => z.clone(),
        Activation::Relu => z.map(|x| x.max(0.0)),
        Activation::Sign => z.map(sign),
        Activation::Softmax => {
            let mut out = z.clone();
            for r in 0..out.rows() {
                softmax_in_place(out.row_mut(r));
            }
            out
        }
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in row.iter_mut() {
        *x /= s;
    }
}

fn activation_backward(spec: LayerSpec, pre: &Tensor, out: &Tensor, g: &Tensor) -> Tensor {
    match spec.activation {
        Activation::Linear => g.clone(),
        Activation::Relu => {
            let mut d = g.clone();
            for (x, p) in d.data_mut().iter_mut().zip(pre.data()) {
                if *p <= 0.0 {
                    *x = 0.0;
                }
            }
            d
        }
        Activation::Sign => {
            let mut d = g.clone();
            for (x, p) in d.data_mut().iter_mut().zip(pre.data()) {
                if !spec.ste || p.abs() > 1.0 {
                    *x = 0.0;
                }
            }
            d
        }
        Activation::Softmax => {
            let mut d = g.clone();
            for r in 0..d.rows() {
                let a = out.row(r);
                let dot: f64 = a.iter().zip(g.row(r)).map(|(ai, gi)| ai * gi).sum();
                for (j, x) in d.row_mut(r).iter_mut().enumerate() {
                    *x = a[j] * (*x - dot);
                }
            }
            d
        }
    }
}

fn batch_norm_forward(bn: &mut BatchNorm, z: &mut Tensor, mode: Mode) -> BnCache {
    let (b, w) = z.shape();
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; w];
            let mut var = vec![0.0; w];
            for r in 0..b {
                for (m, x) in mean.iter_mut().zip(z.row(r)) {
                    *m += x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= b as f64);
            for r in 0..b {
                for ((v, x), m) in var.iter_mut().zip(z.row(r)).zip(&mean) {
                    *v += (x - m) * (x - m);
                }
            }
            var.iter_mut().for_each(|v| *v /= b as f64);
            let unbias = if b > 1 { b as f64 / (b - 1) as f64 } else { 1.0 };
            for j in 0..w {
                bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mean[j];
                bn.running_var[j] =
                    (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * var[j] * unbias;
            }
            (mean, var)
        }
        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.epsilon).sqrt()).collect();
    let mut xhat = Tensor::zeros(b, w);
    for r in 0..b {
        let zr = z.row_mut(r);
        let xr = xhat.row_mut(r);
        for j in 0..w {
            xr[j] = (zr[j] - mean[j]) * inv_std[j];
            zr[j] = bn.gamma[j] * xr[j] + bn.beta[j];
        }
    }
    BnCache {
        xhat,
        inv_std,
        train: mode == Mode::Train,
    }
}

/// Batch norm backward; rewrites `dy` into dLoss/dz in place.
fn batch_norm_backward(bn: &BatchNorm, c: &BnCache, dy: &mut Tensor) -> (Vec<f64>, Vec<f64>) {
    let (b, w) = dy.shape();
    let mut dgamma = vec![0.0; w];
    let mut dbeta = vec![0.0; w];
    for r in 0..b {
        let d = dy.row(r);
        let xh = c.xhat.row(r);
        for j in 0..w {
            dgamma[j] += d[j] * xh[j];
            dbeta[j] += d[j];
        }
    }
    if !c.train {
        // running statistics are constants
        for r in 0..b {
            let d = dy.row_mut(r);
            for j in 0..w {
                d[j] *= bn.gamma[j] * c.inv_std[j];
            }
        }
        return (dgamma, dbeta);
    }
    let n = b as f64;
    for r in 0..b {
        let xh: Vec<f64> = c.xhat.row(r).to_vec();
        let d = dy.row_mut(r);
        for j in 0..w {
            let dxhat = d[j] * bn.gamma[j];
            // sums of dxhat and dxhat·xhat are gamma·dbeta and gamma·dgamma
            d[j] = c.inv_std[j] / n
                * (n * dxhat - bn.gamma[j] * dbeta[j] - xh[j] * bn.gamma[j] * dgamma[j]);
        }
    }
    (dgamma, dbeta)
}
