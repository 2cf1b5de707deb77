//! Two-layer tanh perceptron emitting a direction and a concentration.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::vecops::{dot, norm};
use crate::vmf::StochasticEmbedding;

pub const KAPPA_MIN: f64 = 1e-2;
pub const KAPPA_MAX: f64 = 1e4;
/// Concentration every input maps to before training.
pub const INITIAL_KAPPA: f64 = 10.0;
/// Scale of the confidence head weights relative to the other layers.
const KAPPA_HEAD_INIT_SCALE: f64 = 1e-2;

/// `y = W x + b` with `W` stored row-major, `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, scale: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, scale / (inputs as f64).sqrt()).expect("positive scale");
        let weight = (0..inputs * outputs).map(|_| normal.sample(rng)).collect();
        Self { inputs, outputs, weight, bias: vec![0.0; outputs] }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weight.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| dot(row, x) + b).collect()
    }

    /// Accumulates parameter gradients for `dy` at input `x` and returns `dx`.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grad.weight[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
            grad.bias[o] += g;
        }
        dx
    }
}

/// Encoder parameters. Gradients use the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoder {
    pub layer1: Dense,
    pub layer2: Dense,
    pub mu_head: Dense,
    pub kappa_head: Dense,
}

/// Activations kept from a forward pass for [`ToyEncoder::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    u_norm: f64,
    mu: Vec<f64>,
    z: f64,
    clamped: bool,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `softplus^{-1}(k) = ln(e^k - 1)`.
fn inverse_softplus(k: f64) -> f64 {
    k + (-(-k).exp()).ln_1p()
}

impl ToyEncoder {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, embed_dim: usize, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Config("encoder widths must be positive".into()));
        }
        if embed_dim < 2 {
            return Err(Error::Config(format!("embedding dimension must be at least 2, got {embed_dim}")));
        }
        let mut kappa_head = Dense::random(hidden, 1, KAPPA_HEAD_INIT_SCALE, rng);
        kappa_head.bias[0] = inverse_softplus(INITIAL_KAPPA);
        Ok(Self {
            layer1: Dense::random(input_dim, hidden, 1.0, rng),
            layer2: Dense::random(hidden, hidden, 1.0, rng),
            mu_head: Dense::random(hidden, embed_dim, 1.0, rng),
            kappa_head,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer1.inputs
    }

    pub fn embed_dim(&self) -> usize {
        self.mu_head.outputs
    }

    pub fn forward(&self, x: &[f64]) -> Result<StochasticEmbedding> {
        self.forward_cached(x).map(|(e, _)| e)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(StochasticEmbedding, ForwardCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let h1: Vec<f64> = self.layer1.apply(x).into_iter().map(f64::tanh).collect();
        let h2: Vec<f64> = self.layer2.apply(&h1).into_iter().map(f64::tanh).collect();
        let u = self.mu_head.apply(&h2);
        let u_norm = norm(&u);
        if !(u_norm > 0.0) || !u_norm.is_finite() {
            return Err(domain(format!("direction head output has norm {u_norm}")));
        }
        let mu: Vec<f64> = u.iter().map(|v| v / u_norm).collect();
        let z = self.kappa_head.apply(&h2)[0];
        let raw = softplus(z);
        let kappa = raw.clamp(KAPPA_MIN, KAPPA_MAX);
        let clamped = raw != kappa;
        let emb = StochasticEmbedding::new(mu.clone(), kappa)?;
        Ok((emb, ForwardCache { x: x.to_vec(), h1, h2, u_norm, mu, z, clamped }))
    }

    /// Accumulates into `grad` the parameter gradient for upstream gradients
    /// `d_mu` (tangent at the output direction) and `d_kappa`.
    pub fn backward(&self, cache: &ForwardCache, d_mu: &[f64], d_kappa: f64, grad: &mut ToyEncoder) {
        // exact Jacobian of u / |u|: (I - mu mu^T) / |u|
        let along = dot(d_mu, &cache.mu);
        let du: Vec<f64> = d_mu.iter().zip(&cache.mu).map(|(g, m)| (g - along * m) / cache.u_norm).collect();
        let dz = if cache.clamped { 0.0 } else { d_kappa * sigmoid(cache.z) };

        let mut dh2 = self.mu_head.backward(&cache.h2, &du, &mut grad.mu_head);
        let dh2_kappa = self.kappa_head.backward(&cache.h2, &[dz], &mut grad.kappa_head);
        dh2.iter_mut().zip(dh2_kappa).for_each(|(a, b)| *a += b);

        let da2: Vec<f64> = dh2.iter().zip(&cache.h2).map(|(g, h)| g * (1.0 - h * h)).collect();
        let dh1 = self.layer2.backward(&cache.h1, &da2, &mut grad.layer2);
        let da1: Vec<f64> = dh1.iter().zip(&cache.h1).map(|(g, h)| g * (1.0 - h * h)).collect();
        self.layer1.backward(&cache.x, &da1, &mut grad.layer1);
    }

    pub fn zeros_like(&self) -> Self {
        let z = |l: &Dense| Dense::zeros(l.inputs, l.outputs);
        Self {
            layer1: z(&self.layer1),
            layer2: z(&self.layer2),
            mu_head: z(&self.mu_head),
            kappa_head: z(&self.kappa_head),
        }
    }

    fn layers(&self) -> [&Dense; 4] {
        [&self.layer1, &self.layer2, &self.mu_head, &self.kappa_head]
    }

    fn layers_mut(&mut self) -> [&mut Dense; 4] {
        [&mut self.layer1, &mut self.layer2, &mut self.mu_head, &mut self.kappa_head]
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers().iter().flat_map(|l| l.weight.iter().chain(&l.bias).copied()).collect()
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter count");
        let mut it = params.iter().copied();
        for l in self.layers_mut() {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
    }

    /// `self += alpha * other`, parameter by parameter.
    pub fn axpy(&mut self, alpha: f64, other: &ToyEncoder) {
        for (l, o) in self.layers_mut().into_iter().zip(other.layers()) {
            l.weight.iter_mut().zip(&o.weight).for_each(|(p, g)| *p += alpha * g);
            l.bias.iter_mut().zip(&o.bias).for_each(|(p, g)| *p += alpha * g);
        }
    }
}
