//! The r-radius von Mises-Fisher distribution.
//!
//! A stochastic embedding `(mu, kappa)` induces the density
//!
//! ```text
//! p(z) = C_d(kappa) * exp(kappa * mu^T z / r) / r^(d-1),   |z| = r
//! ln C_d(kappa) = (d/2 - 1) ln kappa - (d/2) ln(2 pi) - ln I_{d/2-1}(kappa)
//! ```
//!
//! with respect to the surface measure of the sphere of radius `r`. That measure
//! puts `(d-1) ln r` into each density, so `ln ∫ p_a p_b dA` over the r-sphere
//! comes out as `ln C(kappa_a) + ln C(kappa_b) - ln C(kappa_tilde) - (d-1) ln r`.
//! The mutual likelihood score instead carries `- d ln r`; [`mc_mls_oracle`]
//! converts its surface integral to that convention by subtracting `ln r`, so it
//! and [`crate::mls::mls_score`] measure the same quantity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::special_fn::{ln_gamma, log_bessel_i, BesselOrder};
use crate::vecops::{dot, norm};

/// Concentrations below this are treated as the uniform distribution.
pub const KAPPA_UNIFORM_LIMIT: f64 = 1e-12;

const UNIT_NORM_TOL: f64 = 1e-9;
const RADIUS_TOL: f64 = 1e-6;

/// Ambient dimension `d` (points live on `S^{d-1}`) and sphere radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereConfig {
    dim: usize,
    radius: f64,
}

impl SphereConfig {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 {
            return Err(domain(format!("dimension must be >= 2, got {dim}")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(domain(format!("radius must be positive and finite, got {radius}")));
        }
        Ok(Self { dim, radius })
    }

    /// Radius `sqrt(1/tau)` for a contrastive temperature `tau`.
    pub fn from_temperature(dim: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(domain(format!("temperature must be positive and finite, got {tau}")));
        }
        Self::new(dim, (1.0 / tau).sqrt())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn temperature(&self) -> f64 {
        1.0 / (self.radius * self.radius)
    }

    pub fn order(&self) -> BesselOrder {
        BesselOrder::for_dimension(self.dim).expect("dim >= 2 checked at construction")
    }

    pub fn nu(&self) -> f64 {
        self.dim as f64 / 2.0 - 1.0
    }
}

/// A unit mean direction with a positive concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticEmbedding {
    mu: Vec<f64>,
    kappa: f64,
}

impl StochasticEmbedding {
    pub fn new(mu: Vec<f64>, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(domain(format!("kappa must be positive and finite, got {kappa}")));
        }
        let n = norm(&mu);
        if !((n - 1.0).abs() <= UNIT_NORM_TOL) {
            return Err(domain(format!("mean direction must be unit norm, got |mu| = {n}")));
        }
        Ok(Self { mu, kappa })
    }

    /// Normalizes `direction` onto the unit sphere first.
    pub fn from_direction(direction: &[f64], kappa: f64) -> Result<Self> {
        let mu = crate::vecops::normalized(direction).ok_or_else(|| domain("zero direction vector"))?;
        Self::new(mu, kappa)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub(crate) fn check_dim(&self, cfg: &SphereConfig) -> Result<()> {
        if self.dim() != cfg.dim() {
            return Err(Error::DimensionMismatch { expected: cfg.dim(), got: self.dim() });
        }
        Ok(())
    }
}

/// A point `z` on the r-sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(pub Vec<f64>);

impl SpherePoint {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

/// `nu ln kappa - ln I_nu(kappa)`, continuous down to `kappa = 0` where it
/// tends to `nu ln 2 + ln Gamma(nu + 1)`.
pub(crate) fn log_kappa_pow_over_bessel(nu: BesselOrder, kappa: f64) -> f64 {
    let v = nu.value();
    if kappa < KAPPA_UNIFORM_LIMIT {
        return v * std::f64::consts::LN_2 + ln_gamma(v + 1.0);
    }
    let log_i = log_bessel_i(nu, kappa).expect("kappa is positive and finite");
    if v == 0.0 {
        -log_i
    } else {
        v * kappa.ln() - log_i
    }
}

/// `ln C_d(kappa)` of the unit-sphere vMF.
pub fn log_normalizer(kappa: f64, cfg: &SphereConfig) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(domain(format!("kappa must be positive and finite, got {kappa}")));
    }
    Ok(log_normalizer_unchecked(kappa, cfg))
}

pub(crate) fn log_normalizer_unchecked(kappa: f64, cfg: &SphereConfig) -> f64 {
    log_kappa_pow_over_bessel(cfg.order(), kappa) - 0.5 * cfg.dim() as f64 * (2.0 * PI).ln()
}

/// Log density of `z` under the r-radius vMF, with respect to the surface
/// measure of the r-sphere.
pub fn log_density(z: &SpherePoint, emb: &StochasticEmbedding, cfg: &SphereConfig) -> Result<f64> {
    emb.check_dim(cfg)?;
    if z.0.len() != cfg.dim() {
        return Err(Error::DimensionMismatch { expected: cfg.dim(), got: z.0.len() });
    }
    let r = cfg.radius();
    let zn = z.norm();
    if !((zn - r).abs() <= RADIUS_TOL * r) {
        return Err(domain(format!("point has norm {zn}, expected radius {r}")));
    }
    let cos = dot(emb.mu(), &z.0) / r;
    Ok(log_normalizer_unchecked(emb.kappa(), cfg) + emb.kappa() * cos - (cfg.dim() - 1) as f64 * r.ln())
}

/// Wood's rejection sampler for the vMF on the unit sphere.
struct VmfSampler<'a> {
    mu: &'a [f64],
    kappa: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Option<Beta<f64>>,
}

impl<'a> VmfSampler<'a> {
    fn new(emb: &'a StochasticEmbedding) -> Self {
        let m1 = (emb.dim() - 1) as f64;
        let kappa = emb.kappa();
        let b = m1 / (2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + m1 * (1.0 - x0 * x0).ln();
        let beta = (kappa >= KAPPA_UNIFORM_LIMIT).then(|| Beta::new(0.5 * m1, 0.5 * m1).expect("shape > 0"));
        Self { mu: emb.mu(), kappa, b, x0, c, beta }
    }

    /// Cosine between the sample and `mu`.
    fn draw_cos<R: Rng + ?Sized>(&self, beta: &Beta<f64>, rng: &mut R) -> f64 {
        let m1 = (self.mu.len() - 1) as f64;
        loop {
            let z = beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + m1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                return w;
            }
        }
    }

    /// Writes a unit-sphere sample into `out`.
    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let Some(beta) = &self.beta else {
            let n = norm(out);
            out.iter_mut().for_each(|x| *x /= n);
            return;
        };
        let w = self.draw_cos(beta, rng);
        // uniform direction in the tangent space of mu
        let along = dot(out, self.mu);
        out.iter_mut().zip(self.mu).for_each(|(x, m)| *x -= along * m);
        let n = norm(out);
        let s = ((1.0 - w) * (1.0 + w)).max(0.0).sqrt();
        out.iter_mut().zip(self.mu).for_each(|(x, m)| *x = w * m + s * *x / n);
    }
}

/// `n` draws from the r-radius vMF, reproducible from `seed`.
pub fn sample(emb: &StochasticEmbedding, cfg: &SphereConfig, seed: u64, n: usize) -> Result<Vec<SpherePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(emb, cfg, &mut rng, n)
}

pub fn sample_with<R: Rng + ?Sized>(
    emb: &StochasticEmbedding,
    cfg: &SphereConfig,
    rng: &mut R,
    n: usize,
) -> Result<Vec<SpherePoint>> {
    emb.check_dim(cfg)?;
    if n == 0 {
        return Err(domain("sample count must be >= 1"));
    }
    let sampler = VmfSampler::new(emb);
    let r = cfg.radius();
    Ok((0..n)
        .map(|_| {
            let mut z = vec![0.0; cfg.dim()];
            sampler.draw_into(rng, &mut z);
            z.iter_mut().for_each(|x| *x *= r);
            SpherePoint(z)
        })
        .collect())
}

/// A Monte Carlo log-estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub log_value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// `ln ∫ p_a(z) p_b(z) dA` over the r-sphere, by drawing `z ~ vMF(a)` and
/// averaging `p_b(z)`.
pub fn mc_surface_overlap(
    a: &StochasticEmbedding,
    b: &StochasticEmbedding,
    cfg: &SphereConfig,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    a.check_dim(cfg)?;
    b.check_dim(cfg)?;
    if n < 1000 {
        return Err(domain(format!("Monte Carlo oracle needs n >= 1000, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = VmfSampler::new(a);
    let mut u = vec![0.0; cfg.dim()];
    let kb = b.kappa();

    // p_b(z) = exp(ln C_b + kb - (d-1) ln r) * exp(kb (t - 1)); average the second factor
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..n {
        sampler.draw_into(&mut rng, &mut u);
        let t = dot(b.mu(), &u);
        let x = (kb * (t - 1.0)).exp();
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (n - 1) as f64;
    let log_scale = log_normalizer_unchecked(kb, cfg) + kb - (cfg.dim() - 1) as f64 * cfg.radius().ln();
    Ok(McEstimate { log_value: mean.ln() + log_scale, std_error: (var / n as f64).sqrt() / mean, samples: n })
}

/// Monte Carlo estimate of the mutual likelihood score of `a` and `b`.
///
/// The surface integral is shifted by `- ln r` to match the `- d ln r`
/// convention of the closed form (see the module docs).
pub fn mc_mls_oracle(
    a: &StochasticEmbedding,
    b: &StochasticEmbedding,
    cfg: &SphereConfig,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    let surface = mc_surface_overlap(a, b, cfg, n, seed)?;
    Ok(McEstimate { log_value: surface.log_value - cfg.radius().ln(), ..surface })
}
