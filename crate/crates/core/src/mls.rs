//! Mutual likelihood score between two r-radius vMF embeddings.
//!
//! With `nu = d/2 - 1` and `kappa_tilde = |kappa_a mu_a + kappa_b mu_b|`:
//!
//! ```text
//! s = ln C(kappa_a) + ln C(kappa_b) - ln C(kappa_tilde) - d ln r
//!   = nu ln(kappa_a kappa_b / kappa_tilde)
//!     + ln I_nu(kappa_tilde) - ln I_nu(kappa_a) - ln I_nu(kappa_b)
//!     - d ln(sqrt(2 pi) r)
//! ```
//!
//! The Bessel terms are evaluated through the exponentially scaled function,
//! with the exponent difference `kappa_tilde - kappa_a - kappa_b <= 0` written
//! as `-2 kappa_a kappa_b (1 - cos) / (kappa_tilde + kappa_a + kappa_b)` so that
//! large concentrations do not cancel catastrophically.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::special_fn::{bessel_ratio, ln_gamma, log_bessel_i_scaled_limit, BesselOrder};
use crate::vecops::{dist_sq, dot, norm};
use crate::vmf::{SphereConfig, StochasticEmbedding, KAPPA_UNIFORM_LIMIT};

/// Below this `kappa_tilde` the gradient is undefined (antipodal pair).
pub const DEGENERATE_KAPPA_TILDE: f64 = 1e-10;

/// A pair of embeddings on a common sphere.
#[derive(Debug, Clone, Copy)]
pub struct MlsInputs<'a> {
    pub a: &'a StochasticEmbedding,
    pub b: &'a StochasticEmbedding,
    pub cfg: &'a SphereConfig,
}

impl<'a> MlsInputs<'a> {
    pub fn new(a: &'a StochasticEmbedding, b: &'a StochasticEmbedding, cfg: &'a SphereConfig) -> Result<Self> {
        a.check_dim(cfg)?;
        b.check_dim(cfg)?;
        Ok(Self { a, b, cfg })
    }
}

/// Gradients of the score. The direction parts are tangent to their `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlsGradients {
    pub d_mu_a: Vec<f64>,
    pub d_mu_b: Vec<f64>,
    pub d_kappa_a: f64,
    pub d_kappa_b: f64,
}

/// `|kappa_a mu_a + kappa_b mu_b|`.
pub fn kappa_tilde(a: &StochasticEmbedding, b: &StochasticEmbedding) -> f64 {
    let ka = a.kappa();
    let kb = b.kappa();
    a.mu().iter().zip(b.mu()).map(|(x, y)| (ka * x + kb * y).powi(2)).sum::<f64>().sqrt()
}

fn scaled(nu: BesselOrder, kappa: f64) -> f64 {
    log_bessel_i_scaled_limit(nu, kappa).expect("kappa is positive and finite")
}

/// Score from its scalar ingredients. Symmetric in `(ka, kb)` bit for bit.
fn score_parts(cfg: &SphereConfig, ka: f64, kb: f64, kt: f64, one_minus_cos: f64) -> f64 {
    let nu_order = cfg.order();
    let nu = nu_order.value();
    let d = cfg.dim() as f64;
    let constant = d * (0.5 * (2.0 * PI).ln() + cfg.radius().ln());
    let lead = scaled(nu_order, ka) + scaled(nu_order, kb);

    if kt < KAPPA_UNIFORM_LIMIT {
        // nu ln kt - ln I_nu(kt) -> nu ln 2 + ln Gamma(nu + 1)
        let nu_log = if nu == 0.0 { 0.0 } else { nu * (ka * kb).ln() };
        let limit = nu * std::f64::consts::LN_2 + ln_gamma(nu + 1.0);
        return nu_log - (lead + (ka + kb)) - limit - constant;
    }
    let nu_log = if nu == 0.0 { 0.0 } else { nu * (ka * kb / kt).ln() };
    let gap = -2.0 * ka * kb * one_minus_cos / (kt + (ka + kb));
    nu_log + (scaled(nu_order, kt) - lead) + gap - constant
}

fn check_kappa(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(domain(format!("kappa must be positive and finite, got {k}")));
    }
    Ok(())
}

/// The mutual likelihood score `s(a, b)`.
pub fn mls_score(input: &MlsInputs) -> Result<f64> {
    let (a, b) = (input.a, input.b);
    check_kappa(a.kappa())?;
    check_kappa(b.kappa())?;
    let kt = kappa_tilde(a, b);
    let one_minus_cos = 0.5 * dist_sq(a.mu(), b.mu());
    Ok(score_parts(input.cfg, a.kappa(), b.kappa(), kt, one_minus_cos))
}

/// The score as a function of `(kappa_a, kappa_b, cos theta)` alone.
pub fn mls_landscape(kappa_a: f64, kappa_b: f64, cos_theta: f64, cfg: &SphereConfig) -> Result<f64> {
    check_kappa(kappa_a)?;
    check_kappa(kappa_b)?;
    if !(cos_theta.abs() <= 1.0 + 1e-12) {
        return Err(domain(format!("cos theta must lie in [-1, 1], got {cos_theta}")));
    }
    let c = cos_theta.clamp(-1.0, 1.0);
    // (ka - kb)^2 + 2 ka kb (1 + c) keeps the antipodal end accurate
    let kt = ((kappa_a - kappa_b).powi(2) + 2.0 * kappa_a * kappa_b * (1.0 + c)).sqrt();
    Ok(score_parts(cfg, kappa_a, kappa_b, kt, 1.0 - c))
}

/// Analytic gradient of [`mls_score`].
///
/// `ds/dkappa_a = -R(kappa_a) + R(kt) (kappa_a + kappa_b cos) / kt` and
/// `ds/dmu_a = R(kt) kappa_a kappa_b (mu_b - cos mu_a) / kt` (tangent part),
/// where `R` is the Bessel ratio of order `d/2 - 1`.
pub fn mls_grad(input: &MlsInputs) -> Result<MlsGradients> {
    let (a, b) = (input.a, input.b);
    check_kappa(a.kappa())?;
    check_kappa(b.kappa())?;
    let kt = kappa_tilde(a, b);
    if !(kt > DEGENERATE_KAPPA_TILDE) {
        return Err(Error::DegenerateGradient(kt));
    }
    let nu = input.cfg.order();
    let (ka, kb) = (a.kappa(), b.kappa());
    let cos = dot(a.mu(), b.mu());
    let r_t = bessel_ratio(nu, kt)?;
    let r_a = bessel_ratio(nu, ka)?;
    let r_b = bessel_ratio(nu, kb)?;

    let scale = r_t * ka * kb / kt;
    let tangent = |towards: &[f64], at: &[f64]| -> Vec<f64> {
        towards.iter().zip(at).map(|(t, m)| scale * (t - cos * m)).collect()
    };
    Ok(MlsGradients {
        d_mu_a: tangent(b.mu(), a.mu()),
        d_mu_b: tangent(a.mu(), b.mu()),
        d_kappa_a: -r_a + r_t * (ka + kb * cos) / kt,
        d_kappa_b: -r_b + r_t * (kb + ka * cos) / kt,
    })
}

/// Scores over `kappa_axis x kappa_axis x cos_theta_axis`.
///
/// `values` is row-major in `(i, j, c)`: the cell for `kappa_i = kappa_axis[i]`,
/// `kappa_j = kappa_axis[j]`, `cos = cos_theta_axis[c]` sits at
/// `(i * n_kappa + j) * n_cos + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGrid {
    pub kappa_axis: Vec<f64>,
    pub cos_theta_axis: Vec<f64>,
    pub values: Vec<f64>,
    pub cfg: SphereConfig,
}

impl LandscapeGrid {
    pub fn value(&self, i: usize, j: usize, c: usize) -> f64 {
        let nk = self.kappa_axis.len();
        let nc = self.cos_theta_axis.len();
        self.values[(i * nk + j) * nc + c]
    }

    /// CSV with header `kappa_i,kappa_j,cos_theta,s`, one row per cell in
    /// `values` order, 17 significant digits, LF line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "kappa_i,kappa_j,cos_theta,s")?;
        for (i, &ki) in self.kappa_axis.iter().enumerate() {
            for (j, &kj) in self.kappa_axis.iter().enumerate() {
                for (c, &cos) in self.cos_theta_axis.iter().enumerate() {
                    let s = self.value(i, j, c);
                    writeln!(out, "{ki:.16e},{kj:.16e},{cos:.16e},{s:.16e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Evaluates [`mls_landscape`] on every grid cell (in parallel; the result does
/// not depend on scheduling).
pub fn sweep_landscape(kappa_axis: &[f64], cos_theta_axis: &[f64], cfg: &SphereConfig) -> Result<LandscapeGrid> {
    if kappa_axis.is_empty() || cos_theta_axis.is_empty() {
        return Err(domain("landscape axes must be non-empty"));
    }
    if kappa_axis.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("kappa axis must be strictly increasing"));
    }
    let nk = kappa_axis.len();
    let nc = cos_theta_axis.len();
    let values = (0..nk * nk * nc)
        .into_par_iter()
        .map(|idx| {
            let (i, j, c) = (idx / (nk * nc), (idx / nc) % nk, idx % nc);
            let (ki, kj, cos) = (kappa_axis[i], kappa_axis[j], cos_theta_axis[c]);
            mls_landscape(ki, kj, cos, cfg).map_err(|e| Error::GridCell {
                kappa_i: ki,
                kappa_j: kj,
                cos_theta: cos,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LandscapeGrid { kappa_axis: kappa_axis.to_vec(), cos_theta_axis: cos_theta_axis.to_vec(), values, cfg: *cfg })
}

/// Norm of a gradient's direction part, for callers checking saturation.
pub fn direction_norm(g: &MlsGradients) -> f64 {
    norm(&g.d_mu_a).max(norm(&g.d_mu_b))
}
