//! Randomized verification suites.
//!
//! Each suite draws its instances from a seeded stream, so a report is a pure
//! function of `(seed, instances)`. Instances are evaluated in parallel and
//! reduced in index order, which keeps the output independent of scheduling.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrastive::{equivalence_check, info_nce, info_nce_grad, ContrastiveBatch, SimilarityKind};
use crate::error::Result;
use crate::mls::{kappa_tilde, mls_grad, mls_score, MlsInputs, DEGENERATE_KAPPA_TILDE};
use crate::numdiff::{relative_error, ridders_diff_restarts, sphere_gradient, vector_relative_error};
use crate::trainer::encoder_gradient_check;
use crate::vecops::normalized;
use crate::vmf::{log_normalizer, mc_mls_oracle, SphereConfig, StochasticEmbedding};

/// Relative-error floor for gradient comparisons; below it errors are absolute.
pub const GRAD_ERROR_FLOOR: f64 = 1e-6;
/// Initial direction step, as a fraction of the angular length scale.
const MU_STEP: f64 = 0.05;
/// Initial concentration step, as a fraction of the concentration length scale.
const KAPPA_STEP: f64 = 0.1;

/// Initial extrapolation steps for a pair. Near-antipodal pairs vary on the
/// shorter scale `kappa_tilde`.
fn pair_steps(a: &StochasticEmbedding, b: &StochasticEmbedding) -> (f64, f64, f64) {
    let kt = kappa_tilde(a, b);
    let angular = (kt / a.kappa().max(b.kappa())).min(1.0);
    (KAPPA_STEP * a.kappa().min(kt), KAPPA_STEP * b.kappa().min(kt), MU_STEP * angular)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub instances: usize,
    pub max_err: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Full inputs of the first instance over threshold.
    pub first_failure: Option<String>,
}

impl CheckReport {
    fn from_errors(check: &str, threshold: f64, errors: Vec<(f64, String)>) -> Self {
        let max_err = errors.iter().map(|(e, _)| *e).fold(0.0, f64::max);
        let first_failure = errors.iter().find(|(e, _)| !(*e <= threshold)).map(|(_, what)| what.clone());
        Self {
            check: check.to_string(),
            instances: errors.len(),
            max_err,
            threshold,
            pass: first_failure.is_none(),
            first_failure,
        }
    }
}

/// Writes `check,instances,max_err,threshold,pass` rows.
pub fn write_csv<W: Write>(reports: &[CheckReport], mut out: W) -> io::Result<()> {
    writeln!(out, "check,instances,max_err,threshold,pass")?;
    for r in reports {
        writeln!(out, "{},{},{:.16e},{:.16e},{}", r.check, r.instances, r.max_err, r.threshold, r.pass)?;
    }
    Ok(())
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

pub fn random_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = normalized(&g) {
            return u;
        }
    }
}

/// Embedding with a uniform direction and log-uniform concentration.
pub fn random_embedding<R: Rng>(rng: &mut R, d: usize, kappa_lo: f64, kappa_hi: f64) -> StochasticEmbedding {
    let mu = random_direction(rng, d);
    StochasticEmbedding::new(mu, log_uniform(rng, kappa_lo, kappa_hi)).expect("valid random embedding")
}

fn random_batch<R: Rng>(rng: &mut R, d: usize, m: usize, kappa_lo: f64, kappa_hi: f64) -> ContrastiveBatch {
    let mut e = || random_embedding(rng, d, kappa_lo, kappa_hi);
    let (anchor, positive) = (e(), e());
    let negatives = (0..m).map(|_| e()).collect();
    ContrastiveBatch::new(anchor, positive, negatives).expect("valid random batch")
}

/// Per-instance seeds drawn up front so instances can run in any order.
fn instance_seeds(seed: u64, instances: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances).map(|_| rng.random()).collect()
}

fn describe(e: &StochasticEmbedding) -> String {
    format!("(kappa={:e}, mu={:?})", e.kappa(), e.mu())
}

/// Worst relative error of [`mls_grad`] against central differences of
/// [`mls_score`], over both concentrations and both direction vectors.
pub fn mls_grad_error(input: &MlsInputs) -> Result<f64> {
    let g = mls_grad(input)?;
    let cfg = input.cfg;
    let score = |a: &StochasticEmbedding, b: &StochasticEmbedding| {
        mls_score(&MlsInputs { a, b, cfg }).expect("valid perturbed pair")
    };
    let with_kappa = |e: &StochasticEmbedding, k: f64| StochasticEmbedding::new(e.mu().to_vec(), k).unwrap();
    let with_mu = |e: &StochasticEmbedding, mu: &[f64]| StochasticEmbedding::new(mu.to_vec(), e.kappa()).unwrap();
    let (a, b) = (input.a, input.b);

    let (h_a, h_b, h_mu) = pair_steps(a, b);
    let fd_ka = ridders_diff_restarts(|k| score(&with_kappa(a, k), b), a.kappa(), h_a).0;
    let fd_kb = ridders_diff_restarts(|k| score(a, &with_kappa(b, k)), b.kappa(), h_b).0;
    let fd_mu_a = sphere_gradient(|mu| score(&with_mu(a, mu), b), a.mu(), h_mu);
    let fd_mu_b = sphere_gradient(|mu| score(a, &with_mu(b, mu)), b.mu(), h_mu);

    Ok([
        relative_error(g.d_kappa_a, fd_ka, GRAD_ERROR_FLOOR),
        relative_error(g.d_kappa_b, fd_kb, GRAD_ERROR_FLOOR),
        vector_relative_error(&g.d_mu_a, &fd_mu_a, GRAD_ERROR_FLOOR),
        vector_relative_error(&g.d_mu_b, &fd_mu_b, GRAD_ERROR_FLOOR),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

/// Analytic gradients against central differences over random pairs with
/// `d` in {3, 16, 128} and `kappa` log-uniform in [0.1, 1e3].
pub fn mls_grad_suite(seed: u64, instances: usize) -> Result<CheckReport> {
    let errors = instance_seeds(seed, instances)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let d = [3, 16, 128][rng.random_range(0..3)];
            let cfg = SphereConfig::new(d, log_uniform(&mut rng, 0.3, 5.0))?;
            let (a, b) = loop {
                let a = random_embedding(&mut rng, d, 0.1, 1e3);
                let b = random_embedding(&mut rng, d, 0.1, 1e3);
                if kappa_tilde(&a, &b) > 1e3 * DEGENERATE_KAPPA_TILDE {
                    break (a, b);
                }
            };
            let err = mls_grad_error(&MlsInputs::new(&a, &b, &cfg)?)?;
            Ok((err, format!("d={d} r={:e} a={} b={}", cfg.radius(), describe(&a), describe(&b))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_errors("mls_grad", 1e-5, errors))
}

fn view_mut(batch: &mut ContrastiveBatch, i: usize) -> &mut StochasticEmbedding {
    match i {
        0 => &mut batch.anchor,
        1 => &mut batch.positive,
        _ => &mut batch.negatives[i - 2],
    }
}

/// Worst relative error of [`info_nce_grad`] against central differences of
/// [`info_nce`] over every direction and concentration in the batch.
pub fn info_nce_grad_error(batch: &ContrastiveBatch, kind: SimilarityKind, cfg: &SphereConfig) -> Result<f64> {
    let g = info_nce_grad(batch, kind, cfg)?;
    let analytic = std::iter::once(&g.anchor).chain(std::iter::once(&g.positive)).chain(&g.negatives);
    let mut worst: f64 = 0.0;
    for (i, analytic) in analytic.enumerate() {
        let mut work = batch.clone();
        let original = view_mut(&mut work, i).clone();
        let mut loss_with = |e: StochasticEmbedding| {
            *view_mut(&mut work, i) = e;
            info_nce(&work, kind, cfg).expect("valid perturbed batch").value
        };
        let (mu0, k0) = (original.mu(), original.kappa());
        // the shortest length scale over every pair this view takes part in
        let partners: Vec<&StochasticEmbedding> = if i == 0 { batch.views().collect() } else { vec![&batch.anchor] };
        let (h_k, h_mu) = partners.iter().fold((f64::INFINITY, f64::INFINITY), |(hk, hm), p| {
            let (h, _, m) = pair_steps(&original, p);
            (hk.min(h), hm.min(m))
        });
        let h_mu = match kind {
            SimilarityKind::Mls => h_mu,
            SimilarityKind::ScaledInnerProduct => MU_STEP,
        };
        let fd_mu = sphere_gradient(|mu| loss_with(StochasticEmbedding::new(mu.to_vec(), k0).unwrap()), mu0, h_mu);
        worst = worst.max(vector_relative_error(&analytic.d_mu, &fd_mu, GRAD_ERROR_FLOOR));
        worst = worst.max(match kind {
            SimilarityKind::Mls => {
                let fd_k =
                    ridders_diff_restarts(|k| loss_with(StochasticEmbedding::new(mu0.to_vec(), k).unwrap()), k0, h_k).0;
                relative_error(analytic.d_kappa, fd_k, GRAD_ERROR_FLOOR)
            }
            // the inner product ignores kappa entirely
            SimilarityKind::ScaledInnerProduct => analytic.d_kappa.abs(),
        });
    }
    Ok(worst)
}

/// Loss gradients against central differences, alternating similarity kinds,
/// with `d` in {3, 8, 16}, `M` in 1..=6 and `kappa` log-uniform in [0.5, 50].
pub fn info_nce_grad_suite(seed: u64, instances: usize) -> Result<CheckReport> {
    let errors = instance_seeds(seed, instances)
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let kind = if i % 2 == 0 { SimilarityKind::Mls } else { SimilarityKind::ScaledInnerProduct };
            let d = [3, 8, 16][rng.random_range(0..3)];
            let m = rng.random_range(1..=6);
            let cfg = SphereConfig::new(d, log_uniform(&mut rng, 0.5, 3.0))?;
            let batch = random_batch(&mut rng, d, m, 0.5, 50.0);
            let err = info_nce_grad_error(&batch, kind, &cfg)?;
            Ok((err, format!("{kind} d={d} r={:e} batch={batch:?}", cfg.radius())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_errors("info_nce_grad", 1e-5, errors))
}

/// Reparameterized inner-product loss against direct temperature InfoNCE with
/// `tau` log-uniform in [0.01, 10].
pub fn equivalence_suite(seed: u64, instances: usize) -> Result<CheckReport> {
    let errors = instance_seeds(seed, instances)
        .into_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let d = rng.random_range(2..=32);
            let m = rng.random_range(1..=16);
            let tau = log_uniform(&mut rng, 0.01, 10.0);
            let batch = random_batch(&mut rng, d, m, 1.0, 1.0);
            Ok((equivalence_check(&batch, tau)?, format!("tau={tau:e} batch={batch:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_errors("info_nce_equivalence", 1e-12, errors))
}

/// The score against `ln C(ka) + ln C(kb) - ln C(kt) - d ln r` built from
/// [`log_normalizer`], with `d` in 2..=128 and `kappa` log-uniform in [1e-2, 1e3].
pub fn normalizer_identity_suite(seed: u64, instances: usize) -> Result<CheckReport> {
    let errors = instance_seeds(seed, instances)
        .into_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let d = rng.random_range(2..=128);
            let cfg = SphereConfig::new(d, log_uniform(&mut rng, 0.3, 5.0))?;
            let a = random_embedding(&mut rng, d, 1e-2, 1e3);
            let b = random_embedding(&mut rng, d, 1e-2, 1e3);
            let kt = kappa_tilde(&a, &b);
            let via_normalizers = log_normalizer(a.kappa(), &cfg)? + log_normalizer(b.kappa(), &cfg)?
                - log_normalizer(kt, &cfg)?
                - d as f64 * cfg.radius().ln();
            let s = mls_score(&MlsInputs::new(&a, &b, &cfg)?)?;
            Ok((
                (s - via_normalizers).abs(),
                format!("d={d} r={:e} a={} b={}", cfg.radius(), describe(&a), describe(&b)),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_errors("normalizer_identity", 1e-10, errors))
}

/// Closed-form score against the Monte Carlo oracle, error in standard errors,
/// with `d` in {3, 5, 8}, `kappa` log-uniform in [0.1, 30] and `samples` draws each.
pub fn mc_oracle_suite(seed: u64, instances: usize, samples: usize) -> Result<CheckReport> {
    let errors = instance_seeds(seed, instances)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let d = [3, 5, 8][rng.random_range(0..3)];
            let cfg = SphereConfig::new(d, log_uniform(&mut rng, 0.5, 2.0))?;
            let a = random_embedding(&mut rng, d, 0.1, 30.0);
            let b = random_embedding(&mut rng, d, 0.1, 30.0);
            let closed = mls_score(&MlsInputs::new(&a, &b, &cfg)?)?;
            let est = mc_mls_oracle(&a, &b, &cfg, samples, rng.random())?;
            let z = (closed - est.log_value).abs() / est.std_error;
            Ok((
                z,
                format!(
                    "d={d} r={:e} n={samples} a={} b={} closed={closed:e} mc={:e}+-{:e}",
                    cfg.radius(),
                    describe(&a),
                    describe(&b),
                    est.log_value,
                    est.std_error
                ),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_errors("mc_oracle", 3.0, errors))
}

/// End-to-end encoder gradient on the tiny network, alternating similarity
/// kinds (even instances use MLS).
pub fn encoder_grad_suite(seed: u64, instances: usize) -> Result<CheckReport> {
    let errors = instance_seeds(seed, instances)
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let kind = if i % 2 == 0 { SimilarityKind::Mls } else { SimilarityKind::ScaledInnerProduct };
            Ok((encoder_gradient_check(kind, s)?, format!("kind={kind} seed={s}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_errors("encoder_grad", 1e-4, errors))
}

/// Instances per suite for [`run_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSizes {
    pub normalizer_identity: usize,
    pub equivalence: usize,
    pub mls_grad: usize,
    pub info_nce_grad: usize,
    pub encoder_grad: usize,
    pub mc_oracle: usize,
    /// Monte Carlo samples per oracle instance.
    pub mc_samples: usize,
}

impl Default for CheckSizes {
    fn default() -> Self {
        Self {
            normalizer_identity: 10_000,
            equivalence: 100,
            mls_grad: 1000,
            info_nce_grad: 500,
            encoder_grad: 4,
            mc_oracle: 50,
            mc_samples: 1_000_000,
        }
    }
}

pub fn run_all(seed: u64, sizes: &CheckSizes) -> Result<Vec<CheckReport>> {
    Ok(vec![
        normalizer_identity_suite(seed, sizes.normalizer_identity)?,
        equivalence_suite(seed, sizes.equivalence)?,
        mls_grad_suite(seed, sizes.mls_grad)?,
        info_nce_grad_suite(seed, sizes.info_nce_grad)?,
        encoder_grad_suite(seed, sizes.encoder_grad)?,
        mc_oracle_suite(seed, sizes.mc_oracle, sizes.mc_samples)?,
    ])
}
