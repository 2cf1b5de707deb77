//! Modified Bessel function of the first kind, evaluated in log space.
//!
//! Every von Mises-Fisher normalizer needs `ln I_nu(kappa)` with `nu = d/2 - 1`,
//! and the interesting parameter range (d up to a few hundred, kappa up to
//! 1e4 and beyond) overflows `I_nu` itself long before it stops being useful.
//! Three expansions cover the (nu, kappa) plane:
//!
//! | regime               | where                                      | method                          |
//! |----------------------|--------------------------------------------|---------------------------------|
//! | `Series`             | kappa small relative to nu                 | ascending power series          |
//! | `UniformAsymptotic`  | nu >= 15, kappa > sqrt(nu + 1)             | Debye / Olver expansion in 1/nu |
//! | `LargeArgument`      | nu < 15, kappa > max(30, 1.5 nu^2)         | Hankel expansion in 1/kappa     |
//!
//! Each regime computes whichever of `ln I` and `ln I - kappa` it produces
//! naturally, so the scaled form stays accurate for kappa up to 1e8.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{domain, Result};

const SERIES_TOL: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 500;

/// Orders at or above this use the uniform asymptotic expansion.
const NU_UNIFORM: f64 = 15.0;
/// Number of Debye polynomials `U_0 .. U_{n-1}` summed in the uniform expansion.
const UNIFORM_TERMS: usize = 13;
const HANKEL_MAX_TERMS: usize = 200;
const HANKEL_TOL: f64 = 1e-17;

/// Above this argument the Gauss continued fraction for the ratio needs too
/// many terms, and the ratio comes from scaled logs instead.
const RATIO_CF_MAX_KAPPA: f64 = 500.0;
const RATIO_CF_MAX_TERMS: usize = 20_000;

/// Order `nu >= 0` of `I_nu`. For a sphere in `R^d`, `nu = d/2 - 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(domain(format!("Bessel order must be finite and >= 0, got {nu}")));
        }
        Ok(Self(nu))
    }

    /// The order `d/2 - 1` tied to the sphere `S^{d-1}` in `R^d`.
    pub fn for_dimension(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(domain(format!("sphere dimension must be >= 2, got {d}")));
        }
        Ok(Self(d as f64 / 2.0 - 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which expansion evaluates `I_nu(kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalRegime {
    Series,
    UniformAsymptotic,
    LargeArgument,
}

/// Largest argument handled by the ascending series for a given order.
fn series_limit(nu: f64) -> f64 {
    if nu >= NU_UNIFORM {
        (nu + 1.0).sqrt()
    } else {
        (1.5 * nu * nu).max(30.0)
    }
}

/// Regime selection; a pure function of `(nu, kappa)`.
pub fn regime(nu: BesselOrder, kappa: f64) -> EvalRegime {
    let nu = nu.value();
    if kappa <= series_limit(nu) {
        EvalRegime::Series
    } else if nu >= NU_UNIFORM {
        EvalRegime::UniformAsymptotic
    } else {
        EvalRegime::LargeArgument
    }
}

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(domain(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    Ok(())
}

/// `ln I_nu(kappa)`.
///
/// `I_nu(0)` is 0 for `nu > 0`, so the result is negative infinity there; callers
/// that need the finite `kappa -> 0` limit of a normalizer must use the limit
/// form instead of differencing infinities.
pub fn log_bessel_i(nu: BesselOrder, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if kappa == 0.0 {
        return Ok(if nu.value() == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(match regime(nu, kappa) {
        EvalRegime::Series => series_log(nu.value(), kappa),
        r => eval_scaled(r, nu.value(), kappa) + kappa,
    })
}

/// `ln I_nu(kappa) - kappa`, finite for every `kappa > 0` up to at least 1e8.
pub fn log_bessel_i_scaled_limit(nu: BesselOrder, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if kappa == 0.0 {
        return Ok(if nu.value() == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(eval_scaled(regime(nu, kappa), nu.value(), kappa))
}

/// `R_nu(kappa) = I_{nu+1}(kappa) / I_nu(kappa)`, in `[0, 1)`.
///
/// `d/dkappa ln I_nu(kappa) = R_nu(kappa) + nu / kappa`.
pub fn bessel_ratio(nu: BesselOrder, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let v = nu.value();
    if kappa == 0.0 {
        return Ok(0.0);
    }
    if kappa < 1e-150 {
        return Ok(kappa / (2.0 * (v + 1.0)));
    }
    if kappa <= RATIO_CF_MAX_KAPPA {
        if let Some(r) = ratio_continued_fraction(v, kappa) {
            return Ok(r);
        }
    }
    let upper = BesselOrder(v + 1.0);
    let diff = eval_scaled(regime(upper, kappa), v + 1.0, kappa) - eval_scaled(regime(nu, kappa), v, kappa);
    Ok(diff.exp().min(1.0 - f64::EPSILON / 2.0))
}

/// Gauss continued fraction
/// `R_nu(x) = 1 / (2(nu+1)/x + 1 / (2(nu+2)/x + ...))`, via modified Lentz.
fn ratio_continued_fraction(nu: f64, x: f64) -> Option<f64> {
    const TINY: f64 = 1e-300;
    let b = |k: usize| 2.0 * (nu + k as f64) / x;
    let mut f = b(1);
    if f == 0.0 {
        f = TINY;
    }
    let mut c = f;
    let mut d = 0.0;
    for k in 2..RATIO_CF_MAX_TERMS {
        let bk = b(k);
        d += bk;
        if d == 0.0 {
            d = TINY;
        }
        c = bk + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            return Some(1.0 / f);
        }
    }
    None
}

/// `ln I - kappa` in the given regime, `kappa > 0`.
fn eval_scaled(regime: EvalRegime, nu: f64, kappa: f64) -> f64 {
    match regime {
        EvalRegime::Series => series_log(nu, kappa) - kappa,
        EvalRegime::UniformAsymptotic => uniform_scaled(nu, kappa),
        EvalRegime::LargeArgument => hankel_scaled(nu, kappa),
    }
}

/// Ascending series
/// `I_nu(x) = (x/2)^nu / Gamma(nu+1) * sum_k (x^2/4)^k / (k! (nu+1)_k)`.
fn series_log(nu: f64, kappa: f64) -> f64 {
    let q = 0.25 * kappa * kappa;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term < SERIES_TOL * sum {
            break;
        }
    }
    let lead = if nu == 0.0 { 0.0 } else { nu * (0.5 * kappa).ln() - ln_gamma(nu + 1.0) };
    lead + sum.ln()
}

/// Hankel expansion
/// `I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(nu) / x^k`, truncated at
/// its smallest term.
fn hankel_scaled(nu: f64, kappa: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for k in 1..HANKEL_MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * kappa);
        if next == 0.0 || next.abs() >= term.abs() && k as f64 > nu + 1.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < HANKEL_TOL * sum.abs() {
            break;
        }
    }
    -0.5 * (2.0 * PI * kappa).ln() + sum.ln()
}

/// Debye polynomials `U_k(p)`, coefficients in ascending powers of `p`,
/// generated from
/// `U_{k+1}(p) = p^2 (1 - p^2) U_k'(p) / 2 + (1/8) int_0^p (1 - 5t^2) U_k(t) dt`.
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for k in 0..UNIFORM_TERMS - 1 {
            let prev = &polys[k];
            let mut next = vec![0.0; prev.len() + 3];
            for (j, &c) in prev.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let jf = j as f64;
                if j > 0 {
                    next[j + 1] += 0.5 * jf * c;
                    next[j + 3] -= 0.5 * jf * c;
                }
                next[j + 1] += c / (8.0 * (jf + 1.0));
                next[j + 3] -= 5.0 * c / (8.0 * (jf + 3.0));
            }
            polys.push(next);
        }
        polys
    })
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Uniform expansion
/// `I_nu(nu z) ~ e^{nu eta} / (sqrt(2 pi nu) (1+z^2)^{1/4}) * sum_k U_k(p) / nu^k`
/// with `p = 1/sqrt(1+z^2)` and `eta = sqrt(1+z^2) + ln(z / (1 + sqrt(1+z^2)))`.
fn uniform_scaled(nu: f64, kappa: f64) -> f64 {
    let z = kappa / nu;
    let t = z.hypot(1.0);
    let p = 1.0 / t;
    // eta - z, arranged to avoid cancellation at both ends of z
    let log_part = if z > 1.0 { (-(1.0 + 1.0 / (t + z)) / (1.0 + t)).ln_1p() } else { (z / (1.0 + t)).ln() };
    let eta_minus_z = 1.0 / (t + z) + log_part;

    let inv_nu = 1.0 / nu;
    let mut sum = 0.0;
    let mut scale = 1.0;
    for poly in debye_polynomials() {
        sum += horner(poly, p) * scale;
        scale *= inv_nu;
    }
    nu * eta_minus_z - 0.5 * (2.0 * PI * nu).ln() - 0.5 * t.ln() + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(nu: f64) -> BesselOrder {
        BesselOrder::new(nu).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_argument() {
        assert_eq!(log_bessel_i(order(0.0), 0.0).unwrap(), 0.0);
        assert_eq!(log_bessel_i(order(2.0), 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_bessel_i_scaled_limit(order(0.0), 0.0).unwrap(), 0.0);
        assert_eq!(bessel_ratio(order(2.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(BesselOrder::new(-0.5).is_err());
        assert!(BesselOrder::new(f64::NAN).is_err());
        assert!(BesselOrder::for_dimension(1).is_err());
        assert!(log_bessel_i(order(1.0), -1.0).is_err());
        assert!(log_bessel_i_scaled_limit(order(1.0), -1e-300).is_err());
        assert!(bessel_ratio(order(1.0), f64::NAN).is_err());
    }

    #[test]
    fn half_order_closed_form() {
        // I_{1/2}(x) = sqrt(2/(pi x)) sinh x
        for &x in &[1e-3_f64, 0.3, 1.0, 5.0, 29.0, 31.0, 200.0] {
            let expected = (2.0 / (PI * x)).sqrt().ln() + x + (-(-2.0 * x).exp_m1()).ln() - 2f64.ln();
            let got = log_bessel_i(order(0.5), x).unwrap();
            assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0), "x={x}: {got} vs {expected}");
        }
    }

    #[test]
    fn ratio_half_order_closed_form() {
        // I_{3/2}/I_{1/2} = coth x - 1/x
        for &x in &[0.5_f64, 2.0, 10.0, 100.0, 499.0, 501.0, 5e3] {
            let expected = 1.0 / x.tanh() - 1.0 / x;
            let got = bessel_ratio(order(0.5), x).unwrap();
            assert!(rel(got, expected) < 1e-12, "x={x}: {got} vs {expected}");
        }
        let r = bessel_ratio(order(0.5), 10.0).unwrap();
        assert!(rel(r, 1.0 / 10f64.tanh() - 0.1) < 1e-13);
    }

    #[test]
    fn ratio_limits() {
        let small = bessel_ratio(order(2.0), 1e-8).unwrap();
        assert!(rel(small, 1e-8 / 6.0) < 1e-9);
        let big = bessel_ratio(order(0.0), 1e6).unwrap();
        assert!(big < 1.0 && 1.0 - big < 1e-6);
        assert!(bessel_ratio(order(0.0), 1e8).unwrap() < 1.0);
    }

    #[test]
    fn scaled_large_argument_leading_term() {
        let v = log_bessel_i_scaled_limit(order(0.0), 700.0).unwrap();
        let lead = -0.5 * (2.0 * PI * 700.0).ln();
        assert!(v.is_finite());
        // next correction is ln(1 + 1/(8 kappa))
        assert!((v - lead).abs() < 2e-4);
        for &nu in &[0.0, 3.5, 14.9, 15.0, 600.0, 1024.0] {
            assert!(log_bessel_i_scaled_limit(order(nu), 1e8).unwrap().is_finite());
        }
    }

    #[test]
    fn debye_polynomials_match_known_forms() {
        let polys = debye_polynomials();
        let p: f64 = 0.37;
        let u1 = (3.0 * p - 5.0 * p.powi(3)) / 24.0;
        let u2 = (81.0 * p.powi(2) - 462.0 * p.powi(4) + 385.0 * p.powi(6)) / 1152.0;
        assert!((horner(&polys[1], p) - u1).abs() < 1e-16);
        assert!((horner(&polys[2], p) - u2).abs() < 1e-16);
    }

    /// Each switch point, evaluated with both neighbouring expansions.
    #[test]
    fn regimes_agree_at_switch() {
        for &nu in &[0.0, 0.5, 7.0, 63.0] {
            let boundary = series_limit(nu);
            let other = if nu >= NU_UNIFORM { EvalRegime::UniformAsymptotic } else { EvalRegime::LargeArgument };
            for &x in &[boundary * (1.0 - 1e-9), boundary, boundary * (1.0 + 1e-9)] {
                let a = eval_scaled(EvalRegime::Series, nu, x) + x;
                let b = eval_scaled(other, nu, x) + x;
                // relative error of exp(ln I)
                assert!((a - b).abs() <= 1e-10, "nu={nu} x={x}: {a} vs {b}");
            }
            assert_eq!(regime(order(nu), boundary), EvalRegime::Series);
            assert_eq!(regime(order(nu), boundary * (1.0 + 1e-12)), other);
        }
        // at nu = 15 the uniform expansion takes over from the series above sqrt(16)
        let x = 40.0;
        let above = eval_scaled(EvalRegime::UniformAsymptotic, 15.0, x);
        let series = eval_scaled(EvalRegime::Series, 15.0, x);
        assert!((above - series).abs() < 1e-10);
    }

    #[test]
    fn recurrence_holds() {
        // I_{nu-1} - I_{nu+1} = (2 nu / x) I_nu, in log space
        for &nu in &[1.0, 1.5, 7.0, 14.5, 15.5, 40.0, 300.0] {
            for &x in &[0.05, 1.0, 9.0, 60.0, 450.0, 3e3, 1e5] {
                let lm = log_bessel_i_scaled_limit(order(nu - 1.0), x).unwrap();
                let l0 = log_bessel_i_scaled_limit(order(nu), x).unwrap();
                let lp = log_bessel_i_scaled_limit(order(nu + 1.0), x).unwrap();
                let lhs = lm + (-(lp - lm).exp()).ln_1p();
                let rhs = (2.0 * nu / x).ln() + l0;
                assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0), "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn derivative_matches_ratio() {
        for &nu in &[0.0, 0.5, 3.0, 15.0, 63.0, 500.0] {
            let mut x: f64 = 0.01;
            while x <= 1e4 {
                let h = 1e-5 * x;
                let f = |y| log_bessel_i(order(nu), y).unwrap();
                let fd = (f(x + h) - f(x - h)) / (2.0 * h);
                let analytic = bessel_ratio(order(nu), x).unwrap() + nu / x;
                assert!(rel(fd, analytic) < 1e-6, "nu={nu} x={x}: {fd} vs {analytic}");
                x *= 1.7;
            }
        }
    }

    #[test]
    fn monotone_in_kappa() {
        for &nu in &[0.5, 2.0, 14.0, 63.0, 1024.0] {
            let mut prev_log = f64::NEG_INFINITY;
            let mut prev_ratio = 0.0;
            let mut x: f64 = 1e-3;
            while x < 1e6 {
                let l = log_bessel_i(order(nu), x).unwrap();
                let r = bessel_ratio(order(nu), x).unwrap();
                assert!(l > prev_log, "nu={nu} x={x}");
                assert!(r > prev_ratio && r < 1.0, "nu={nu} x={x}: {r}");
                prev_log = l;
                prev_ratio = r;
                x *= 1.31;
            }
        }
    }
}
