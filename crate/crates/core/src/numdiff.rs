//! Finite-difference helpers for gradient checks.

use crate::vecops::{normalized, project_tangent};

/// Five-point central difference of `f` at `x` with step `h`.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    let f2 = f(x + 2.0 * h);
    let f1 = f(x + h);
    let m1 = f(x - h);
    let m2 = f(x - 2.0 * h);
    (8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * h)
}

/// Derivative of `f` at `x` by Ridders' extrapolation of central differences.
///
/// Starts from step `h` and shrinks it geometrically, extrapolating the
/// sequence to zero step; stops once the extrapolation error grows. Returns
/// the estimate and its error estimate, which includes the round-off floor
/// `eps |f| / step` of the finest step used.
pub fn ridders_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> (f64, f64) {
    const SHRINK: f64 = 1.4;
    const LEVELS: usize = 10;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    let mut central = |step: f64| {
        let (up, down) = (f(x + step), f(x - step));
        let roundoff = f64::EPSILON * up.abs().max(down.abs()) / step;
        ((up - down) / (2.0 * step), roundoff)
    };
    let mut step = h;
    table[0][0] = central(step).0;
    let mut best = (table[0][0], f64::INFINITY);
    for i in 1..LEVELS {
        step /= SHRINK;
        let (diff, roundoff) = central(step);
        table[0][i] = diff;
        let mut fac = SHRINK * SHRINK;
        let mut level_err = f64::INFINITY;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK * SHRINK;
            let err = (table[j][i] - table[j - 1][i]).abs().max((table[j][i] - table[j - 1][i - 1]).abs());
            if err + roundoff <= best.1 {
                best = (table[j][i], err + roundoff);
            }
            level_err = level_err.min(err);
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * level_err.max(best.1) {
            break;
        }
    }
    best
}

/// [`ridders_diff`] restarted from `h`, `h/10` and `h/100`, keeping the
/// estimate with the smallest error. A single start can report an optimistic
/// error when `h` overshoots the function's length scale.
pub fn ridders_diff_restarts<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> (f64, f64) {
    [h, h / 10.0, h / 100.0]
        .into_iter()
        .map(|step| ridders_diff(&mut f, x, step))
        .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// `|a - b| / max(|a|, |b|, floor)`.
///
/// The floor keeps components that are zero analytically from turning
/// stencil round-off into a huge relative error.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / scale
}

/// Worst [`relative_error`] over paired components.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic.iter().zip(numeric).map(|(a, n)| relative_error(*a, *n, floor)).fold(0.0, f64::max)
}

/// `max_k |a_k - b_k| / max(max_k |a_k|, max_k |b_k|, floor)`.
///
/// Used for direction gradients, whose individual components can be
/// arbitrarily small relative to the vector.
pub fn vector_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let inf_norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    diff / inf_norm(analytic).max(inf_norm(numeric)).max(floor)
}

/// Finite-difference gradient of `f` on the unit sphere at `mu`, by
/// [`ridders_diff_restarts`] with initial step `h`.
///
/// Component `k` differentiates `f(normalize(mu + h t_k))` where `t_k` is the
/// coordinate axis `e_k` projected onto the tangent space, so for a tangent
/// gradient `g` the result approximates `g` itself.
pub fn sphere_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, mu: &[f64], h: f64) -> Vec<f64> {
    let d = mu.len();
    (0..d)
        .map(|k| {
            let mut axis = vec![0.0; d];
            axis[k] = 1.0;
            let t = project_tangent(&axis, mu);
            let along = |eps: f64| {
                let moved: Vec<f64> = mu.iter().zip(&t).map(|(m, tk)| m + eps * tk).collect();
                f(&normalized(&moved).expect("small step stays away from zero"))
            };
            ridders_diff_restarts(along, 0.0, h).0
        })
        .collect()
}
