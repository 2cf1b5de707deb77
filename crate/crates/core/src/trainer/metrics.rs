//! Alignment and uniformity of unit embeddings.

use crate::error::{domain, Result};
use crate::vecops::dist_sq;

/// Mean squared distance between the two directions of each positive pair.
pub fn alignment_metric<V: AsRef<[f64]>>(pairs: &[(V, V)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(domain(format!("alignment needs at least 2 pairs, got {}", pairs.len())));
    }
    let total: f64 = pairs.iter().map(|(a, b)| dist_sq(a.as_ref(), b.as_ref())).sum();
    Ok(total / pairs.len() as f64)
}

/// `ln mean exp(-2 |u - v|^2)` over all unordered pairs of distinct embeddings.
pub fn uniformity_metric<V: AsRef<[f64]>>(embeddings: &[V]) -> Result<f64> {
    let n = embeddings.len();
    if n < 2 {
        return Err(domain(format!("uniformity needs at least 2 embeddings, got {n}")));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += (-2.0 * dist_sq(embeddings[i].as_ref(), embeddings[j].as_ref())).exp();
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok((total / pairs).ln())
}
