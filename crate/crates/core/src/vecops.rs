//! Small dense-vector helpers shared by the sphere code.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Removes the component of `v` along the unit vector `mu`.
pub fn project_tangent(v: &[f64], mu: &[f64]) -> Vec<f64> {
    let along = dot(v, mu);
    v.iter().zip(mu).map(|(x, m)| x - along * m).collect()
}

/// `v / |v|`; `None` for the zero vector.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}
