#![allow(dead_code)]

use std::path::PathBuf;

pub struct BesselRef {
    pub nu: f64,
    pub kappa: f64,
    pub log_i: f64,
    pub log_i_minus_kappa: f64,
    /// Remainder of the reference below `log_i` (double-double low word), 0 if absent.
    pub log_i_lo: f64,
}

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn parse(field: &str) -> f64 {
    match field {
        "-inf" => f64::NEG_INFINITY,
        s => s.parse().unwrap_or_else(|e| panic!("bad number {s:?}: {e}")),
    }
}

pub fn bessel_refs(name: &str) -> Vec<BesselRef> {
    let text = std::fs::read_to_string(data_path(name)).expect("reference data");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n);
    let (hi, lo) = (col("log_i_hi"), col("log_i_lo"));
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            BesselRef {
                nu: parse(f[0]),
                kappa: parse(f[1]),
                log_i: hi.map_or_else(|| parse(f[2]), |i| parse(f[i])),
                log_i_minus_kappa: parse(f[3]),
                log_i_lo: lo.map_or(0.0, |i| parse(f[i])),
            }
        })
        .collect()
}

pub fn ratio_refs() -> Vec<(f64, f64, f64)> {
    let text = std::fs::read_to_string(data_path("bessel_ratio.csv")).expect("reference data");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<f64> = line.split(',').map(parse).collect();
            (f[0], f[1], f[2])
        })
        .collect()
}

/// `|exp(got - reference) - 1|`, with the reference carried as a double-double.
pub fn exp_relative_error(got: f64, hi: f64, lo: f64) -> f64 {
    if got == f64::NEG_INFINITY && hi == f64::NEG_INFINITY {
        return 0.0;
    }
    // got - hi is exact when the two are close (Sterbenz)
    let diff = (got - hi) - lo;
    diff.exp_m1().abs()
}

pub struct MlsRef {
    pub d: usize,
    pub r: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub cos_theta: f64,
    pub s: f64,
    pub ds_dkappa_a: f64,
    pub ds_dkappa_b: f64,
    pub ds_dcos: f64,
}

pub fn mls_refs() -> Vec<MlsRef> {
    let text = std::fs::read_to_string(data_path("mls_refs.csv")).expect("reference data");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<f64> = line.split(',').map(parse).collect();
            MlsRef {
                d: f[0] as usize,
                r: f[1],
                kappa_a: f[2],
                kappa_b: f[3],
                cos_theta: f[4],
                s: f[5],
                ds_dkappa_a: f[6],
                ds_dkappa_b: f[7],
                ds_dcos: f[8],
            }
        })
        .collect()
}

pub fn mls_ref(d: usize, kappa_a: f64, kappa_b: f64, cos_theta: f64) -> MlsRef {
    mls_refs()
        .into_iter()
        .find(|m| m.d == d && m.kappa_a == kappa_a && m.kappa_b == kappa_b && m.cos_theta == cos_theta)
        .expect("reference row")
}

use rand::Rng;
use rand_distr::StandardNormal;
use vmf_contrast::vecops::{dot, normalized};
use vmf_contrast::vmf::StochasticEmbedding;

pub fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = normalized(&g) {
            return u;
        }
    }
}

/// Two embeddings in random position whose directions have the given cosine.
pub fn random_pair<R: Rng>(
    rng: &mut R,
    d: usize,
    kappa_a: f64,
    kappa_b: f64,
    cos_theta: f64,
) -> (StochasticEmbedding, StochasticEmbedding) {
    let mu_a = random_unit(rng, d);
    let other = random_unit(rng, d);
    let along = dot(&other, &mu_a);
    let perp = normalized(&other.iter().zip(&mu_a).map(|(o, m)| o - along * m).collect::<Vec<_>>()).unwrap();
    let sin = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let mu_b: Vec<f64> = mu_a.iter().zip(&perp).map(|(m, p)| cos_theta * m + sin * p).collect();
    (StochasticEmbedding::new(mu_a, kappa_a).unwrap(), StochasticEmbedding::from_direction(&mu_b, kappa_b).unwrap())
}

/// A random orthogonal map, as a product of Householder reflections.
pub fn random_rotation<R: Rng>(rng: &mut R, d: usize) -> impl Fn(&[f64]) -> Vec<f64> {
    let normals: Vec<Vec<f64>> = (0..d.min(6)).map(|_| random_unit(rng, d)).collect();
    move |x: &[f64]| {
        let mut y = x.to_vec();
        for n in &normals {
            let p = 2.0 * dot(&y, n);
            y.iter_mut().zip(n).for_each(|(yi, ni)| *yi -= p * ni);
        }
        y
    }
}

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}
