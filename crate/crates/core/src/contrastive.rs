//! InfoNCE with a pluggable similarity.
//!
//! A batch holds an anchor `x_j`, its positive `x_i` and `M` negatives. Every
//! view is scored against the anchor, positive first, and the loss is the
//! softmax cross-entropy of the positive:
//!
//! ```text
//! L = -ln( e^{s_0} / sum_k e^{s_k} ),   s_0 = s(x_i, x_j),  s_k = s(x_k^-, x_j)
//! ```
//!
//! With the scaled inner product `s = r^2 mu_a . mu_b` and `r = 1/sqrt(tau)`
//! this is the usual temperature-scaled InfoNCE.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mls::{mls_grad, mls_score, MlsInputs};
use crate::vecops::dot;
use crate::vmf::{SphereConfig, StochasticEmbedding};

/// `r = sqrt(1 / tau)`.
pub fn radius_from_temperature(tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(domain(format!("temperature must be positive and finite, got {tau}")));
    }
    Ok((1.0 / tau).sqrt())
}

/// `tau = 1 / r^2`.
pub fn temperature_from_radius(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(domain(format!("radius must be positive and finite, got {r}")));
    }
    Ok(1.0 / (r * r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub anchor: StochasticEmbedding,
    pub positive: StochasticEmbedding,
    pub negatives: Vec<StochasticEmbedding>,
}

impl ContrastiveBatch {
    pub fn new(
        anchor: StochasticEmbedding,
        positive: StochasticEmbedding,
        negatives: Vec<StochasticEmbedding>,
    ) -> Result<Self> {
        if negatives.is_empty() {
            return Err(domain("a batch needs at least one negative"));
        }
        let d = anchor.dim();
        for e in std::iter::once(&positive).chain(&negatives) {
            if e.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: e.dim() });
            }
        }
        Ok(Self { anchor, positive, negatives })
    }

    /// The scored views: the positive, then the negatives.
    pub fn views(&self) -> impl Iterator<Item = &StochasticEmbedding> {
        std::iter::once(&self.positive).chain(&self.negatives)
    }

    pub fn num_negatives(&self) -> usize {
        self.negatives.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    /// `r^2 mu_a . mu_b`; concentrations are ignored.
    #[serde(alias = "inner")]
    ScaledInnerProduct,
    /// The mutual likelihood score.
    Mls,
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" | "scaled_inner_product" => Ok(Self::ScaledInnerProduct),
            "mls" => Ok(Self::Mls),
            other => Err(Error::Config(format!("unknown similarity {other:?}; expected inner or mls"))),
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ScaledInnerProduct => "inner",
            Self::Mls => "mls",
        })
    }
}

/// Similarity of `view` to `anchor`.
pub fn similarity(
    kind: SimilarityKind,
    view: &StochasticEmbedding,
    anchor: &StochasticEmbedding,
    cfg: &SphereConfig,
) -> Result<f64> {
    match kind {
        SimilarityKind::ScaledInnerProduct => {
            let r = cfg.radius();
            Ok(r * r * dot(view.mu(), anchor.mu()))
        }
        SimilarityKind::Mls => mls_score(&MlsInputs::new(view, anchor, cfg)?),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Positive first, then the negatives.
    pub per_similarity: Vec<f64>,
    pub softmax_weights: Vec<f64>,
}

/// Cross-entropy of index 0 under a softmax over `similarities`.
pub fn loss_from_similarities(similarities: Vec<f64>) -> LossValue {
    let max = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = similarities.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = shifted.iter().sum();
    // both terms carry the right sign, so the loss is never negative
    let value = total.ln() - (similarities[0] - max);
    LossValue { value, softmax_weights: shifted.iter().map(|e| e / total).collect(), per_similarity: similarities }
}

fn batch_similarities(batch: &ContrastiveBatch, kind: SimilarityKind, cfg: &SphereConfig) -> Result<Vec<f64>> {
    batch
        .views()
        .enumerate()
        .map(|(index, view)| {
            similarity(kind, view, &batch.anchor, cfg).map_err(|e| Error::Pair { index, source: Box::new(e) })
        })
        .collect()
}

/// The loss for one batch. Pair errors carry the view index (0 is the positive).
pub fn info_nce(batch: &ContrastiveBatch, kind: SimilarityKind, cfg: &SphereConfig) -> Result<LossValue> {
    Ok(loss_from_similarities(batch_similarities(batch, kind, cfg)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrad {
    /// Tangent to the embedding's `mu`.
    pub d_mu: Vec<f64>,
    pub d_kappa: f64,
}

impl EmbeddingGrad {
    fn zero(d: usize) -> Self {
        Self { d_mu: vec![0.0; d], d_kappa: 0.0 }
    }

    fn add_scaled(&mut self, w: f64, d_mu: &[f64], d_kappa: f64) {
        self.d_mu.iter_mut().zip(d_mu).for_each(|(g, x)| *g += w * x);
        self.d_kappa += w * d_kappa;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients {
    pub loss: LossValue,
    pub anchor: EmbeddingGrad,
    pub positive: EmbeddingGrad,
    pub negatives: Vec<EmbeddingGrad>,
}

/// Loss and its gradient with respect to every `mu` and `kappa` in the batch.
///
/// `dL/ds_k = w_k - [k = 0]`, chained through the similarity gradient.
pub fn info_nce_grad(batch: &ContrastiveBatch, kind: SimilarityKind, cfg: &SphereConfig) -> Result<BatchGradients> {
    let loss = info_nce(batch, kind, cfg)?;
    let d = batch.anchor.dim();
    let mut anchor = EmbeddingGrad::zero(d);
    let mut views = Vec::with_capacity(batch.num_negatives() + 1);

    for (index, view) in batch.views().enumerate() {
        let upstream = loss.softmax_weights[index] - if index == 0 { 1.0 } else { 0.0 };
        let mut g = EmbeddingGrad::zero(d);
        match kind {
            SimilarityKind::ScaledInnerProduct => {
                let r2 = cfg.radius() * cfg.radius();
                let cos = dot(view.mu(), batch.anchor.mu());
                let towards_anchor: Vec<f64> =
                    batch.anchor.mu().iter().zip(view.mu()).map(|(a, v)| r2 * (a - cos * v)).collect();
                let towards_view: Vec<f64> =
                    view.mu().iter().zip(batch.anchor.mu()).map(|(v, a)| r2 * (v - cos * a)).collect();
                g.add_scaled(upstream, &towards_anchor, 0.0);
                anchor.add_scaled(upstream, &towards_view, 0.0);
            }
            SimilarityKind::Mls => {
                let pair = mls_grad(&MlsInputs::new(view, &batch.anchor, cfg)?)
                    .map_err(|e| Error::Pair { index, source: Box::new(e) })?;
                g.add_scaled(upstream, &pair.d_mu_a, pair.d_kappa_a);
                anchor.add_scaled(upstream, &pair.d_mu_b, pair.d_kappa_b);
            }
        }
        views.push(g);
    }
    let negatives = views.split_off(1);
    let positive = views.pop().expect("positive gradient");
    Ok(BatchGradients { loss, anchor, positive, negatives })
}

/// `|loss with r^2 mu.mu at r = 1/sqrt(tau)  -  temperature InfoNCE evaluated directly|`.
///
/// The direct side is the textbook ratio of exponentials with no max shift.
pub fn equivalence_check(batch: &ContrastiveBatch, tau: f64) -> Result<f64> {
    let r = radius_from_temperature(tau)?;
    let cfg = SphereConfig::new(batch.anchor.dim(), r)?;
    let reparameterized = info_nce(batch, SimilarityKind::ScaledInnerProduct, &cfg)?.value;

    let anchor = batch.anchor.mu();
    let positive = (dot(batch.positive.mu(), anchor) / tau).exp();
    let negatives: f64 = batch.negatives.iter().map(|n| (dot(n.mu(), anchor) / tau).exp()).sum();
    let direct = -(positive / (positive + negatives)).ln();
    Ok((reparameterized - direct).abs())
}
