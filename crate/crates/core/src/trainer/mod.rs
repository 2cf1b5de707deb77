//! Self-supervised training of a toy probabilistic encoder on synthetic data.
//!
//! Every step draws `batch_size` items, each an anchor and a positive (two
//! augmentations of one pool sample) plus `negatives` independent views, and
//! takes a plain SGD step on the mean contrastive loss. Gradients are exact:
//! the loss gradient with respect to each `(mu, kappa)` is pushed back
//! through the encoder by hand.
//!
//! Random streams are split by purpose so that, for example, changing the
//! evaluation size does not change the training batches.

pub mod data;
pub mod encoder;
pub mod metrics;

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrastive::{info_nce, info_nce_grad, radius_from_temperature, ContrastiveBatch, SimilarityKind};
use crate::error::{Error, Result};
use crate::numdiff::{relative_error, ridders_diff_restarts};
use crate::vmf::SphereConfig;

pub use data::{DatasetSpec, NoiseTag, SyntheticDataset, View};
pub use encoder::{ToyEncoder, KAPPA_MAX, KAPPA_MIN};
pub use metrics::{alignment_metric, uniformity_metric};

const STREAM_INIT: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_REPORT: u64 = 4;

/// Loss growth over the first step's loss that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Embedding dimension `d`.
    pub embed_dim: usize,
    pub hidden: usize,
    /// Negatives per item, `M`.
    pub negatives: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// Anneal the step size to zero along a half cosine.
    pub cosine_decay: bool,
    /// Temperature; mutually exclusive with `radius`. Defaults to 0.1.
    pub tau: Option<f64>,
    pub radius: Option<f64>,
    pub similarity: SimilarityKind,
    /// Diagnostics period in steps.
    pub log_every: usize,
    /// Positive pairs in the fixed evaluation set.
    pub eval_pairs: usize,
    pub dataset: DatasetSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            embed_dim: 8,
            hidden: 64,
            negatives: 8,
            batch_size: 32,
            steps: 2000,
            learning_rate: 0.5,
            cosine_decay: false,
            tau: None,
            radius: None,
            similarity: SimilarityKind::Mls,
            log_every: 100,
            eval_pairs: 256,
            dataset: DatasetSpec::default(),
        }
    }
}

pub const DEFAULT_TAU: f64 = 0.1;

impl TrainConfig {
    pub fn radius(&self) -> Result<f64> {
        match (self.tau, self.radius) {
            (Some(_), Some(_)) => Err(Error::Config("set tau or radius, not both".into())),
            (None, Some(r)) => Ok(r),
            (tau, None) => radius_from_temperature(tau.unwrap_or(DEFAULT_TAU)),
        }
    }

    pub fn sphere(&self) -> Result<SphereConfig> {
        SphereConfig::new(self.embed_dim, self.radius()?).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.sphere()?;
        self.dataset.validate()?;
        if self.hidden == 0 || self.negatives == 0 || self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::Config("hidden, negatives, batch_size and log_every must be positive".into()));
        }
        if self.eval_pairs < 2 {
            return Err(Error::Config("eval_pairs must be at least 2".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate must be non-negative, got {}", self.learning_rate)));
        }
        Ok(())
    }

    /// Step size used for the update at `step`.
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        if self.cosine_decay && self.steps > 0 {
            0.5 * self.learning_rate * (1.0 + (PI * step as f64 / self.steps as f64).cos())
        } else {
            self.learning_rate
        }
    }
}

/// An anchor, its positive and the negatives scored against the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub anchor: View,
    pub positive: View,
    pub negatives: Vec<View>,
}

impl TrainItem {
    pub fn draw(ds: &SyntheticDataset, negatives: usize, rng: &mut ChaCha8Rng) -> Self {
        let (anchor, positive) = ds.positive_pair(rng);
        let negatives = (0..negatives).map(|_| ds.negative(rng)).collect();
        Self { anchor, positive, negatives }
    }

    fn views(&self) -> impl Iterator<Item = &View> {
        [&self.anchor, &self.positive].into_iter().chain(&self.negatives)
    }
}

fn encode_batch(enc: &ToyEncoder, item: &TrainItem) -> Result<ContrastiveBatch> {
    ContrastiveBatch::new(
        enc.forward(&item.anchor.x)?,
        enc.forward(&item.positive.x)?,
        item.negatives.iter().map(|v| enc.forward(&v.x)).collect::<Result<_>>()?,
    )
}

/// Mean loss over `items`.
pub fn batch_loss(enc: &ToyEncoder, items: &[TrainItem], kind: SimilarityKind, cfg: &SphereConfig) -> Result<f64> {
    let losses = items
        .par_iter()
        .map(|item| Ok(info_nce(&encode_batch(enc, item)?, kind, cfg)?.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / items.len() as f64)
}

/// Mean loss over `items`, its parameter gradient, and the concentration range
/// seen in the forward passes.
///
/// Items are processed in parallel and summed in index order, so the result
/// does not depend on scheduling.
pub fn batch_loss_and_grad(
    enc: &ToyEncoder,
    items: &[TrainItem],
    kind: SimilarityKind,
    cfg: &SphereConfig,
) -> Result<(f64, ToyEncoder, [f64; 2])> {
    let per_item = items
        .par_iter()
        .map(|item| {
            let cached = item.views().map(|v| enc.forward_cached(&v.x)).collect::<Result<Vec<_>>>()?;
            let mut embeddings = cached.iter().map(|(e, _)| e.clone());
            let anchor = embeddings.next().expect("anchor");
            let positive = embeddings.next().expect("positive");
            let batch = ContrastiveBatch::new(anchor, positive, embeddings.collect())?;
            let g = info_nce_grad(&batch, kind, cfg)?;

            let mut grad = enc.zeros_like();
            let upstream = [&g.anchor, &g.positive].into_iter().chain(&g.negatives);
            for ((_, cache), up) in cached.iter().zip(upstream) {
                enc.backward(cache, &up.d_mu, up.d_kappa, &mut grad);
            }
            let range = cached
                .iter()
                .fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], (e, _)| [lo.min(e.kappa()), hi.max(e.kappa())]);
            Ok((g.loss.value, grad, range))
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = 1.0 / items.len() as f64;
    let mut total = enc.zeros_like();
    let mut loss = 0.0;
    let mut range = [f64::INFINITY, f64::NEG_INFINITY];
    for (l, g, [lo, hi]) in &per_item {
        loss += l;
        total.axpy(scale, g);
        range = [range[0].min(*lo), range[1].max(*hi)];
    }
    Ok((loss * scale, total, range))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub step: usize,
    pub loss: f64,
    pub alignment: f64,
    pub uniformity: f64,
    pub mean_kappa_low: f64,
    pub mean_kappa_high: f64,
}

pub const HISTORY_HEADER: &str = "step,loss,alignment,uniformity,mean_kappa_low,mean_kappa_high";

/// Writes the diagnostics history as CSV.
pub fn write_history_csv<W: Write>(history: &[Diagnostics], mut out: W) -> io::Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for d in history {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            d.step, d.loss, d.alignment, d.uniformity, d.mean_kappa_low, d.mean_kappa_high
        )?;
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Fixed evaluation items drawn once per run.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub items: Vec<TrainItem>,
}

impl EvalSet {
    pub fn draw(ds: &SyntheticDataset, config: &TrainConfig, seed: u64) -> Self {
        let mut rng = stream(seed, STREAM_EVAL);
        Self { items: (0..config.eval_pairs).map(|_| TrainItem::draw(ds, config.negatives, &mut rng)).collect() }
    }

    pub fn diagnostics(
        &self,
        enc: &ToyEncoder,
        step: usize,
        kind: SimilarityKind,
        cfg: &SphereConfig,
    ) -> Result<Diagnostics> {
        let loss = batch_loss(enc, &self.items, kind, cfg)?;
        let pairs = self
            .items
            .iter()
            .map(|it| Ok((enc.forward(&it.anchor.x)?, enc.forward(&it.positive.x)?)))
            .collect::<Result<Vec<_>>>()?;
        let mu_pairs: Vec<(&[f64], &[f64])> = pairs.iter().map(|(a, p)| (a.mu(), p.mu())).collect();
        let anchors: Vec<&[f64]> = pairs.iter().map(|(a, _)| a.mu()).collect();
        let (mut low, mut high) = (Vec::new(), Vec::new());
        for (it, (a, p)) in self.items.iter().zip(&pairs) {
            for (view, e) in [(&it.anchor, a), (&it.positive, p)] {
                match view.tag {
                    NoiseTag::Low => low.push(e.kappa()),
                    NoiseTag::High => high.push(e.kappa()),
                }
            }
        }
        Ok(Diagnostics {
            step,
            loss,
            alignment: alignment_metric(&mu_pairs)?,
            uniformity: uniformity_metric(&anchors)?,
            mean_kappa_low: mean(&low),
            mean_kappa_high: mean(&high),
        })
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub config: TrainConfig,
    pub seed: u64,
    /// Updates applied so far.
    pub step: usize,
    /// Step size of the most recent update.
    pub learning_rate: f64,
    pub encoder: ToyEncoder,
    /// Batch sampler, positioned after the last drawn batch.
    pub rng: ChaCha8Rng,
    pub history: Vec<Diagnostics>,
    /// Smallest and largest concentration produced during training.
    pub kappa_range: [f64; 2],
}

impl TrainState {
    /// Fresh state: encoder initialized, no updates applied.
    pub fn new(config: &TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let encoder =
            ToyEncoder::new(config.dataset.input_dim, config.hidden, config.embed_dim, &mut stream(seed, STREAM_INIT))?;
        Ok(Self {
            config: config.clone(),
            seed,
            step: 0,
            learning_rate: config.learning_rate_at(0),
            encoder,
            rng: stream(seed, STREAM_TRAIN),
            history: Vec::new(),
            kappa_range: [f64::INFINITY, f64::NEG_INFINITY],
        })
    }

    /// The dataset this state was trained on.
    pub fn dataset(&self) -> Result<SyntheticDataset> {
        SyntheticDataset::generate(&self.config.dataset, self.seed)
    }
}

/// Runs `config.steps` SGD updates from a fresh encoder.
///
/// Diagnostics on the fixed evaluation set are recorded before the first
/// update, every `log_every` updates and after the last one; a run with zero
/// steps records nothing. Fails with [`Error::Diverged`] once a mini-batch
/// loss exceeds [`DIVERGENCE_FACTOR`] times the first one.
pub fn train(config: &TrainConfig, seed: u64) -> Result<TrainState> {
    let mut state = TrainState::new(config, seed)?;
    let ds = state.dataset()?;
    let cfg = config.sphere()?;
    let kind = config.similarity;
    let eval = EvalSet::draw(&ds, config, seed);

    let mut initial = None;
    for step in 0..config.steps {
        if step % config.log_every == 0 {
            state.history.push(eval.diagnostics(&state.encoder, step, kind, &cfg)?);
        }
        let items: Vec<TrainItem> =
            (0..config.batch_size).map(|_| TrainItem::draw(&ds, config.negatives, &mut state.rng)).collect();
        let (loss, grad, [lo, hi]) = batch_loss_and_grad(&state.encoder, &items, kind, &cfg)?;
        check_divergence(step, loss, *initial.get_or_insert(loss))?;
        state.kappa_range = [state.kappa_range[0].min(lo), state.kappa_range[1].max(hi)];
        state.learning_rate = config.learning_rate_at(step);
        state.encoder.axpy(-state.learning_rate, &grad);
        state.step = step + 1;
    }
    if config.steps > 0 {
        state.history.push(eval.diagnostics(&state.encoder, config.steps, kind, &cfg)?);
    }
    Ok(state)
}

fn check_divergence(step: usize, loss: f64, initial: f64) -> Result<()> {
    if loss.is_finite() && loss <= DIVERGENCE_FACTOR * initial {
        Ok(())
    } else {
        Err(Error::Diverged { step, loss, initial })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub mean_kappa_low: f64,
    pub mean_kappa_high: f64,
    pub sd_kappa_low: f64,
    pub sd_kappa_high: f64,
    pub count_low: usize,
    pub count_high: usize,
}

/// Mean concentration the encoder assigns to low- and high-noise views: one
/// view of each kind for every pool sample.
pub fn confidence_report(state: &TrainState, dataset: &SyntheticDataset) -> Result<ConfidenceReport> {
    let mut rng = stream(state.seed, STREAM_REPORT);
    let (mut low, mut high) = (Vec::new(), Vec::new());
    for i in 0..dataset.len() {
        low.push(state.encoder.forward(&dataset.augment_with(i, NoiseTag::Low, &mut rng).x)?.kappa());
        high.push(state.encoder.forward(&dataset.augment_with(i, NoiseTag::High, &mut rng).x)?.kappa());
    }
    let sd = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64).sqrt()
    };
    Ok(ConfidenceReport {
        mean_kappa_low: mean(&low),
        mean_kappa_high: mean(&high),
        sd_kappa_low: sd(&low),
        sd_kappa_high: sd(&high),
        count_low: low.len(),
        count_high: high.len(),
    })
}

/// Worst relative error of [`batch_loss_and_grad`] against finite differences
/// of [`batch_loss`] over every encoder parameter, on a network with 4 inputs,
/// 8 hidden units, `d = 3`, 3 items and 2 negatives.
pub fn encoder_gradient_check(kind: SimilarityKind, seed: u64) -> Result<f64> {
    let config = TrainConfig {
        embed_dim: 3,
        hidden: 8,
        negatives: 2,
        batch_size: 3,
        tau: Some(0.5),
        similarity: kind,
        dataset: DatasetSpec { input_dim: 4, pool_size: 16, ..DatasetSpec::default() },
        ..TrainConfig::default()
    };
    let state = TrainState::new(&config, seed)?;
    let ds = state.dataset()?;
    let cfg = config.sphere()?;
    let mut rng = stream(seed, STREAM_TRAIN);
    let items: Vec<TrainItem> =
        (0..config.batch_size).map(|_| TrainItem::draw(&ds, config.negatives, &mut rng)).collect();
    let (_, grad, _) = batch_loss_and_grad(&state.encoder, &items, kind, &cfg)?;

    let flat = state.encoder.flatten();
    let mut probe = state.encoder.clone();
    let mut worst: f64 = 0.0;
    for (k, analytic) in grad.flatten().into_iter().enumerate() {
        let (numeric, _) = ridders_diff_restarts(
            |v| {
                let mut p = flat.clone();
                p[k] = v;
                probe.unflatten(&p);
                batch_loss(&probe, &items, kind, &cfg).expect("valid perturbed encoder")
            },
            flat[k],
            0.1,
        );
        worst = worst.max(relative_error(analytic, numeric, crate::check::GRAD_ERROR_FLOOR));
    }
    Ok(worst)
}
