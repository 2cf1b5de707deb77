//! Clustered synthetic inputs with two levels of augmentation noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTag {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    /// Number of class centers `K`.
    pub num_centers: usize,
    /// Input dimension `n`.
    pub input_dim: usize,
    /// Samples in the pool negatives are drawn from.
    pub pool_size: usize,
    /// Standard deviation of the center coordinates.
    pub center_scale: f64,
    /// Per-coordinate standard deviation of a sample around its center.
    pub cluster_noise: f64,
    /// Per-coordinate augmentation noise of a low-noise view.
    pub noise_low: f64,
    /// Per-coordinate augmentation noise of a high-noise view.
    pub noise_high: f64,
    /// Probability that a view is high-noise.
    pub high_noise_prob: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            num_centers: 4,
            input_dim: 16,
            pool_size: 1024,
            center_scale: 1.5,
            cluster_noise: 1.0,
            noise_low: 0.05,
            noise_high: 1.0,
            high_noise_prob: 0.5,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.center_scale, self.noise_low, self.noise_high];
        if self.num_centers == 0 || self.input_dim == 0 || self.pool_size < 2 {
            return Err(Error::Config("dataset needs centers, inputs and a pool of at least 2".into()));
        }
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || !(self.cluster_noise >= 0.0) {
            return Err(Error::Config("dataset scales must be positive and finite".into()));
        }
        if !(0.0..=1.0).contains(&self.high_noise_prob) {
            return Err(Error::Config(format!("high_noise_prob must lie in [0, 1], got {}", self.high_noise_prob)));
        }
        Ok(())
    }

    pub fn noise(&self, tag: NoiseTag) -> f64 {
        match tag {
            NoiseTag::Low => self.noise_low,
            NoiseTag::High => self.noise_high,
        }
    }
}

/// One augmented view of a pool sample.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub x: Vec<f64>,
    pub tag: NoiseTag,
    pub sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub spec: DatasetSpec,
    pub centers: Vec<Vec<f64>>,
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl SyntheticDataset {
    pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gaussian = |scale: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..spec.input_dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let centers: Vec<Vec<f64>> = (0..spec.num_centers).map(|_| gaussian(spec.center_scale, &mut rng)).collect();
        let labels: Vec<usize> = (0..spec.pool_size).map(|i| i % spec.num_centers).collect();
        let samples = labels
            .iter()
            .map(|&k| {
                let offset = gaussian(spec.cluster_noise, &mut rng);
                centers[k].iter().zip(offset).map(|(c, o)| c + o).collect()
            })
            .collect();
        Ok(Self { spec: spec.clone(), centers, samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn draw_tag<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseTag {
        if rng.random_bool(self.spec.high_noise_prob) {
            NoiseTag::High
        } else {
            NoiseTag::Low
        }
    }

    /// Sample `sample` plus isotropic noise at the level of `tag`.
    pub fn augment_with<R: Rng + ?Sized>(&self, sample: usize, tag: NoiseTag, rng: &mut R) -> View {
        let normal = Normal::new(0.0, self.spec.noise(tag)).expect("validated noise scale");
        let x = self.samples[sample].iter().map(|v| v + normal.sample(rng)).collect();
        View { x, tag, sample }
    }

    /// A view with a randomly drawn noise level.
    pub fn augment<R: Rng + ?Sized>(&self, sample: usize, rng: &mut R) -> View {
        let tag = self.draw_tag(rng);
        self.augment_with(sample, tag, rng)
    }

    /// Two independent views of one random pool sample.
    pub fn positive_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (View, View) {
        let i = rng.random_range(0..self.len());
        (self.augment(i, rng), self.augment(i, rng))
    }

    /// A view of an independently drawn pool sample.
    pub fn negative<R: Rng + ?Sized>(&self, rng: &mut R) -> View {
        let i = rng.random_range(0..self.len());
        self.augment(i, rng)
    }
}
