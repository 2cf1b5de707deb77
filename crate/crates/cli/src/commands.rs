use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vmf_contrast::check::{self, CheckSizes};
use vmf_contrast::contrastive::{radius_from_temperature, SimilarityKind};
use vmf_contrast::mls::sweep_landscape;
use vmf_contrast::trainer::{self, confidence_report, write_history_csv, TrainConfig, DEFAULT_TAU};
use vmf_contrast::vmf::SphereConfig;

use crate::config::{resolve, sibling, Manifest};
use crate::error::{CliError, Result};

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sets: Vec<String>,
}

impl RunOptions {
    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

/// Landscape grid: both concentrations on a log-spaced axis, cosines evenly spaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub dim: usize,
    /// Sphere radius; mutually exclusive with `tau`. Defaults to `1/sqrt(0.1)`.
    pub radius: Option<f64>,
    pub tau: Option<f64>,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa_points: usize,
    pub cos_min: f64,
    pub cos_max: f64,
    pub cos_points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            radius: None,
            tau: None,
            kappa_min: 0.1,
            kappa_max: 100.0,
            kappa_points: 64,
            cos_min: -1.0,
            cos_max: 1.0,
            cos_points: 41,
        }
    }
}

impl SweepConfig {
    pub fn sphere(&self) -> Result<SphereConfig> {
        let radius = match (self.tau, self.radius) {
            (Some(_), Some(_)) => return Err(CliError::Usage("set tau or radius, not both".into())),
            (None, Some(r)) => r,
            (tau, None) => radius_from_temperature(tau.unwrap_or(DEFAULT_TAU))?,
        };
        Ok(SphereConfig::new(self.dim, radius)?)
    }

    pub fn kappa_axis(&self) -> Result<Vec<f64>> {
        if !(self.kappa_min > 0.0) || !(self.kappa_max >= self.kappa_min) || !self.kappa_max.is_finite() {
            return Err(CliError::Usage(format!(
                "need 0 < kappa_min <= kappa_max, got {} and {}",
                self.kappa_min, self.kappa_max
            )));
        }
        let (lo, hi) = (self.kappa_min.ln(), self.kappa_max.ln());
        Ok(spaced(self.kappa_points, self.kappa_min, self.kappa_max, |t| (lo + t * (hi - lo)).exp()))
    }

    pub fn cos_axis(&self) -> Result<Vec<f64>> {
        if !(-1.0 <= self.cos_min && self.cos_min <= self.cos_max && self.cos_max <= 1.0) {
            return Err(CliError::Usage(format!(
                "need -1 <= cos_min <= cos_max <= 1, got {} and {}",
                self.cos_min, self.cos_max
            )));
        }
        Ok(spaced(self.cos_points, self.cos_min, self.cos_max, |t| self.cos_min + t * (self.cos_max - self.cos_min)))
    }
}

/// `n` points from `f` on [0, 1] with exact endpoints.
fn spaced(n: usize, first: f64, last: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..n)
        .map(|i| match i {
            0 => first,
            i if i == n - 1 => last,
            i => f(i as f64 / (n - 1) as f64),
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn sweep(opts: &RunOptions) -> Result<()> {
    let (config, seed) = resolve::<SweepConfig>("sweep", opts.config.as_deref(), &opts.sets, opts.seed)?;
    let cfg = config.sphere()?;
    let grid = sweep_landscape(&config.kappa_axis()?, &config.cos_axis()?, &cfg)?;

    let out = opts.out_or("landscape.csv");
    let mut w = create(&out)?;
    grid.write_csv(&mut w).map_err(|e| CliError::io(&out, e))?;
    finish(w, &out)?;
    Manifest::new("sweep", seed, &config).write(&sibling(&out, "manifest.toml"))?;
    println!("wrote {} cells (d={}, r={}) to {}", grid.values.len(), cfg.dim(), cfg.radius(), out.display());
    Ok(())
}

pub fn train(opts: &RunOptions, similarity: Option<SimilarityKind>) -> Result<()> {
    let (mut config, seed) = resolve::<TrainConfig>("train", opts.config.as_deref(), &opts.sets, opts.seed)?;
    if let Some(kind) = similarity {
        config.similarity = kind;
    }
    config.validate()?;
    let out = opts.out_or("history.csv");
    let state = trainer::train(&config, seed)?;

    let mut w = create(&out)?;
    write_history_csv(&state.history, &mut w).map_err(|e| CliError::io(&out, e))?;
    finish(w, &out)?;
    let state_path = sibling(&out, "state.json");
    let mut w = create(&state_path)?;
    serde_json::to_writer(&mut w, &state).map_err(|e| CliError::io(&state_path, e.into()))?;
    finish(w, &state_path)?;
    Manifest::new("train", seed, &config).write(&sibling(&out, "manifest.toml"))?;

    if let (Some(first), Some(last)) = (state.history.first(), state.history.last()) {
        println!(
            "{} steps, {}: loss {:.6} -> {:.6}, alignment {:.6} -> {:.6}, uniformity {:.6} -> {:.6}",
            state.step,
            config.similarity,
            first.loss,
            last.loss,
            first.alignment,
            last.alignment,
            first.uniformity,
            last.uniformity
        );
    }
    let report = confidence_report(&state, &state.dataset()?)?;
    println!(
        "mean kappa: low noise {:.6} (n={}), high noise {:.6} (n={})",
        report.mean_kappa_low, report.count_low, report.mean_kappa_high, report.count_high
    );
    println!("wrote {} and {}", out.display(), state_path.display());
    Ok(())
}

pub fn check(opts: &RunOptions) -> Result<()> {
    let (sizes, seed) = resolve::<CheckSizes>("check", opts.config.as_deref(), &opts.sets, opts.seed)?;
    let reports = check::run_all(seed, &sizes)?;

    let out = opts.out_or("check.csv");
    let mut w = create(&out)?;
    check::write_csv(&reports, &mut w).map_err(|e| CliError::io(&out, e))?;
    finish(w, &out)?;
    Manifest::new("check", seed, &sizes).write(&sibling(&out, "manifest.toml"))?;

    for r in &reports {
        println!(
            "{} {:<20} n={:<6} max_err={:.3e} threshold={:e}",
            if r.pass { "pass" } else { "FAIL" },
            r.check,
            r.instances,
            r.max_err,
            r.threshold
        );
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    if let Some(first) = failed.first() {
        eprintln!(
            "first failing instance of {} (seed {seed}): {}",
            first.check,
            first.first_failure.as_deref().unwrap_or("unknown")
        );
        return Err(CliError::ChecksFailed { failed: failed.len(), total: reports.len() });
    }
    Ok(())
}
