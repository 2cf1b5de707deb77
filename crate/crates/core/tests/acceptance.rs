//! Acceptance criteria, one line each. Exits nonzero if any hard criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vmf_contrast::check::{
    encoder_grad_suite, equivalence_suite, info_nce_grad_suite, mc_oracle_suite, mls_grad_suite,
    normalizer_identity_suite, CheckReport,
};
use vmf_contrast::contrastive::SimilarityKind;
use vmf_contrast::mls::mls_landscape;
use vmf_contrast::special_fn::{log_bessel_i, BesselOrder};
use vmf_contrast::trainer::{confidence_report, train, TrainConfig, KAPPA_MAX, KAPPA_MIN};
use vmf_contrast::vmf::SphereConfig;
use vmf_contrast::Result;

const SEED: u64 = 7;

struct Outcome {
    id: &'static str,
    pass: bool,
    soft: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn run(id: &'static str, budget_secs: u64, soft: bool, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_secs);
    let outcome = Outcome { id, pass: pass && elapsed <= budget, soft, detail, elapsed, budget };
    println!(
        "[{}] {:<27} {} ({:.2}s / {}s budget){}",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.id,
        outcome.detail,
        outcome.elapsed.as_secs_f64(),
        outcome.budget.as_secs(),
        if soft { " [soft]" } else { "" }
    );
    outcome
}

fn summarize(reports: &[CheckReport]) -> (bool, String) {
    let pass = reports.iter().all(|r| r.pass);
    let text = reports
        .iter()
        .map(|r| {
            let failure = r.first_failure.as_deref().map(|f| format!(" first failure: {f}")).unwrap_or_default();
            format!("{} n={} max_err={:.3e} <= {:e}{failure}", r.check, r.instances, r.max_err, r.threshold)
        })
        .collect::<Vec<_>>()
        .join("; ");
    (pass, text)
}

fn bessel_accuracy() -> Result<(bool, String)> {
    let refs = common::bessel_refs("bessel_grid.csv");
    let mut worst: f64 = 0.0;
    for r in &refs {
        let got = log_bessel_i(BesselOrder::new(r.nu)?, r.kappa)?;
        worst = worst.max(common::exp_relative_error(got, r.log_i, r.log_i_lo));
    }
    Ok((refs.len() == 200 && worst <= 1e-10, format!("{} grid points, max rel err {worst:.3e} <= 1e-10", refs.len())))
}

fn landscape(cfg: &SphereConfig, ka: f64, kb: f64, c: f64) -> Result<f64> {
    mls_landscape(ka, kb, c, cfg)
}

fn pinned() -> Result<SphereConfig> {
    SphereConfig::new(128, 10f64.sqrt())
}

fn ordering_a() -> Result<(bool, String)> {
    let cfg = pinned()?;
    let (hh, hl, ll) =
        (landscape(&cfg, 50.0, 50.0, 0.8)?, landscape(&cfg, 50.0, 1.0, 0.8)?, landscape(&cfg, 1.0, 1.0, 0.8)?);
    Ok((hh > hl && hl > ll, format!("cos 0.8: s(50,50)={hh:.4} > s(50,1)={hl:.4} > s(1,1)={ll:.4}")))
}

fn ordering_b() -> Result<(bool, String)> {
    let cfg = pinned()?;
    let (hh, hl) = (landscape(&cfg, 50.0, 50.0, 0.2)?, landscape(&cfg, 50.0, 1.0, 0.2)?);
    Ok((hh < hl, format!("cos 0.2: s(50,50)={hh:.4} < s(50,1)={hl:.4}")))
}

fn ordering_c() -> Result<(bool, String)> {
    let cfg = pinned()?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let cos: Vec<f64> = (0..=40).map(|i| -1.0 + i as f64 / 20.0).collect();
    let mut failures = 0;
    for _ in 0..20 {
        let (ka, kb) = (common::log_uniform(&mut rng, 0.1, 100.0), common::log_uniform(&mut rng, 0.1, 100.0));
        let s = cos.iter().map(|&c| landscape(&cfg, ka, kb, c)).collect::<Result<Vec<_>>>()?;
        if s.windows(2).any(|w| w[1] <= w[0] || w[1].is_nan()) {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("20 random (kappa_a, kappa_b) on 41 cos values, {failures} non-monotone")))
}

fn training(kind: SimilarityKind) -> Result<(bool, String)> {
    let state = train(&TrainConfig { similarity: kind, ..TrainConfig::default() }, SEED)?;
    let (first, last) = (&state.history[0], &state.history[state.history.len() - 1]);
    let [lo, hi] = state.kappa_range;
    let pass = last.loss < first.loss
        && last.alignment < first.alignment
        && last.uniformity < first.uniformity
        && lo >= KAPPA_MIN
        && hi <= KAPPA_MAX;
    Ok((
        pass,
        format!(
            "{kind}: loss {:.4} -> {:.4}, alignment {:.4} -> {:.4}, uniformity {:.4} -> {:.4}, kappa in [{lo:.3}, {hi:.3}]",
            first.loss, last.loss, first.alignment, last.alignment, first.uniformity, last.uniformity
        ),
    ))
}

fn confidence() -> Result<(bool, String)> {
    let state = train(&TrainConfig::default(), SEED)?;
    let r = confidence_report(&state, &state.dataset()?)?;
    Ok((
        r.count_low > 0 && r.count_high > 0 && r.mean_kappa_high < r.mean_kappa_low,
        format!(
            "mean kappa high {:.3} (sd {:.3}, n={}) < low {:.3} (sd {:.3}, n={})",
            r.mean_kappa_high, r.sd_kappa_high, r.count_high, r.mean_kappa_low, r.sd_kappa_low, r.count_low
        ),
    ))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let outcomes = [
        run("bessel_accuracy", 1, false, bessel_accuracy),
        run("normalizer_identity", 1, false, || Ok(summarize(&[normalizer_identity_suite(SEED, 10_000)?]))),
        run("mc_oracle", 120, false, || Ok(summarize(&[mc_oracle_suite(SEED, 50, 1_000_000)?]))),
        run("gradients", 60, false, || {
            Ok(summarize(&[mls_grad_suite(SEED, 1000)?, info_nce_grad_suite(SEED, 500)?, encoder_grad_suite(SEED, 4)?]))
        }),
        run("temperature_equivalence", 1, false, || Ok(summarize(&[equivalence_suite(SEED, 100)?]))),
        run("landscape_aligned_order", 1, false, ordering_a),
        run("landscape_misaligned_order", 1, false, ordering_b),
        run("landscape_monotone_cos", 1, false, ordering_c),
        run("training_sanity", 120, false, || {
            let (p1, d1) = training(SimilarityKind::Mls)?;
            let (p2, d2) = training(SimilarityKind::ScaledInnerProduct)?;
            Ok((p1 && p2, format!("{d1}; {d2}")))
        }),
        run("confidence_separation", 120, true, confidence),
    ];
    let hard_failures: Vec<&str> = outcomes.iter().filter(|o| !o.pass && !o.soft).map(|o| o.id).collect();
    let soft_failures: Vec<&str> = outcomes.iter().filter(|o| !o.pass && o.soft).map(|o| o.id).collect();
    println!(
        "acceptance: {} of {} passed; hard failures {:?}; soft failures {:?}",
        outcomes.iter().filter(|o| o.pass).count(),
        outcomes.len(),
        hard_failures,
        soft_failures
    );
    if hard_failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
