use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vmf_contrast::check::{info_nce_grad_error, random_embedding};
use vmf_contrast::contrastive::{
    equivalence_check, info_nce, info_nce_grad, loss_from_similarities, radius_from_temperature,
    temperature_from_radius, ContrastiveBatch, SimilarityKind,
};
use vmf_contrast::vecops::norm;
use vmf_contrast::vmf::{SphereConfig, StochasticEmbedding};

fn random_batch(seed: u64, d: usize, m: usize) -> ContrastiveBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = || random_embedding(&mut rng, d, 0.5, 50.0);
    let (anchor, positive) = (e(), e());
    ContrastiveBatch::new(anchor, positive, (0..m).map(|_| e()).collect()).unwrap()
}

fn similarities() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-500.0f64..500.0, 2..20)
}

proptest! {
    #[test]
    fn weights_sum_to_one(s in similarities()) {
        let loss = loss_from_similarities(s);
        let total: f64 = loss.softmax_weights.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(loss.value >= 0.0);
        // value = -ln w_0 while w_0 is a normal float
        if loss.softmax_weights[0] >= f64::MIN_POSITIVE {
            prop_assert!((loss.value + loss.softmax_weights[0].ln()).abs() <= 1e-12 * loss.value.max(1.0));
        }
    }

    #[test]
    fn shift_invariant(s in similarities(), c in -1e3f64..1e3) {
        let base = loss_from_similarities(s.clone()).value;
        let shifted = loss_from_similarities(s.iter().map(|x| x + c).collect()).value;
        prop_assert!((base - shifted).abs() <= 1e-12 * base.max(1.0), "{} vs {}", base, shifted);
    }

    #[test]
    fn raising_a_negative_never_lowers_the_loss(s in similarities(), pick in any::<prop::sample::Index>(), bump in 0.0f64..50.0) {
        let k = 1 + pick.index(s.len() - 1);
        let before = loss_from_similarities(s.clone()).value;
        let mut raised = s;
        raised[k] += bump;
        prop_assert!(loss_from_similarities(raised).value >= before);
    }

    #[test]
    fn temperature_round_trips(tau in 1e-4f64..1e4) {
        let back = temperature_from_radius(radius_from_temperature(tau).unwrap()).unwrap();
        prop_assert!(((back - tau) / tau).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn reparameterization_matches_temperature_form(seed in any::<u64>(), d in 2usize..24, m in 1usize..12, log_tau in (0.01f64).ln()..(10f64).ln()) {
        let batch = random_batch(seed, d, m);
        prop_assert!(equivalence_check(&batch, log_tau.exp()).unwrap() <= 1e-12);
    }
}

#[test]
fn equal_similarities_give_log_m_plus_one() {
    // every view identical to the anchor
    let e = StochasticEmbedding::from_direction(&[0.3, -0.2, 0.9, 0.1], 6.0).unwrap();
    let batch = ContrastiveBatch::new(e.clone(), e.clone(), vec![e.clone(); 7]).unwrap();
    let cfg = SphereConfig::new(4, 1.3).unwrap();
    for kind in [SimilarityKind::Mls, SimilarityKind::ScaledInnerProduct] {
        let loss = info_nce(&batch, kind, &cfg).unwrap();
        assert!((loss.value - 8f64.ln()).abs() < 1e-14);
    }
}

#[test]
fn saturated_batch_has_vanishing_gradient() {
    // r^2 = 50: the positive scores 50, every negative at most 10
    let cfg = SphereConfig::new(3, 50f64.sqrt()).unwrap();
    let anchor = StochasticEmbedding::new(vec![0.0, 0.0, 1.0], 5.0).unwrap();
    let negatives = vec![
        StochasticEmbedding::from_direction(&[1.0, 0.0, 0.2], 5.0).unwrap(),
        StochasticEmbedding::from_direction(&[0.0, -1.0, 0.0], 5.0).unwrap(),
        StochasticEmbedding::from_direction(&[0.3, 0.4, -1.0], 5.0).unwrap(),
    ];
    let batch = ContrastiveBatch::new(anchor.clone(), anchor, negatives).unwrap();
    let g = info_nce_grad(&batch, SimilarityKind::ScaledInnerProduct, &cfg).unwrap();
    let s = &g.loss.per_similarity;
    assert!(s[1..].iter().all(|x| s[0] - x >= 40.0));
    let all = std::iter::once(&g.anchor).chain(std::iter::once(&g.positive)).chain(&g.negatives);
    for e in all {
        assert!(norm(&e.d_mu) <= 1e-12 && e.d_kappa.abs() <= 1e-12);
    }
}

#[test]
fn gradients_match_finite_differences_on_random_batches() {
    for seed in 0..20 {
        let batch = random_batch(seed, 8, 4);
        let cfg = SphereConfig::new(8, 1.5).unwrap();
        for kind in [SimilarityKind::Mls, SimilarityKind::ScaledInnerProduct] {
            let err = info_nce_grad_error(&batch, kind, &cfg).unwrap();
            assert!(err <= 1e-5, "seed {seed} {kind}: {err:e}");
        }
    }
}

#[test]
fn direction_gradients_are_tangent() {
    let batch = random_batch(99, 16, 6);
    let cfg = SphereConfig::new(16, 2.0).unwrap();
    let g = info_nce_grad(&batch, SimilarityKind::Mls, &cfg).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    assert!(dot(&g.anchor.d_mu, batch.anchor.mu()).abs() <= 1e-9);
    assert!(dot(&g.positive.d_mu, batch.positive.mu()).abs() <= 1e-9);
    for (n, e) in g.negatives.iter().zip(&batch.negatives) {
        assert!(dot(&n.d_mu, e.mu()).abs() <= 1e-9);
    }
}
