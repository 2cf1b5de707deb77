//! `special_fn` against the 60-digit ascending-series references in `tests/data`.

mod common;

use vmf_contrast::special_fn::{bessel_ratio, log_bessel_i, log_bessel_i_scaled_limit, BesselOrder};

#[test]
fn grid_matches_reference() {
    let refs = common::bessel_refs("bessel_grid.csv");
    assert_eq!(refs.len(), 200);
    let mut worst = (0.0, 0.0, 0.0);
    for r in &refs {
        let got = log_bessel_i(BesselOrder::new(r.nu).unwrap(), r.kappa).unwrap();
        let err = common::exp_relative_error(got, r.log_i, r.log_i_lo);
        if err > worst.0 {
            worst = (err, r.nu, r.kappa);
        }
    }
    println!("worst exp-relative error {:e} at nu={} kappa={}", worst.0, worst.1, worst.2);
    assert!(worst.0 <= 1e-10);
}

#[test]
fn scaled_matches_reference() {
    for r in common::bessel_refs("bessel_grid.csv").iter().chain(&common::bessel_refs("bessel_points.csv")) {
        if r.kappa == 0.0 {
            continue;
        }
        let got = log_bessel_i_scaled_limit(BesselOrder::new(r.nu).unwrap(), r.kappa).unwrap();
        assert!(
            (got - r.log_i_minus_kappa).abs() <= 1e-12 * r.log_i_minus_kappa.abs().max(1.0),
            "nu={} kappa={}: {got} vs {}",
            r.nu,
            r.kappa,
            r.log_i_minus_kappa
        );
    }
}

#[test]
fn scaled_is_log_minus_kappa() {
    for r in common::bessel_refs("bessel_grid.csv") {
        if r.kappa == 0.0 || r.kappa > 1e3 {
            continue;
        }
        let nu = BesselOrder::new(r.nu).unwrap();
        let full = log_bessel_i(nu, r.kappa).unwrap();
        let scaled = log_bessel_i_scaled_limit(nu, r.kappa).unwrap();
        assert!((full - r.kappa - scaled).abs() <= 1e-12, "nu={} kappa={}", r.nu, r.kappa);
    }
}

#[test]
fn spot_values() {
    for r in common::bessel_refs("bessel_points.csv") {
        let got = log_bessel_i(BesselOrder::new(r.nu).unwrap(), r.kappa).unwrap();
        let err = (got - r.log_i).abs();
        // exp-relative 1e-10, widened by one ulp of the value for kappa = 1e8
        let ulp = r.log_i.abs() * f64::EPSILON;
        assert!(err <= 1e-10 + ulp, "nu={} kappa={}: {got} vs {}", r.nu, r.kappa, r.log_i);
    }
    // closed form for I_{1/2}
    let x: f64 = 1.0;
    let closed = ((2.0 / std::f64::consts::PI).sqrt() * x.sinh()).ln();
    let got = log_bessel_i(BesselOrder::new(0.5).unwrap(), 1.0).unwrap();
    assert!((got - closed).abs() < 1e-14);
}

#[test]
fn ratio_matches_reference() {
    for (nu, kappa, expected) in common::ratio_refs() {
        let got = bessel_ratio(BesselOrder::new(nu).unwrap(), kappa).unwrap();
        assert!(((got - expected) / expected).abs() <= 1e-10, "nu={nu} kappa={kappa}: {got} vs {expected}");
    }
}
