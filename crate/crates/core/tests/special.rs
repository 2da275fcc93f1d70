#![allow(clippy::excessive_precision)]

mod common;

use patchpair::special::*;
use patchpair::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

// Reference values computed with 30-digit arithmetic.
const GAMMA_0_75: f64 = 1.225_416_702_465_177_6;
const GAMMA_0_25: f64 = 3.625_609_908_221_908_3;
const C_1_5: f64 = 0.477_988_797_486_125_0;
const C_0_5: f64 = 2.092_099_240_106_203_3;
const C_1_25: f64 = 0.719_673_464_305_749_5;
const SIGMA_1_5: [f64; 8] = [
    0.0,
    0.154_682_700_757_828_35,
    0.274_991_468_013_917_02,
    0.376_791_194_153_684_37,
    0.466_614_481_924_067_33,
    0.547_883_170_859_175_73,
    0.622_650_364_679_475_47,
    0.692_261_200_305_271_78,
];

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn gamma_matches_reference_values() {
    assert!(close(gamma_fn(1.0).unwrap(), 1.0, 1e-14));
    assert!(close(gamma_fn(0.5).unwrap(), PI.sqrt(), 1e-14));
    assert!(close(gamma_fn(0.75).unwrap(), GAMMA_0_75, 1e-14));
    assert!(close(gamma_fn(0.25).unwrap(), GAMMA_0_25, 1e-14));
    assert!(close(gamma_fn(5.0).unwrap(), 24.0, 1e-13));
    assert!(close(gamma_fn(-0.5).unwrap(), -2.0 * PI.sqrt(), 1e-14));
}

#[test]
fn gamma_rejects_poles() {
    assert!(matches!(gamma_fn(0.0), Err(Error::Pole(_))));
    assert!(matches!(gamma_fn(-3.0), Err(Error::Pole(_))));
    assert!(matches!(ln_gamma(-1.0), Err(Error::Pole(_))));
}

#[test]
fn ln_gamma_tracks_sign() {
    let (l, s) = ln_gamma(-0.5).unwrap();
    assert!(close(l, (2.0 * PI.sqrt()).ln(), 1e-14));
    assert_eq!(s, -1.0);
    let (l, s) = ln_gamma(100.5).unwrap();
    assert_eq!(s, 1.0);
    assert!(close(l, 361.435_540_467_777_62, 1e-13));
}

#[test]
fn c_alpha_values() {
    assert!(close(c_alpha(1.0).unwrap(), 1.0, 1e-14));
    assert!(close(c_alpha(1.5).unwrap(), C_1_5, 1e-13));
    assert!(close(c_alpha(0.5).unwrap(), C_0_5, 1e-13));
    assert!(close(c_alpha(1.25).unwrap(), C_1_25, 1e-13));
    assert!(c_alpha(2.0).is_err());
    assert!(c_alpha(0.0).is_err());
}

#[test]
fn sigma_at_alpha_one_is_two_over_pi_odd_harmonic_tail() {
    // (2/π) Σ_{i=2}^{j} 1/(2i−1).
    assert_eq!(sigma_j(1.0, 1, Normalization::Calibrated).unwrap(), 0.0);
    assert!(close(sigma_j(1.0, 2, Normalization::Calibrated).unwrap(), 0.212_206_590_789_193_78, 1e-14));
    assert!(close(sigma_j(1.0, 3, Normalization::Calibrated).unwrap(), 0.339_530_545_262_710_05, 1e-14));
}

#[test]
fn sigma_at_alpha_three_halves_matches_reference() {
    for (k, want) in SIGMA_1_5.iter().enumerate() {
        let got = sigma_j(1.5, k + 1, Normalization::Calibrated).unwrap();
        assert!((got - want).abs() <= 1e-13 * want.max(1.0), "j={} got {got} want {want}", k + 1);
    }
}

#[test]
fn sigma_matches_quadrature_oracle() {
    for alpha in [1.0, 1.25, 1.5, 1.75] {
        for j in [1, 2, 5, 17] {
            let want = common::sigma_oracle(alpha, j, 8);
            let got = sigma_j(alpha, j, Normalization::Calibrated).unwrap();
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "alpha={alpha} j={j}: {got} vs {want}");
        }
    }
}

#[test]
fn three_routes_agree() {
    for alpha in [1.1, 1.5, 1.9] {
        for j in 1..=40 {
            let a = sigma_j(alpha, j, Normalization::Calibrated).unwrap();
            let b = sigma_j_log_gamma(alpha, j).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "log-gamma alpha={alpha} j={j}");
            let c = sigma_j_direct(alpha, j).unwrap();
            assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0), "direct alpha={alpha} j={j}");
        }
    }
    assert!(sigma_j_direct(1.0, 3).is_err());
    assert!(sigma_j_log_gamma(1.5, 0).is_err());
}

#[test]
fn printed_normalizations() {
    assert!(close(sigma_j(1.0, 2, Normalization::Raw).unwrap(), 8.0 * (1.0 + 1.0 / 3.0), 1e-14));
    assert!(close(sigma_j(1.0, 2, Normalization::TwoOverPi).unwrap(), 2.0 / PI * (1.0 + 1.0 / 3.0), 1e-14));
    let nu = kernel_moment_differences(1.5, 3).unwrap();
    assert!(close(sigma_j(1.5, 3, Normalization::Raw).unwrap(), -2f64.powf(1.5) * nu[3], 1e-14));
    assert!(close(sigma_j(1.5, 3, Normalization::TwoOverPi).unwrap(), -2.0 * PI * 2f64.powf(1.5) * nu[3], 1e-14));
    assert!(sigma_j(1.5, 0, Normalization::Calibrated).is_err());
}

#[test]
fn moments_at_alpha_one_limit_are_continuous() {
    let at = kernel_moment_differences(1.0, 10).unwrap();
    let near = kernel_moment_differences(1.0 + 1e-7, 10).unwrap();
    for (a, b) in at.iter().zip(&near) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn moment_matches_direct_mean_of_reference_integrand() {
    // ∫− (cos y − cos 2y)/|2 sin(y/2)|^{1.5} dy = ν₁ − ν₂.
    let nu = kernel_moment_differences(1.5, 2).unwrap();
    assert!((nu[1] - nu[2] - 0.323_611_560_713_027_6).abs() < 1e-13);
}

#[test]
fn multiplier_table_matches_pointwise() {
    let t = MultiplierTable::new(1.5, 32, Normalization::Calibrated).unwrap();
    assert_eq!(t.sigma.len(), 32);
    for j in 1..=32 {
        assert!(close(t.get(j), sigma_j(1.5, j, Normalization::Calibrated).unwrap(), 1e-14));
    }
}

proptest! {
    #[test]
    fn sigma_increases_with_mode(alpha in 1.0f64..1.99, j in 1usize..200) {
        let a = sigma_j(alpha, j, Normalization::Calibrated).unwrap();
        let b = sigma_j(alpha, j + 1, Normalization::Calibrated).unwrap();
        prop_assert!(b > a);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn gamma_recurrence(x in 0.05f64..30.0) {
        let a = gamma_fn(x + 1.0).unwrap();
        let b = x * gamma_fn(x).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a.abs());
    }

    #[test]
    fn reflection_formula(x in 0.01f64..0.99) {
        let lhs = gamma_fn(x).unwrap() * gamma_fn(1.0 - x).unwrap();
        prop_assert!((lhs - PI / (PI * x).sin()).abs() <= 1e-13 * lhs);
    }
}
