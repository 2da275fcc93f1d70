mod common;

use patchpair::types::{project_to_sine, radius_profile};
use patchpair::{CollocationGrid, CosineSeries, Error, Mode, SineSeries, SolveState};
use proptest::prelude::*;

#[test]
fn geometry_validation() {
    let g = common::fixture(1.0);
    assert!(g.validate(Mode::Corotating).is_ok());
    let close = patchpair::PairGeometry { d: 4.0, ..g };
    let err = close.validate(Mode::Corotating).unwrap_err().to_string();
    assert!(err.contains("d > 2(b1+b2)"), "{err}");
    let opposite = patchpair::PairGeometry { gamma2: -2.0, ..g };
    assert!(matches!(opposite.validate(Mode::Corotating), Err(Error::ZeroCirculation)));
    assert!(opposite.validate(Mode::Traveling).is_ok());
    assert!(g.with_eps(0.5).validate(Mode::Corotating).is_err());
    assert!(patchpair::PairGeometry { alpha: 2.0, ..g }.validate(Mode::Corotating).is_err());
    assert!(patchpair::PairGeometry { b1: 0.0, ..g }.validate(Mode::Corotating).is_err());
    assert!(patchpair::PairGeometry { d: f64::NAN, ..g }.validate(Mode::Corotating).is_err());
}

#[test]
fn delta_is_odd_in_eps() {
    let g = patchpair::PairGeometry { b1: 0.7, ..common::fixture(1.5) };
    let d = g.with_eps(0.1).delta(1);
    assert!((d - 0.1 * 0.1f64.powf(1.5) * 0.7f64.powf(2.5)).abs() < 1e-16);
    assert_eq!(g.with_eps(-0.1).delta(1), -d);
    assert_eq!(g.with_eps(0.0).delta(2), 0.0);
}

#[test]
fn radius_profile_examples() {
    let grid = CollocationGrid::new(64).unwrap();
    let g = common::fixture(1.0).with_eps(0.2);
    let zero = CosineSeries::zeros(8);
    assert!(radius_profile(&zero, &g, 1, &grid).iter().all(|r| *r == 1.0));
    let p = CosineSeries::mode(8, 3, 0.4);
    assert!(radius_profile(&p, &g.with_eps(0.0), 2, &grid).iter().all(|r| *r == 1.0));
    let r = radius_profile(&p, &g, 1, &grid);
    for (x, rv) in grid.points().iter().zip(&r) {
        assert!((rv - (1.0 + 0.2 * 0.2 * 0.4 * (3.0 * x).cos())).abs() < 1e-15);
    }
}

#[test]
fn series_evaluation() {
    let grid = CollocationGrid::new(32).unwrap();
    assert!(CosineSeries::zeros(5).eval_grid(&grid).iter().all(|v| *v == 0.0));
    assert_eq!(CosineSeries::mode(5, 1, 1.0).eval_at(0.0), 1.0);
    let p = CosineSeries { coeffs: vec![0.0, 0.5, -0.25, 0.125] };
    for (k, x) in grid.points().iter().enumerate() {
        assert!((p.eval_grid(&grid)[k] - p.eval_at(*x)).abs() < 1e-14);
        assert!((p.eval_deriv_grid(&grid)[k] - p.deriv_at(*x)).abs() < 1e-14);
        assert!((p.eval_deriv2_grid(&grid)[k] - p.deriv2_at(*x)).abs() < 1e-13);
    }
    let s = SineSeries { coeffs: vec![1.0, 0.0, 2.0] };
    for (k, x) in grid.points().iter().enumerate() {
        assert!((s.eval_grid(&grid)[k] - (x.sin() + 2.0 * (3.0 * x).sin())).abs() < 1e-14);
        assert!((s.eval_deriv_grid(&grid)[k] - (x.cos() + 6.0 * (3.0 * x).cos())).abs() < 1e-13);
    }
    assert!((s.norm() - 5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn grid_checks() {
    assert!(CollocationGrid::new(7).is_err());
    assert!(CollocationGrid::new(2).is_err());
    assert!(CollocationGrid::for_order(64, 16).is_ok());
    assert!(CollocationGrid::for_order(64, 17).is_err());
}

#[test]
fn projection_examples() {
    let grid = CollocationGrid::new(64).unwrap();
    let pts = grid.points();
    let v: Vec<f64> = pts.iter().map(|x| (3.0 * x).sin()).collect();
    let p = project_to_sine(&v, &grid, 8);
    for (k, a) in p.series.coeffs.iter().enumerate() {
        let want = if k == 2 { 1.0 } else { 0.0 };
        assert!((a - want).abs() < 1e-14);
    }
    assert!(p.parity_leak < 1e-14);

    let v: Vec<f64> = pts.iter().map(|x| x.cos()).collect();
    let p = project_to_sine(&v, &grid, 8);
    assert!(p.series.norm() < 1e-14);
    assert!((p.parity_leak - 1.0).abs() < 1e-13);
    assert!(matches!(p.checked(1e-9), Err(Error::ParityLeak { .. })));

    let v: Vec<f64> = pts.iter().map(|x| 2.0 * x.sin() + 0.5 * (4.0 * x).sin()).collect();
    let s = project_to_sine(&v, &grid, 8).checked(1e-12).unwrap();
    // Independent oracle: trapezoid on a finer, offset grid.
    let fine = 1000;
    for j in 1..=8 {
        let want: f64 = (0..fine)
            .map(|k| {
                let x = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / fine as f64;
                (2.0 * x.sin() + 0.5 * (4.0 * x).sin()) * (j as f64 * x).sin()
            })
            .sum::<f64>()
            * 2.0
            / fine as f64;
        assert!((s.coeffs[j - 1] - want).abs() < 1e-12);
    }
    assert!((s.coeffs[0] - 2.0).abs() < 1e-14 && (s.coeffs[3] - 0.5).abs() < 1e-14);
}

#[test]
fn state_validation_and_resize() {
    let mut s = SolveState::from_vector(Mode::Corotating, 4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    assert!(s.validate().is_ok());
    assert_eq!(s.p1.coeffs, vec![0.0, 3.0, 4.0, 5.0]);
    assert_eq!(s.p2.coeffs, vec![0.0, 6.0, 7.0, 8.0]);
    let big = s.resized(6);
    assert_eq!(big.p1.coeffs, vec![0.0, 3.0, 4.0, 5.0, 0.0, 0.0]);
    assert_eq!(big.resized(4), s);
    s.p1.coeffs[0] = 1e-3;
    assert!(s.validate().is_err());
}

proptest! {
    #[test]
    fn vector_roundtrip(v in prop::collection::vec(-10.0f64..10.0, 2..40)) {
        let n = v.len() / 2;
        prop_assume!(n >= 2);
        let v = &v[..2 * n];
        let s = SolveState::from_vector(Mode::Traveling, n, v);
        prop_assert_eq!(s.to_vector(), v.to_vec());
    }

    #[test]
    fn projection_inverts_synthesis(c in prop::collection::vec(-1.0f64..1.0, 1..16)) {
        let grid = CollocationGrid::new(64).unwrap();
        let s = SineSeries { coeffs: c.clone() };
        let back = project_to_sine(&s.eval_grid(&grid), &grid, c.len());
        for (a, b) in back.series.coeffs.iter().zip(&c) {
            prop_assert!((a - b).abs() < 1e-13);
        }
        prop_assert!(back.parity_leak < 1e-13);
    }
}
