//! Reference quadrature and fixtures shared by the integration tests.
#![allow(dead_code)]

use patchpair::special::c_alpha;
use patchpair::{CosineSeries, PairGeometry};
use std::f64::consts::PI;

/// Standard fixture: γ₁ = 2, γ₂ = 1, b₁ = b₂ = 1, d = 10.
pub fn fixture(alpha: f64) -> PairGeometry {
    PairGeometry { alpha, eps: 0.0, b1: 1.0, b2: 1.0, gamma1: 2.0, gamma2: 1.0, d: 10.0 }
}

/// ∫₀^L f(u) du by the double-exponential rule, with f integrable and possibly singular at
/// u = 0. Nodes near 0 are generated from their distance to 0, so no precision is lost there.
pub fn tanh_sinh_from_zero(f: impl Fn(f64) -> f64, len: f64, level: u32) -> f64 {
    let h = 0.5f64.powi(level as i32);
    let half = 0.5 * len;
    let mut sum = 0.0;
    let kmax = (4.5 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let s = 0.5 * PI * t.sinh();
        let w = half * 0.5 * PI * t.cosh() / s.cosh().powi(2);
        // Distance of the node to the nearer endpoint: half (1 − tanh|s|) = len / (1 + e^{2|s|}).
        let gap = len / (1.0 + (2.0 * s.abs()).exp());
        if gap == 0.0 || w == 0.0 {
            continue;
        }
        let u = if s < 0.0 { gap } else { len - gap };
        sum += w * f(u);
    }
    sum * h
}

/// Mean integral (1/2π)∫_{−π}^{π} g(u) du of an integrand singular only at u = 0.
pub fn mean_singular(g: impl Fn(f64) -> f64, level: u32) -> f64 {
    tanh_sinh_from_zero(|u| g(u) + g(-u), PI, level) / (2.0 * PI)
}

/// Calibrated σ_j from the linearized self-interaction acting on cos(jx), evaluated at
/// x₀ = π/(2j) by double-exponential quadrature in the offset u = y − x₀.
pub fn sigma_oracle(alpha: f64, j: usize, level: u32) -> f64 {
    let jf = j as f64;
    let x0 = PI / (2.0 * jf);
    let g = |u: f64| {
        let k = (2.0 * (0.5 * u).sin()).abs().powf(-alpha);
        let su = -u.sin();
        let smooth = su * ((1.0 - 0.5 * alpha) * (jf * (x0 + u)).cos() - 0.5 * alpha * (jf * x0).cos());
        let ddp = -2.0 * jf * (jf * (x0 + 0.5 * u)).cos() * (0.5 * jf * u).sin();
        k * (smooth + ddp * u.cos())
    };
    c_alpha(alpha).unwrap() * mean_singular(g, level) / (jf * (jf * x0).sin())
}

/// p(x) − p(y) as a product form free of cancellation when y → x.
pub fn series_diff(p: &CosineSeries, x: f64, y: f64) -> f64 {
    p.coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let j = (k + 1) as f64;
            -2.0 * a * (0.5 * j * (x + y)).sin() * (0.5 * j * (x - y)).sin()
        })
        .sum()
}

/// p′(y) − p′(x) as a product form.
pub fn deriv_diff(p: &CosineSeries, x: f64, y: f64) -> f64 {
    p.coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let j = (k + 1) as f64;
            -2.0 * j * a * (0.5 * j * (x + y)).cos() * (0.5 * j * (y - x)).sin()
        })
        .sum()
}

/// Directional derivative of F_i22 = −γ C_α ∫− (p′(y) − p′(x)) cos(x−y) D^{−α/2} dy along h,
/// D = δ²(p(x)−p(y))² + 4 R(x) R(y) sin²((x−y)/2), from its closed-form Gateaux integrand.
pub fn gateaux_f22(geometry: &PairGeometry, gamma: f64, p: &CosineSeries, h: &CosineSeries, x: f64) -> f64 {
    let a = geometry.alpha;
    let delta = geometry.delta(1);
    let rx = 1.0 + delta * p.eval_at(x);
    let hx = h.eval_at(x);
    let g = |u: f64| {
        let y = x + u;
        let ry = 1.0 + delta * p.eval_at(y);
        let dp = series_diff(p, x, y);
        let dh = series_diff(h, x, y);
        let s2 = (0.5 * u).sin().powi(2);
        let d = delta * delta * dp * dp + 4.0 * rx * ry * s2;
        let dd = 2.0 * delta * delta * dp * dh + 4.0 * delta * (hx * ry + h.eval_at(y) * rx) * s2;
        let c = u.cos();
        deriv_diff(h, x, y) * c * d.powf(-0.5 * a) - 0.5 * a * deriv_diff(p, x, y) * c * d.powf(-0.5 * a - 1.0) * dd
    };
    -gamma * c_alpha(a).unwrap() * mean_singular(g, 8)
}

/// Relative difference max|a − b| / max|b|.
pub fn rel_max(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    num / den
}
