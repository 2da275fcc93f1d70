//! Mean-value integrals ∫− f = (1/2π)∫₀^{2π} f over the circle, including integrands with a
//! |2 sin((y−y*)/2)|^{−α} singularity.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{gamma_fn, kernel_moment_differences};
use crate::types::{CosineSeries, PairGeometry};

/// Rule used for singular integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Trigonometric interpolation of the smooth factor integrated exactly against the kernel.
    #[default]
    SpectralProduct,
    /// Periodic trapezoid after subtracting a local model with a closed-form mean.
    Subtraction,
    /// Gauss–Jacobi near field on each side of the singularity, Gauss–Legendre far field.
    GaussJacobiSplit,
}

/// Quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub scheme: Scheme,
    /// Node count of the periodic (or far-field) rule for generic integrands.
    pub m_far: usize,
    /// Half-width δ of the near field.
    pub near_width: f64,
    /// Node count of the weighted near-field rule on each side.
    pub m_near: usize,
    /// Below this |ε| the 1/ε-prefactored terms use the Taylor remainder form.
    pub taylor_threshold: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::SpectralProduct,
            m_far: 512,
            near_width: PI / 8.0,
            m_near: 64,
            taylor_threshold: 1e-3,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_far < 16 || !self.m_far.is_multiple_of(2) {
            return Err(Error::Invalid("m_far must be even and >= 16".into()));
        }
        if !(self.near_width > 0.0 && self.near_width <= PI / 4.0) {
            return Err(Error::Invalid("near_width must lie in (0, pi/4]".into()));
        }
        if self.m_near < 2 {
            return Err(Error::Invalid("m_near must be >= 2".into()));
        }
        if !(self.taylor_threshold >= 0.0) {
            return Err(Error::Invalid("taylor_threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Integrand of a mean-value integral.
pub enum Integrand<'a> {
    /// Smooth 2π-periodic function.
    Smooth(&'a dyn Fn(f64) -> f64),
    /// |2 sin((y−at)/2)|^{−alpha} φ(y) with φ smooth and φ(at) = 0.
    Singular { at: f64, alpha: f64, phi: &'a dyn Fn(f64) -> f64 },
}

/// Singular kernel |2 sin(u/2)|^{−α}.
#[inline]
pub fn kernel(u: f64, alpha: f64) -> f64 {
    (2.0 * (0.5 * u).sin()).abs().powf(-alpha)
}

/// Returns (1/2π)∫₀^{2π} f(y) dy.
pub fn mean_integral(f: Integrand<'_>, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    match f {
        Integrand::Smooth(g) => {
            let m = cfg.m_far;
            let h = 2.0 * PI / m as f64;
            Ok((0..m).map(|k| g(k as f64 * h)).sum::<f64>() / m as f64)
        }
        Integrand::Singular { at, alpha, phi } => {
            let nodes = OffsetRule::new(alpha, cfg)?;
            let v = nodes.apply(|u| phi(at + u));
            if !v.is_finite() {
                return Err(Error::Quadrature("non-finite singular integral".into()));
            }
            Ok(v)
        }
    }
}

/// Offsets u_q and weights ω_q with ∫− |2 sin(u/2)|^{−α} φ(u) du ≈ Σ ω_q φ(u_q) for φ(0) = 0.
#[derive(Debug, Clone)]
pub struct OffsetRule {
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl OffsetRule {
    pub fn new(alpha: f64, cfg: &QuadratureConfig) -> Result<Self> {
        match cfg.scheme {
            Scheme::SpectralProduct | Scheme::Subtraction => {
                let m = cfg.m_far;
                let weights = grid_weights(alpha, m, cfg.scheme)?;
                let offsets = (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect();
                Ok(Self { offsets, weights })
            }
            Scheme::GaussJacobiSplit => gauss_jacobi_split(alpha, cfg),
        }
    }

    pub fn apply(&self, phi: impl Fn(f64) -> f64) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(u, w)| w * phi(*u))
            .sum()
    }
}

/// Weights W_k for the uniform offsets u_k = 2πk/M (k = 0..M−1) such that
/// ∫− |2 sin(u/2)|^{−α} φ(u) du ≈ Σ_k W_k φ(u_k) whenever φ(0) = 0.
pub fn grid_weights(alpha: f64, m: usize, scheme: Scheme) -> Result<Vec<f64>> {
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::Invalid(format!("grid size {m} must be even and >= 4")));
    }
    let half = m / 2;
    let nu = kernel_moment_differences(alpha, half)?;
    let mf = m as f64;
    match scheme {
        Scheme::SpectralProduct => {
            let cos_t: Vec<f64> = (0..m).map(|k| (2.0 * PI * k as f64 / mf).cos()).collect();
            Ok((0..m)
                .map(|k| {
                    let mut s = nu[half] * cos_t[(half * k) % m];
                    for (q, nq) in nu.iter().enumerate().take(half).skip(1) {
                        s += 2.0 * nq * cos_t[(q * k) % m];
                    }
                    s / mf
                })
                .collect())
        }
        Scheme::Subtraction => {
            let h = 2.0 * PI / mf;
            let mut w: Vec<f64> = (0..m)
                .map(|k| if k == 0 { 0.0 } else { kernel(k as f64 * h, alpha) / mf })
                .collect();
            // Model c·(1 − cos u) fitted at ±h; its exact mean is −c ν_1.
            let t = (1..m).map(|k| w[k] * (1.0 - (k as f64 * h).cos())).sum::<f64>() + nu[1];
            let corr = t / (2.0 * (1.0 - h.cos()));
            w[1] -= corr;
            w[m - 1] -= corr;
            Ok(w)
        }
        Scheme::GaussJacobiSplit => {
            Err(Error::Invalid("gauss_jacobi_split has no uniform-grid weights".into()))
        }
    }
}

fn gauss_jacobi_split(alpha: f64, cfg: &QuadratureConfig) -> Result<OffsetRule> {
    let delta = cfg.near_width;
    let beta = 1.0 - alpha;
    let (t, w) = gauss_jacobi(cfg.m_near, 0.0, beta)?;
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    let scale = (0.5 * delta).powf(2.0 - alpha) / (2.0 * PI);
    for (tq, wq) in t.iter().zip(&w) {
        let u = 0.5 * delta * (1.0 + tq);
        let g = u.powf(alpha - 1.0) * kernel(u, alpha);
        for sgn in [1.0, -1.0] {
            offsets.push(sgn * u);
            weights.push(scale * wq * g);
        }
    }
    let panels = (cfg.m_far / 16).max(1);
    let (tl, wl) = gauss_legendre(16)?;
    let width = (2.0 * PI - 2.0 * delta) / panels as f64;
    for p in 0..panels {
        let a = delta + p as f64 * width;
        for (tq, wq) in tl.iter().zip(&wl) {
            let u = a + 0.5 * width * (1.0 + tq);
            offsets.push(u);
            weights.push(0.5 * width * wq * kernel(u, alpha) / (2.0 * PI));
        }
    }
    Ok(OffsetRule { offsets, weights })
}

/// Gauss–Jacobi nodes and weights on [−1, 1] for the weight (1−t)^a (1+t)^b (Golub–Welsch).
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || a <= -1.0 || b <= -1.0 {
        return Err(Error::Domain(format!("gauss_jacobi(n = {n}, a = {a}, b = {b})")));
    }
    let ab = a + b;
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        jm[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let beta = if m == 1.0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * m * (m + a) * (m + b) * (m + ab)
                    / ((2.0 * m + ab).powi(2) * (2.0 * m + ab + 1.0) * (2.0 * m + ab - 1.0))
            };
            jm[(k, k + 1)] = beta.sqrt();
            jm[(k + 1, k)] = beta.sqrt();
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma_fn(a + 1.0)? * gamma_fn(b + 1.0)? / gamma_fn(ab + 2.0)?;
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(pairs.into_iter().unzip())
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    gauss_jacobi(n, 0.0, 0.0)
}

fn check_radius(r: f64, patch: usize, x: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::DegenerateBoundary { patch, x, value: r });
    }
    Ok(())
}

/// Self-interaction denominator
/// (δ_i²(p(x)−p(y))² + 4 R_i(x) R_i(y) sin²((x−y)/2))^{α/2}, δ_i = ε|ε|^α b_i^{1+α}.
pub fn self_kernel_denominator(
    p: &CosineSeries,
    geometry: &PairGeometry,
    patch: usize,
    x: f64,
    y: f64,
) -> Result<f64> {
    let delta = geometry.delta(patch);
    let (px, py) = (p.eval_at(x), p.eval_at(y));
    let (rx, ry) = (1.0 + delta * px, 1.0 + delta * py);
    check_radius(rx, patch, x)?;
    check_radius(ry, patch, y)?;
    let s = (0.5 * (x - y)).sin();
    let base = delta * delta * (px - py).powi(2) + 4.0 * rx * ry * s * s;
    Ok(base.powf(0.5 * geometry.alpha))
}

/// Cross-interaction denominator |ε b_k R_k(y) e(y) + ε b_i R_i(x) e(x) − d e₁|^α, k = 3 − i.
pub fn cross_kernel_denominator(
    p1: &CosineSeries,
    p2: &CosineSeries,
    geometry: &PairGeometry,
    i: usize,
    x: f64,
    y: f64,
) -> f64 {
    let k = 3 - i;
    let (pi, pk) = if i == 1 { (p1, p2) } else { (p2, p1) };
    let ri = 1.0 + geometry.delta(i) * pi.eval_at(x);
    let rk = 1.0 + geometry.delta(k) * pk.eval_at(y);
    let e = geometry.eps;
    let cx = e * geometry.b(k) * rk * y.cos() + e * geometry.b(i) * ri * x.cos() - geometry.d;
    let cy = e * geometry.b(k) * rk * y.sin() + e * geometry.b(i) * ri * x.sin();
    (cx * cx + cy * cy).powf(0.5 * geometry.alpha)
}
