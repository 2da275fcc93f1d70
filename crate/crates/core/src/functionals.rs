//! Nonlinear residuals of the co-rotating (F) and traveling (G) systems and the point-vortex
//! equilibria they bifurcate from.
//!
//! For patch i with perturbation p_i, R_i = 1 + δ_i p_i and δ_i = ε|ε|^α b_i^{1+α}. Each residual
//! component is the boundary-normal velocity in the moving frame, divided by ε b_i R_i(x):
//!
//! * co-rotating: F_i = F_i1 − γ_i C_α S_i + γ_k C_α X_i,
//! * traveling:   G_i = G_i1 + γ_i C_α S_i + γ_k C_α X_i,
//!
//! where k = 3 − i, S_i is the self-interaction integral (scaled by 1/δ_i) and X_i the
//! interaction with the other patch (scaled by 1/(ε b_k)). Both are evaluated in forms free of
//! cancellation at small ε, with exact limits at ε = 0.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, grid_weights, OffsetRule, QuadratureConfig, Scheme};
use crate::special::c_alpha;
use crate::types::{
    project_to_sine, CollocationGrid, CosineSeries, Mode, PairGeometry, SineSeries, SolveState,
};

/// Sine-series residuals of both patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualPair {
    pub r1: SineSeries,
    pub r2: SineSeries,
    /// Larger of the two discarded even-content norms.
    pub parity_leak: f64,
}

impl ResidualPair {
    /// ℓ² norm over all sine coefficients of both components.
    pub fn norm(&self) -> f64 {
        (self.r1.norm().powi(2) + self.r2.norm().powi(2)).sqrt()
    }

    /// Coefficients of r₁ followed by those of r₂.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.r1.coeffs.clone();
        v.extend_from_slice(&self.r2.coeffs);
        v
    }

    /// Inverse of [`ResidualPair::to_vector`].
    pub fn from_vector(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self {
            r1: SineSeries { coeffs: v[..n].to_vec() },
            r2: SineSeries { coeffs: v[n..].to_vec() },
            parity_leak: 0.0,
        }
    }
}

/// Angular velocity of the point-vortex pair, αC_α(γ₁+γ₂)/(2d^{2+α}).
pub fn omega_star(geometry: &PairGeometry) -> Result<f64> {
    let total = geometry.gamma1 + geometry.gamma2;
    if total == 0.0 {
        return Err(Error::ZeroCirculation);
    }
    let a = geometry.alpha;
    Ok(a * c_alpha(a)? * total / (2.0 * geometry.d.powf(2.0 + a)))
}

/// Rotation center of the point-vortex pair, dγ₂/(γ₁+γ₂).
pub fn xbar_star(geometry: &PairGeometry) -> Result<f64> {
    let total = geometry.gamma1 + geometry.gamma2;
    if total == 0.0 {
        return Err(Error::ZeroCirculation);
    }
    Ok(geometry.d * geometry.gamma2 / total)
}

/// Translation speed of the point-vortex pair, αC_α γ₁/(2d^{1+α}).
pub fn u_star(geometry: &PairGeometry) -> Result<f64> {
    let a = geometry.alpha;
    Ok(a * c_alpha(a)? * geometry.gamma1 / (2.0 * geometry.d.powf(1.0 + a)))
}

/// Trivial state at ε = 0 for the given mode and order.
pub fn trivial_state(mode: Mode, geometry: &PairGeometry, n: usize) -> Result<SolveState> {
    let (s1, s2) = match mode {
        Mode::Corotating => (omega_star(geometry)?, xbar_star(geometry)?),
        Mode::Traveling => (u_star(geometry)?, geometry.gamma1),
    };
    Ok(SolveState {
        mode,
        scalar1: s1,
        scalar2: s2,
        p1: CosineSeries::zeros(n),
        p2: CosineSeries::zeros(n),
    })
}

/// Grid samples of p and p′ for one patch.
#[derive(Debug, Clone)]
pub struct PatchSamples {
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
}

impl PatchSamples {
    pub fn new(p: &CosineSeries, grid: &CollocationGrid) -> Self {
        Self { p: p.eval_grid(grid), dp: p.eval_deriv_grid(grid) }
    }
}

/// (1+s)^{−α/2} and ((1+s)^{−α/2} − 1)/scale with s = scale·s_over, free of cancellation.
#[inline]
fn power_and_quotient(s_over: f64, scale: f64, ha: f64, taylor: Option<&[(f64, f64)]>) -> (f64, f64) {
    let s = scale * s_over;
    let l = s.ln_1p();
    let pw = (-ha * l).exp();
    let q = if scale == 0.0 {
        -ha * s_over
    } else if let Some(rule) = taylor {
        // Taylor formula with integral remainder: E(s) = −(α/2) s ∫₀¹ (1+ts)^{−1−α/2} dt.
        let integral: f64 = rule.iter().map(|(t, w)| w * (1.0 + t * s).powf(-1.0 - ha)).sum();
        -ha * s_over * integral
    } else {
        (-ha * l).exp_m1() / scale
    };
    (pw, q)
}

#[derive(Clone, Copy)]
struct SelfKernel<'a> {
    delta: f64,
    ha: f64,
    taylor: Option<&'a [(f64, f64)]>,
}

impl SelfKernel<'_> {
    /// The four self-interaction integrands without the |2 sin(u/2)|^{−α} factor.
    /// `su`, `cu` are sin(x−y), cos(x−y); `inv_a` is 1/(4 sin²((x−y)/2)).
    #[inline]
    fn parts(&self, px: f64, dpx: f64, py: f64, dpy: f64, su: f64, cu: f64, inv_a: f64) -> [f64; 4] {
        let d = self.delta;
        let dp = px - py;
        let s_over = d * dp * dp * inv_a + px + py + d * px * py;
        let (pw, q) = power_and_quotient(s_over, d, self.ha, self.taylor);
        let rx = 1.0 + d * px;
        [
            su * q + py * su * pw,
            (dpy - dpx) * cu * pw,
            d * dpx * dp * cu * pw / rx,
            d * dpx * dpy * su * pw / rx,
        ]
    }

    #[inline]
    fn sum(&self, px: f64, dpx: f64, py: f64, dpy: f64, su: f64, cu: f64, inv_a: f64) -> f64 {
        let p = self.parts(px, dpx, py, dpy, su, cu, inv_a);
        p[0] + p[1] + p[2] + p[3]
    }
}

#[derive(Clone, Copy)]
struct CrossKernel<'a> {
    eps: f64,
    bi: f64,
    bk: f64,
    d: f64,
    di: f64,
    dk: f64,
    di_e: f64,
    dk_e: f64,
    ha: f64,
    taylor: Option<&'a [(f64, f64)]>,
}

/// Point data of one side of a cross-interaction pair: p, p′ and the cosine of the angle.
#[derive(Clone, Copy)]
struct Side {
    p: f64,
    dp: f64,
    c: f64,
}

impl CrossKernel<'_> {
    /// The four cross-interaction integrands (target patch i at x, source patch k at y),
    /// without the d^{−α}/b_k prefactor.
    #[inline]
    fn parts(&self, x: Side, y: Side, cu: f64, su: f64) -> [f64; 4] {
        let rix = 1.0 + self.di * x.p;
        let rky = 1.0 + self.dk * y.p;
        let s1 = -2.0 * (self.bk * rky * y.c + self.bi * rix * x.c) / self.d;
        let s2 = (self.bk * self.bk * rky * rky
            + self.bi * self.bi * rix * rix
            + 2.0 * self.bi * self.bk * rix * rky * cu)
            / (self.d * self.d);
        let (pw, q) = power_and_quotient(s1 + self.eps * s2, self.eps, self.ha, self.taylor);
        [
            self.dk_e * y.p * su * pw + su * q,
            self.di_e * self.dk * x.dp * y.dp * su / rix * pw,
            self.dk_e * y.dp * cu * pw,
            -self.di_e * x.dp * rky / rix * cu * pw,
        ]
    }

    #[inline]
    fn sum(&self, x: Side, y: Side, cu: f64, su: f64) -> f64 {
        let p = self.parts(x, y, cu, su);
        p[0] + p[1] + p[2] + p[3]
    }
}

/// Precomputed data for residual and Jacobian evaluation at fixed (α, M, N, quadrature).
#[derive(Debug, Clone)]
pub struct Assembler {
    pub alpha: f64,
    pub c_alpha: f64,
    pub grid: CollocationGrid,
    pub n: usize,
    pub quad: QuadratureConfig,
    /// Parity tolerance for projections.
    pub parity_tol: f64,
    weights: Vec<f64>,
    taylor_rule: Vec<(f64, f64)>,
    offsets: Option<OffsetRule>,
}

impl Assembler {
    pub fn new(alpha: f64, n: usize, grid: CollocationGrid, quad: QuadratureConfig) -> Result<Self> {
        grid.check_order(n)?;
        quad.validate()?;
        let (weights, offsets) = match quad.scheme {
            Scheme::GaussJacobiSplit => (Vec::new(), Some(OffsetRule::new(alpha, &quad)?)),
            s => (grid_weights(alpha, grid.len(), s)?, None),
        };
        let (t, w) = gauss_legendre(8)?;
        let taylor_rule = t.iter().zip(&w).map(|(t, w)| (0.5 * (1.0 + t), 0.5 * w)).collect();
        Ok(Self {
            alpha,
            c_alpha: c_alpha(alpha)?,
            grid,
            n,
            quad,
            parity_tol: 1e-9,
            weights,
            taylor_rule,
            offsets,
        })
    }

    fn taylor(&self, eps: f64) -> Option<&[(f64, f64)]> {
        (eps.abs() < self.quad.taylor_threshold).then_some(self.taylor_rule.as_slice())
    }

    fn check_alpha(&self, geometry: &PairGeometry) -> Result<()> {
        if geometry.alpha != self.alpha {
            return Err(Error::Invalid("geometry alpha differs from the assembler's".into()));
        }
        Ok(())
    }

    fn check_radius(&self, geometry: &PairGeometry, patch: usize, s: &PatchSamples) -> Result<()> {
        let delta = geometry.delta(patch);
        for (m, p) in s.p.iter().enumerate() {
            let r = 1.0 + delta * p;
            if !(r > 0.0) {
                return Err(Error::DegenerateBoundary { patch, x: self.grid.points()[m], value: r });
            }
        }
        Ok(())
    }

    fn self_kernel(&self, geometry: &PairGeometry, patch: usize) -> SelfKernel<'_> {
        SelfKernel { delta: geometry.delta(patch), ha: 0.5 * self.alpha, taylor: self.taylor(geometry.eps) }
    }

    fn cross_kernel(&self, geometry: &PairGeometry, i: usize) -> CrossKernel<'_> {
        let k = 3 - i;
        CrossKernel {
            eps: geometry.eps,
            bi: geometry.b(i),
            bk: geometry.b(k),
            d: geometry.d,
            di: geometry.delta(i),
            dk: geometry.delta(k),
            di_e: geometry.delta_over_eps(i),
            dk_e: geometry.delta_over_eps(k),
            ha: 0.5 * self.alpha,
            taylor: self.taylor(geometry.eps),
        }
    }

    /// Per-offset tables (weight, sin(x−y), cos(x−y), 1/(4 sin²((x−y)/2))) for y = x + 2πk/M.
    fn offset_tables(&self) -> Vec<(f64, f64, f64, f64)> {
        let m = self.grid.len();
        (0..m)
            .map(|k| {
                if k == 0 {
                    return (0.0, 0.0, 1.0, 0.0);
                }
                let s = self.grid.sin_k(k);
                let half = (PI * k as f64 / m as f64).sin();
                (self.weights[k], -s, self.grid.cos_k(k), 1.0 / (4.0 * half * half))
            })
            .collect()
    }

    /// The four self-interaction integrals of patch `patch` at every grid point (scaled by 1/δ,
    /// without the −γ C_α factor).
    pub fn self_integral_parts(
        &self,
        geometry: &PairGeometry,
        patch: usize,
        p: &CosineSeries,
    ) -> Result<[Vec<f64>; 4]> {
        self.check_alpha(geometry)?;
        let s = PatchSamples::new(p, &self.grid);
        self.check_radius(geometry, patch, &s)?;
        let ker = self.self_kernel(geometry, patch);
        let m = self.grid.len();
        let mut out = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        if let Some(rule) = &self.offsets {
            for (xi, &x) in self.grid.points().iter().enumerate() {
                let (px, dpx) = (s.p[xi], s.dp[xi]);
                let mut acc = [0.0; 4];
                for (u, w) in rule.offsets.iter().zip(&rule.weights) {
                    let y = x + u;
                    let half = (0.5 * u).sin();
                    let parts = ker.parts(
                        px,
                        dpx,
                        p.eval_at(y),
                        p.deriv_at(y),
                        -u.sin(),
                        u.cos(),
                        1.0 / (4.0 * half * half),
                    );
                    for (a, v) in acc.iter_mut().zip(parts) {
                        *a += w * v;
                    }
                }
                for (o, a) in out.iter_mut().zip(acc) {
                    o[xi] = a;
                }
            }
            return Ok(out);
        }
        let tables = self.offset_tables();
        for xi in 0..m {
            let (px, dpx) = (s.p[xi], s.dp[xi]);
            let mut acc = [0.0; 4];
            for (k, &(w, su, cu, inv_a)) in tables.iter().enumerate().skip(1) {
                let yi = (xi + k) % m;
                let parts = ker.parts(px, dpx, s.p[yi], s.dp[yi], su, cu, inv_a);
                for (a, v) in acc.iter_mut().zip(parts) {
                    *a += w * v;
                }
            }
            for (o, a) in out.iter_mut().zip(acc) {
                o[xi] = a;
            }
        }
        Ok(out)
    }

    fn self_integral(&self, geometry: &PairGeometry, patch: usize, s: &PatchSamples) -> Vec<f64> {
        let ker = self.self_kernel(geometry, patch);
        let tables = self.offset_tables();
        let m = self.grid.len();
        (0..m)
            .map(|xi| {
                let (px, dpx) = (s.p[xi], s.dp[xi]);
                tables
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, &(w, su, cu, inv_a))| {
                        let yi = (xi + k) % m;
                        w * ker.sum(px, dpx, s.p[yi], s.dp[yi], su, cu, inv_a)
                    })
                    .sum()
            })
            .collect()
    }

    fn side(&self, s: &PatchSamples, idx: usize) -> Side {
        Side { p: s.p[idx], dp: s.dp[idx], c: self.grid.cos_k(idx) }
    }

    /// The four cross-interaction integrals for target patch `i` (without γ_k C_α).
    pub fn cross_integral_parts(
        &self,
        geometry: &PairGeometry,
        i: usize,
        p1: &CosineSeries,
        p2: &CosineSeries,
    ) -> Result<[Vec<f64>; 4]> {
        self.check_alpha(geometry)?;
        let s1 = PatchSamples::new(p1, &self.grid);
        let s2 = PatchSamples::new(p2, &self.grid);
        self.check_radius(geometry, 1, &s1)?;
        self.check_radius(geometry, 2, &s2)?;
        let (si, sk) = if i == 1 { (&s1, &s2) } else { (&s2, &s1) };
        let ker = self.cross_kernel(geometry, i);
        let m = self.grid.len();
        let pref = geometry.d.powf(-self.alpha) / geometry.b(3 - i) / m as f64;
        let mut out = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        for xi in 0..m {
            let x = self.side(si, xi);
            let mut acc = [0.0; 4];
            for yi in 0..m {
                let k = (xi + m - yi) % m;
                let parts = ker.parts(x, self.side(sk, yi), self.grid.cos_k(k), self.grid.sin_k(k));
                for (a, v) in acc.iter_mut().zip(parts) {
                    *a += v;
                }
            }
            for (o, a) in out.iter_mut().zip(acc) {
                o[xi] = pref * a;
            }
        }
        Ok(out)
    }

    fn cross_integral(&self, geometry: &PairGeometry, i: usize, si: &PatchSamples, sk: &PatchSamples) -> Vec<f64> {
        let ker = self.cross_kernel(geometry, i);
        let m = self.grid.len();
        let pref = geometry.d.powf(-self.alpha) / geometry.b(3 - i) / m as f64;
        (0..m)
            .map(|xi| {
                let x = self.side(si, xi);
                pref * (0..m)
                    .map(|yi| {
                        let k = (xi + m - yi) % m;
                        ker.sum(x, self.side(sk, yi), self.grid.cos_k(k), self.grid.sin_k(k))
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    /// Pointwise rigid-motion term F_i1 or G_i1 at one grid point.
    #[inline]
    fn motion_term(&self, mode: Mode, geometry: &PairGeometry, state: &SolveState, i: usize, xi: usize, p: f64, dp: f64) -> f64 {
        let delta = geometry.delta(i);
        let (c, s) = (self.grid.cos_k(xi), self.grid.sin_k(xi));
        let quot = delta * dp * c / (1.0 + delta * p);
        match mode {
            Mode::Corotating => {
                let center = if i == 1 { -state.scalar2 } else { state.scalar2 - geometry.d };
                let a = self.alpha;
                let lead = (geometry.eps.abs() * geometry.b(i)).powf(2.0 + a) * dp;
                -state.scalar1 * (lead + center * (quot - s))
            }
            Mode::Traveling => -state.scalar1 * (s - quot),
        }
    }

    /// (γ₁, γ₂) entering the residual: γ₂ is the unknown in traveling mode.
    fn gammas(&self, geometry: &PairGeometry, state: &SolveState) -> (f64, f64) {
        match state.mode {
            Mode::Corotating => (geometry.gamma1, geometry.gamma2),
            Mode::Traveling => (geometry.gamma1, state.scalar2),
        }
    }

    fn self_sign(mode: Mode) -> f64 {
        match mode {
            Mode::Corotating => -1.0,
            Mode::Traveling => 1.0,
        }
    }

    fn combine(
        &self,
        geometry: &PairGeometry,
        state: &SolveState,
        samples: [&PatchSamples; 2],
        selfs: [&[f64]; 2],
        cross: [&[f64]; 2],
    ) -> [Vec<f64>; 2] {
        let mode = state.mode;
        let (g1, g2) = self.gammas(geometry, state);
        let g = [g1, g2];
        let ss = Self::self_sign(mode) * self.c_alpha;
        let m = self.grid.len();
        let mut out = [vec![0.0; m], vec![0.0; m]];
        for i in 0..2 {
            let s = samples[i];
            for xi in 0..m {
                out[i][xi] = self.motion_term(mode, geometry, state, i + 1, xi, s.p[xi], s.dp[xi])
                    + ss * g[i] * selfs[i][xi]
                    + self.c_alpha * g[1 - i] * cross[i][xi];
            }
        }
        out
    }

    fn prepare(&self, geometry: &PairGeometry, state: &SolveState) -> Result<[PatchSamples; 2]> {
        self.check_alpha(geometry)?;
        if state.order() != self.n {
            return Err(Error::Invalid(format!("state order {} != N = {}", state.order(), self.n)));
        }
        let s1 = PatchSamples::new(&state.p1, &self.grid);
        let s2 = PatchSamples::new(&state.p2, &self.grid);
        self.check_radius(geometry, 1, &s1)?;
        self.check_radius(geometry, 2, &s2)?;
        Ok([s1, s2])
    }

    fn integrals(&self, geometry: &PairGeometry, state: &SolveState, s: &[PatchSamples; 2]) -> Result<[Vec<f64>; 4]> {
        let (self1, self2) = match self.offsets {
            Some(_) => {
                let sum = |parts: [Vec<f64>; 4]| -> Vec<f64> {
                    (0..self.grid.len()).map(|m| parts.iter().map(|v| v[m]).sum()).collect()
                };
                (
                    sum(self.self_integral_parts(geometry, 1, &state.p1)?),
                    sum(self.self_integral_parts(geometry, 2, &state.p2)?),
                )
            }
            None => (self.self_integral(geometry, 1, &s[0]), self.self_integral(geometry, 2, &s[1])),
        };
        let x1 = self.cross_integral(geometry, 1, &s[0], &s[1]);
        let x2 = self.cross_integral(geometry, 2, &s[1], &s[0]);
        Ok([self1, self2, x1, x2])
    }

    /// Pointwise residual samples of both patches.
    pub fn residual_grid(&self, geometry: &PairGeometry, state: &SolveState) -> Result<[Vec<f64>; 2]> {
        let s = self.prepare(geometry, state)?;
        let [a, b, c, d] = self.integrals(geometry, state, &s)?;
        let out = self.combine(geometry, state, [&s[0], &s[1]], [&a, &b], [&c, &d]);
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("assembling the residual".into()));
        }
        Ok(out)
    }

    /// Residual pair projected to sine series of order N.
    pub fn residual(&self, geometry: &PairGeometry, state: &SolveState) -> Result<ResidualPair> {
        let [g1, g2] = self.residual_grid(geometry, state)?;
        let p1 = project_to_sine(&g1, &self.grid, self.n);
        let p2 = project_to_sine(&g2, &self.grid, self.n);
        let leak = p1.parity_leak.max(p2.parity_leak);
        Ok(ResidualPair { r1: p1.checked(self.parity_tol)?, r2: p2.checked(self.parity_tol)?, parity_leak: leak })
    }

    /// Newton matrix d(residual)/d(unknowns) with unknown ordering
    /// (scalar1, scalar2, a_2..a_N of p₁, a_2..a_N of p₂).
    ///
    /// Central differences of step `h` are taken in the pointwise arguments (p, p′ at the two
    /// ends of every quadrature pair and at every grid point) and composed with the exact chain
    /// rule through the series, so one matrix costs a few residual evaluations.
    pub fn jacobian(&self, geometry: &PairGeometry, state: &SolveState, h: f64) -> Result<DMatrix<f64>> {
        if self.offsets.is_some() {
            return Err(Error::Invalid("chained Jacobian needs a grid quadrature scheme".into()));
        }
        let samples = self.prepare(geometry, state)?;
        let [self1, self2, x1, x2] = self.integrals(geometry, state, &samples)?;
        let n = self.n;
        let m = self.grid.len();
        let mode = state.mode;
        let (g1, g2) = self.gammas(geometry, state);
        let gam = [g1, g2];
        let step = |v: f64| h * v.abs().max(1.0);

        // Scalar columns.
        let mut scal_cols: Vec<[Vec<f64>; 2]> = Vec::new();
        for which in 0..2 {
            let mut plus = state.clone();
            let mut minus = state.clone();
            let v = if which == 0 { state.scalar1 } else { state.scalar2 };
            let hs = step(v);
            if which == 0 {
                plus.scalar1 += hs;
                minus.scalar1 -= hs;
            } else {
                plus.scalar2 += hs;
                minus.scalar2 -= hs;
            }
            let sref = [&samples[0], &samples[1]];
            let rp = self.combine(geometry, &plus, sref, [&self1, &self2], [&x1, &x2]);
            let rm = self.combine(geometry, &minus, sref, [&self1, &self2], [&x1, &x2]);
            let col = [0, 1].map(|i| (0..m).map(|k| (rp[i][k] - rm[i][k]) / (2.0 * hs)).collect());
            scal_cols.push(col);
        }

        // Basis matrices for a_j, j = 2..N.
        let cb = DMatrix::from_fn(m, n - 1, |k, j| self.grid.cos_k((j + 2) * k));
        let db = DMatrix::from_fn(m, n - 1, |k, j| -((j + 2) as f64) * self.grid.sin_k((j + 2) * k));

        // blocks[i][q]: grid Jacobian of r_i with respect to the coefficients of p_q.
        let mut blocks: Vec<Vec<DMatrix<f64>>> = vec![vec![DMatrix::zeros(m, n - 1); 2]; 2];
        let ss = Self::self_sign(mode) * self.c_alpha;
        let tables = self.offset_tables();
        for i in 0..2 {
            let s = &samples[i];
            let other = &samples[1 - i];
            let mut l1 = vec![0.0; m];
            let mut l2 = vec![0.0; m];
            for xi in 0..m {
                let (p, dp) = (s.p[xi], s.dp[xi]);
                let (hp, hd) = (step(p), step(dp));
                let t = |pp: f64, dd: f64| self.motion_term(mode, geometry, state, i + 1, xi, pp, dd);
                l1[xi] = (t(p + hp, dp) - t(p - hp, dp)) / (2.0 * hp);
                l2[xi] = (t(p, dp + hd) - t(p, dp - hd)) / (2.0 * hd);
            }
            // Self-interaction.
            let ker = self.self_kernel(geometry, i + 1);
            let coef = ss * gam[i];
            let mut g3 = DMatrix::<f64>::zeros(m, m);
            let mut g4 = DMatrix::<f64>::zeros(m, m);
            for xi in 0..m {
                let (px, dpx) = (s.p[xi], s.dp[xi]);
                let (hpx, hdx) = (step(px), step(dpx));
                let (mut a1, mut a2) = (0.0, 0.0);
                for (k, &(w, su, cu, inv_a)) in tables.iter().enumerate().skip(1) {
                    let yi = (xi + k) % m;
                    let (py, dpy) = (s.p[yi], s.dp[yi]);
                    let (hpy, hdy) = (step(py), step(dpy));
                    let f = |a: f64, b: f64, c: f64, d: f64| ker.sum(a, b, c, d, su, cu, inv_a);
                    a1 += w * (f(px + hpx, dpx, py, dpy) - f(px - hpx, dpx, py, dpy)) / (2.0 * hpx);
                    a2 += w * (f(px, dpx + hdx, py, dpy) - f(px, dpx - hdx, py, dpy)) / (2.0 * hdx);
                    g3[(xi, yi)] = coef * w * (f(px, dpx, py + hpy, dpy) - f(px, dpx, py - hpy, dpy)) / (2.0 * hpy);
                    g4[(xi, yi)] = coef * w * (f(px, dpx, py, dpy + hdy) - f(px, dpx, py, dpy - hdy)) / (2.0 * hdy);
                }
                l1[xi] += coef * a1;
                l2[xi] += coef * a2;
            }
            let mut own = &g3 * &cb + &g4 * &db;
            // Cross-interaction.
            let ker = self.cross_kernel(geometry, i + 1);
            let coef = self.c_alpha * gam[1 - i] * geometry.d.powf(-self.alpha) / geometry.b(2 - i) / m as f64;
            for xi in 0..m {
                let x = self.side(s, xi);
                let (hpx, hdx) = (step(x.p), step(x.dp));
                let (mut a1, mut a2) = (0.0, 0.0);
                for yi in 0..m {
                    let k = (xi + m - yi) % m;
                    let (cu, su) = (self.grid.cos_k(k), self.grid.sin_k(k));
                    let y = self.side(other, yi);
                    let (hpy, hdy) = (step(y.p), step(y.dp));
                    let f = |x: Side, y: Side| ker.sum(x, y, cu, su);
                    a1 += (f(Side { p: x.p + hpx, ..x }, y) - f(Side { p: x.p - hpx, ..x }, y)) / (2.0 * hpx);
                    a2 += (f(Side { dp: x.dp + hdx, ..x }, y) - f(Side { dp: x.dp - hdx, ..x }, y)) / (2.0 * hdx);
                    g3[(xi, yi)] = coef * (f(x, Side { p: y.p + hpy, ..y }) - f(x, Side { p: y.p - hpy, ..y })) / (2.0 * hpy);
                    g4[(xi, yi)] = coef * (f(x, Side { dp: y.dp + hdy, ..y }) - f(x, Side { dp: y.dp - hdy, ..y })) / (2.0 * hdy);
                }
                l1[xi] += coef * a1;
                l2[xi] += coef * a2;
            }
            blocks[i][1 - i] = &g3 * &cb + &g4 * &db;
            for xi in 0..m {
                for j in 0..n - 1 {
                    own[(xi, j)] += l1[xi] * cb[(xi, j)] + l2[xi] * db[(xi, j)];
                }
            }
            blocks[i][i] = own;
        }

        // Project rows onto sin(jx), j = 1..N.
        let proj = DMatrix::from_fn(n, m, |j, k| 2.0 / m as f64 * self.grid.sin_k((j + 1) * k));
        let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..2 {
            for (c, col) in scal_cols.iter().enumerate() {
                let v = &proj * nalgebra::DVector::from_column_slice(&col[i]);
                jac.view_mut((i * n, c), (n, 1)).copy_from(&v);
            }
            for (q, block) in blocks[i].iter().enumerate() {
                let b = &proj * block;
                jac.view_mut((i * n, 2 + q * (n - 1)), (n, n - 1)).copy_from(&b);
            }
        }
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("building the Jacobian".into()));
        }
        Ok(jac)
    }
}

fn assembler_for(geometry: &PairGeometry, n: usize, grid: &CollocationGrid, quad: &QuadratureConfig) -> Result<Assembler> {
    Assembler::new(geometry.alpha, n, grid.clone(), *quad)
}

fn require_mode(state: &SolveState, mode: Mode) -> Result<()> {
    if state.mode != mode {
        return Err(Error::Invalid(format!("expected a {} state", mode.tag())));
    }
    Ok(())
}

/// Rigid-rotation term F_i1 at every grid point.
pub fn eval_f_i1(state: &SolveState, geometry: &PairGeometry, i: usize, grid: &CollocationGrid) -> Result<Vec<f64>> {
    require_mode(state, Mode::Corotating)?;
    motion_values(state, geometry, i, grid)
}

/// Translation term G_i1 at every grid point.
pub fn eval_g_i1(state: &SolveState, geometry: &PairGeometry, i: usize, grid: &CollocationGrid) -> Result<Vec<f64>> {
    require_mode(state, Mode::Traveling)?;
    motion_values(state, geometry, i, grid)
}

fn motion_values(state: &SolveState, geometry: &PairGeometry, i: usize, grid: &CollocationGrid) -> Result<Vec<f64>> {
    let asm = Assembler::new(geometry.alpha, state.order(), grid.clone(), QuadratureConfig::default())?;
    let p = if i == 1 { &state.p1 } else { &state.p2 };
    let s = PatchSamples::new(p, grid);
    asm.check_radius(geometry, i, &s)?;
    Ok((0..grid.len()).map(|k| asm.motion_term(state.mode, geometry, state, i, k, s.p[k], s.dp[k])).collect())
}

/// Self-interaction term F_i2 = F_i21 + F_i22 + F_i23 + F_i24 at every grid point.
pub fn eval_f_i2(
    state: &SolveState,
    geometry: &PairGeometry,
    i: usize,
    grid: &CollocationGrid,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let parts = eval_f_i2_parts(state, geometry, i, grid, quad)?;
    Ok((0..grid.len()).map(|k| parts.iter().map(|v| v[k]).sum()).collect())
}

/// The four self-interaction sub-terms F_i21..F_i24 (co-rotating sign).
pub fn eval_f_i2_parts(
    state: &SolveState,
    geometry: &PairGeometry,
    i: usize,
    grid: &CollocationGrid,
    quad: &QuadratureConfig,
) -> Result<[Vec<f64>; 4]> {
    let asm = assembler_for(geometry, state.order(), grid, quad)?;
    let p = if i == 1 { &state.p1 } else { &state.p2 };
    let coef = -geometry.gamma(i) * asm.c_alpha;
    let parts = asm.self_integral_parts(geometry, i, p)?;
    Ok(parts.map(|v| v.into_iter().map(|x| coef * x).collect()))
}

/// Cross-interaction term F_i3 = F_i31 + … + F_i34 at every grid point.
pub fn eval_f_i3(
    state: &SolveState,
    geometry: &PairGeometry,
    i: usize,
    grid: &CollocationGrid,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let parts = eval_f_i3_parts(state, geometry, i, grid, quad)?;
    Ok((0..grid.len()).map(|k| parts.iter().map(|v| v[k]).sum()).collect())
}

/// The four cross-interaction sub-terms F_i31..F_i34.
pub fn eval_f_i3_parts(
    state: &SolveState,
    geometry: &PairGeometry,
    i: usize,
    grid: &CollocationGrid,
    quad: &QuadratureConfig,
) -> Result<[Vec<f64>; 4]> {
    let asm = assembler_for(geometry, state.order(), grid, quad)?;
    let (_, g2) = asm.gammas(geometry, state);
    let gk = if i == 1 { g2 } else { geometry.gamma1 };
    let coef = gk * asm.c_alpha;
    let parts = asm.cross_integral_parts(geometry, i, &state.p1, &state.p2)?;
    Ok(parts.map(|v| v.into_iter().map(|x| coef * x).collect()))
}

/// Co-rotating residual F = (F₁, F₂) as sine series.
pub fn assemble_f(
    state: &SolveState,
    geometry: &PairGeometry,
    grid: &CollocationGrid,
    quad: &QuadratureConfig,
) -> Result<ResidualPair> {
    require_mode(state, Mode::Corotating)?;
    assembler_for(geometry, state.order(), grid, quad)?.residual(geometry, state)
}

/// Traveling residual G = (G₁, G₂) as sine series.
pub fn assemble_g(
    state: &SolveState,
    geometry: &PairGeometry,
    grid: &CollocationGrid,
    quad: &QuadratureConfig,
) -> Result<ResidualPair> {
    require_mode(state, Mode::Traveling)?;
    assembler_for(geometry, state.order(), grid, quad)?.residual(geometry, state)
}
