//! Parameter and spectral-series types shared by the other modules.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::diagnostics::Diagnostics;
use crate::error::{Error, Result};

/// Which family of relative equilibria is being computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Two patches rotating rigidly about a common center.
    Corotating,
    /// Two opposite-signed patches translating rigidly.
    Traveling,
}

impl Mode {
    /// Lower-case tag used in file names and configs.
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Corotating => "corotating",
            Mode::Traveling => "traveling",
        }
    }
}

/// Physical parameters of a patch pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    /// Exponent of the velocity kernel.
    pub alpha: f64,
    /// Patch-size parameter.
    pub eps: f64,
    pub b1: f64,
    pub b2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Distance between the patch centers.
    pub d: f64,
}

impl PairGeometry {
    /// Checks the standing assumptions for the given mode.
    pub fn validate(&self, mode: Mode) -> Result<()> {
        let finite = [self.alpha, self.eps, self.b1, self.b2, self.gamma1, self.gamma2, self.d];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("geometry fields must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::Invalid(format!("alpha = {} outside (0, 2)", self.alpha)));
        }
        if !(self.eps > -0.5 && self.eps < 0.5) {
            return Err(Error::Invalid(format!("eps = {} outside (-1/2, 1/2)", self.eps)));
        }
        if !(self.b1 > 0.0 && self.b2 > 0.0) {
            return Err(Error::Invalid("b1 > 0 and b2 > 0 required".into()));
        }
        if !(self.d > 2.0 * (self.b1 + self.b2)) {
            return Err(Error::Invalid(format!(
                "d > 2(b1+b2) violated: d = {}, 2(b1+b2) = {}",
                self.d,
                2.0 * (self.b1 + self.b2)
            )));
        }
        if mode == Mode::Corotating && self.gamma1 + self.gamma2 == 0.0 {
            return Err(Error::ZeroCirculation);
        }
        Ok(())
    }

    /// Returns a copy with a different ε.
    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..*self }
    }

    /// Radius scale b_i of patch `i` (1 or 2).
    pub fn b(&self, i: usize) -> f64 {
        if i == 1 {
            self.b1
        } else {
            self.b2
        }
    }

    /// Vorticity magnitude γ_i of patch `i` (1 or 2).
    pub fn gamma(&self, i: usize) -> f64 {
        if i == 1 {
            self.gamma1
        } else {
            self.gamma2
        }
    }

    /// Signed perturbation amplitude ε|ε|^α b_i^{1+α}.
    pub fn delta(&self, i: usize) -> f64 {
        self.eps * self.eps.abs().powf(self.alpha) * self.b(i).powf(1.0 + self.alpha)
    }

    /// δ_i/ε = |ε|^α b_i^{1+α}, finite at ε = 0.
    pub fn delta_over_eps(&self, i: usize) -> f64 {
        self.eps.abs().powf(self.alpha) * self.b(i).powf(1.0 + self.alpha)
    }
}

/// Even perturbation p(x) = Σ_{j=1}^{N} a_j cos(jx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineSeries {
    /// Coefficients a_1..a_N.
    pub coeffs: Vec<f64>,
}

/// Odd function r(x) = Σ_{j=1}^{N} A_j sin(jx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineSeries {
    /// Coefficients A_1..A_N.
    pub coeffs: Vec<f64>,
}

impl CosineSeries {
    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n] }
    }

    /// Series with a single mode a_j = amp.
    pub fn mode(n: usize, j: usize, amp: f64) -> Self {
        let mut s = Self::zeros(n);
        s.coeffs[j - 1] = amp;
        s
    }

    /// Truncation order N.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval_at(&self, x: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x).cos()).sum()
    }

    /// p′(x).
    pub fn deriv_at(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let j = (k + 1) as f64;
                -j * a * (j * x).sin()
            })
            .sum()
    }

    /// p″(x).
    pub fn deriv2_at(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let j = (k + 1) as f64;
                -j * j * a * (j * x).cos()
            })
            .sum()
    }

    /// Values on the grid.
    pub fn eval_grid(&self, grid: &CollocationGrid) -> Vec<f64> {
        grid.synth(&self.coeffs, |c, _| c, false)
    }

    /// Derivative Σ −j a_j sin(jx) on the grid.
    pub fn eval_deriv_grid(&self, grid: &CollocationGrid) -> Vec<f64> {
        grid.synth(&self.coeffs, |a, j| -j * a, true)
    }

    /// Second derivative on the grid.
    pub fn eval_deriv2_grid(&self, grid: &CollocationGrid) -> Vec<f64> {
        grid.synth(&self.coeffs, |a, j| -j * j * a, false)
    }

    /// Max-norm of the coefficients.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

impl SineSeries {
    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval_at(&self, x: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x).sin()).sum()
    }

    /// Values on the grid.
    pub fn eval_grid(&self, grid: &CollocationGrid) -> Vec<f64> {
        grid.synth(&self.coeffs, |c, _| c, true)
    }

    /// Derivative Σ j A_j cos(jx) on the grid.
    pub fn eval_deriv_grid(&self, grid: &CollocationGrid) -> Vec<f64> {
        grid.synth(&self.coeffs, |a, j| j * a, false)
    }

    /// ℓ² norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Uniform collocation grid x_m = 2πm/M.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    m: usize,
    points: Vec<f64>,
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
}

impl CollocationGrid {
    /// Builds a grid with `m` points; `m` must be even and at least 4.
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || !m.is_multiple_of(2) {
            return Err(Error::Invalid(format!("grid size M = {m} must be even and >= 4")));
        }
        let h = 2.0 * PI / m as f64;
        let points = (0..m).map(|k| k as f64 * h).collect();
        let cos_table = (0..m).map(|k| (k as f64 * h).cos()).collect();
        let sin_table = (0..m).map(|k| (k as f64 * h).sin()).collect();
        Ok(Self { m, points, cos_table, sin_table })
    }

    /// Builds a grid and checks the anti-aliasing margin M ≥ 4N.
    pub fn for_order(m: usize, n: usize) -> Result<Self> {
        let g = Self::new(m)?;
        g.check_order(n)?;
        Ok(g)
    }

    pub fn check_order(&self, n: usize) -> Result<()> {
        if self.m < 4 * n {
            return Err(Error::Invalid(format!("M = {} < 4N = {}", self.m, 4 * n)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// cos(2πk/M) for any integer k.
    #[inline]
    pub fn cos_k(&self, k: usize) -> f64 {
        self.cos_table[k % self.m]
    }

    /// sin(2πk/M) for any integer k.
    #[inline]
    pub fn sin_k(&self, k: usize) -> f64 {
        self.sin_table[k % self.m]
    }

    fn synth(&self, coeffs: &[f64], w: impl Fn(f64, f64) -> f64, sine: bool) -> Vec<f64> {
        let table = if sine { &self.sin_table } else { &self.cos_table };
        (0..self.m)
            .map(|m| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| w(a, (k + 1) as f64) * table[((k + 1) * m) % self.m])
                    .sum()
            })
            .collect()
    }
}

/// Sine coefficients plus the discarded even content.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub series: SineSeries,
    /// ℓ² norm of the discarded cosine and mean coefficients.
    pub parity_leak: f64,
}

impl Projection {
    /// Returns the series, or a parity error if the leak exceeds `tol`.
    pub fn checked(self, tol: f64) -> Result<SineSeries> {
        if self.parity_leak > tol {
            log::warn!("parity leak {:e} exceeds tolerance {:e}", self.parity_leak, tol);
            return Err(Error::ParityLeak { leak: self.parity_leak, tol });
        }
        Ok(self.series)
    }
}

/// A_j = (2/M) Σ_m v_m sin(j x_m), j = 1..N; even content is measured and dropped.
pub fn project_to_sine(values: &[f64], grid: &CollocationGrid, n: usize) -> Projection {
    let m = grid.len();
    assert_eq!(values.len(), m, "values must be sampled on the grid");
    let scale = 2.0 / m as f64;
    let coeffs = (1..=n)
        .map(|j| scale * (0..m).map(|k| values[k] * grid.sin_k(j * k)).sum::<f64>())
        .collect();
    let mean = values.iter().sum::<f64>() / m as f64;
    let mut leak2 = 2.0 * mean * mean;
    for j in 1..=m / 2 {
        let c = scale * (0..m).map(|k| values[k] * grid.cos_k(j * k)).sum::<f64>();
        let w = if j == m / 2 { 0.5 } else { 1.0 };
        leak2 += w * c * c;
    }
    if leak2 > 0.0 {
        log::debug!("projection discarded even content of norm {:e}", leak2.sqrt());
    }
    Projection { series: SineSeries { coeffs }, parity_leak: leak2.sqrt() }
}

/// R_i(x_m) = 1 + ε|ε|^α b_i^{1+α} p_i(x_m).
pub fn radius_profile(
    p: &CosineSeries,
    geometry: &PairGeometry,
    patch: usize,
    grid: &CollocationGrid,
) -> Vec<f64> {
    let delta = geometry.delta(patch);
    p.eval_grid(grid).into_iter().map(|v| 1.0 + delta * v).collect()
}

/// Full unknown vector of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveState {
    pub mode: Mode,
    /// Ω (co-rotating) or U (traveling).
    pub scalar1: f64,
    /// x̄ (co-rotating) or γ₂ (traveling).
    pub scalar2: f64,
    pub p1: CosineSeries,
    pub p2: CosineSeries,
}

impl SolveState {
    /// Truncation order N.
    pub fn order(&self) -> usize {
        self.p1.order()
    }

    /// Checks a_1 = 0 and equal orders.
    pub fn validate(&self) -> Result<()> {
        if self.p1.order() != self.p2.order() || self.p1.order() < 2 {
            return Err(Error::Invalid("p1 and p2 must share an order N >= 2".into()));
        }
        if self.p1.coeffs[0] != 0.0 || self.p2.coeffs[0] != 0.0 {
            return Err(Error::Invalid("mode-1 coefficients must vanish".into()));
        }
        Ok(())
    }

    /// Unknown vector (scalar1, scalar2, a_2..a_N of p₁, a_2..a_N of p₂).
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = vec![self.scalar1, self.scalar2];
        v.extend_from_slice(&self.p1.coeffs[1..]);
        v.extend_from_slice(&self.p2.coeffs[1..]);
        v
    }

    /// Inverse of [`SolveState::to_vector`].
    pub fn from_vector(mode: Mode, n: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), 2 * n, "unknown vector has length 2N");
        let mut p1 = vec![0.0; n];
        let mut p2 = vec![0.0; n];
        p1[1..].copy_from_slice(&v[2..n + 1]);
        p2[1..].copy_from_slice(&v[n + 1..]);
        Self {
            mode,
            scalar1: v[0],
            scalar2: v[1],
            p1: CosineSeries { coeffs: p1 },
            p2: CosineSeries { coeffs: p2 },
        }
    }

    /// Same state truncated or zero-padded to order `n`.
    pub fn resized(&self, n: usize) -> Self {
        let fit = |p: &CosineSeries| {
            let mut c = p.coeffs.clone();
            c.resize(n, 0.0);
            CosineSeries { coeffs: c }
        };
        Self { p1: fit(&self.p1), p2: fit(&self.p2), ..self.clone() }
    }
}

/// One converged point of a continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEntry {
    pub eps: f64,
    pub state: SolveState,
    pub diagnostics: Diagnostics,
}

/// Converged states along an ε-continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionBranch {
    pub mode: Mode,
    /// Geometry template; its `eps` field is superseded per entry.
    pub geometry: PairGeometry,
    /// Requested schedule.
    pub schedule: Vec<f64>,
    /// Entries sorted by ε.
    pub entries: Vec<BranchEntry>,
    /// False when continuation stalled before the end of the schedule.
    pub complete: bool,
    /// Why continuation stopped early, if it did.
    pub stall_reason: Option<String>,
    /// Solver tolerance the entries satisfy.
    pub tol_residual: f64,
}

impl SolutionBranch {
    /// Entry at exactly this ε, if present.
    pub fn entry_at(&self, eps: f64) -> Option<&BranchEntry> {
        self.entries.iter().find(|e| e.eps == eps)
    }
}
