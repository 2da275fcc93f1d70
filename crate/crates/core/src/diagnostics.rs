//! Per-state and per-branch checks: curvature and convexity, ε-scaling of the rigid-motion
//! parameter, ±ε reflection and the symmetric-pair reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{omega_star, u_star};
use crate::types::{CollocationGrid, CosineSeries, Mode, PairGeometry, SolutionBranch, SolveState};

/// Figures recorded for a converged state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub residual_norm: f64,
    pub min_curvature_1: f64,
    pub min_curvature_2: f64,
    pub parity_leak: f64,
    pub newton_iters: usize,
    /// Branch-level slope of log|scalar1 − star| against log ε, when available.
    #[serde(default)]
    pub scaling_exponent: Option<f64>,
    /// ‖J‖₁‖J⁻¹‖₁ at the last Newton matrix.
    #[serde(default)]
    pub jacobian_condition: f64,
    /// Residual norm before each Newton step and after the last.
    #[serde(default)]
    pub residual_history: Vec<f64>,
}

impl Diagnostics {
    /// True when every populated field is finite.
    pub fn is_finite(&self) -> bool {
        [self.residual_norm, self.min_curvature_1, self.min_curvature_2, self.parity_leak]
            .iter()
            .all(|v| v.is_finite())
            && self.scaling_exponent.is_none_or(f64::is_finite)
            && self.residual_history.iter().all(|v| v.is_finite())
    }
}

/// Curvature of the unit-scaled boundary x ↦ R(x)(cos x, sin x), R = 1 + δ_i p:
/// κ = (R² + 2R′² − R R″)/(R² + R′²)^{3/2}, positive for counter-clockwise convex curves.
pub fn signed_curvature(
    p: &CosineSeries,
    geometry: &PairGeometry,
    patch: usize,
    grid: &CollocationGrid,
) -> Result<Vec<f64>> {
    let delta = geometry.delta(patch);
    let v = p.eval_grid(grid);
    let d1 = p.eval_deriv_grid(grid);
    let d2 = p.eval_deriv2_grid(grid);
    let mut out = Vec::with_capacity(grid.len());
    for (m, &x) in grid.points().iter().enumerate() {
        let r = 1.0 + delta * v[m];
        if !(r > 0.0) {
            return Err(Error::DegenerateBoundary { patch, x, value: r });
        }
        let (r1, r2) = (delta * d1[m], delta * d2[m]);
        out.push((r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1).powf(1.5));
    }
    Ok(out)
}

/// Outcome of a convexity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub pass: bool,
    pub min_curvature_1: f64,
    pub min_curvature_2: f64,
}

/// Passes iff the curvature of both patches is positive at every grid point.
pub fn convexity_check(state: &SolveState, geometry: &PairGeometry, grid: &CollocationGrid) -> Result<ConvexityReport> {
    let min = |v: Vec<f64>| v.into_iter().fold(f64::INFINITY, f64::min);
    let k1 = min(signed_curvature(&state.p1, geometry, 1, grid)?);
    let k2 = min(signed_curvature(&state.p2, geometry, 2, grid)?);
    Ok(ConvexityReport { pass: k1 > 0.0 && k2 > 0.0, min_curvature_1: k1, min_curvature_2: k2 })
}

/// Least-squares slope of log|y| against log x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub points: usize,
}

/// Fits log|y| = exponent·log x + intercept over pairs with x > 0 and |y| > `floor`.
pub fn power_law_fit(data: &[(f64, f64)], floor: f64) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = data
        .iter()
        .filter(|(x, y)| *x > 0.0 && y.abs() > floor)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} usable points (need 4 with eps > 0 and |deviation| > {floor:e})",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all eps values coincide".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss: f64 = pts.iter().map(|(x, y)| (y - intercept - exponent * x).powi(2)).sum();
    Ok(ScalingFit { exponent, intercept, residual: (ss / n).sqrt(), points: pts.len() })
}

/// Slope of log|scalar1(ε) − star| against log ε over the ε > 0 entries of a branch,
/// with star = Ω* or U* according to the branch mode.
pub fn scaling_fit(branch: &SolutionBranch) -> Result<ScalingFit> {
    let star = match branch.mode {
        Mode::Corotating => omega_star(&branch.geometry)?,
        Mode::Traveling => u_star(&branch.geometry)?,
    };
    let data: Vec<(f64, f64)> = branch.entries.iter().map(|e| (e.eps, e.state.scalar1 - star)).collect();
    power_law_fit(&data, 100.0 * branch.tol_residual)
}

/// How entries at ε and −ε are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionRule {
    /// Coefficients and scalars equal.
    #[default]
    Literal,
    /// a_j(−ε) = (−1)^{j+1} a_j(ε): the image of the pair under the rotation by π about the
    /// midpoint (or a point reflection of each patch about its center), which keeps the even
    /// cosine form of p.
    PointReflection,
}

/// Largest discrepancy over matched ±ε pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    /// Max over pairs and coefficients (including both scalars).
    pub max_discrepancy: f64,
    /// ε > 0 values that were matched.
    pub matched: Vec<f64>,
    /// Nonzero ε values whose partner is missing.
    pub unmatched: Vec<f64>,
}

/// Compares entries at ε and −ε under `rule`.
pub fn reflection_check(branch: &SolutionBranch, rule: ReflectionRule) -> Result<ReflectionReport> {
    let mut max = 0.0f64;
    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for e in branch.entries.iter().filter(|e| e.eps != 0.0) {
        match branch.entry_at(-e.eps) {
            Some(o) if e.eps > 0.0 => {
                matched.push(e.eps);
                max = max.max((e.state.scalar1 - o.state.scalar1).abs());
                max = max.max((e.state.scalar2 - o.state.scalar2).abs());
                let pairs = [(&e.state.p1, &o.state.p1), (&e.state.p2, &o.state.p2)];
                for (a, b) in pairs {
                    for (j, (x, y)) in a.coeffs.iter().zip(&b.coeffs).enumerate() {
                        let sign = match rule {
                            ReflectionRule::Literal => 1.0,
                            ReflectionRule::PointReflection if j % 2 == 0 => 1.0,
                            ReflectionRule::PointReflection => -1.0,
                        };
                        max = max.max((x - sign * y).abs());
                    }
                }
            }
            Some(_) => {}
            None => unmatched.push(e.eps),
        }
    }
    if matched.is_empty() {
        return Err(Error::InsufficientData("no matched +/-eps pairs".into()));
    }
    Ok(ReflectionReport { max_discrepancy: max, matched, unmatched })
}

/// Per-entry figures of the symmetric-pair check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricEntry {
    pub eps: f64,
    /// Max coefficient difference between p₁ and p₂.
    pub p_difference: f64,
    /// x̄(ε) − d/2.
    pub center_offset: f64,
}

/// Difference between the two patches and offset of the rotation center from the midpoint.
/// Both vanish when γ₁ = γ₂ and b₁ = b₂; other geometries give the size of the asymmetry.
pub fn symmetric_reduction_check(geometry: &PairGeometry, branch: &SolutionBranch) -> Result<Vec<SymmetricEntry>> {
    if branch.mode != Mode::Corotating {
        return Err(Error::Invalid("symmetric reduction applies to co-rotating branches".into()));
    }
    Ok(branch
        .entries
        .iter()
        .map(|e| SymmetricEntry {
            eps: e.eps,
            p_difference: e
                .state
                .p1
                .coeffs
                .iter()
                .zip(&e.state.p2.coeffs)
                .fold(0.0, |m, (a, b)| m.max((a - b).abs())),
            center_offset: e.state.scalar2 - 0.5 * geometry.d,
        })
        .collect())
}
