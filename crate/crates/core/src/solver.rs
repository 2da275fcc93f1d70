//! Damped Newton iteration and ε-continuation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{convexity_check, scaling_fit, Diagnostics};
use crate::error::{Error, Result};
use crate::functionals::{trivial_state, Assembler};
use crate::quadrature::QuadratureConfig;
use crate::types::{BranchEntry, CollocationGrid, Mode, PairGeometry, SolutionBranch, SolveState};

const DAMPING_FLOOR: f64 = 1.0 / 16.0;

/// Newton and continuation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// ℓ² norm of all sine coefficients at convergence.
    pub tol_residual: f64,
    pub max_newton_iters: usize,
    /// Continuation targets; starts at 0 and is monotone in |ε| per sign.
    pub eps_schedule: Vec<f64>,
    /// Initial Newton step length in (0, 1].
    pub damping: f64,
    /// Truncation order.
    pub n: usize,
    /// Collocation points.
    pub m: usize,
    pub quadrature: QuadratureConfig,
    /// Relative finite-difference step.
    pub h_fd: f64,
    /// Maximum number of ε-step halvings after a failed solve.
    pub bisection_depth: usize,
    /// Tolerance on the even content discarded by projections.
    pub parity_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            max_newton_iters: 20,
            eps_schedule: vec![0.0],
            damping: 1.0,
            n: 64,
            m: 512,
            quadrature: QuadratureConfig::default(),
            h_fd: 1e-6,
            bisection_depth: 4,
            parity_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::Invalid("tol must be positive".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::Invalid("max_iters must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Invalid(format!("damping = {} outside (0, 1]", self.damping)));
        }
        if self.n < 2 {
            return Err(Error::Invalid("N must be at least 2".into()));
        }
        CollocationGrid::for_order(self.m, self.n)?;
        self.quadrature.validate()?;
        if !(self.h_fd > 0.0) || !(self.parity_tol > 0.0) {
            return Err(Error::Invalid("h_fd and parity_tol must be positive".into()));
        }
        validate_schedule(&self.eps_schedule)
    }
}

/// Checks that a schedule starts at 0, stays in (−1/2, 1/2) and grows in |ε| per sign.
pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.first() != Some(&0.0) {
        return Err(Error::Invalid("eps_schedule must start at 0".into()));
    }
    let mut last = [0.0f64; 2];
    for &e in schedule.iter().skip(1) {
        if !(e > -0.5 && e < 0.5) {
            return Err(Error::Invalid(format!("eps = {e} outside (-1/2, 1/2)")));
        }
        let side = usize::from(e < 0.0);
        if e == 0.0 || e.abs() <= last[side] {
            return Err(Error::Invalid("eps_schedule must be monotone in |eps| for each sign".into()));
        }
        last[side] = e.abs();
    }
    Ok(())
}

/// 1-norm condition number ‖J‖₁‖J⁻¹‖₁ (infinite when J is singular).
pub fn condition_estimate(j: &DMatrix<f64>) -> f64 {
    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    match j.clone().try_inverse() {
        Some(inv) => norm1(j) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Newton iteration at the ε of `geometry` from `initial`.
pub fn newton_solve(
    asm: &Assembler,
    geometry: &PairGeometry,
    initial: &SolveState,
    cfg: &SolverConfig,
) -> Result<(SolveState, Diagnostics)> {
    initial.validate()?;
    let n = initial.order();
    let mut state = initial.clone();
    let mut res = asm.residual(geometry, &state)?;
    let mut norm = res.norm();
    let mut history = vec![norm];
    let mut cond = 0.0;
    let mut iters = 0;
    while norm > cfg.tol_residual {
        if iters == cfg.max_newton_iters {
            return Err(Error::MaxIterations { iters, residual: norm });
        }
        let jac = asm.jacobian(geometry, &state, cfg.h_fd)?;
        cond = condition_estimate(&jac);
        let rhs = -DVector::from_vec(res.to_vector());
        let step = jac.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        let x0 = state.to_vector();
        let mut lambda = cfg.damping;
        let accepted = loop {
            let x: Vec<f64> = x0.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            let trial = SolveState::from_vector(state.mode, n, &x);
            match asm.residual(geometry, &trial) {
                Ok(r) if r.norm() < norm => break Some((trial, r)),
                Ok(_) | Err(Error::DegenerateBoundary { .. }) | Err(Error::ParityLeak { .. })
                    if lambda > DAMPING_FLOOR =>
                {
                    lambda *= 0.5
                }
                Ok(_) => break None,
                Err(e) => return Err(e),
            }
        };
        let Some((next, r)) = accepted else {
            return Err(Error::NoDescent { residual: norm });
        };
        iters += 1;
        state = next;
        res = r;
        norm = res.norm();
        history.push(norm);
        log::debug!("newton eps={} iter={iters} residual={norm:e} damping={lambda}", geometry.eps);
    }
    let grid = &asm.grid;
    let convex = convexity_check(&state, geometry, grid)?;
    let diagnostics = Diagnostics {
        residual_norm: norm,
        min_curvature_1: convex.min_curvature_1,
        min_curvature_2: convex.min_curvature_2,
        parity_leak: res.parity_leak,
        newton_iters: iters,
        scaling_exponent: None,
        jacobian_condition: cond,
        residual_history: history,
    };
    Ok((state, diagnostics))
}

/// Solves at `target`, halving the step from `from` up to `depth` times on failure.
fn solve_with_bisection(
    asm: &Assembler,
    template: &PairGeometry,
    from: (f64, &SolveState),
    target: f64,
    cfg: &SolverConfig,
    depth: usize,
) -> Result<(SolveState, Diagnostics)> {
    match newton_solve(asm, &template.with_eps(target), from.1, cfg) {
        Ok(ok) => Ok(ok),
        Err(e) if depth == 0 => Err(e),
        Err(e) => {
            let mid = 0.5 * (from.0 + target);
            log::info!("solve at eps={target} failed ({e}); bisecting via eps={mid}");
            let (s, _) = solve_with_bisection(asm, template, from, mid, cfg, depth - 1)?;
            solve_with_bisection(asm, template, (mid, &s), target, cfg, depth - 1)
        }
    }
}

/// Newton continuation over `cfg.eps_schedule`, warm-starting each ε from the last converged
/// entry of the same sign. A stalled sign stops there and the branch is flagged incomplete.
pub fn continue_branch(template: &PairGeometry, mode: Mode, cfg: &SolverConfig) -> Result<SolutionBranch> {
    cfg.validate()?;
    template.validate(mode)?;
    let grid = CollocationGrid::for_order(cfg.m, cfg.n)?;
    let mut asm = Assembler::new(template.alpha, cfg.n, grid, cfg.quadrature)?;
    asm.parity_tol = cfg.parity_tol;
    let mut entries: Vec<BranchEntry> = Vec::new();
    let mut stall: Option<String> = None;
    let mut stalled = [false; 2];
    for &eps in &cfg.eps_schedule {
        let side = usize::from(eps < 0.0);
        if stalled[side] {
            continue;
        }
        let geometry = template.with_eps(eps);
        let start = entries
            .iter()
            .filter(|e| e.eps == 0.0 || (e.eps < 0.0) == (eps < 0.0))
            .max_by(|a, b| a.eps.abs().total_cmp(&b.eps.abs()))
            .map(|e| (e.eps, e.state.clone()));
        let (from_eps, initial) = match start {
            Some(s) => s,
            None => (0.0, trivial_state(mode, template, cfg.n)?),
        };
        let outcome = if eps == 0.0 {
            newton_solve(&asm, &geometry, &initial, cfg)
        } else {
            solve_with_bisection(&asm, template, (from_eps, &initial), eps, cfg, cfg.bisection_depth)
        };
        match outcome {
            Ok((state, diagnostics)) => {
                log::info!(
                    "converged eps={eps} iters={} residual={:e}",
                    diagnostics.newton_iters,
                    diagnostics.residual_norm
                );
                entries.push(BranchEntry { eps, state, diagnostics });
            }
            Err(e) => {
                let kind = match e {
                    Error::DegenerateBoundary { .. } => "degenerate boundary",
                    _ => "stall",
                };
                log::warn!("continuation stopped at eps={eps}: {kind}: {e}");
                stall.get_or_insert(format!("{kind} at eps={eps}: {e}"));
                stalled[side] = true;
                if eps == 0.0 {
                    stalled = [true; 2];
                }
            }
        }
    }
    entries.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let mut branch = SolutionBranch {
        mode,
        geometry: *template,
        schedule: cfg.eps_schedule.clone(),
        entries,
        complete: stall.is_none(),
        stall_reason: stall,
        tol_residual: cfg.tol_residual,
    };
    if let Ok(fit) = scaling_fit(&branch) {
        for e in &mut branch.entries {
            e.diagnostics.scaling_exponent = Some(fit.exponent);
        }
    }
    Ok(branch)
}
