//! Run configuration, branch serialization, boundary export and the `run` driver.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use crate::diagnostics::{
    convexity_check, reflection_check, scaling_fit, symmetric_reduction_check, ReflectionReport, ReflectionRule,
    ScalingFit, SymmetricEntry,
};
use crate::error::{Error, Result};
use crate::functionals::Assembler;
use crate::quadrature::{QuadratureConfig, Scheme};
use crate::solver::{continue_branch, validate_schedule, SolverConfig};
use crate::types::{CollocationGrid, Mode, PairGeometry, SolutionBranch, SolveState};

/// Exit status of a full branch.
pub const EXIT_OK: i32 = 0;
/// Exit status of an I/O failure.
pub const EXIT_IO: i32 = 1;
/// Exit status of a configuration that fails validation.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status of a branch that stalled before the end of its schedule.
pub const EXIT_PARTIAL: i32 = 3;
/// Exit status when the continuation could not be set up.
pub const EXIT_SOLVE: i32 = 4;

/// Which output files a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmitFlags {
    pub branch_json: bool,
    pub boundary_csv: bool,
    pub diagnostics_json: bool,
    pub convergence_log: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self { branch_json: true, boundary_csv: true, diagnostics_json: true, convergence_log: true }
    }
}

/// Validated run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    /// Geometry template; `eps` is taken from the schedule.
    pub geometry: PairGeometry,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub emit: EmitFlags,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Corotating,
            geometry: PairGeometry { alpha: 1.0, eps: 0.0, b1: 1.0, b2: 1.0, gamma1: 2.0, gamma2: 1.0, d: 10.0 },
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("out"),
            emit: EmitFlags::default(),
        }
    }
}

impl RunConfig {
    /// Re-checks every invariant, without source locations.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate(self.mode)?;
        self.solver.validate()
    }
}

type Sp<T> = Option<toml::Spanned<T>>;

/// Flat document as written by users; every key optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Sp<Mode>,
    alpha: Sp<f64>,
    b1: Sp<f64>,
    b2: Sp<f64>,
    gamma1: Sp<f64>,
    gamma2: Sp<f64>,
    d: Sp<f64>,
    eps_schedule: Sp<Vec<f64>>,
    #[serde(rename = "N")]
    n: Sp<usize>,
    #[serde(rename = "M")]
    m: Sp<usize>,
    tol: Sp<f64>,
    max_iters: Sp<usize>,
    damping: Sp<f64>,
    h_fd: Sp<f64>,
    bisection_depth: Sp<usize>,
    parity_tol: Sp<f64>,
    quadrature: Sp<Scheme>,
    m_far: Sp<usize>,
    near_width: Sp<f64>,
    m_near: Sp<usize>,
    taylor_threshold: Sp<f64>,
    output_dir: Sp<String>,
    branch_json: Sp<bool>,
    boundary_csv: Sp<bool>,
    diagnostics_json: Sp<bool>,
    convergence_log: Sp<bool>,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn take<T>(v: Sp<T>, default: T, lines: &mut Vec<(&'static str, Range<usize>)>, key: &'static str) -> T {
    match v {
        Some(s) => {
            lines.push((key, s.span()));
            s.into_inner()
        }
        None => default,
    }
}

/// Parses and validates a flat TOML run configuration. Missing keys take the defaults of
/// [`RunConfig::default`]; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse { line, column, message: e.message().to_string() }
    })?;
    let def = RunConfig::default();
    let mut spans = Vec::new();
    let sp = &mut spans;
    let geometry = PairGeometry {
        alpha: take(raw.alpha, def.geometry.alpha, sp, "alpha"),
        eps: 0.0,
        b1: take(raw.b1, def.geometry.b1, sp, "b1"),
        b2: take(raw.b2, def.geometry.b2, sp, "b2"),
        gamma1: take(raw.gamma1, def.geometry.gamma1, sp, "gamma1"),
        gamma2: take(raw.gamma2, def.geometry.gamma2, sp, "gamma2"),
        d: take(raw.d, def.geometry.d, sp, "d"),
    };
    let dq = def.solver.quadrature;
    let quadrature = QuadratureConfig {
        scheme: take(raw.quadrature, dq.scheme, sp, "quadrature"),
        m_far: take(raw.m_far, dq.m_far, sp, "m_far"),
        near_width: take(raw.near_width, dq.near_width, sp, "near_width"),
        m_near: take(raw.m_near, dq.m_near, sp, "m_near"),
        taylor_threshold: take(raw.taylor_threshold, dq.taylor_threshold, sp, "taylor_threshold"),
    };
    let ds = &def.solver;
    let solver = SolverConfig {
        tol_residual: take(raw.tol, ds.tol_residual, sp, "tol"),
        max_newton_iters: take(raw.max_iters, ds.max_newton_iters, sp, "max_iters"),
        eps_schedule: take(raw.eps_schedule, ds.eps_schedule.clone(), sp, "eps_schedule"),
        damping: take(raw.damping, ds.damping, sp, "damping"),
        n: take(raw.n, ds.n, sp, "N"),
        m: take(raw.m, ds.m, sp, "M"),
        quadrature,
        h_fd: take(raw.h_fd, ds.h_fd, sp, "h_fd"),
        bisection_depth: take(raw.bisection_depth, ds.bisection_depth, sp, "bisection_depth"),
        parity_tol: take(raw.parity_tol, ds.parity_tol, sp, "parity_tol"),
    };
    let cfg = RunConfig {
        mode: take(raw.mode, def.mode, sp, "mode"),
        geometry,
        solver,
        output_dir: take(raw.output_dir, "out".into(), sp, "output_dir").into(),
        emit: EmitFlags {
            branch_json: take(raw.branch_json, true, sp, "branch_json"),
            boundary_csv: take(raw.boundary_csv, true, sp, "boundary_csv"),
            diagnostics_json: take(raw.diagnostics_json, true, sp, "diagnostics_json"),
            convergence_log: take(raw.convergence_log, true, sp, "convergence_log"),
        },
    };
    let line_of = |keys: &[&str]| -> usize {
        keys.iter()
            .find_map(|k| spans.iter().find(|(n, _)| n == k))
            .map_or(0, |(_, s)| line_col(text, s.start).0)
    };
    validate_located(&cfg, line_of)?;
    Ok(cfg)
}

/// Validation with the line of the offending key (0 when the key was defaulted).
fn validate_located(cfg: &RunConfig, line_of: impl Fn(&[&str]) -> usize) -> Result<()> {
    let g = &cfg.geometry;
    let fail = |keys: &[&str], message: String| Err(Error::Validation { line: line_of(keys), message });
    let finite = [("alpha", g.alpha), ("b1", g.b1), ("b2", g.b2), ("gamma1", g.gamma1), ("gamma2", g.gamma2), ("d", g.d)];
    if let Some((k, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
        return fail(&[k], format!("{k} = {v} is not finite"));
    }
    if !(g.alpha > 0.0 && g.alpha < 2.0) {
        return fail(&["alpha"], format!("alpha = {} outside (0, 2)", g.alpha));
    }
    if !(g.b1 > 0.0) || !(g.b2 > 0.0) {
        return fail(&["b1", "b2"], "b1 > 0 and b2 > 0 required".into());
    }
    if !(g.d > 2.0 * (g.b1 + g.b2)) {
        return fail(
            &["d", "b1", "b2"],
            format!("d > 2(b1+b2) violated: d = {} <= 2(b1+b2) = {}", g.d, 2.0 * (g.b1 + g.b2)),
        );
    }
    if cfg.mode == Mode::Corotating && g.gamma1 + g.gamma2 == 0.0 {
        return fail(&["gamma2", "gamma1", "mode"], "gamma1 + gamma2 != 0 required in corotating mode".into());
    }
    let s = &cfg.solver;
    if let Err(e) = validate_schedule(&s.eps_schedule) {
        return fail(&["eps_schedule"], e.to_string());
    }
    if !(s.tol_residual > 0.0) {
        return fail(&["tol"], "tol > 0 required".into());
    }
    if s.max_newton_iters == 0 {
        return fail(&["max_iters"], "max_iters >= 1 required".into());
    }
    if !(s.damping > 0.0 && s.damping <= 1.0) {
        return fail(&["damping"], format!("damping = {} outside (0, 1]", s.damping));
    }
    if s.n < 2 {
        return fail(&["N"], "N >= 2 required".into());
    }
    if let Err(e) = CollocationGrid::for_order(s.m, s.n) {
        return fail(&["M", "N"], e.to_string());
    }
    if let Err(e) = s.quadrature.validate() {
        return fail(&["quadrature", "m_far", "near_width", "m_near", "taylor_threshold"], e.to_string());
    }
    if !(s.h_fd > 0.0) {
        return fail(&["h_fd"], "h_fd > 0 required".into());
    }
    if !(s.parity_tol > 0.0) {
        return fail(&["parity_tol"], "parity_tol > 0 required".into());
    }
    Ok(())
}

/// First 12 hex digits of SHA-256 over the little-endian bytes of the schedule.
pub fn schedule_hash(schedule: &[f64]) -> String {
    let mut h = Sha256::new();
    for e in schedule {
        h.update(e.to_le_bytes());
    }
    h.finalize().iter().take(6).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// `<mode>_<alpha>_<eps>` stem of per-state files.
pub fn state_stem(mode: Mode, alpha: f64, eps: f64) -> String {
    format!("{}_{alpha}_{eps}", mode.tag())
}

/// `<mode>_<alpha>_<kind>_<hash>` stem of branch-level files.
pub fn branch_stem(mode: Mode, alpha: f64, kind: &str, schedule: &[f64]) -> String {
    format!("{}_{alpha}_{kind}_{}", mode.tag(), schedule_hash(schedule))
}

/// Pretty JSON with shortest round-trip number formatting.
pub fn branch_to_json(branch: &SolutionBranch) -> Result<String> {
    Ok(serde_json::to_string_pretty(branch)?)
}

pub fn save_branch(branch: &SolutionBranch, path: &Path) -> Result<()> {
    fs::write(path, branch_to_json(branch)?)?;
    Ok(())
}

pub fn load_branch(path: &Path) -> Result<SolutionBranch> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Boundary points in physical coordinates: patch 1 is εb₁R₁(cos x, sin x) around the origin,
/// patch 2 is d e₁ − εb₂R₂(cos x, sin x). Columns: patch, x, X, Y (12 significant digits).
pub fn boundary_csv(state: &SolveState, geometry: &PairGeometry, grid: &CollocationGrid) -> Result<String> {
    let mut out = String::from("patch,x,X,Y\n");
    for (patch, p) in [(1usize, &state.p1), (2, &state.p2)] {
        let delta = geometry.delta(patch);
        let scale = geometry.eps * geometry.b(patch);
        let (sign, shift) = if patch == 1 { (1.0, 0.0) } else { (-1.0, geometry.d) };
        for (m, &x) in grid.points().iter().enumerate() {
            let r = 1.0 + delta * p.eval_at(x);
            if !(r > 0.0) {
                return Err(Error::DegenerateBoundary { patch, x, value: r });
            }
            let (c, s) = (grid.cos_k(m), grid.sin_k(m));
            let _ = writeln!(
                out,
                "{patch},{x:.11e},{:.11e},{:.11e}",
                shift + sign * scale * r * c,
                sign * scale * r * s
            );
        }
    }
    Ok(out)
}

pub fn write_boundary_csv(state: &SolveState, geometry: &PairGeometry, grid: &CollocationGrid, path: &Path) -> Result<()> {
    fs::write(path, boundary_csv(state, geometry, grid)?)?;
    Ok(())
}

/// Per-entry figures of [`check_branch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCheck {
    pub eps: f64,
    /// Residual norm recomputed on the check grid.
    pub residual_norm: f64,
    pub convex: bool,
    pub min_curvature_1: f64,
    pub min_curvature_2: f64,
}

/// Branch-level diagnostics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub mode: Mode,
    pub complete: bool,
    pub entries: Vec<EntryCheck>,
    /// Fit of log|scalar1 − star| against log ε, or why it could not be made.
    pub scaling: std::result::Result<ScalingFit, String>,
    pub reflection_literal: Option<ReflectionReport>,
    pub reflection_point: Option<ReflectionReport>,
    pub symmetric: Option<Vec<SymmetricEntry>>,
}

/// Recomputes residuals and curvature of every entry on an M-point grid and the branch checks.
pub fn check_branch(branch: &SolutionBranch, m: usize, quad: &QuadratureConfig) -> Result<CheckReport> {
    let n = branch.entries.first().map_or(2, |e| e.state.order());
    let grid = CollocationGrid::for_order(m, n)?;
    let asm = Assembler::new(branch.geometry.alpha, n, grid.clone(), *quad)?;
    let mut entries = Vec::new();
    for e in &branch.entries {
        let g = branch.geometry.with_eps(e.eps);
        let res = asm.residual(&g, &e.state)?;
        let c = convexity_check(&e.state, &g, &grid)?;
        entries.push(EntryCheck {
            eps: e.eps,
            residual_norm: res.norm(),
            convex: c.pass,
            min_curvature_1: c.min_curvature_1,
            min_curvature_2: c.min_curvature_2,
        });
    }
    let g = &branch.geometry;
    let symmetric = (branch.mode == Mode::Corotating && g.gamma1 == g.gamma2 && g.b1 == g.b2)
        .then(|| symmetric_reduction_check(g, branch))
        .transpose()?;
    Ok(CheckReport {
        mode: branch.mode,
        complete: branch.complete,
        entries,
        scaling: scaling_fit(branch).map_err(|e| e.to_string()),
        reflection_literal: reflection_check(branch, ReflectionRule::Literal).ok(),
        reflection_point: reflection_check(branch, ReflectionRule::PointReflection).ok(),
        symmetric,
    })
}

/// Outcome of [`run`].
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub branch: Option<SolutionBranch>,
    pub files: Vec<PathBuf>,
}

fn convergence_log(branch: &SolutionBranch) -> String {
    let mut s = String::new();
    for e in &branch.entries {
        let d = &e.diagnostics;
        let _ = writeln!(s, "eps={} iters={} cond={:e}", e.eps, d.newton_iters, d.jacobian_condition);
        for (k, r) in d.residual_history.iter().enumerate() {
            let _ = writeln!(s, "  {k} {r:e}");
        }
    }
    if let Some(reason) = &branch.stall_reason {
        let _ = writeln!(s, "stalled: {reason}");
    }
    s
}

fn write_outputs(cfg: &RunConfig, branch: &SolutionBranch) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let (mode, alpha, sched) = (cfg.mode, cfg.geometry.alpha, &cfg.solver.eps_schedule);
    let mut files = Vec::new();
    if cfg.emit.branch_json {
        let p = dir.join(format!("{}.json", branch_stem(mode, alpha, "branch", sched)));
        save_branch(branch, &p)?;
        files.push(p);
    }
    if cfg.emit.boundary_csv {
        let grid = CollocationGrid::for_order(cfg.solver.m, cfg.solver.n)?;
        for e in &branch.entries {
            let p = dir.join(format!("{}.csv", state_stem(mode, alpha, e.eps)));
            write_boundary_csv(&e.state, &cfg.geometry.with_eps(e.eps), &grid, &p)?;
            files.push(p);
        }
    }
    if cfg.emit.diagnostics_json {
        let report = check_branch(branch, cfg.solver.m, &cfg.solver.quadrature)?;
        let p = dir.join(format!("{}.json", branch_stem(mode, alpha, "diagnostics", sched)));
        fs::write(&p, serde_json::to_string_pretty(&report)?)?;
        files.push(p);
    }
    if cfg.emit.convergence_log {
        let p = dir.join(format!("{}.log", branch_stem(mode, alpha, "convergence", sched)));
        fs::write(&p, convergence_log(branch))?;
        files.push(p);
    }
    Ok(files)
}

/// Runs the continuation and writes the requested outputs.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    let fail = |code: i32, e: &Error| {
        log::error!("{}", serde_json::json!({ "event": "run_failed", "exit_code": code, "error": e.to_string() }));
        RunOutcome { exit_code: code, branch: None, files: Vec::new() }
    };
    if let Err(e) = cfg.validate() {
        return fail(EXIT_VALIDATION, &e);
    }
    let branch = match continue_branch(&cfg.geometry, cfg.mode, &cfg.solver) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_SOLVE, &e),
    };
    let files = match write_outputs(cfg, &branch) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_IO, &e),
    };
    let exit_code = if branch.complete {
        EXIT_OK
    } else {
        log::error!(
            "{}",
            serde_json::json!({ "event": "partial_branch", "reason": branch.stall_reason, "entries": branch.entries.len() })
        );
        EXIT_PARTIAL
    };
    RunOutcome { exit_code, branch: Some(branch), files }
}
