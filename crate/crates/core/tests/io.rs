mod common;

use patchpair::functionals::trivial_state;
use patchpair::io::*;
use patchpair::quadrature::{QuadratureConfig, Scheme};
use patchpair::solver::{continue_branch, SolverConfig};
use patchpair::{CollocationGrid, Error, Mode};
use std::path::PathBuf;

#[test]
fn empty_document_gives_defaults() {
    let cfg = parse_config("").unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.mode, Mode::Corotating);
    assert_eq!(cfg.solver.n, 64);
    assert_eq!(cfg.solver.m, 512);
    assert_eq!(cfg.solver.tol_residual, 1e-10);
    assert_eq!(cfg.solver.eps_schedule, vec![0.0]);
    assert_eq!(cfg.output_dir, PathBuf::from("out"));
}

#[test]
fn full_document_is_parsed() {
    let text = r#"
mode = "traveling"
alpha = 1.5
b1 = 1.0
b2 = 0.5
gamma1 = 2.0
gamma2 = -2.0
d = 4.0
eps_schedule = [0.0, 0.05, -0.05]
N = 32
M = 256
tol = 1e-12
max_iters = 7
damping = 0.5
quadrature = "gauss_jacobi_split"
m_far = 256
taylor_threshold = 1e-4
output_dir = "results"
boundary_csv = false
"#;
    let c = parse_config(text).unwrap();
    assert_eq!(c.mode, Mode::Traveling);
    assert_eq!((c.geometry.alpha, c.geometry.b2, c.geometry.gamma2, c.geometry.d), (1.5, 0.5, -2.0, 4.0));
    assert_eq!(c.solver.eps_schedule, vec![0.0, 0.05, -0.05]);
    assert_eq!((c.solver.n, c.solver.m, c.solver.max_newton_iters), (32, 256, 7));
    assert_eq!((c.solver.tol_residual, c.solver.damping), (1e-12, 0.5));
    assert_eq!(c.solver.quadrature.scheme, Scheme::GaussJacobiSplit);
    assert_eq!((c.solver.quadrature.m_far, c.solver.quadrature.taylor_threshold), (256, 1e-4));
    assert_eq!(c.output_dir, PathBuf::from("results"));
    assert!(!c.emit.boundary_csv && c.emit.branch_json);
}

#[test]
fn separation_violation_cites_constraint_and_line() {
    let err = parse_config("alpha = 1.0\nd = 1\nb1 = 1\nb2 = 1\n").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("d > 2(b1+b2)"), "{msg}");
    assert!(matches!(err, Error::Validation { line: 2, .. }), "{err:?}");
}

#[test]
fn zero_circulation_is_rejected_for_corotating_only() {
    let err = parse_config("mode = \"corotating\"\ngamma1 = 1\ngamma2 = -1\n").unwrap_err();
    assert!(err.to_string().contains("gamma1 + gamma2 != 0"), "{err}");
    assert!(matches!(err, Error::Validation { line: 2 | 3, .. }));
    assert!(parse_config("mode = \"traveling\"\ngamma1 = 1\ngamma2 = -1\n").is_ok());
}

#[test]
fn malformed_documents() {
    let err = parse_config("alpha = 1.0\nN = 64\nbogus = 3\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    let err = parse_config("alpha = \"one\"\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    let err = parse_config("eps_schedule = [0.1, 0.2]\n").unwrap_err();
    assert!(matches!(err, Error::Validation { line: 1, .. }), "{err:?}");
    let err = parse_config("N = 64\nM = 100\n").unwrap_err();
    assert!(matches!(err, Error::Validation { .. }), "{err:?}");
    assert!(parse_config("damping = 1.5\n").is_err());
}

#[test]
fn file_names() {
    assert_eq!(state_stem(Mode::Corotating, 1.5, 0.04), "corotating_1.5_0.04");
    assert_eq!(state_stem(Mode::Traveling, 1.0, -0.02), "traveling_1_-0.02");
    let h = schedule_hash(&[0.0, 0.02]);
    assert_eq!(h.len(), 12);
    assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
    assert_ne!(h, schedule_hash(&[0.0, 0.02, 0.04]));
    assert_eq!(branch_stem(Mode::Corotating, 1.0, "branch", &[0.0, 0.02]), format!("corotating_1_branch_{h}"));
    // Reference digests of the little-endian bytes, computed independently.
    assert_eq!(schedule_hash(&[0.0]), "af5570f5a181");
    assert_eq!(h, "0e5235ebdd8c");
}

#[test]
fn boundary_csv_of_trivial_state() {
    let g = common::fixture(1.0).with_eps(0.1);
    let grid = CollocationGrid::new(16).unwrap();
    let s = trivial_state(Mode::Corotating, &g, 4).unwrap();
    let text = boundary_csv(&s, &g, &grid).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("patch,x,X,Y"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 32);
    for r in &rows {
        let cx = if r[0] == 1.0 { 0.0 } else { 10.0 };
        let rad = ((r[2] - cx).powi(2) + r[3].powi(2)).sqrt();
        assert!((rad - 0.1).abs() < 1e-10);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    write_boundary_csv(&s, &g, &grid, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn branch_json_roundtrip_is_byte_identical() {
    let g = common::fixture(1.5);
    let cfg = SolverConfig { eps_schedule: vec![0.0, 0.1, -0.1], n: 16, m: 128, ..SolverConfig::default() };
    let b = continue_branch(&g, Mode::Corotating, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("branch.json");
    save_branch(&b, &path).unwrap();
    let loaded = load_branch(&path).unwrap();
    assert_eq!(loaded, b);
    assert_eq!(branch_to_json(&loaded).unwrap(), std::fs::read_to_string(&path).unwrap());
    let report = check_branch(&loaded, 128, &QuadratureConfig::default()).unwrap();
    assert!(report.complete);
    assert!(report.entries.iter().all(|e| e.residual_norm <= 1e-10 && e.convex));
    assert!(report.reflection_point.unwrap().max_discrepancy < 1e-9);
    assert!(report.symmetric.is_none());
    assert!(load_branch(&dir.path().join("missing.json")).is_err());
}

fn run_in(dir: &std::path::Path, schedule: &[f64], tol: f64) -> RunOutcome {
    let mut cfg = RunConfig::default();
    cfg.solver.eps_schedule = schedule.to_vec();
    cfg.solver.n = 16;
    cfg.solver.m = 128;
    cfg.solver.tol_residual = tol;
    cfg.solver.max_newton_iters = 4;
    cfg.output_dir = dir.to_path_buf();
    run(&cfg)
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &[0.0], 1e-10);
    assert_eq!(out.exit_code, EXIT_OK);
    assert_eq!(out.branch.as_ref().unwrap().entries.len(), 1);
    assert_eq!(out.files.len(), 4);
    let h = schedule_hash(&[0.0]);
    for name in [
        format!("corotating_1_branch_{h}.json"),
        "corotating_1_0.csv".to_string(),
        format!("corotating_1_diagnostics_{h}.json"),
        format!("corotating_1_convergence_{h}.log"),
    ] {
        assert!(dir.path().join(&name).is_file(), "{name}");
    }

    let out = run_in(dir.path(), &[0.0, 0.02, -0.02], 1e-10);
    assert_eq!(out.exit_code, EXIT_OK);
    assert_eq!(out.files.len(), 6);
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &[0.0, 0.02], 1e-30);
    assert_eq!(out.exit_code, EXIT_PARTIAL);
    assert!(!out.branch.unwrap().complete);

    let mut cfg = RunConfig::default();
    cfg.geometry.d = 1.0;
    assert_eq!(run(&cfg).exit_code, EXIT_VALIDATION);

    let file = dir.path().join("not_a_dir");
    std::fs::write(&file, "").unwrap();
    let out = run_in(&file, &[0.0], 1e-10);
    assert_eq!(out.exit_code, EXIT_IO);
}
