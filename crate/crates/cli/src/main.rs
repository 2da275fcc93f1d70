//! Command-line driver: `solve`, `check` and `sigma`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use patchpair::io::{self, RunConfig, EXIT_IO, EXIT_VALIDATION};
use patchpair::quadrature::QuadratureConfig;
use patchpair::special::{MultiplierTable, Normalization};
use patchpair::{Error, Mode};

#[derive(Parser)]
#[command(name = "patchpair", version, about = "Vortex-patch pairs for generalized SQG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ε-continuation and write the requested outputs.
    Solve(SolveArgs),
    /// Re-run diagnostics on a saved branch and print them as JSON.
    Check {
        /// Branch JSON written by `solve`.
        #[arg(long)]
        branch: PathBuf,
        /// Collocation points for the recomputed residuals.
        #[arg(long, default_value_t = 512)]
        m: usize,
        /// Also write the report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the multipliers σ_1..σ_N.
    Sigma {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Norm::Calibrated)]
        normalization: Norm,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Calibrated,
    Raw,
    TwoOverPi,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Corotating,
    Traveling,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// TOML run configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma2: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    /// Comma-separated ε values starting at 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eps_schedule: Option<Vec<f64>>,
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long = "m")]
    m: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn load_config(args: &SolveArgs) -> std::result::Result<RunConfig, (i32, String)> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
            io::parse_config(&text).map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let g = &mut cfg.geometry;
    let s = &mut cfg.solver;
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Corotating => Mode::Corotating,
            ModeArg::Traveling => Mode::Traveling,
        };
    }
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut g.alpha, args.alpha);
    set(&mut g.b1, args.b1);
    set(&mut g.b2, args.b2);
    set(&mut g.gamma1, args.gamma1);
    set(&mut g.gamma2, args.gamma2);
    set(&mut g.d, args.d);
    set(&mut s.tol_residual, args.tol);
    set(&mut s.damping, args.damping);
    if let Some(v) = &args.eps_schedule {
        s.eps_schedule = v.clone();
    }
    if let Some(v) = args.n {
        s.n = v;
    }
    if let Some(v) = args.m {
        s.m = v;
    }
    if let Some(v) = args.max_iters {
        s.max_newton_iters = v;
    }
    if let Some(v) = &args.output_dir {
        cfg.output_dir = v.clone();
    }
    cfg.validate().map_err(|e: Error| (EXIT_VALIDATION, format!("override: {e}")))?;
    Ok(cfg)
}

fn solve(args: &SolveArgs) -> i32 {
    let cfg = match load_config(args) {
        Ok(c) => c,
        Err((code, msg)) => {
            log::error!("{}", json_record("invalid_config", code, &msg));
            eprintln!("error: {msg}");
            return code;
        }
    };
    let outcome = io::run(&cfg);
    if let Some(b) = &outcome.branch {
        for e in &b.entries {
            println!(
                "eps={} scalar1={} scalar2={} residual={:e} iters={}",
                e.eps, e.state.scalar1, e.state.scalar2, e.diagnostics.residual_norm, e.diagnostics.newton_iters
            );
        }
        if let Some(r) = &b.stall_reason {
            println!("stalled: {r}");
        }
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    outcome.exit_code
}

fn json_record(event: &str, code: i32, message: &str) -> String {
    serde_json::json!({ "event": event, "exit_code": code, "error": message }).to_string()
}

fn check(branch: &Path, m: usize, output: Option<&Path>) -> Result<()> {
    let b = io::load_branch(branch).with_context(|| format!("reading {}", branch.display()))?;
    let report = io::check_branch(&b, m, &QuadratureConfig::default())?;
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(p) = output {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn sigma(alpha: f64, n: usize, norm: Norm) -> Result<()> {
    let normalization = match norm {
        Norm::Calibrated => Normalization::Calibrated,
        Norm::Raw => Normalization::Raw,
        Norm::TwoOverPi => Normalization::TwoOverPi,
    };
    let table = MultiplierTable::new(alpha, n, normalization)?;
    println!("j,sigma_j");
    for (j, s) in table.sigma.iter().enumerate() {
        println!("{},{s:.17e}", j + 1);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Solve(args) => solve(args),
        Command::Check { branch, m, output } => match check(branch, *m, output.as_deref()) {
            Ok(()) => 0,
            Err(e) => {
                log::error!("{}", json_record("check_failed", EXIT_IO, &format!("{e:#}")));
                eprintln!("error: {e:#}");
                EXIT_IO
            }
        },
        Command::Sigma { alpha, n, normalization } => match sigma(*alpha, *n, *normalization) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_VALIDATION
            }
        },
    };
    ExitCode::from(code as u8)
}
