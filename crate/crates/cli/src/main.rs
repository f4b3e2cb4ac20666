//! `saddle`: run saddle-point solves from a JSON config or flags.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use saddle_core::{
    barrier_continuation, circle_samples, gaussian_samples, gradient_check, lp_detach_config,
    lp_kkt_residual, ot_outer_loop, recover_original, solve, solve_lp, solve_squared, wrap_barrier,
    wrap_squared, DetachConfig, LpInstance, Matrix, MinimaxProblem, OtLoopConfig, Point,
    ProblemError, SolveResult, SolverError, Status, StepRecord, Vector,
};

use config::{mask_from, roots, ConfigError, ConstraintSpec, DetachSpec, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "saddle", version, about = "Saddle-point solver driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem, write its trace and print a summary.
    Run(RunArgs),
    /// Compare the analytic gradient against finite differences.
    CheckGrad {
        #[command(flatten)]
        run: RunArgs,
        /// Largest acceptable mixed relative error.
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
    },
    /// Random LP solved through its squared-variable Lagrangian.
    LpDemo(LpDemoArgs),
    /// Gaussian-to-circle transport by a sequence of local games.
    OtDemo(OtDemoArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, value_parser = ["explicit", "implicit", "qn"])]
    method: Option<String>,
    #[arg(long)]
    fixed_eta: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    /// Gradient-norm tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trace CSV path; the solution goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treat a diverged solve as success.
    #[arg(long)]
    expect_divergence: bool,
}

#[derive(Args)]
struct LpDemoArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 117)]
    n_x: usize,
    #[arg(long, default_value_t = 114)]
    n_y: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = "lp_trace.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct OtDemoArgs {
    /// Source sample count.
    #[arg(long, default_value_t = 60)]
    n: usize,
    /// Target sample count.
    #[arg(long, default_value_t = 60)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    stages: usize,
    #[arg(long, default_value_t = 4)]
    bumps_per_axis: usize,
    #[arg(long, default_value_t = 2.0)]
    radius: f64,
    /// Use the source samples as the target.
    #[arg(long)]
    matched: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Step budget per stage.
    #[arg(long, default_value_t = 300)]
    max_steps: usize,
    #[arg(long, default_value = "ot_stages.csv")]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solve failed: {0}")]
    Solve(SolverError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Solve(_) => 3,
            _ => 2,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::SingularSystem(_) => CliError::Solve(e),
            other => CliError::Config(ConfigError::Invalid(other.to_string())),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        CliError::Config(e.into())
    }
}

fn written(path: &std::path::Path, r: std::io::Result<()>) -> Result<(), CliError> {
    r.map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(&args),
        Command::CheckGrad { run, threshold } => check_grad(&run, threshold),
        Command::LpDemo(args) => lp_demo(&args),
        Command::OtDemo(args) => ot_demo(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("saddle: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn exit_code(status: Status, expect_divergence: bool) -> u8 {
    match (status, expect_divergence) {
        (Status::Converged, false) | (Status::Diverged, true) => 0,
        _ => 3,
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match (&args.config, &args.problem) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::named(name),
        (None, None) => {
            return Err(
                ConfigError::Invalid("either --config or --problem is required".into()).into(),
            )
        }
    };
    cfg.apply(&Overrides {
        problem: args.problem.clone(),
        method: args.method.clone(),
        fixed_eta: args.fixed_eta,
        mu0: args.mu0,
        alpha: args.alpha,
        mu_max: args.mu_max,
        tol: args.tol,
        max_steps: args.max_steps,
        seed: args.seed,
        out: args.out.clone(),
    });
    Ok(cfg)
}

struct Outcome {
    records: Vec<StepRecord<f64>>,
    last: SolveResult<f64>,
    /// Terminal point in original coordinates.
    original: Point<f64>,
}

fn solve_configured(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let built = cfg.problem.build()?;
    let solver = cfg.solver.build()?;
    let dim = built.base.shape().dim();
    let init = |default: Point<f64>| match &cfg.init {
        Some(spec) => spec.point(dim),
        None => Ok(default),
    };
    match &cfg.constraint {
        ConstraintSpec::None => {
            let z0 = init(if built.plain_is_squared {
                roots(&built.start, &built.mask)
            } else {
                built.start.clone()
            })?;
            let res = solve(&built.plain, &z0, &solver)?;
            let original = if built.plain_is_squared {
                recover_original(&res.z_final, &built.mask)
            } else {
                res.z_final.clone()
            };
            Ok(Outcome {
                records: res.trace.clone(),
                last: res,
                original,
            })
        }
        ConstraintSpec::Squared { mask, detach } => {
            let mask = mask_from(mask, &built.mask)?;
            let default = if built.lp.is_some() {
                lp_detach_config()
            } else {
                DetachConfig::default()
            };
            let detach = DetachSpec::build(detach, default)?;
            let z0 = init(roots(&built.start, &mask))?;
            let wrapped = wrap_squared(built.base, mask.clone())?;
            let res = solve_squared(&wrapped, &z0, &solver, detach)?;
            Ok(Outcome {
                records: res.trace.clone(),
                original: recover_original(&res.z_final, &mask),
                last: res,
            })
        }
        ConstraintSpec::Barrier { t_schedule, mask } => {
            let mask = mask_from(mask, &built.mask)?;
            let z0 = init(built.start.clone())?;
            let stages = barrier_continuation(&built.base, &mask, &z0, t_schedule, &solver)?;
            let records = stages.iter().flat_map(|r| r.trace.clone()).collect();
            let last = stages.into_iter().last().expect("non-empty schedule");
            Ok(Outcome {
                records,
                original: last.z_final.clone(),
                last,
            })
        }
    }
}

fn run(args: &RunArgs) -> Result<u8, CliError> {
    let cfg = load(args)?;
    let out = solve_configured(&cfg)?;
    let res = &out.last;

    let trace = cfg.trace_path();
    written(&trace, output::write_trace(&trace, &out.records))?;
    let mut solution = json!({
        "problem": cfg.problem.name,
        "status": res.status.as_str(),
        "steps": out.records.len(),
        "grad_norm": res.final_grad_norm,
        "value": res.final_value,
        "z": res.z_final.as_slice(),
        "z_original": out.original.as_slice(),
    });
    if let Some(inst) = cfg.problem.build()?.lp {
        let (nx, ny) = (inst.n_x(), inst.n_y());
        let kkt = lp_kkt_residual(
            &inst,
            &out.original.segment(0, nx),
            &out.original.segment(nx, ny),
        );
        solution["kkt_residual"] = json!(kkt);
    }
    let sol_path = cfg.solution_path();
    written(&sol_path, output::write_json(&sol_path, &solution))?;

    println!(
        "status={} steps={} grad_norm={:.6e} value={:.12e}",
        res.status.as_str(),
        out.records.len(),
        res.final_grad_norm,
        res.final_value
    );
    Ok(exit_code(res.status, args.expect_divergence))
}

/// Start point plus two deterministic perturbations of it. Barrier-masked
/// coordinates are perturbed multiplicatively to stay positive.
fn probe_points(z0: &Point<f64>, keep_sign: impl Fn(usize) -> bool) -> Vec<Point<f64>> {
    let mut points = vec![z0.clone()];
    for k in 1..=2 {
        points.push(Vector::from_fn(z0.len(), |i| {
            let s = 0.05 * (1.7 * i as f64 + k as f64).sin();
            if keep_sign(i) {
                z0[i] * (1.0 + s)
            } else {
                z0[i] + s
            }
        }));
    }
    points
}

fn worst_error(problem: &dyn MinimaxProblem<f64>, points: &[Point<f64>]) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for z in points {
        let err = gradient_check(problem, z, 1e-5)?;
        worst = if err.is_nan() {
            f64::INFINITY
        } else {
            worst.max(err)
        };
    }
    Ok(worst)
}

fn check_grad(args: &RunArgs, threshold: f64) -> Result<u8, CliError> {
    let cfg = load(args)?;
    let built = cfg.problem.build()?;
    let dim = built.base.shape().dim();
    let init = |default: Point<f64>| match &cfg.init {
        Some(spec) => spec.point(dim),
        None => Ok(default),
    };
    let (worst, n) = match &cfg.constraint {
        ConstraintSpec::None => {
            let z0 = init(if built.plain_is_squared {
                roots(&built.start, &built.mask)
            } else {
                built.start.clone()
            })?;
            let pts = probe_points(&z0, |_| false);
            (worst_error(built.plain.as_ref(), &pts)?, pts.len())
        }
        ConstraintSpec::Squared { mask, .. } => {
            let mask = mask_from(mask, &built.mask)?;
            let z0 = init(roots(&built.start, &mask))?;
            let pts = probe_points(&z0, |_| false);
            let wrapped = wrap_squared(built.base, mask)?;
            (worst_error(&wrapped, &pts)?, pts.len())
        }
        ConstraintSpec::Barrier { t_schedule, mask } => {
            let mask = mask_from(mask, &built.mask)?;
            let t = *t_schedule
                .first()
                .ok_or_else(|| ConfigError::Invalid("empty barrier schedule".into()))?;
            let z0 = init(built.start.clone())?;
            let pts = probe_points(&z0, |i| mask.contains(i));
            let wrapped = wrap_barrier(&built.base, t, mask)?;
            (worst_error(&wrapped, &pts)?, pts.len())
        }
    };
    let ok = worst < threshold;
    println!(
        "{} gradient error {worst:.3e} over {n} points (threshold {threshold:.1e})",
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(if ok { 0 } else { 1 })
}

fn lp_demo(args: &LpDemoArgs) -> Result<u8, CliError> {
    if args.n_x == 0 || args.n_y == 0 {
        return Err(ConfigError::Invalid("--n-x and --n-y must be positive".into()).into());
    }
    let inst = LpInstance::<f64>::random(args.n_x, args.n_y, args.seed);
    let mut solver = saddle_core::SolverConfig::<f64>::default();
    solver.max_steps = args.max_steps.unwrap_or(solver.max_steps);
    solver.grad_tol = args.tol.unwrap_or(solver.grad_tol);
    solver.validate()?;
    let sol = solve_lp(&inst, &inst.default_start(), &solver, lp_detach_config())?;
    let res = &sol.result;

    written(&args.out, output::write_trace(&args.out, &res.trace))?;
    let sol_path = args.out.with_extension("solution.json");
    let doc = json!({
        "seed": args.seed,
        "n_x": args.n_x,
        "n_y": args.n_y,
        "status": res.status.as_str(),
        "steps": res.steps(),
        "kkt_residual": sol.kkt_residual,
        "x": sol.x.as_slice(),
        "y": sol.y.as_slice(),
    });
    written(&sol_path, output::write_json(&sol_path, &doc))?;

    println!(
        "status={} steps={} grad_norm={:.6e} value={:.12e}",
        res.status.as_str(),
        res.steps(),
        res.final_grad_norm,
        res.final_value
    );
    println!("kkt_residual={:.6e}", sol.kkt_residual);
    Ok(exit_code(res.status, false))
}

fn ot_demo(args: &OtDemoArgs) -> Result<u8, CliError> {
    if args.n == 0 || args.m == 0 || args.stages == 0 || args.bumps_per_axis == 0 {
        return Err(ConfigError::Invalid(
            "sample counts, stages and bumps must be positive".into(),
        )
        .into());
    }
    let source = gaussian_samples::<f64>(args.n, 2, 0.0, 1.0, args.seed);
    let target = if args.matched {
        source.clone()
    } else {
        circle_samples::<f64>(args.m, args.radius, args.seed.wrapping_add(1))
    };
    let mut cfg = OtLoopConfig::<f64> {
        stages: args.stages,
        bumps_per_axis: args.bumps_per_axis,
        ..Default::default()
    };
    cfg.solver.max_steps = args.max_steps;
    let run = ot_outer_loop(&source, &target, &cfg)?;

    let mut csv = String::from("stage,status,steps,objective,grad_norm\n");
    for (k, s) in run.stages.iter().enumerate() {
        println!(
            "stage {k}: {} steps={} objective={:.6} grad_norm={:.3e}",
            s.status.as_str(),
            s.steps,
            s.objective,
            s.grad_norm
        );
        csv.push_str(&format!(
            "{k},{},{},{:.16e},{:.16e}\n",
            s.status.as_str(),
            s.steps,
            s.objective,
            s.grad_norm
        ));
    }
    written(&args.out, std::fs::write(&args.out, csv))?;
    let rows = |m: &Matrix<f64>| (0..m.rows()).map(|i| m.row(i).to_vec()).collect::<Vec<_>>();
    let sol_path = args.out.with_extension("solution.json");
    let doc = json!({
        "source": rows(&source),
        "target": rows(&target),
        "pushed": rows(&run.pushed),
        "objectives": run.stages.iter().map(|s| s.objective).collect::<Vec<_>>(),
    });
    written(&sol_path, output::write_json(&sol_path, &doc))?;

    let last = run.stages.last().expect("at least one stage");
    println!("final objective={:.6}", last.objective);
    Ok(exit_code(last.status, false))
}
