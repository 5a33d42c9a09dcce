use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ckn_lattice::extend::QuadratureRule;
use ckn_lattice::io::{read_params, RunParameters, Timings, TOOL_VERSION};
use ckn_lattice::{
    cutoff_scan, d1p_norm, decay_exponent_fit, equivalence_ratios, extension_grad_lp_norm, extension_lp_norm,
    ground_state_k, ground_state_s, lp_norm, minimize, quotient, read_function, run_suite, schwarz_with_stats,
    validate, write_function, CutoffSpec, Error, KParams, LatticeBox, LatticeFunction, MinimizeResult, Problem,
    RunReport, SParams, SolverConfig, Suite, SweepConfig,
};

#[derive(Parser, Debug)]
#[command(name = "ckn-lattice", version, about = "Lattice rearrangement and CKN extremal experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Schwarz-rearrange a nonnegative function.
    Rearrange {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Box radius (default: smallest centered box holding the support).
        #[arg(long = "L")]
        radius: Option<i64>,
        #[arg(long)]
        max_sweeps: Option<usize>,
    },
    /// Evaluate the inequality quotient of a function.
    Quotient {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        params: PathBuf,
    },
    /// Minimize the weighted Sobolev quotient over growing boxes.
    MinimizeS {
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        b: f64,
        #[arg(long)]
        q: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Minimize the interpolation quotient over growing boxes.
    MinimizeK {
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        q: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Scale a stored minimizer into a ground state and report its residual.
    GroundState {
        #[arg(long)]
        from: PathBuf,
        /// Fail unless the relative residual is at most --tol.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeded property suites.
    Verify {
        #[arg(long, value_delimiter = ',', default_value = "hl,ps,equimeasure,idempotence")]
        suite: Vec<String>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "L")]
        radius: i64,
    },
    /// Gradient norms of the logarithmic cutoff for several outer radii.
    CutoffScan {
        #[arg(long = "N")]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = 10.0)]
        r: f64,
        #[arg(long = "Rs", value_delimiter = ',', default_value = "100,1000,10000")]
        outer: Vec<f64>,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Compare extension norms with lattice norms for one function.
    ExtendCheck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 4)]
        quad_order: usize,
    },
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    boxes: Vec<i64>,
    #[arg(long, default_value_t = 1e-10)]
    tol_energy: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol_exhaust: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol_grad: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value_t = 1)]
    rearrange_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            box_radii: self.boxes.clone(),
            step: self.step,
            tol_energy: self.tol_energy,
            tol_exhaust: self.tol_exhaust,
            tol_grad: self.tol_grad,
            max_iters: self.max_iters,
            seed: self.seed,
            rearrange_every: self.rearrange_every,
            ..SolverConfig::default()
        }
    }
}

/// Exit status for a run that finished without an error.
enum Status {
    Ok,
    Failed,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Ok(Status::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            let converge = e.chain().any(|c| {
                matches!(c.downcast_ref::<Error>(), Some(Error::NonConvergence { .. } | Error::NotConverged))
            });
            ExitCode::from(if converge { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> anyhow::Result<Status> {
    match command {
        Command::Rearrange { input, out, radius, max_sweeps } => {
            let u: LatticeFunction<f64> = read_function(&input).with_context(|| format!("reading {}", input.display()))?;
            let bx = match radius {
                Some(l) => LatticeBox::new(u.dim(), l)?,
                None => LatticeBox::enclosing(u.dim(), u.support())?,
            };
            let mut cfg = SweepConfig::for_box(&bx);
            if let Some(k) = max_sweeps {
                cfg.max_sweeps = k;
            }
            let (v, sweeps) = schwarz_with_stats(&u, &bx, &cfg)?;
            write_function(&out, &v)?;
            println!("L={} sweeps={sweeps} unchanged={}", bx.radius(), v == u);
            Ok(Status::Ok)
        }
        Command::Quotient { input, params } => {
            let u: LatticeFunction<f64> = read_function(&input)?;
            let spec = read_params(&params).with_context(|| format!("reading {}", params.display()))?;
            let valid = validate(&spec)?;
            let value = quotient(&u, &valid)?;
            println!("q_star={} regime={:?} quotient={value}", valid.q_star, valid.regime);
            Ok(Status::Ok)
        }
        Command::MinimizeS { n, p, b, q, solver } => {
            let sp = SParams::new(n, p, b, q)?;
            run_minimize("minimize-s", Problem::S(sp), &solver)
        }
        Command::MinimizeK { n, p, r, theta, q, solver } => {
            let kp = KParams::new(n, p, r, theta, q)?;
            run_minimize("minimize-k", Problem::K(kp), &solver)
        }
        Command::GroundState { from, check, tol, out } => ground_state(&from, check, tol, out.as_deref()),
        Command::Verify { suite, trials, seed, n, radius } => {
            let suites = suite.iter().map(|s| s.trim().parse::<Suite>()).collect::<Result<Vec<_>, _>>()?;
            let mut failed = false;
            for s in suites {
                let o = run_suite(s, n, radius, trials, seed)?;
                println!(
                    "suite={} N={n} L={radius} trials={trials} seed={seed} checks={} violations={} worst_excess={:e}",
                    o.suite, o.checks, o.violations, o.worst_excess
                );
                failed |= !o.passed();
            }
            Ok(if failed { Status::Failed } else { Status::Ok })
        }
        Command::CutoffScan { n, a, b, r, outer, csv } => {
            let first = *outer.first().context("--Rs needs at least one radius")?;
            let template = CutoffSpec::new(n, r, first, a, b)?;
            for &big_r in &outer {
                template.with_outer(big_r)?;
            }
            let samples = cutoff_scan(&template, &outer)?;
            let mut w = csv::Writer::from_path(&csv)?;
            for s in &samples {
                w.serialize(s)?;
                println!("R={} norm={}", s.big_r, s.norm);
            }
            w.flush()?;
            match decay_exponent_fit(&template, &samples) {
                Ok(fit) => println!("slope={} predicted={} intercept={}", fit.slope, fit.predicted, fit.intercept),
                Err(e) => println!("fit skipped: {e}"),
            }
            Ok(Status::Ok)
        }
        Command::ExtendCheck { input, p, quad_order } => {
            let u: LatticeFunction<f64> = read_function(&input)?;
            let rule = QuadratureRule::gauss_legendre(quad_order)?;
            let doubled = QuadratureRule::gauss_legendre(2 * quad_order)?;
            let ext = extension_lp_norm(&u, p, &rule)?;
            let ext_grad = extension_grad_lp_norm(&u, p, &rule)?;
            let lat = lp_norm(&u, p, 0.0)?;
            let lat_grad = d1p_norm(&u, p, 0.0)?;
            let s = equivalence_ratios(std::slice::from_ref(&u), p, &rule)?;
            let d = equivalence_ratios(std::slice::from_ref(&u), p, &doubled)?;
            println!("ext_lp={ext} lattice_lp={lat} ratio={}", s.lp_ratios[0]);
            println!("ext_grad_lp={ext_grad} lattice_d1p={lat_grad} ratio={}", s.grad_ratios[0]);
            println!(
                "order_doubling_change lp={:e} grad={:e}",
                (d.lp_ratios[0] - s.lp_ratios[0]).abs(),
                (d.grad_ratios[0] - s.grad_ratios[0]).abs()
            );
            Ok(Status::Ok)
        }
    }
}

fn run_minimize(command: &str, problem: Problem, args: &SolverArgs) -> anyhow::Result<Status> {
    let cfg = args.config();
    let start = Instant::now();
    let res: MinimizeResult<f64> = minimize(problem, &cfg)?;
    write_function(&args.out, &res.u)?;
    for b in &res.per_box {
        println!(
            "L={} energy={} iterations={} converged={} rel_grad={:e}",
            b.radius, b.energy, b.iterations, b.converged, b.rel_grad
        );
    }
    let report = RunReport {
        command: command.into(),
        tool_version: TOOL_VERSION.into(),
        seed: cfg.seed,
        parameters: RunParameters { problem, solver: cfg.clone() },
        per_box: res.per_box.clone(),
        energy: res.energy,
        converged: res.converged,
        final_box_converged: res.final_box_converged,
        residual: None,
        minimizer: Some(args.out.display().to_string()),
        timings: Timings { total_seconds: start.elapsed().as_secs_f64() },
    };
    report.write(&args.report)?;
    println!("energy={} exhausted={} fingerprint={}", res.energy, res.converged, report.fingerprint()?);
    if !res.converged {
        eprintln!("box radii exhausted before the energy stabilized within tol_exhaust={}", cfg.tol_exhaust);
        return Ok(Status::NotConverged);
    }
    Ok(Status::Ok)
}

fn resolve(path: &str, report: &Path) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() || p.exists() {
        return p;
    }
    report.parent().map(|d| d.join(&p)).filter(|q| q.exists()).unwrap_or(p)
}

fn ground_state(from: &Path, check: bool, tol: f64, out: Option<&Path>) -> anyhow::Result<Status> {
    let report = RunReport::read(from).with_context(|| format!("reading report {}", from.display()))?;
    let Some(path) = report.minimizer.as_deref() else { bail!("report has no minimizer path") };
    let u: LatticeFunction<f64> = read_function(resolve(path, from))?;
    let problem = report.parameters.problem;
    let bx = LatticeBox::enclosing(u.dim(), u.support())?;
    let res = MinimizeResult {
        radius: bx.radius(),
        energy: report.energy,
        per_box: report.per_box.clone(),
        converged: report.converged,
        final_box_converged: report.final_box_converged,
        problem,
        trace: None,
        u,
    };
    let gs = match problem {
        Problem::S(sp) => ground_state_s(&res, &sp)?,
        Problem::K(kp) => ground_state_k(&res, &kp)?,
    };
    println!(
        "scale={} lambda1={} lambda2={} residual_l2={:e} residual_rel={:e}",
        gs.scale,
        fmt_opt(gs.lambda1),
        fmt_opt(gs.lambda2),
        gs.residual_l2,
        gs.residual_rel
    );
    if let Some(o) = out {
        write_function(o, &gs.v)?;
    }
    if check && !(gs.residual_rel <= tol) {
        eprintln!("residual_rel {:e} exceeds {tol:e}", gs.residual_rel);
        return Ok(Status::Failed);
    }
    Ok(Status::Ok)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| x.to_string())
}
