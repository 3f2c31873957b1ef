//! `conic`: solve stored models, generate benchmark instances, run the
//! benchmark suite and emit performance profiles.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conic_bench::suite::{write_profile_csv, BENCH_MAX_ITERS, RUNS_FILE};
use conic_bench::{default_suite, generate, read_runs_csv, run_suite, write_suite, InstanceSpec, SuiteOptions};
use conic_core::model::text;
use conic_core::model::Tolerances;
use conic_core::{solve, SolveResult, SolveStatus, SolverOptions, StepperMode};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_FAILED: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "conic", version, about = "Interior point solver for exotic conic problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a model stored in the text format.
    Solve(SolveArgs),
    /// Generate one benchmark instance and write it as a model file.
    Gen(GenArgs),
    /// Run a benchmark suite under every stepping mode.
    Bench(BenchArgs),
    /// Write the iteration and time profiles of two modes from a bench run.
    Profile(ProfileArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "comb")]
    stepper: StepperMode,
    /// Feasibility tolerance.
    #[arg(long)]
    tol_feas: Option<f64>,
    /// Relative and absolute gap tolerance.
    #[arg(long)]
    tol_gap: Option<f64>,
    /// Infeasibility tolerance.
    #[arg(long)]
    tol_inf: Option<f64>,
    /// Ill-posedness tolerance.
    #[arg(long)]
    tol_illposed: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Per-iteration history as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Generator name, optionally with parameters: `lp_random:n=20,p=5`.
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// `default` (the full suite) or `smoke` (three small LPs).
    #[arg(long, default_value = "default")]
    suite: String,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Comma-separated subset of stepping modes.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<StepperMode>>,
    #[arg(long, default_value_t = BENCH_MAX_ITERS)]
    max_iters: usize,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    /// Directory written by `bench`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Two modes, `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pair: Vec<StepperMode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failed(String),
}

type CliResult = Result<u8, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let out = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Profile(a) => cmd_profile(a),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `conic --help` for usage");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

/// Certificates are successes; everything else is a failed solve.
fn exit_code(status: SolveStatus) -> u8 {
    if status.is_certificate() {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

fn tolerances(a: &SolveArgs) -> Result<Tolerances, CliError> {
    let mut t = Tolerances::default();
    let set = |slot: &mut f64, v: Option<f64>, name: &str| -> Result<(), CliError> {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("--{name} must be a positive number")));
            }
            *slot = v;
        }
        Ok(())
    };
    set(&mut t.feas, a.tol_feas, "tol-feas")?;
    set(&mut t.rel_gap, a.tol_gap, "tol-gap")?;
    set(&mut t.abs_gap, a.tol_gap, "tol-gap")?;
    set(&mut t.infeas, a.tol_inf, "tol-inf")?;
    set(&mut t.illposed, a.tol_illposed, "tol-illposed")?;
    Ok(t)
}

fn cmd_solve(a: SolveArgs) -> CliResult {
    let raw = fs::read_to_string(&a.model)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.model.display())))?;
    let model = text::deserialize(&raw).map_err(|e| CliError::Usage(format!("{}: {e}", a.model.display())))?;
    let mut opts = SolverOptions::with_mode(a.stepper);
    opts.tol = tolerances(&a)?;
    opts.max_iters = a.max_iters;
    opts.validate().map_err(CliError::Usage)?;

    let t = &opts.tol;
    println!("model      {} (n={}, p={}, q={}, cones={})", a.model.display(), model.n(), model.p(), model.q(), model.cones().len());
    println!("stepper    {}", a.stepper);
    println!(
        "tolerances feas={:.3e} rel_gap={:.3e} infeas={:.3e} abs_gap={:.3e} illposed={:.3e}",
        t.feas, t.rel_gap, t.infeas, t.abs_gap, t.illposed
    );
    let res = solve(&model, &opts);
    println!("status     {}", res.status);
    println!("objective  primal={:.12e} dual={:.12e}", res.primal_obj, res.dual_obj);
    println!("iterations {}", res.iterations);
    println!("time       {:.3} ms", res.total.as_secs_f64() * 1e3);
    if let Some(path) = &a.out {
        write_history(path, &res).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(exit_code(res.status))
}

fn write_history(path: &Path, res: &SolveResult) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "iter,kind,alpha,mu,tau,kappa,prox,residual,direction_residual")?;
    for r in &res.history {
        writeln!(
            f,
            "{},{:?},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.iter, r.kind, r.alpha, r.mu, r.tau, r.kappa, r.prox, r.residual, r.direction_residual
        )?;
    }
    f.flush()
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let spec = InstanceSpec::parse(&a.spec, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let inst = generate(&spec).map_err(|e| CliError::Failed(e.to_string()))?;
    fs::write(&a.out, text::serialize(&inst.model))
        .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", a.out.display())))?;
    println!("wrote {} to {}", inst.name, a.out.display());
    Ok(EXIT_OK)
}

fn suite_specs(name: &str) -> Result<Vec<InstanceSpec>, CliError> {
    match name {
        "default" => Ok(default_suite()),
        "smoke" => Ok(vec![
            InstanceSpec::LpRandom { n: 10, p: 3, seed: 7 },
            InstanceSpec::LpRandom { n: 12, p: 5, seed: 2 },
            InstanceSpec::LpInfeasible { n: 10, p: 4, seed: 1 },
        ]),
        other => Err(CliError::Usage(format!("unknown suite '{other}' (expected default or smoke)"))),
    }
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let specs = suite_specs(&a.suite)?;
    let modes = a.modes.unwrap_or_else(|| StepperMode::ALL.to_vec());
    if modes.is_empty() {
        return Err(CliError::Usage("--modes needs at least one mode".into()));
    }
    let opts = SuiteOptions { jobs: a.jobs, max_iters: a.max_iters };
    let table = run_suite(&specs, &modes, &opts).map_err(|e| CliError::Failed(e.to_string()))?;
    write_suite(&a.out, &table).map_err(|e| CliError::Failed(e.to_string()))?;
    println!("{:<6} {:<6} {:>5} {:>10} {:>10}", "mode", "set", "conv", "iters", "time_ms");
    for row in table.aggregates() {
        println!("{:<6} {:<6} {:>5} {:>10.2} {:>10.3}", row.mode.to_string(), row.set.to_string(), row.conv, row.iters_sgm, row.time_sgm);
    }
    println!("wrote {} runs to {}", table.runs.len(), a.out.display());
    Ok(EXIT_OK)
}

fn cmd_profile(a: ProfileArgs) -> CliResult {
    let [ma, mb] = a.pair[..] else {
        return Err(CliError::Usage("--pair takes exactly two modes, e.g. basic,comb".into()));
    };
    let table = read_runs_csv(&a.input.join(RUNS_FILE)).map_err(|e| CliError::Usage(e.to_string()))?;
    for m in [ma, mb] {
        if !table.modes().contains(&m) {
            return Err(CliError::Usage(format!("mode {m} not present in {}", a.input.display())));
        }
    }
    write_profile_csv(&a.out, &table, ma, mb).map_err(|e| CliError::Failed(e.to_string()))?;
    println!("wrote {ma}/{mb} profiles to {}", a.out.display());
    Ok(EXIT_OK)
}
