//! Suite runner and CSV emission.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Duration;

use conic_core::{solve, SolveStatus, SolverOptions, StepperMode};
use rayon::prelude::*;

use crate::generators::{generate, Instance, InstanceSpec};
use crate::metrics::{MetricsTable, RunRecord};
use crate::BenchError;

/// Iteration cap applied to every benchmark run.
pub const BENCH_MAX_ITERS: usize = 400;

pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUBTIMINGS_FILE: &str = "subtimings.csv";

pub const RUNS_HEADER: [&str; 10] =
    ["instance", "mode", "status", "iters", "solve_ms", "init_ms", "lhs_ms", "rhs_ms", "direc_ms", "search_ms"];
pub const AGGREGATE_HEADER: [&str; 5] = ["mode", "set", "conv", "iters_sgm", "time_sgm"];

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    pub max_iters: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { jobs: 0, max_iters: BENCH_MAX_ITERS }
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Solves one instance with one mode. A panic inside the solver is recorded
/// as a numerical failure.
pub fn run_instance(inst: &Instance, mode: StepperMode, opts: &SuiteOptions) -> RunRecord {
    let mut solver_opts = SolverOptions::with_mode(mode);
    solver_opts.max_iters = Some(opts.max_iters);
    if inst.loosen != 1.0 {
        solver_opts = solver_opts.loosened(inst.loosen);
    }
    let outcome = catch_unwind(AssertUnwindSafe(|| solve(&inst.model, &solver_opts)));
    match outcome {
        Ok(res) => RunRecord {
            instance: inst.name.clone(),
            mode,
            status: res.status,
            iters: res.iterations,
            solve_ms: ms(res.total),
            init_ms: ms(res.timings.init),
            lhs_ms: ms(res.timings.lhs),
            rhs_ms: ms(res.timings.rhs),
            direc_ms: ms(res.timings.direc),
            search_ms: ms(res.timings.search),
        },
        Err(_) => RunRecord {
            instance: inst.name.clone(),
            mode,
            status: SolveStatus::NumericalFailure,
            iters: 0,
            solve_ms: 0.0,
            init_ms: 0.0,
            lhs_ms: 0.0,
            rhs_ms: 0.0,
            direc_ms: 0.0,
            search_ms: 0.0,
        },
    }
}

/// Generates every instance and runs it under every mode, each run with a
/// fresh solver. Rows come back in (instance, mode) order regardless of the
/// worker count.
pub fn run_suite(
    specs: &[InstanceSpec],
    modes: &[StepperMode],
    opts: &SuiteOptions,
) -> Result<MetricsTable, BenchError> {
    let instances: Vec<Instance> = specs.iter().map(generate).collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, StepperMode)> =
        (0..instances.len()).flat_map(|i| modes.iter().map(move |m| (i, *m))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| BenchError::Spec(format!("cannot start workers: {e}")))?;
    let runs = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, mode)| run_instance(&instances[i], mode, opts))
            .collect::<Vec<_>>()
    });
    Ok(MetricsTable::new(runs))
}

/// Float formatting shared by all CSV files: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_runs_csv(path: &Path, table: &MetricsTable) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RUNS_HEADER)?;
    for r in &table.runs {
        w.write_record([
            r.instance.clone(),
            r.mode.to_string(),
            r.status.to_string(),
            r.iters.to_string(),
            fmt_f64(r.solve_ms),
            fmt_f64(r.init_ms),
            fmt_f64(r.lhs_ms),
            fmt_f64(r.rhs_ms),
            fmt_f64(r.direc_ms),
            fmt_f64(r.search_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(path: &Path, table: &MetricsTable) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for row in table.aggregates() {
        w.write_record([
            row.mode.to_string(),
            row.set.to_string(),
            row.conv.to_string(),
            fmt_f64(row.iters_sgm),
            fmt_f64(row.time_sgm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_subtimings_csv(path: &Path, table: &MetricsTable) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mode", "init", "lhs", "rhs", "direc", "search", "lhs_per_iter", "rhs_per_iter", "direc_per_iter",
        "search_per_iter",
    ])?;
    for row in table.subtimings() {
        let mut rec = vec![row.mode.to_string(), fmt_f64(row.init)];
        rec.extend(row.total.iter().map(|v| fmt_f64(*v)));
        rec.extend(row.per_iter.iter().map(|v| fmt_f64(*v)));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the run, aggregate and subtiming files into `dir`.
pub fn write_suite(dir: &Path, table: &MetricsTable) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    write_runs_csv(&dir.join(RUNS_FILE), table)?;
    write_aggregate_csv(&dir.join(AGGREGATE_FILE), table)?;
    write_subtimings_csv(&dir.join(SUBTIMINGS_FILE), table)?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<T, BenchError> {
    let raw = rec.get(idx).ok_or_else(|| BenchError::Parse { line, msg: format!("missing column {idx}") })?;
    raw.parse::<T>()
        .map_err(|_| BenchError::Parse { line, msg: format!("cannot parse '{raw}' in column {}", RUNS_HEADER[idx]) })
}

pub fn read_runs_csv(path: &Path) -> Result<MetricsTable, BenchError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(RUNS_HEADER.iter().copied()) {
        return Err(BenchError::Parse { line: 1, msg: format!("unexpected header {:?}", header) });
    }
    let mut runs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        runs.push(RunRecord {
            instance: parse_field(&rec, 0, line)?,
            mode: parse_field(&rec, 1, line)?,
            status: parse_field(&rec, 2, line)?,
            iters: parse_field(&rec, 3, line)?,
            solve_ms: parse_field(&rec, 4, line)?,
            init_ms: parse_field(&rec, 5, line)?,
            lhs_ms: parse_field(&rec, 6, line)?,
            rhs_ms: parse_field(&rec, 7, line)?,
            direc_ms: parse_field(&rec, 8, line)?,
            search_ms: parse_field(&rec, 9, line)?,
        });
    }
    Ok(MetricsTable::new(runs))
}

/// Writes the iteration and time profiles of a mode pair as long-format
/// rows `(metric, mode, x, y)`.
pub fn write_profile_csv(path: &Path, table: &MetricsTable, a: StepperMode, b: StepperMode) -> Result<(), BenchError> {
    let ((ia, ib), (ta, tb)) = table.pair_profiles(a, b);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "mode", "log2_ratio", "fraction"])?;
    for (metric, mode, curve) in [("iters", a, ia), ("iters", b, ib), ("time", a, ta), ("time", b, tb)] {
        for (x, y) in curve {
            w.write_record([metric.to_string(), mode.to_string(), fmt_f64(x), fmt_f64(y)])?;
        }
    }
    w.flush()?;
    Ok(())
}
