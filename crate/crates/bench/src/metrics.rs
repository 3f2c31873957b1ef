//! Shifted geometric means, performance profiles and the per-mode aggregate
//! tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use conic_core::{SolveStatus, StepperMode};

/// Shift for iteration counts.
pub const ITER_SHIFT: f64 = 1.0;
/// Shift for total solve times, in milliseconds.
pub const TIME_SHIFT_MS: f64 = 1.0;
/// Shift for init and whole-run subtimings, in milliseconds.
pub const SUBTIME_TOTAL_SHIFT_MS: f64 = 0.1;
/// Shift for per-iteration subtimings, in milliseconds.
pub const SUBTIME_ITER_SHIFT_MS: f64 = 0.01;

/// `M(v, s) = Π(v_i + s)^{1/d} - s`, evaluated in log space. Returns NaN for
/// an empty slice.
pub fn shifted_geomean(values: &[f64], shift: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mean_log = values.iter().map(|v| (v + shift).ln()).sum::<f64>() / values.len() as f64;
    mean_log.exp() - shift
}

/// Step curve `(log₂ ratio, fraction of instances with ratio ≤ that value)`,
/// one point per distinct ratio.
pub fn profile_curve(ratios: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, r) in sorted.iter().enumerate() {
        let x = r.log2();
        let y = (i + 1) as f64 / m;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = y,
            _ => out.push((x, y)),
        }
    }
    out
}

/// Performance profiles of two procedures over the same instances. Each
/// ratio is the value divided by the smaller of the two values on that
/// instance.
pub fn perf_profile(a: &[f64], b: &[f64]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    assert_eq!(a.len(), b.len(), "profile inputs must cover the same instances");
    let best: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.min(*y)).collect();
    let ra: Vec<f64> = a.iter().zip(&best).map(|(x, m)| x / m).collect();
    let rb: Vec<f64> = b.iter().zip(&best).map(|(x, m)| x / m).collect();
    (profile_curve(&ra), profile_curve(&rb))
}

/// One solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub instance: String,
    pub mode: StepperMode,
    pub status: SolveStatus,
    pub iters: usize,
    pub solve_ms: f64,
    pub init_ms: f64,
    pub lhs_ms: f64,
    pub rhs_ms: f64,
    pub direc_ms: f64,
    pub search_ms: f64,
}

impl RunRecord {
    /// Certificates count as converged.
    pub fn converged(&self) -> bool {
        self.status.is_certificate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggregateSet {
    Every,
    This,
    All,
}

impl AggregateSet {
    pub const ALL: [AggregateSet; 3] = [AggregateSet::Every, AggregateSet::This, AggregateSet::All];

    pub fn as_str(self) -> &'static str {
        match self {
            AggregateSet::Every => "every",
            AggregateSet::This => "this",
            AggregateSet::All => "all",
        }
    }
}

impl fmt::Display for AggregateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregateSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AggregateSet::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown aggregation set '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub mode: StepperMode,
    pub set: AggregateSet,
    /// Converged instances of this mode inside the set.
    pub conv: usize,
    pub iters_sgm: f64,
    pub time_sgm: f64,
}

/// Shifted geometric means of the subtimings over the `every` set.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtimingRow {
    pub mode: StepperMode,
    pub init: f64,
    /// Whole-run totals of lhs, rhs, direc, search.
    pub total: [f64; 4],
    /// Per-iteration means of lhs, rhs, direc, search.
    pub per_iter: [f64; 4],
}

/// Per-run records plus the derived aggregates.
#[derive(Debug, Clone, Default)]
pub struct MetricsTable {
    pub runs: Vec<RunRecord>,
}

impl MetricsTable {
    pub fn new(runs: Vec<RunRecord>) -> Self {
        MetricsTable { runs }
    }

    /// Modes present, in canonical order.
    pub fn modes(&self) -> Vec<StepperMode> {
        StepperMode::ALL.into_iter().filter(|m| self.runs.iter().any(|r| r.mode == *m)).collect()
    }

    /// Instance names in order of first appearance.
    pub fn instances(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.runs {
            if seen.insert(r.instance.clone()) {
                out.push(r.instance.clone());
            }
        }
        out
    }

    pub fn run(&self, instance: &str, mode: StepperMode) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.instance == instance && r.mode == mode)
    }

    /// Instances on which every present mode converged.
    pub fn every_set(&self) -> Vec<String> {
        let modes = self.modes();
        self.instances()
            .into_iter()
            .filter(|i| modes.iter().all(|m| self.run(i, *m).is_some_and(RunRecord::converged)))
            .collect()
    }

    /// Instances on which `mode` converged.
    pub fn this_set(&self, mode: StepperMode) -> Vec<String> {
        self.instances()
            .into_iter()
            .filter(|i| self.run(i, mode).is_some_and(RunRecord::converged))
            .collect()
    }

    /// `(iterations, solve ms)` of `mode` on every instance on which some
    /// mode converged; failures take twice the largest converged value of
    /// that instance.
    pub fn all_values(&self, mode: StepperMode) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for inst in self.instances() {
            let converged: Vec<&RunRecord> =
                self.runs.iter().filter(|r| r.instance == inst && r.converged()).collect();
            if converged.is_empty() {
                continue;
            }
            match self.run(&inst, mode).filter(|r| r.converged()) {
                Some(r) => out.push((r.iters as f64, r.solve_ms)),
                None => {
                    let max_it = converged.iter().map(|r| r.iters as f64).fold(0.0, f64::max);
                    let max_ms = converged.iter().map(|r| r.solve_ms).fold(0.0, f64::max);
                    out.push((2.0 * max_it, 2.0 * max_ms));
                }
            }
        }
        out
    }

    fn values_on(&self, mode: StepperMode, set: &[String]) -> Vec<(f64, f64)> {
        set.iter()
            .filter_map(|i| self.run(i, mode))
            .map(|r| (r.iters as f64, r.solve_ms))
            .collect()
    }

    pub fn aggregate(&self, mode: StepperMode, set: AggregateSet) -> AggregateRow {
        let this = self.this_set(mode);
        let (values, conv) = match set {
            AggregateSet::Every => {
                let every = self.every_set();
                (self.values_on(mode, &every), every.len())
            }
            AggregateSet::This => (self.values_on(mode, &this), this.len()),
            AggregateSet::All => (self.all_values(mode), this.len()),
        };
        let iters: Vec<f64> = values.iter().map(|v| v.0).collect();
        let times: Vec<f64> = values.iter().map(|v| v.1).collect();
        AggregateRow {
            mode,
            set,
            conv,
            iters_sgm: shifted_geomean(&iters, ITER_SHIFT),
            time_sgm: shifted_geomean(&times, TIME_SHIFT_MS),
        }
    }

    /// Rows ordered by mode, then by set.
    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut out = Vec::new();
        for mode in self.modes() {
            for set in AggregateSet::ALL {
                out.push(self.aggregate(mode, set));
            }
        }
        out
    }

    pub fn subtimings(&self) -> Vec<SubtimingRow> {
        let every = self.every_set();
        self.modes()
            .into_iter()
            .map(|mode| {
                let runs: Vec<&RunRecord> = every.iter().filter_map(|i| self.run(i, mode)).collect();
                let col = |f: &dyn Fn(&RunRecord) -> f64, shift: f64| {
                    shifted_geomean(&runs.iter().map(|r| f(r)).collect::<Vec<_>>(), shift)
                };
                let per = |r: &RunRecord, v: f64| v / r.iters.max(1) as f64;
                SubtimingRow {
                    mode,
                    init: col(&|r| r.init_ms, SUBTIME_TOTAL_SHIFT_MS),
                    total: [
                        col(&|r| r.lhs_ms, SUBTIME_TOTAL_SHIFT_MS),
                        col(&|r| r.rhs_ms, SUBTIME_TOTAL_SHIFT_MS),
                        col(&|r| r.direc_ms, SUBTIME_TOTAL_SHIFT_MS),
                        col(&|r| r.search_ms, SUBTIME_TOTAL_SHIFT_MS),
                    ],
                    per_iter: [
                        col(&|r| per(r, r.lhs_ms), SUBTIME_ITER_SHIFT_MS),
                        col(&|r| per(r, r.rhs_ms), SUBTIME_ITER_SHIFT_MS),
                        col(&|r| per(r, r.direc_ms), SUBTIME_ITER_SHIFT_MS),
                        col(&|r| per(r, r.search_ms), SUBTIME_ITER_SHIFT_MS),
                    ],
                }
            })
            .collect()
    }

    /// Iteration and time profiles for a pair of modes over the instances
    /// both converged on. Returns `((iters_a, iters_b), (time_a, time_b))`.
    #[allow(clippy::type_complexity)]
    pub fn pair_profiles(
        &self,
        a: StepperMode,
        b: StepperMode,
    ) -> ((Vec<(f64, f64)>, Vec<(f64, f64)>), (Vec<(f64, f64)>, Vec<(f64, f64)>)) {
        let mut both: BTreeMap<String, (&RunRecord, &RunRecord)> = BTreeMap::new();
        for inst in self.instances() {
            if let (Some(ra), Some(rb)) = (self.run(&inst, a), self.run(&inst, b)) {
                if ra.converged() && rb.converged() {
                    both.insert(inst, (ra, rb));
                }
            }
        }
        let ia: Vec<f64> = both.values().map(|p| p.0.iters as f64).collect();
        let ib: Vec<f64> = both.values().map(|p| p.1.iters as f64).collect();
        // guard against zero times on very fast runs
        let ta: Vec<f64> = both.values().map(|p| p.0.solve_ms.max(1e-9)).collect();
        let tb: Vec<f64> = both.values().map(|p| p.1.solve_ms.max(1e-9)).collect();
        (perf_profile(&ia, &ib), perf_profile(&ta, &tb))
    }
}
