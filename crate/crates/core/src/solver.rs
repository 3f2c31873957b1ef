//! Path-following driver: preprocessing, the iteration loop with
//! convergence checks and stall detection, lifting and verification.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::cones::OracleWorkspace;
use crate::linalg::{dot, norm_inf};
use crate::model::{
    initial_iterate, preprocess, verify_certificate, CertificateReport, ConditionCheck, ConicModel, EmbeddedSystem,
    Preprocessed, Tolerances, Witness,
};
use crate::point::IteratePoint;
use crate::stepper::{step, StepError, StepKind, StepState, StepperConfig, StepperMode, SubTimings};

pub use crate::model::SolveStatus;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: Tolerances,
    pub stepper: StepperConfig,
    /// `None` runs until a terminal condition or a stall.
    pub max_iters: Option<usize>,
    /// Number of recent prediction-type steps inspected by the stall test.
    pub stall_window: usize,
    /// Minimum cumulative relative improvement over the window.
    pub stall_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: Tolerances::default(),
            stepper: StepperConfig::default(),
            max_iters: None,
            stall_window: 8,
            stall_threshold: 0.01,
        }
    }
}

impl SolverOptions {
    pub fn with_mode(mode: StepperMode) -> Self {
        SolverOptions { stepper: StepperConfig::with_mode(mode), ..Self::default() }
    }

    /// Multiplies every tolerance by `factor`.
    pub fn loosened(mut self, factor: f64) -> Self {
        let t = &mut self.tol;
        t.feas *= factor;
        t.rel_gap *= factor;
        t.infeas *= factor;
        t.abs_gap *= factor;
        t.illposed *= factor;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let t = &self.tol;
        if [t.feas, t.rel_gap, t.infeas, t.abs_gap, t.illposed].iter().any(|v| !(*v > 0.0)) {
            return Err("all tolerances must be positive".into());
        }
        if self.stall_window == 0 {
            return Err("stall window must be positive".into());
        }
        self.stepper.validate()
    }
}

/// Per-iteration trace entry, recorded after the step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub kind: StepKind,
    pub alpha: f64,
    pub mu_before: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub prox: f64,
    /// Worst relative residual of the optimality conditions.
    pub residual: f64,
    pub direction_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Final point in original coordinates.
    pub witness: Witness,
    pub iterations: usize,
    pub timings: SubTimings,
    pub total: Duration,
    /// `c'x/τ` and `-(b'y + h'z)/τ` of the witness (NaN when `τ ≤ 0`).
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// Verification of the witness against the original data.
    pub check: ConditionCheck,
    pub history: Vec<IterationRecord>,
    pub factorizations: usize,
    pub directions: usize,
    /// Reduced-space terminal detections whose lifted witness failed
    /// verification (iterations continued).
    pub lift_rejections: usize,
}

/// Outcome of the convergence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Continue,
    Terminal(SolveStatus),
}

/// Residual measure of the optimality conditions, without the `τ` factor.
pub fn optimality_residual(sys: &EmbeddedSystem, w: &IteratePoint) -> f64 {
    let e = sys.apply(w);
    // E ω includes -κ in the last row; the residual only uses the first three blocks
    (norm_inf(&e.x) / (1.0 + norm_inf(sys.c.as_slice())))
        .max(norm_inf(&e.y) / (1.0 + norm_inf(sys.b.as_slice())))
        .max(norm_inf(&e.z) / (1.0 + norm_inf(sys.h.as_slice())))
}

/// Checks the optimality, infeasibility and ill-posedness conditions on
/// the (reduced) embedding.
pub fn check_convergence(sys: &EmbeddedSystem, w: &IteratePoint, tol: &Tolerances) -> Convergence {
    let tau = w.tau;
    let cx = sys.primal_obj(w);
    let byhz = sys.dual_obj_neg(w);

    if tau > 0.0 && optimality_residual(sys, w) <= tol.feas * tau {
        let sz = dot(&w.s, &w.z);
        let abs_ok = sz <= tol.abs_gap;
        let rel_ok = (sz / tau).min((cx + byhz).abs()) <= tol.rel_gap * tau.max(cx.abs().min(byhz.abs()));
        if abs_ok || rel_ok {
            return Convergence::Terminal(SolveStatus::Optimal);
        }
    }

    if byhz < 0.0 {
        let mut r: Vec<f64> = if sys.n() > 0 { sys.g.tr_mul(&nalgebra::DVector::from_column_slice(&w.z)).as_slice().to_vec() } else { Vec::new() };
        if sys.p() > 0 {
            let ay = sys.a.tr_mul(&nalgebra::DVector::from_column_slice(&w.y));
            for (ri, v) in r.iter_mut().zip(ay.iter()) {
                *ri += v;
            }
        }
        if norm_inf(&r) <= -tol.infeas * byhz {
            return Convergence::Terminal(SolveStatus::PrimalInfeasible);
        }
    }

    if cx < 0.0 {
        let x = nalgebra::DVector::from_column_slice(&w.x);
        let ax = if sys.p() > 0 { (&sys.a * &x).amax() } else { 0.0 };
        let gxs = if sys.n() > 0 {
            let gx = &sys.g * &x;
            gx.iter().zip(&w.s).fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()))
        } else {
            norm_inf(&w.s)
        };
        if ax.max(gxs) <= -tol.infeas * cx {
            return Convergence::Terminal(SolveStatus::DualInfeasible);
        }
    }

    if w.mu() <= tol.illposed && tau <= tol.illposed * w.kappa.min(1.0) {
        return Convergence::Terminal(SolveStatus::IllPosed);
    }
    Convergence::Continue
}

/// Progress sample of a prediction-type step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressSample {
    pub mu: f64,
    pub residual: f64,
}

/// True when, over the last `window` samples, both `μ` and the residual
/// improved by less than `threshold` (relative, cumulative).
pub fn detect_stall(history: &[ProgressSample], window: usize, threshold: f64) -> bool {
    if window == 0 || history.len() < window {
        return false;
    }
    let first = history[history.len() - window];
    let last = history[history.len() - 1];
    let small = |old: f64, new: f64| !(new < (1.0 - threshold) * old);
    small(first.mu, last.mu) && small(first.residual, last.residual)
}

fn objectives(model: &ConicModel, w: &Witness) -> (f64, f64) {
    if !(w.tau > 0.0) {
        return (f64::NAN, f64::NAN);
    }
    let p = dot(model.c().as_slice(), &w.x) / w.tau;
    let d = -(dot(model.b().as_slice(), &w.y) + dot(model.h().as_slice(), &w.z)) / w.tau;
    (p, d)
}

/// Solves `model` from the standard initial point.
pub fn solve(model: &ConicModel, opts: &SolverOptions) -> SolveResult {
    let start = Instant::now();
    let mut timings = SubTimings::default();
    let model = Arc::new(model.clone());

    let finish = |status: SolveStatus,
                  witness: Witness,
                  iterations: usize,
                  timings: SubTimings,
                  history: Vec<IterationRecord>,
                  counts: (usize, usize, usize)| {
        let report = CertificateReport { status, witness };
        let check = verify_certificate(&model, &report, &opts.tol);
        let (primal_obj, dual_obj) = objectives(&model, &report.witness);
        SolveResult {
            status,
            witness: report.witness,
            iterations,
            timings,
            total: start.elapsed(),
            primal_obj,
            dual_obj,
            check,
            history,
            factorizations: counts.0,
            directions: counts.1,
            lift_rejections: counts.2,
        }
    };

    let t0 = Instant::now();
    let pre = match preprocess(model.clone()) {
        Preprocessed::Ready(p) => p,
        Preprocessed::Inconsistent(rep) => {
            timings.init += t0.elapsed();
            return finish(rep.status, rep.witness, 0, timings, Vec::new(), (0, 0, 0));
        }
    };
    let sys = pre.system();
    let mut oracles: Vec<OracleWorkspace> = sys.cones.iter().map(|k| OracleWorkspace::new(k.clone())).collect();
    let mut w = match initial_iterate(&pre) {
        Ok(w) => w,
        Err(_) => {
            timings.init += t0.elapsed();
            let wit = pre.lift(&sys.zero_point());
            return finish(SolveStatus::NumericalFailure, wit, 0, timings, Vec::new(), (0, 0, 0));
        }
    };
    timings.init += t0.elapsed();

    let mut state = StepState::default();
    let mut history = Vec::new();
    let mut progress = Vec::new();
    let (mut facts, mut dirs, mut rejections) = (0, 0, 0);
    let mut iter = 0;
    let status = loop {
        if opts.max_iters.is_some_and(|m| iter >= m) {
            break SolveStatus::IterationLimit;
        }
        let mu_before = w.mu();
        let out = match step(&opts.stepper, sys, &w, &mut state, &mut oracles, &mut timings) {
            Ok(o) => o,
            Err(StepError::SearchFailed) => break SolveStatus::Stalled,
            Err(_) => break SolveStatus::NumericalFailure,
        };
        iter += 1;
        facts += out.factorizations;
        dirs += out.directions;
        w = out.point;
        if !w.is_finite() {
            break SolveStatus::NumericalFailure;
        }
        let residual = optimality_residual(sys, &w) / w.tau;
        history.push(IterationRecord {
            iter,
            kind: out.kind,
            alpha: out.alpha,
            mu_before,
            mu: w.mu(),
            tau: w.tau,
            kappa: w.kappa,
            prox: out.prox,
            residual,
            direction_residual: out.direction_residual,
        });

        if let Convergence::Terminal(st) = check_convergence(sys, &w, &opts.tol) {
            let report = CertificateReport { status: st, witness: pre.lift(&w) };
            if verify_certificate(&model, &report, &opts.tol).passed() {
                break st;
            }
            rejections += 1;
        }

        if !out.kind.is_centering() {
            progress.push(ProgressSample { mu: w.mu(), residual });
            if detect_stall(&progress, opts.stall_window, opts.stall_threshold) {
                break SolveStatus::Stalled;
            }
        }
        if !(w.mu() > 0.0) {
            break SolveStatus::NumericalFailure;
        }
    };

    let wit = pre.lift(&w);
    finish(status, wit, iter, timings, history, (facts, dirs, rejections))
}

#[cfg(test)]
mod tests {
    use nalgebra::{dmatrix, dvector, DMatrix, DVector};

    use super::*;
    use crate::cones::ConeDescriptor;
    use crate::model::build_model;

    fn lp(c: DVector<f64>, g: DMatrix<f64>, h: DVector<f64>) -> ConicModel {
        let n = c.len();
        let q = h.len();
        build_model(c, DMatrix::zeros(0, n), DVector::zeros(0), g, h, vec![ConeDescriptor::nonneg(q).unwrap()]).unwrap()
    }

    #[test]
    fn tiny_lp_is_optimal_in_every_mode() {
        let m = lp(dvector![1.0], dmatrix![-1.0], dvector![-1.0]);
        for mode in StepperMode::ALL {
            let r = solve(&m, &SolverOptions::with_mode(mode));
            assert_eq!(r.status, SolveStatus::Optimal, "{mode}");
            assert!((r.primal_obj - 1.0).abs() < 1e-6, "{mode}: {}", r.primal_obj);
            assert!(r.check.passed());
            assert!(r.iterations >= 1);
            assert_eq!(r.factorizations, r.iterations);
        }
    }

    #[test]
    fn infeasible_lp_gives_farkas_ray() {
        let m = lp(dvector![0.0], dmatrix![-1.0; 1.0], dvector![-1.0, 0.0]);
        let r = solve(&m, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::PrimalInfeasible);
        assert!(r.check.passed());
    }

    #[test]
    fn unbounded_lp_gives_primal_ray() {
        let m = lp(dvector![-1.0], dmatrix![-1.0], dvector![0.0]);
        let r = solve(&m, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::DualInfeasible);
        assert!(r.check.passed());
    }

    #[test]
    fn initial_point_of_tiny_lp_continues() {
        let m = lp(dvector![1.0], dmatrix![-1.0], dvector![-1.0]);
        let Preprocessed::Ready(pre) = preprocess(Arc::new(m)) else { panic!() };
        let w = initial_iterate(&pre).unwrap();
        assert_eq!(check_convergence(pre.system(), &w, &Tolerances::default()), Convergence::Continue);
    }

    #[test]
    fn exact_optimum_is_terminal() {
        let m = lp(dvector![1.0], dmatrix![-1.0], dvector![-1.0]);
        let sys = EmbeddedSystem::from_model(&m);
        let mut w = sys.zero_point();
        w.x = vec![1.0];
        w.z = vec![1.0];
        w.s = vec![0.0];
        w.tau = 1.0;
        assert_eq!(check_convergence(&sys, &w, &Tolerances::default()), Convergence::Terminal(SolveStatus::Optimal));
    }

    #[test]
    fn vanishing_tau_kappa_is_ill_posed() {
        let m = lp(dvector![1.0], dmatrix![-1.0], dvector![-1.0]);
        let sys = EmbeddedSystem::from_model(&m);
        let mut w = sys.zero_point();
        w.s = vec![1e-15];
        w.z = vec![1e-15];
        w.tau = 1e-15;
        w.kappa = 1.0;
        assert_eq!(check_convergence(&sys, &w, &Tolerances::default()), Convergence::Terminal(SolveStatus::IllPosed));
        // τ ≤ ε_p min(1, κ) fails when κ is as small as τ
        w.kappa = 1e-15;
        assert_eq!(check_convergence(&sys, &w, &Tolerances::default()), Convergence::Continue);
    }

    #[test]
    fn stall_detection() {
        let halving: Vec<ProgressSample> =
            (0..12).map(|i| ProgressSample { mu: 0.5f64.powi(i), residual: 0.5f64.powi(i) }).collect();
        assert!(!detect_stall(&halving, 8, 0.01));
        let flat = vec![ProgressSample { mu: 1e-3, residual: 1e-2 }; 8];
        assert!(detect_stall(&flat, 8, 0.01));
        assert!(!detect_stall(&flat[..7], 8, 0.01));
    }

    #[test]
    fn tiny_lp_never_stalls_and_mu_trends_down() {
        let m = lp(dvector![1.0], dmatrix![-1.0], dvector![-1.0]);
        for mode in StepperMode::ALL {
            let r = solve(&m, &SolverOptions::with_mode(mode));
            for rec in &r.history {
                if rec.kind.is_centering() {
                    assert!((rec.mu / rec.mu_before - 1.0).abs() <= 0.5, "{mode}: {rec:?}");
                } else {
                    assert!(rec.mu < rec.mu_before, "{mode}: {rec:?}");
                }
            }
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let m = lp(dvector![1.0, 2.0], DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]), dvector![0.0, 0.0, 4.0]);
        let opts = SolverOptions { max_iters: Some(1), ..SolverOptions::default() };
        let r = solve(&m, &opts);
        assert_eq!(r.status, SolveStatus::IterationLimit);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn timings_bounded_by_total() {
        let m = lp(dvector![1.0], dmatrix![-1.0], dvector![-1.0]);
        let r = solve(&m, &SolverOptions::default());
        assert!(r.timings.total() <= r.total);
    }
}
