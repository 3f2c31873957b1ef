//! Proximity measures, the candidate prefilter, right-hand sides of the
//! four directions, backtracking searches and the five stepping procedures.

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cones::{ConeError, OracleWorkspace};
use crate::direction::{factorize, solve_direction, Direction, DirectionError, DirectionRhs, DirectionTag, KktFactorization};
use crate::linalg::{dot, norm_inf};
use crate::model::EmbeddedSystem;
use crate::point::IteratePoint;

/// Relative slack on the two log-homogeneity identities checked before
/// computing a proximity value.
pub const LH_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepperMode {
    Basic,
    Prox,
    Toa,
    Curve,
    Comb,
}

impl StepperMode {
    pub const ALL: [StepperMode; 5] =
        [StepperMode::Basic, StepperMode::Prox, StepperMode::Toa, StepperMode::Curve, StepperMode::Comb];

    pub fn as_str(self) -> &'static str {
        match self {
            StepperMode::Basic => "basic",
            StepperMode::Prox => "prox",
            StepperMode::Toa => "toa",
            StepperMode::Curve => "curve",
            StepperMode::Comb => "comb",
        }
    }

    /// Aggregate proximity used for the predict/center decision and the
    /// searches.
    pub fn aggregate(self) -> ProxAggregate {
        match self {
            StepperMode::Basic => ProxAggregate::L2,
            _ => ProxAggregate::Linf,
        }
    }
}

impl fmt::Display for StepperMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StepperMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StepperMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown stepper mode `{s}` (expected basic, prox, toa, curve or comb)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    /// `η`, proximity below which a prediction step is taken.
    pub eta: f64,
    /// `N`, forced prediction after this many consecutive centering steps.
    pub max_centering: usize,
    /// `β1`, search bound for the basic mode (ℓ2 aggregate).
    pub beta1: f64,
    /// `β2`, search bound for the other modes (ℓ∞ aggregate).
    pub beta2: f64,
    /// Decreasing step values tried by every search.
    pub schedule: Vec<f64>,
    pub mode: StepperMode,
}

/// `len` values from `first` down to `last`, uniform in `log α`.
pub fn log_uniform_schedule(first: f64, last: f64, len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![first];
    }
    let (a, b) = (first.ln(), last.ln());
    (0..len)
        .map(|l| {
            if l == 0 {
                first
            } else if l == len - 1 {
                last
            } else {
                (a + (b - a) * l as f64 / (len - 1) as f64).exp()
            }
        })
        .collect()
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            eta: 0.0332,
            max_centering: 4,
            beta1: 0.2844,
            beta2: 0.99,
            schedule: log_uniform_schedule(0.9999, 0.0005, 18),
            mode: StepperMode::Comb,
        }
    }
}

impl StepperConfig {
    pub fn with_mode(mode: StepperMode) -> Self {
        StepperConfig { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.eta && self.eta < self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0) {
            return Err(format!(
                "need 0 < η < β1 < β2 < 1, got η = {}, β1 = {}, β2 = {}",
                self.eta, self.beta1, self.beta2
            ));
        }
        if self.schedule.is_empty() {
            return Err("empty step schedule".into());
        }
        if self.schedule.iter().any(|a| !(*a > 0.0 && *a < 1.0)) || self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err("step schedule must be strictly decreasing within (0, 1)".into());
        }
        Ok(())
    }

    /// Bound of the search proximity condition.
    pub fn search_bound(&self) -> f64 {
        match self.mode {
            StepperMode::Basic => self.beta1,
            _ => self.beta2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxAggregate {
    L2,
    Linf,
}

/// `‖(π_k)_k‖₂`
pub fn prox_l2(pis: &[f64]) -> f64 {
    if pis.iter().any(|p| p.is_infinite()) {
        return f64::INFINITY;
    }
    pis.iter().map(|p| p * p).sum::<f64>().sqrt()
}

/// `max_k π_k`
pub fn prox_linf(pis: &[f64]) -> f64 {
    pis.iter().fold(0.0, |m: f64, p| if p.is_nan() { f64::INFINITY } else { m.max(*p) })
}

pub fn aggregate(pis: &[f64], agg: ProxAggregate) -> f64 {
    match agg {
        ProxAggregate::L2 => prox_l2(pis),
        ProxAggregate::Linf => prox_linf(pis),
    }
}

/// `ρ_k = ν_k^{-1/2} |s̄'z̄/μ - ν_k|`, a lower bound on `π_k`.
pub fn rho_k(sbar: &[f64], zbar: &[f64], mu: f64, nu: f64) -> f64 {
    (dot(sbar, zbar) / mu - nu).abs() / nu.sqrt()
}

/// `π_k = ‖H^{-1/2}(z̄/μ + g)‖` at `s̄`, or `+∞` if `μ ≤ 0` or `s̄` is not
/// interior.
pub fn prox_k(ws: &mut OracleWorkspace, sbar: &[f64], zbar: &[f64], mu: f64) -> f64 {
    if !(mu > 0.0) || !ws.is_feasible(sbar) {
        return f64::INFINITY;
    }
    let r: Vec<f64> = match ws.gradient(sbar) {
        Ok(g) => zbar.iter().zip(g).map(|(z, g)| z / mu + g).collect(),
        Err(_) => return f64::INFINITY,
    };
    let mut hr = vec![0.0; r.len()];
    if ws.hessian_solve(sbar, &r, &mut hr).is_err() {
        return f64::INFINITY;
    }
    let v = dot(&r, &hr);
    if v.is_finite() {
        v.max(0.0).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Proximity of the `(τ, κ)` pair under `-log τ`: `|τκ/μ - 1|`.
pub fn prox_tau_kappa(tau: f64, kappa: f64, mu: f64) -> f64 {
    if !(mu > 0.0 && tau > 0.0) {
        return f64::INFINITY;
    }
    (tau * kappa / mu - 1.0).abs()
}

/// All proximity values `(π_1, …, π_K, π_τκ)` of `w`.
pub fn proximities(w: &IteratePoint, oracles: &mut [OracleWorkspace]) -> Vec<f64> {
    let mu = w.mu();
    let mut out: Vec<f64> = oracles.iter_mut().enumerate().map(|(k, ws)| prox_k(ws, w.sbar(k), w.zbar(k), mu)).collect();
    out.push(prox_tau_kappa(w.tau, w.kappa, mu));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrefilterStage {
    /// `s̄_k'z̄_k > 0`
    Complementarity = 1,
    /// `ρ_k < β`
    Rho = 2,
    /// primal (and, when implemented, dual) feasibility
    Feasibility = 3,
    /// `g'H⁻¹g = -s̄'g = ν` up to [`LH_SLACK`]
    LogHomogeneity = 4,
    /// `π_k` against `β`
    Proximity = 5,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrefilterOutcome {
    Rejected(PrefilterStage),
    /// Aggregate proximity of the accepted point.
    Accepted(f64),
}

impl PrefilterOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, PrefilterOutcome::Accepted(_))
    }
}

/// `g'H⁻¹g = ν` within [`LH_SLACK`]. Near the boundary the scalar form loses
/// about `ε‖g‖²‖H⁻¹‖` to rounding, so its vector form `H⁻¹g = -s` is
/// accepted as well, at the same relative slack.
pub fn inverse_identity_holds(s: &[f64], g: &[f64], hg: &[f64], nu: f64) -> bool {
    let ghg = dot(g, hg);
    if (ghg - nu).abs() <= LH_SLACK * nu {
        return true;
    }
    let dev = hg.iter().zip(s).map(|(v, x)| (v + x).abs()).fold(0.0, f64::max);
    ghg.is_finite() && dev <= LH_SLACK * norm_inf(s)
}

/// Checks the increasingly expensive necessary conditions for
/// `aggregate(π) ≤ β` in order, stopping at the first failure.
pub fn prox_prefilter(
    w: &IteratePoint,
    oracles: &mut [OracleWorkspace],
    beta: f64,
    agg: ProxAggregate,
) -> PrefilterOutcome {
    use PrefilterOutcome::*;
    let k_count = oracles.len();
    let lay = w.layout().clone();

    for k in 0..k_count {
        if !(dot(w.sbar(k), w.zbar(k)) > 0.0) {
            return Rejected(PrefilterStage::Complementarity);
        }
    }
    if !(w.tau * w.kappa > 0.0) {
        return Rejected(PrefilterStage::Complementarity);
    }
    let mu = w.mu();
    if !(mu > 0.0 && mu.is_finite()) {
        return Rejected(PrefilterStage::Complementarity);
    }

    for k in 0..k_count {
        if !(rho_k(w.sbar(k), w.zbar(k), mu, lay.nu[k]) < beta) {
            return Rejected(PrefilterStage::Rho);
        }
    }
    let pi_tk = prox_tau_kappa(w.tau, w.kappa, mu);
    if !(pi_tk < beta) {
        return Rejected(PrefilterStage::Rho);
    }

    if !(w.tau > 0.0 && w.kappa > 0.0) {
        return Rejected(PrefilterStage::Feasibility);
    }
    for (k, ws) in oracles.iter_mut().enumerate() {
        if !ws.is_feasible(w.sbar(k)) || ws.dual_feasible(w.zbar(k)) == Some(false) {
            return Rejected(PrefilterStage::Feasibility);
        }
    }

    let mut grads = Vec::with_capacity(k_count);
    for (k, ws) in oracles.iter_mut().enumerate() {
        let sb = w.sbar(k);
        let nu = lay.nu[k];
        let g = match ws.gradient(sb) {
            Ok(g) => g.to_vec(),
            Err(_) => return Rejected(PrefilterStage::LogHomogeneity),
        };
        let mut hg = vec![0.0; g.len()];
        if ws.hessian_solve(sb, &g, &mut hg).is_err() {
            return Rejected(PrefilterStage::LogHomogeneity);
        }
        let sg = -dot(sb, &g);
        if !((sg - nu).abs() <= LH_SLACK * nu && inverse_identity_holds(sb, &g, &hg, nu)) {
            return Rejected(PrefilterStage::LogHomogeneity);
        }
        grads.push((g, hg));
    }

    // π_k² = z̄'H⁻¹z̄/μ² + 2 z̄'H⁻¹g/μ + g'H⁻¹g; reuse H⁻¹g and solve once more for z̄
    let mut pis = Vec::with_capacity(k_count + 1);
    let mut sumsq = 0.0;
    for (k, ws) in oracles.iter_mut().enumerate() {
        let (sb, zb) = (w.sbar(k), w.zbar(k));
        let g = &grads[k].0;
        let r: Vec<f64> = zb.iter().zip(g).map(|(z, g)| z / mu + g).collect();
        let mut hr = vec![0.0; r.len()];
        if ws.hessian_solve(sb, &r, &mut hr).is_err() {
            return Rejected(PrefilterStage::Proximity);
        }
        let pi = dot(&r, &hr).max(0.0).sqrt();
        if !(pi < beta) {
            return Rejected(PrefilterStage::Proximity);
        }
        sumsq += pi * pi;
        if agg == ProxAggregate::L2 && !(sumsq <= beta * beta) {
            return Rejected(PrefilterStage::Proximity);
        }
        pis.push(pi);
    }
    pis.push(pi_tk);
    let value = aggregate(&pis, agg);
    if value <= beta {
        Accepted(value)
    } else {
        Rejected(PrefilterStage::Proximity)
    }
}

/// Centering: `r_E = 0`, `r_k = -z̄_k - μ g_k(s̄_k)`.
pub fn rhs_centering(
    sys: &EmbeddedSystem,
    w: &IteratePoint,
    mu: f64,
    oracles: &mut [OracleWorkspace],
) -> Result<DirectionRhs, ConeError> {
    let mut rhs = DirectionRhs::zeros(sys, DirectionTag::Centering);
    for (k, ws) in oracles.iter_mut().enumerate() {
        let g = ws.gradient(w.sbar(k))?;
        rhs.cones[k] = w.zbar(k).iter().zip(g).map(|(z, g)| -z - mu * g).collect();
    }
    rhs.kappa = -w.kappa + mu / w.tau;
    Ok(rhs)
}

/// Prediction: `r_E = -Eω`, `r_k = -z̄_k`.
pub fn rhs_prediction(sys: &EmbeddedSystem, w: &IteratePoint) -> DirectionRhs {
    let mut rhs = DirectionRhs::zeros(sys, DirectionTag::Prediction);
    rhs.e = sys.apply(w).scaled(-1.0);
    for k in 0..rhs.cones.len() {
        rhs.cones[k] = w.zbar(k).iter().map(|z| -z).collect();
    }
    rhs.kappa = -w.kappa;
    rhs
}

/// Centering adjustment: `r_E = 0`, `r_k = μ T_k(s̄_k, δ^c_{s̄,k})`.
pub fn rhs_centering_toa(
    sys: &EmbeddedSystem,
    w: &IteratePoint,
    mu: f64,
    dc: &IteratePoint,
    oracles: &mut [OracleWorkspace],
) -> Result<DirectionRhs, ConeError> {
    let mut rhs = DirectionRhs::zeros(sys, DirectionTag::CenteringToa);
    for (k, ws) in oracles.iter_mut().enumerate() {
        let mut t = vec![0.0; ws.dim()];
        ws.too(w.sbar(k), dc.sbar(k), &mut t)?;
        rhs.cones[k] = t.into_iter().map(|v| mu * v).collect();
    }
    rhs.kappa = mu * dc.tau * dc.tau / (w.tau * w.tau * w.tau);
    Ok(rhs)
}

/// Prediction adjustment: `r_E = 0`, `r_k = μ H_k δ^p_{s̄,k} + μ T_k(s̄_k, δ^p_{s̄,k})`.
pub fn rhs_prediction_toa(
    sys: &EmbeddedSystem,
    w: &IteratePoint,
    mu: f64,
    dp: &IteratePoint,
    oracles: &mut [OracleWorkspace],
) -> Result<DirectionRhs, ConeError> {
    let mut rhs = DirectionRhs::zeros(sys, DirectionTag::PredictionToa);
    for (k, ws) in oracles.iter_mut().enumerate() {
        let (sb, ds) = (w.sbar(k), dp.sbar(k));
        let mut t = vec![0.0; ws.dim()];
        let mut h = vec![0.0; ws.dim()];
        ws.too(sb, ds, &mut t)?;
        ws.hessian_apply(sb, ds, &mut h)?;
        rhs.cones[k] = h.iter().zip(&t).map(|(a, b)| mu * (a + b)).collect();
    }
    let tau = w.tau;
    rhs.kappa = mu * dp.tau / (tau * tau) + mu * dp.tau * dp.tau / (tau * tau * tau);
    Ok(rhs)
}

/// Accepted candidate of a backtracking search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub alpha: f64,
    pub point: IteratePoint,
    /// Aggregate proximity at `point`.
    pub prox: f64,
    /// Number of candidates examined, including the accepted one.
    pub tried: usize,
}

/// Tries `trajectory(α)` for every `α` of the schedule in order and returns
/// the first candidate passing the prefilter, or `None`.
pub fn backtrack(
    trajectory: impl Fn(f64) -> IteratePoint,
    schedule: &[f64],
    beta: f64,
    agg: ProxAggregate,
    oracles: &mut [OracleWorkspace],
) -> Option<SearchOutcome> {
    for (i, &alpha) in schedule.iter().enumerate() {
        let cand = trajectory(alpha);
        if let PrefilterOutcome::Accepted(prox) = prox_prefilter(&cand, oracles, beta, agg) {
            return Some(SearchOutcome { alpha, point: cand, prox, tried: i + 1 });
        }
    }
    None
}

/// Search on `ω + α δ`.
pub fn backtrack_line(
    w: &IteratePoint,
    d: &IteratePoint,
    schedule: &[f64],
    beta: f64,
    agg: ProxAggregate,
    oracles: &mut [OracleWorkspace],
) -> Option<SearchOutcome> {
    backtrack(|a| w.combine(&[(a, d)]), schedule, beta, agg, oracles)
}

/// Search on `ω + α δ^u + α² δ^t`.
pub fn backtrack_curve(
    w: &IteratePoint,
    du: &IteratePoint,
    dt: &IteratePoint,
    schedule: &[f64],
    beta: f64,
    agg: ProxAggregate,
    oracles: &mut [OracleWorkspace],
) -> Option<SearchOutcome> {
    backtrack(|a| w.combine(&[(a, du), (a * a, dt)]), schedule, beta, agg, oracles)
}

/// `ω + α(δ^p + αδ^{pt}) + (1-α)(δ^c + (1-α)δ^{ct})`
pub fn comb_point(
    w: &IteratePoint,
    dp: &IteratePoint,
    dpt: &IteratePoint,
    dc: &IteratePoint,
    dct: &IteratePoint,
    alpha: f64,
) -> IteratePoint {
    let b = 1.0 - alpha;
    w.combine(&[(alpha, dp), (alpha * alpha, dpt), (b, dc), (b * b, dct)])
}

/// Wall time per category.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SubTimings {
    pub init: Duration,
    pub lhs: Duration,
    pub rhs: Duration,
    pub direc: Duration,
    pub search: Duration,
}

impl SubTimings {
    pub fn total(&self) -> Duration {
        self.init + self.lhs + self.rhs + self.direc + self.search
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("no step value in the schedule satisfies the proximity condition")]
    SearchFailed,
    #[error(transparent)]
    Direction(#[from] DirectionError),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Prediction,
    Centering,
    /// Combined prediction/centering step of the comb mode.
    Combined,
    /// Centering curve step taken after the combined search failed.
    CombFallback,
}

impl StepKind {
    pub fn is_centering(self) -> bool {
        matches!(self, StepKind::Centering | StepKind::CombFallback)
    }
}

/// Counter state carried between steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepState {
    /// Consecutive centering steps immediately before this one.
    pub centering_run: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub point: IteratePoint,
    pub kind: StepKind,
    pub alpha: f64,
    /// Aggregate proximity of `point` under the mode's measure.
    pub prox: f64,
    /// Proximity of the previous iterate used for the predict/center choice.
    pub prox_before: f64,
    pub factorizations: usize,
    pub directions: usize,
    /// Largest relative residual among the directions solved.
    pub direction_residual: f64,
    /// For the toa mode: step of the first (unadjusted) search.
    pub alpha_unadjusted: Option<f64>,
}

struct Ctx<'a> {
    sys: &'a EmbeddedSystem,
    w: &'a IteratePoint,
    mu: f64,
    fact: KktFactorization,
    timings: &'a mut SubTimings,
    directions: usize,
    residual: f64,
}

impl Ctx<'_> {
    fn solve(&mut self, rhs: &DirectionRhs) -> Result<Direction, StepError> {
        let t = Instant::now();
        let d = solve_direction(&self.fact, self.sys, rhs);
        self.timings.direc += t.elapsed();
        let d = d?;
        self.directions += 1;
        self.residual = self.residual.max(d.residual);
        Ok(d)
    }

    fn centering(&mut self, oracles: &mut [OracleWorkspace]) -> Result<Direction, StepError> {
        let t = Instant::now();
        let rhs = rhs_centering(self.sys, self.w, self.mu, oracles);
        self.timings.rhs += t.elapsed();
        self.solve(&rhs?)
    }

    fn prediction(&mut self) -> Result<Direction, StepError> {
        let t = Instant::now();
        let rhs = rhs_prediction(self.sys, self.w);
        self.timings.rhs += t.elapsed();
        self.solve(&rhs)
    }

    fn centering_toa(&mut self, dc: &Direction, oracles: &mut [OracleWorkspace]) -> Result<Direction, StepError> {
        let t = Instant::now();
        let rhs = rhs_centering_toa(self.sys, self.w, self.mu, &dc.delta, oracles);
        self.timings.rhs += t.elapsed();
        self.solve(&rhs?)
    }

    fn prediction_toa(&mut self, dp: &Direction, oracles: &mut [OracleWorkspace]) -> Result<Direction, StepError> {
        let t = Instant::now();
        let rhs = rhs_prediction_toa(self.sys, self.w, self.mu, &dp.delta, oracles);
        self.timings.rhs += t.elapsed();
        self.solve(&rhs?)
    }
}

/// One iteration of the configured stepping procedure from the interior
/// point `w`. `oracles[k]` is the workspace of cone `k`.
pub fn step(
    cfg: &StepperConfig,
    sys: &EmbeddedSystem,
    w: &IteratePoint,
    state: &mut StepState,
    oracles: &mut [OracleWorkspace],
    timings: &mut SubTimings,
) -> Result<StepOutcome, StepError> {
    let mu = w.mu();
    let agg = cfg.mode.aggregate();
    let beta = cfg.search_bound();

    let t = Instant::now();
    let prox_before = aggregate(&proximities(w, oracles), agg);
    timings.search += t.elapsed();

    let t = Instant::now();
    let fact = factorize(sys, w, mu, oracles);
    timings.lhs += t.elapsed();
    let mut cx = Ctx { sys, w, mu, fact: fact?, timings, directions: 0, residual: 0.0 };

    let predict = prox_before <= cfg.eta || state.centering_run >= cfg.max_centering;
    let search = |cx: &mut Ctx, f: &mut dyn FnMut(&mut [OracleWorkspace]) -> Option<SearchOutcome>, o: &mut [OracleWorkspace]| {
        let t = Instant::now();
        let r = f(o);
        cx.timings.search += t.elapsed();
        r
    };
    let sched = &cfg.schedule;

    let (out, kind, alpha_u) = match cfg.mode {
        StepperMode::Basic | StepperMode::Prox => {
            let d = if predict { cx.prediction()? } else { cx.centering(oracles)? };
            let r = search(&mut cx, &mut |o| backtrack_line(w, &d.delta, sched, beta, agg, o), oracles);
            (r, if predict { StepKind::Prediction } else { StepKind::Centering }, None)
        }
        StepperMode::Toa => {
            let (du, dt) = if predict {
                let dp = cx.prediction()?;
                let dpt = cx.prediction_toa(&dp, oracles)?;
                (dp, dpt)
            } else {
                let dc = cx.centering(oracles)?;
                let dct = cx.centering_toa(&dc, oracles)?;
                (dc, dct)
            };
            let kind = if predict { StepKind::Prediction } else { StepKind::Centering };
            let first = search(&mut cx, &mut |o| backtrack_line(w, &du.delta, sched, beta, agg, o), oracles);
            match first {
                None => (None, kind, None),
                Some(f) => {
                    let d = du.delta.combine(&[(f.alpha, &dt.delta)]);
                    let r = search(&mut cx, &mut |o| backtrack_line(w, &d, sched, beta, agg, o), oracles);
                    (r, kind, Some(f.alpha))
                }
            }
        }
        StepperMode::Curve => {
            let (du, dt) = if predict {
                let dp = cx.prediction()?;
                let dpt = cx.prediction_toa(&dp, oracles)?;
                (dp, dpt)
            } else {
                let dc = cx.centering(oracles)?;
                let dct = cx.centering_toa(&dc, oracles)?;
                (dc, dct)
            };
            let r = search(&mut cx, &mut |o| backtrack_curve(w, &du.delta, &dt.delta, sched, beta, agg, o), oracles);
            (r, if predict { StepKind::Prediction } else { StepKind::Centering }, None)
        }
        StepperMode::Comb => {
            let dc = cx.centering(oracles)?;
            let dct = cx.centering_toa(&dc, oracles)?;
            let dp = cx.prediction()?;
            let dpt = cx.prediction_toa(&dp, oracles)?;
            let r = search(
                &mut cx,
                &mut |o| {
                    backtrack(
                        |a| comb_point(w, &dp.delta, &dpt.delta, &dc.delta, &dct.delta, a),
                        sched,
                        beta,
                        agg,
                        o,
                    )
                },
                oracles,
            );
            match r {
                Some(r) => (Some(r), StepKind::Combined, None),
                None => {
                    let r = search(&mut cx, &mut |o| backtrack_curve(w, &dc.delta, &dct.delta, sched, beta, agg, o), oracles);
                    (r, StepKind::CombFallback, None)
                }
            }
        }
    };

    let found = out.ok_or(StepError::SearchFailed)?;
    if cfg.mode != StepperMode::Comb {
        state.centering_run = if predict { 0 } else { state.centering_run + 1 };
    }
    Ok(StepOutcome {
        point: found.point,
        kind,
        alpha: found.alpha,
        prox: found.prox,
        prox_before,
        factorizations: 1,
        directions: cx.directions,
        direction_residual: cx.residual,
        alpha_unadjusted: alpha_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::ConeDescriptor;
    use crate::point::ConeLayout;
    use std::sync::Arc;

    fn nonneg_point(s: &[f64], z: &[f64], tau: f64, kappa: f64) -> (IteratePoint, Vec<OracleWorkspace>) {
        let cone = ConeDescriptor::nonneg(s.len()).unwrap();
        let lay = Arc::new(ConeLayout::new(std::slice::from_ref(&cone)));
        let mut w = IteratePoint::zeros(0, 0, lay);
        w.s = s.to_vec();
        w.z = z.to_vec();
        w.tau = tau;
        w.kappa = kappa;
        (w, vec![OracleWorkspace::new(cone)])
    }

    #[test]
    fn schedule_endpoints_and_monotonicity() {
        let cfg = StepperConfig::default();
        assert_eq!(cfg.schedule.len(), 18);
        assert_eq!(cfg.schedule[0], 0.9999);
        assert_eq!(cfg.schedule[17], 0.0005);
        cfg.validate().unwrap();
        let ratios: Vec<f64> = cfg.schedule.windows(2).map(|w| w[1] / w[0]).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = StepperConfig { beta1: 0.995, ..StepperConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = StepperConfig { schedule: vec![0.5, 0.6], ..StepperConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mode_names_roundtrip() {
        for m in StepperMode::ALL {
            assert_eq!(m.as_str().parse::<StepperMode>().unwrap(), m);
        }
        assert!("fast".parse::<StepperMode>().is_err());
    }

    #[test]
    fn prox_k_examples() {
        let mut ws = OracleWorkspace::new(ConeDescriptor::nonneg(1).unwrap());
        assert_eq!(prox_k(&mut ws, &[2.0], &[0.5], 1.0), 0.0);
        assert!((prox_k(&mut ws, &[1.0], &[2.0], 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(prox_k(&mut ws, &[-1.0], &[2.0], 1.0), f64::INFINITY);
        assert_eq!(prox_k(&mut ws, &[1.0], &[2.0], 0.0), f64::INFINITY);
    }

    #[test]
    fn aggregates() {
        assert!((prox_l2(&[0.3, 0.4]) - 0.5).abs() < 1e-15);
        assert_eq!(prox_linf(&[0.3, 0.4]), 0.4);
        assert_eq!(prox_l2(&[0.7]), 0.7);
        assert_eq!(prox_linf(&[0.7]), 0.7);
        assert_eq!(prox_l2(&[0.1, f64::INFINITY]), f64::INFINITY);
        assert_eq!(prox_linf(&[0.1, f64::INFINITY]), f64::INFINITY);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho_k(&[1.0, 1.0], &[1.0, 1.0], 1.0, 2.0), 0.0);
        assert!((rho_k(&[1.0], &[2.0], 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(rho_k(&[1.0, 1.0], &[2.0, 0.0], 1.0, 2.0), 0.0);
        let mut ws = OracleWorkspace::new(ConeDescriptor::nonneg(2).unwrap());
        assert!((prox_k(&mut ws, &[1.0, 1.0], &[2.0, 0.0], 1.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn prefilter_stages() {
        // s̄'z̄ <= 0
        let (w, mut ws) = nonneg_point(&[1.0, 1.0], &[-1.0, 0.5], 1.0, 1.0);
        assert_eq!(prox_prefilter(&w, &mut ws, 0.99, ProxAggregate::Linf), PrefilterOutcome::Rejected(PrefilterStage::Complementarity));
        // no oracle was touched
        assert_eq!(ws[0].feasibility(), crate::cones::Feasibility::Unknown);

        // ρ = 1.5 / sqrt(2) · ... : scale z̄ so that s̄'z̄/μ is far from ν
        let (w, mut ws) = nonneg_point(&[1.0, 1.0], &[10.0, 10.0], 1.0, 0.01);
        match prox_prefilter(&w, &mut ws, 0.99, ProxAggregate::Linf) {
            PrefilterOutcome::Rejected(PrefilterStage::Rho) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(ws[0].feasibility(), crate::cones::Feasibility::Unknown);

        let (w, mut ws) = nonneg_point(&[1.0, 2.0], &[2.0, 1.0], 1.0, 2.0);
        assert_eq!(prox_prefilter(&w, &mut ws, 0.99, ProxAggregate::Linf), PrefilterOutcome::Accepted(0.0));
    }

    #[test]
    fn prefilter_feasibility_stage() {
        // both entries negative: s̄'z̄ > 0 but s̄ infeasible
        let (w, mut ws) = nonneg_point(&[-1.0, -1.0], &[-1.0, -1.0], 1.0, 2.0);
        assert_eq!(prox_prefilter(&w, &mut ws, 0.99, ProxAggregate::Linf), PrefilterOutcome::Rejected(PrefilterStage::Feasibility));
    }

    #[test]
    fn tau_kappa_proximity() {
        assert_eq!(prox_tau_kappa(2.0, 0.5, 1.0), 0.0);
        assert!((prox_tau_kappa(1.0, 2.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(prox_tau_kappa(-1.0, 2.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn comb_endpoints() {
        let (w, _) = nonneg_point(&[1.0], &[1.0], 1.0, 1.0);
        let mk = |v: f64| {
            let mut d = w.clone();
            d.scale(0.0);
            d.s[0] = v;
            d
        };
        let (dp, dpt, dc, dct) = (mk(1.0), mk(2.0), mk(4.0), mk(8.0));
        assert_eq!(comb_point(&w, &dp, &dpt, &dc, &dct, 1.0).s[0], 1.0 + 3.0);
        assert_eq!(comb_point(&w, &dp, &dpt, &dc, &dct, 0.0).s[0], 1.0 + 12.0);
    }

    #[test]
    fn line_search_zero_direction_takes_first_step() {
        let (w, mut ws) = nonneg_point(&[1.0, 1.0], &[1.0, 1.0], 1.0, 1.0);
        let mut d = w.clone();
        d.scale(0.0);
        let cfg = StepperConfig::default();
        let r = backtrack_line(&w, &d, &cfg.schedule, 0.99, ProxAggregate::Linf, &mut ws).unwrap();
        assert_eq!(r.alpha, 0.9999);
        assert_eq!(r.point, w);
        let r2 = backtrack_curve(&w, &d, &d, &cfg.schedule, 0.99, ProxAggregate::Linf, &mut ws).unwrap();
        assert_eq!(r2.alpha, 0.9999);
    }

    #[test]
    fn line_search_fails_far_outside() {
        let (w, mut ws) = nonneg_point(&[1.0, 1.0], &[1.0, 1.0], 1.0, 1.0);
        let mut d = w.clone();
        d.scale(0.0);
        // any step moves z̄ off its central value by a lot relative to α
        d.s = vec![-2e4, 0.0];
        let cfg = StepperConfig::default();
        assert!(backtrack_line(&w, &d, &cfg.schedule, 0.99, ProxAggregate::Linf, &mut ws).is_none());
    }
}
