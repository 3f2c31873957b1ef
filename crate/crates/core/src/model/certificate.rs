use std::fmt;

use nalgebra::DVector;

use super::ConicModel;
use crate::cones::OracleWorkspace;
use crate::linalg::{dot, norm_inf};

/// Terminal status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IllPosed,
    /// The line search failed or progress stagnated.
    Stalled,
    /// A factorization or refinement broke down.
    NumericalFailure,
    IterationLimit,
}

impl SolveStatus {
    /// Statuses that come with a conic certificate.
    pub fn is_certificate(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal_infeasible",
            SolveStatus::DualInfeasible => "dual_infeasible",
            SolveStatus::IllPosed => "ill_posed",
            SolveStatus::Stalled => "stalled",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use SolveStatus::*;
        [Optimal, PrimalInfeasible, DualInfeasible, IllPosed, Stalled, NumericalFailure, IterationLimit]
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown status `{s}`"))
    }
}

/// Convergence tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `ε_f`, feasibility
    pub feas: f64,
    /// `ε_r`, relative gap
    pub rel_gap: f64,
    /// `ε_i`, infeasibility
    pub infeas: f64,
    /// `ε_a`, absolute gap
    pub abs_gap: f64,
    /// `ε_p`, ill-posedness
    pub illposed: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let eps = f64::EPSILON;
        Tolerances {
            feas: 10.0 * eps.sqrt(),
            rel_gap: 10.0 * eps.sqrt(),
            infeas: 10.0 * eps.powf(0.75),
            abs_gap: 10.0 * eps.powf(0.75),
            illposed: 0.1 * eps.powf(0.75),
        }
    }
}

/// Homogeneous point in original coordinates. For optimal solutions the
/// solution is `(x, y, z) / τ`; for rays `τ ≈ 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub tau: f64,
    pub kappa: f64,
}

/// A claimed terminal status with its witness.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub status: SolveStatus,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Per-condition breakdown returned by [`verify_certificate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionCheck {
    pub items: Vec<CheckItem>,
}

impl ConditionCheck {
    /// All conditions hold and at least one was checked.
    pub fn passed(&self) -> bool {
        !self.items.is_empty() && self.items.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, value: f64, bound: f64, passed: bool) {
        self.items.push(CheckItem { name, value, bound, passed });
    }
}

fn mat_vec(m: &nalgebra::DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

fn mat_tr_vec(m: &nalgebra::DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    m.tr_mul(&DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Closed-cone membership of the witness slacks: `s ∈ K`, `z ∈ K*`.
/// Cones without a dual membership test are skipped on that side; zero
/// blocks always pass.
fn cone_membership(model: &ConicModel, v: &[f64], dual_side: bool) -> bool {
    model.cones().iter().enumerate().all(|(k, cone)| {
        let blk = &v[model.cone_range(k)];
        if blk.iter().all(|x| *x == 0.0) {
            return true;
        }
        let mut ws = OracleWorkspace::new(cone.clone());
        // the barrier cone is K_k for primal cones and K_k* for dual ones
        let barrier_side = dual_side == cone.use_dual();
        if barrier_side {
            ws.is_feasible(blk)
        } else {
            ws.dual_feasible(blk).unwrap_or(true)
        }
    })
}

/// Recomputes every condition of the claimed status from the original data.
/// Non-certificate statuses other than ill-posed yield an empty check.
pub fn verify_certificate(model: &ConicModel, report: &CertificateReport, tol: &Tolerances) -> ConditionCheck {
    let w = &report.witness;
    let mut chk = ConditionCheck::default();
    let (c, b, h) = (model.c().as_slice(), model.b().as_slice(), model.h().as_slice());
    let dims_ok = w.x.len() == model.n() && w.y.len() == model.p() && w.z.len() == model.q() && w.s.len() == model.q();
    if !dims_ok {
        chk.push("dimensions", 1.0, 0.0, false);
        return chk;
    }
    let aty = mat_tr_vec(model.a(), &w.y);
    let gtz = mat_tr_vec(model.g(), &w.z);
    let ax = mat_vec(model.a(), &w.x);
    let gx = mat_vec(model.g(), &w.x);
    let cx = dot(c, &w.x);
    let byhz = dot(b, &w.y) + dot(h, &w.z);

    match report.status {
        SolveStatus::Optimal => {
            let tau = w.tau;
            let rx: Vec<f64> = (0..model.n()).map(|i| aty[i] + gtz[i] + c[i] * tau).collect();
            let ry: Vec<f64> = (0..model.p()).map(|i| -ax[i] + b[i] * tau).collect();
            let rz: Vec<f64> = (0..model.q()).map(|i| -gx[i] + h[i] * tau - w.s[i]).collect();
            let res = (norm_inf(&rx) / (1.0 + norm_inf(c)))
                .max(norm_inf(&ry) / (1.0 + norm_inf(b)))
                .max(norm_inf(&rz) / (1.0 + norm_inf(h)));
            chk.push("tau_positive", tau, 0.0, tau > 0.0);
            chk.push("residual", res, tol.feas * tau, res <= tol.feas * tau);
            let sz = dot(&w.s, &w.z);
            let abs_ok = sz <= tol.abs_gap;
            let lhs = (sz / tau).min((cx + byhz).abs());
            let rhs = tol.rel_gap * tau.max(cx.abs().min(byhz.abs()));
            let rel_ok = lhs <= rhs;
            chk.push("gap", if abs_ok { sz } else { lhs }, if abs_ok { tol.abs_gap } else { rhs }, abs_ok || rel_ok);
            chk.push("s_in_cone", 0.0, 0.0, cone_membership(model, &w.s, false));
            chk.push("z_in_dual_cone", 0.0, 0.0, cone_membership(model, &w.z, true));
        }
        SolveStatus::PrimalInfeasible => {
            let r: Vec<f64> = aty.iter().zip(&gtz).map(|(a, g)| a + g).collect();
            let rn = norm_inf(&r);
            chk.push("dual_objective_negative", byhz, 0.0, byhz < 0.0);
            chk.push("dual_ray_residual", rn, -tol.infeas * byhz, rn <= -tol.infeas * byhz);
            chk.push("z_in_dual_cone", 0.0, 0.0, cone_membership(model, &w.z, true));
        }
        SolveStatus::DualInfeasible => {
            let gxs: Vec<f64> = gx.iter().zip(&w.s).map(|(g, s)| g + s).collect();
            let rn = norm_inf(&ax).max(norm_inf(&gxs));
            chk.push("primal_objective_negative", cx, 0.0, cx < 0.0);
            chk.push("primal_ray_residual", rn, -tol.infeas * cx, rn <= -tol.infeas * cx);
            chk.push("s_in_cone", 0.0, 0.0, cone_membership(model, &w.s, false));
        }
        SolveStatus::IllPosed => {
            let nu: f64 = model.cones().iter().map(|k| k.nu()).sum::<f64>() + 1.0;
            let mu = (dot(&w.s, &w.z) + w.tau * w.kappa) / nu;
            chk.push("mu_small", mu, tol.illposed, mu <= tol.illposed);
            let bound = tol.illposed * w.kappa.min(1.0);
            chk.push("tau_small", w.tau, bound, w.tau <= bound);
        }
        SolveStatus::Stalled | SolveStatus::NumericalFailure | SolveStatus::IterationLimit => {}
    }
    chk
}
