//! Newton-type directions of the embedding.
//!
//! For a right-hand side `r = (r_E, r_1, …, r_K, r_κ)` the system is
//!
//! ```text
//! E δ = r_E,   δz̄_k + μ H_k(s̄_k) δs̄_k = r_k,   δκ + (μ/τ²) δτ = r_κ.
//! ```
//!
//! It is solved on the reduced embedding (no equality rows) by eliminating
//! `δs` and `δκ`, then `δz`, leaving the positive definite core
//! `M = G' D G` of side `n` and a scalar equation for `δτ`. Here
//! `D_k = μ H_k` for primal cones and `D_k = (μ H_k)⁻¹` for dual ones.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cones::{ConeError, ConeKind, OracleWorkspace};
use crate::linalg::{dot, norm_inf};
use crate::model::{EResidual, EmbeddedSystem};
use crate::point::IteratePoint;

/// Residual contract of a solved direction, relative to `1 + ‖r‖∞` per
/// row block.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Maximum number of iterative refinement rounds.
pub const MAX_REFINE: usize = 3;

/// Refinement continues past the contract down to this relative residual;
/// near the end of a solve the system is ill-conditioned enough that a
/// residual of [`RESIDUAL_TOL`] still leaves a visible forward error.
pub const REFINE_TARGET: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirectionError {
    #[error("core matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("direction system has equality rows; preprocess the model first")]
    EqualitiesPresent,
    #[error("non-finite direction")]
    NonFinite,
    #[error(transparent)]
    Cone(#[from] ConeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionTag {
    Centering,
    CenteringToa,
    Prediction,
    PredictionToa,
    /// Iterative refinement correction.
    Correction,
}

/// Right-hand side `(r_E, r_1, …, r_K, r_κ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionRhs {
    pub tag: DirectionTag,
    pub e: EResidual,
    /// Per-cone rows, in the barrier-side orientation.
    pub cones: Vec<Vec<f64>>,
    /// Row of the `(τ, κ)` pair.
    pub kappa: f64,
}

impl DirectionRhs {
    pub fn zeros(sys: &EmbeddedSystem, tag: DirectionTag) -> Self {
        DirectionRhs {
            tag,
            e: EResidual::zeros(sys.n(), sys.p(), sys.q()),
            cones: sys.layout().ranges.iter().map(|r| vec![0.0; r.len()]).collect(),
            kappa: 0.0,
        }
    }

    pub fn norm_inf(&self) -> f64 {
        self.cones.iter().fold(self.e.norm_inf().max(self.kappa.abs()), |m, r| m.max(norm_inf(r)))
    }

    fn scaled(&self, a: f64) -> Self {
        DirectionRhs {
            tag: self.tag,
            e: self.e.scaled(a),
            cones: self.cones.iter().map(|r| r.iter().map(|v| a * v).collect()).collect(),
            kappa: a * self.kappa,
        }
    }
}

/// A solved direction with the relative residual it achieved.
#[derive(Debug, Clone)]
pub struct Direction {
    pub tag: DirectionTag,
    pub delta: IteratePoint,
    /// Largest block residual relative to `1 + ‖r_block‖∞`.
    pub residual: f64,
    pub refinements: usize,
}

impl Direction {
    pub fn meets_contract(&self) -> bool {
        self.residual <= RESIDUAL_TOL
    }
}

#[derive(Debug, Clone)]
enum Block {
    Diag { h: Vec<f64>, hinv: Vec<f64> },
    Dense { h: DMatrix<f64>, hinv: DMatrix<f64> },
}

impl Block {
    fn h_mul(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Block::Diag { h, .. } => h.iter().zip(v).map(|(a, b)| a * b).collect(),
            Block::Dense { h, .. } => (h * DVector::from_column_slice(v)).as_slice().to_vec(),
        }
    }

    fn hinv_mul(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Block::Diag { hinv, .. } => hinv.iter().zip(v).map(|(a, b)| a * b).collect(),
            Block::Dense { hinv, .. } => (hinv * DVector::from_column_slice(v)).as_slice().to_vec(),
        }
    }
}

/// Everything needed to solve direction systems at one `(ω, μ)`.
#[derive(Debug, Clone)]
pub struct KktFactorization {
    mu: f64,
    tau: f64,
    blocks: Vec<Block>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    /// `G'Dh`
    gdh: DVector<f64>,
    /// `M⁻¹(G'Dh - c)`
    x2: DVector<f64>,
    /// Denominator of the `δτ` equation.
    den: f64,
    /// Diagonal shift added to the core to make it factorizable (0 if none).
    shift: f64,
    solves: Cell<usize>,
}

impl KktFactorization {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Side of the dense core matrix.
    pub fn core_dim(&self) -> usize {
        self.x2.len()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Number of linear solves (including refinement corrections) done
    /// with this factorization.
    pub fn solve_count(&self) -> usize {
        self.solves.get()
    }

    fn apply_d(&self, sys: &EmbeddedSystem, v: &[f64]) -> Vec<f64> {
        let lay = sys.layout();
        let mut out = vec![0.0; v.len()];
        for (k, blk) in self.blocks.iter().enumerate() {
            let r = lay.ranges[k].clone();
            let o = if lay.use_dual[k] {
                blk.hinv_mul(&v[r.clone()]).into_iter().map(|x| x / self.mu).collect()
            } else {
                blk.h_mul(&v[r.clone()]).into_iter().map(|x| x * self.mu).collect::<Vec<_>>()
            };
            out[r].copy_from_slice(&o);
        }
        out
    }

    fn core_solve(&self, v: DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(&v),
            None => v,
        }
    }
}

fn d_block(blk: &Block, dual: bool, mu: f64) -> DMatrix<f64> {
    match (blk, dual) {
        (Block::Diag { h, .. }, false) => DMatrix::from_diagonal(&DVector::from_iterator(h.len(), h.iter().map(|x| mu * x))),
        (Block::Diag { hinv, .. }, true) => {
            DMatrix::from_diagonal(&DVector::from_iterator(hinv.len(), hinv.iter().map(|x| x / mu)))
        }
        (Block::Dense { h, .. }, false) => h * mu,
        (Block::Dense { hinv, .. }, true) => hinv / mu,
    }
}

/// Builds the Hessian blocks at `ω` and factors the core matrix.
/// `oracles[k]` must be the workspace of cone `k`.
pub fn factorize(
    sys: &EmbeddedSystem,
    w: &IteratePoint,
    mu: f64,
    oracles: &mut [OracleWorkspace],
) -> Result<KktFactorization, DirectionError> {
    if sys.p() > 0 {
        return Err(DirectionError::EqualitiesPresent);
    }
    let n = sys.n();
    let lay = sys.layout().clone();
    let mut blocks = Vec::with_capacity(lay.len());
    for (k, ws) in oracles.iter_mut().enumerate() {
        let sb = w.sbar(k);
        let blk = if matches!(ws.cone().kind(), ConeKind::Nonneg { .. }) {
            Block::Diag { h: sb.iter().map(|x| 1.0 / (x * x)).collect(), hinv: sb.iter().map(|x| x * x).collect() }
        } else {
            let h = ws.hessian(sb)?;
            let d = sb.len();
            let mut hinv = DMatrix::zeros(d, d);
            let mut e = vec![0.0; d];
            let mut col = vec![0.0; d];
            for j in 0..d {
                e[j] = 1.0;
                ws.hessian_solve(sb, &e, &mut col)?;
                hinv.column_mut(j).copy_from_slice(&col);
                e[j] = 0.0;
            }
            hinv = (&hinv + hinv.transpose()) * 0.5;
            Block::Dense { h, hinv }
        };
        blocks.push(blk);
    }

    let mut m = DMatrix::zeros(n, n);
    for (k, blk) in blocks.iter().enumerate() {
        let r = lay.ranges[k].clone();
        if r.is_empty() || n == 0 {
            continue;
        }
        let gk = sys.g.rows(r.start, r.len());
        let dg = d_block(blk, lay.use_dual[k], mu) * gk;
        m += gk.transpose() * dg;
    }
    let m = (&m + m.transpose()) * 0.5;

    let mut shift = 0.0;
    let chol = if n == 0 {
        None
    } else {
        let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
        let mut found = crate::linalg::cholesky_with_floor(m.clone(), 1e-15);
        let mut eps = 1e-14;
        while found.is_none() && eps <= 1e-8 {
            shift = eps * scale;
            let mut ms = m.clone();
            for i in 0..n {
                ms[(i, i)] += shift;
            }
            found = crate::linalg::cholesky_with_floor(ms, 0.0);
            eps *= 100.0;
        }
        Some(found.ok_or(DirectionError::NotPositiveDefinite)?)
    };

    let mut fact = KktFactorization {
        mu,
        tau: w.tau,
        blocks,
        chol,
        gdh: DVector::zeros(n),
        x2: DVector::zeros(n),
        den: 0.0,
        shift,
        solves: Cell::new(0),
    };
    let dh = fact.apply_d(sys, sys.h.as_slice());
    let gdh = if n == 0 { DVector::zeros(0) } else { sys.g.tr_mul(&DVector::from_column_slice(&dh)) };
    let xh = fact.core_solve(gdh.clone());
    let xc = fact.core_solve(sys.c.clone());
    let x2 = &xh - &xc;
    // h'Dh - (c + G'Dh)'x2 regrouped as μ/τ² + c'M⁻¹c + r'Dr with
    // r = h - G M⁻¹G'Dh; every term is nonnegative, so no cancellation
    let r: Vec<f64> = if n == 0 {
        sys.h.as_slice().to_vec()
    } else {
        (&sys.h - &sys.g * &xh).as_slice().to_vec()
    };
    let dr = fact.apply_d(sys, &r);
    let den = mu / (w.tau * w.tau) + sys.c.dot(&xc) + dot(&r, &dr);
    if !(den.is_finite() && den > 0.0) {
        return Err(DirectionError::NotPositiveDefinite);
    }
    fact.gdh = gdh;
    fact.x2 = x2;
    fact.den = den;
    Ok(fact)
}

/// One elimination pass, without refinement.
fn solve_once(fact: &KktFactorization, sys: &EmbeddedSystem, rhs: &DirectionRhs) -> IteratePoint {
    fact.solves.set(fact.solves.get() + 1);
    let lay = sys.layout();
    let n = sys.n();
    let mu = fact.mu;

    // v = r_z + u
    let mut v = rhs.e.z.clone();
    for (k, blk) in fact.blocks.iter().enumerate() {
        let r = lay.ranges[k].clone();
        if lay.use_dual[k] {
            crate::linalg::axpy(1.0, &rhs.cones[k], &mut v[r]);
        } else {
            let u = blk.hinv_mul(&rhs.cones[k]);
            crate::linalg::axpy(1.0 / mu, &u, &mut v[r]);
        }
    }
    let dv = fact.apply_d(sys, &v);
    let x1 = if n == 0 {
        DVector::zeros(0)
    } else {
        let gdv = sys.g.tr_mul(&DVector::from_column_slice(&dv));
        fact.core_solve(DVector::from_column_slice(&rhs.e.x) - gdv)
    };
    let cg = &sys.c + &fact.gdh;
    let dtau = (rhs.e.tau + rhs.kappa + dot(sys.h.as_slice(), &dv) + cg.dot(&x1)) / fact.den;
    let dx = &x1 + &fact.x2 * dtau;

    let mut out = sys.zero_point();
    out.x.copy_from_slice(dx.as_slice());
    out.tau = dtau;
    // δz = D(v + G δx - h δτ)
    let gdx = if n == 0 { vec![0.0; sys.q()] } else { (&sys.g * &dx).as_slice().to_vec() };
    let t: Vec<f64> = (0..sys.q()).map(|i| v[i] + gdx[i] - sys.h[i] * dtau).collect();
    out.z = fact.apply_d(sys, &t);
    // δs̄ from the cone rows, written so that H and H⁻¹ never multiply each
    // other: dual cones give δs = r_k - t_k, primal ones δs = H⁻¹r_k/μ - t_k
    for (k, blk) in fact.blocks.iter().enumerate() {
        let r = lay.ranges[k].clone();
        if lay.use_dual[k] {
            for ((s, rk), ti) in out.s[r.clone()].iter_mut().zip(&rhs.cones[k]).zip(&t[r]) {
                *s = rk - ti;
            }
        } else {
            let u = blk.hinv_mul(&rhs.cones[k]);
            for ((s, ui), ti) in out.s[r.clone()].iter_mut().zip(&u).zip(&t[r]) {
                *s = ui / mu - ti;
            }
        }
    }
    out.kappa = rhs.kappa - mu / (fact.tau * fact.tau) * dtau;
    out
}

/// Full-system residual `lhs(δ) - r` block by block.
pub fn residual(fact: &KktFactorization, sys: &EmbeddedSystem, rhs: &DirectionRhs, d: &IteratePoint) -> DirectionRhs {
    let ed = sys.apply(d);
    let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let e = EResidual {
        x: sub(&ed.x, &rhs.e.x),
        y: sub(&ed.y, &rhs.e.y),
        z: sub(&ed.z, &rhs.e.z),
        tau: ed.tau - rhs.e.tau,
    };
    let cones = fact
        .blocks
        .iter()
        .enumerate()
        .map(|(k, blk)| {
            let hs = blk.h_mul(d.sbar(k));
            d.zbar(k).iter().zip(&hs).zip(&rhs.cones[k]).map(|((z, h), r)| z + fact.mu * h - r).collect()
        })
        .collect::<Vec<Vec<f64>>>();
    let kappa = d.kappa + fact.mu / (fact.tau * fact.tau) * d.tau - rhs.kappa;
    DirectionRhs { tag: DirectionTag::Correction, e, cones, kappa }
}

/// Relative residual measure used by the contract: the worst block of
/// `res` relative to `1 + ‖rhs block‖∞`.
fn relative(res: &DirectionRhs, rhs: &DirectionRhs) -> f64 {
    let mut worst = res.e.norm_inf() / (1.0 + rhs.e.norm_inf());
    for (a, b) in res.cones.iter().zip(&rhs.cones) {
        worst = worst.max(norm_inf(a) / (1.0 + norm_inf(b)));
    }
    worst.max(res.kappa.abs() / (1.0 + rhs.kappa.abs()))
}

/// Iterative refinement of `delta`: at most [`MAX_REFINE`] rounds, each
/// kept only if it lowers the residual; stops at [`REFINE_TARGET`].
pub fn refine(fact: &KktFactorization, sys: &EmbeddedSystem, rhs: &DirectionRhs, delta: IteratePoint) -> Direction {
    let mut best = delta;
    let mut res = residual(fact, sys, rhs, &best);
    let mut rel = relative(&res, rhs);
    let mut rounds = 0;
    while rounds < MAX_REFINE && rel > REFINE_TARGET && rel.is_finite() {
        rounds += 1;
        let corr = solve_once(fact, sys, &res);
        let mut cand = best.clone();
        cand.axpy(-1.0, &corr);
        let cres = residual(fact, sys, rhs, &cand);
        let crel = relative(&cres, rhs);
        if !(crel < rel) {
            break;
        }
        best = cand;
        res = cres;
        rel = crel;
    }
    Direction { tag: rhs.tag, delta: best, residual: rel, refinements: rounds }
}

/// Solves the direction system for `rhs` and refines the result.
pub fn solve_direction(
    fact: &KktFactorization,
    sys: &EmbeddedSystem,
    rhs: &DirectionRhs,
) -> Result<Direction, DirectionError> {
    let scale = rhs.norm_inf();
    if scale == 0.0 {
        fact.solves.set(fact.solves.get() + 1);
        return Ok(Direction { tag: rhs.tag, delta: sys.zero_point(), residual: 0.0, refinements: 0 });
    }
    // solve the normalized system so that refinement sees unit-sized data
    let unit = rhs.scaled(1.0 / scale);
    let d0 = solve_once(fact, sys, &unit);
    let mut dir = refine(fact, sys, &unit, d0);
    dir.delta.scale(scale);
    dir.tag = rhs.tag;
    // contract is stated for the unscaled rhs; recompute there
    dir.residual = relative(&residual(fact, sys, rhs, &dir.delta), rhs);
    if !dir.delta.is_finite() || !dir.residual.is_finite() {
        return Err(DirectionError::NonFinite);
    }
    Ok(dir)
}

/// Dense matrix of the full square direction system, columns ordered as
/// [`IteratePoint::to_vec`] and rows as `(E; cone rows; κ row)`. Used as a
/// brute-force reference.
pub fn dense_system(
    sys: &EmbeddedSystem,
    w: &IteratePoint,
    mu: f64,
    oracles: &mut [OracleWorkspace],
) -> Result<DMatrix<f64>, DirectionError> {
    let e = sys.dense();
    let (n, p, q) = (sys.n(), sys.p(), sys.q());
    let dim = n + p + 2 * q + 2;
    let mut full = DMatrix::zeros(dim, dim);
    full.rows_mut(0, e.nrows()).copy_from(&e);
    let lay = sys.layout().clone();
    let (cz, ct, cs, ck) = (n + p, n + p + q, n + p + q + 1, n + p + 2 * q + 1);
    let row0 = n + p + q + 1;
    for (k, ws) in oracles.iter_mut().enumerate() {
        let r = lay.ranges[k].clone();
        let h = ws.hessian(w.sbar(k))?;
        let (zcol, scol) = if lay.use_dual[k] { (cs, cz) } else { (cz, cs) };
        for i in 0..r.len() {
            full[(row0 + r.start + i, zcol + r.start + i)] = 1.0;
            for j in 0..r.len() {
                full[(row0 + r.start + i, scol + r.start + j)] = mu * h[(i, j)];
            }
        }
    }
    full[(dim - 1, ck)] = 1.0;
    full[(dim - 1, ct)] = mu / (w.tau * w.tau);
    Ok(full)
}

/// Stacks a right-hand side in the row order of [`dense_system`].
pub fn stack_rhs(rhs: &DirectionRhs) -> Vec<f64> {
    let mut v = rhs.e.to_vec();
    for r in &rhs.cones {
        v.extend_from_slice(r);
    }
    v.push(rhs.kappa);
    v
}
