//! Rescaling, elimination of the equality constraints and of redundant
//! columns of `G`, and lifting of reduced solutions.
//!
//! With `Ã = R_a A C`, `G̃ = G C`, `c̃ = C c`, `b̃ = R_a b` for diagonal
//! power-of-two scalings `R_a`, `C`, a pivoted QR factorization
//! `Ã' P = [Q1 Q2] R` gives the particular solution `x̂ = Q1 R11'⁻¹ (P'b̃)_1`
//! and the null space basis `Q2`. Writing `x̃ = x̂ τ + B x_r` where `B`
//! keeps the columns of `Q2` for which `G̃ Q2` is full column rank, the
//! reduced problem is
//!
//! ```text
//! min (B'c̃)'x_r + c̃'x̂   s.t.  (h - G̃ x̂) - (G̃ B) x_r ∈ K.
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::certificate::{SolveStatus, Witness};
use super::{ConicModel, EmbeddedSystem};
use crate::cones::{ConeError, OracleWorkspace};
use crate::linalg::{dot, norm_inf, solve_upper, solve_upper_transpose, PivotedQr};
use crate::point::IteratePoint;

/// Relative rank tolerance for both QR factorizations.
pub const RANK_TOL: f64 = 1e-12;

/// Infeasibility detected while eliminating equalities; the witness is a
/// ray in original coordinates (`τ = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct InconsistencyReport {
    pub status: SolveStatus,
    pub witness: Witness,
    /// Size of the inconsistency (residual norm of the dependent rows or
    /// objective mismatch of the dependent columns).
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub enum Preprocessed {
    Ready(PreprocessedModel),
    Inconsistent(InconsistencyReport),
}

/// Reduced model plus everything needed to lift reduced points back.
#[derive(Debug, Clone)]
pub struct PreprocessedModel {
    original: Arc<ConicModel>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    c_scaled: DVector<f64>,
    g_scaled: DMatrix<f64>,
    xhat: DVector<f64>,
    q1: DMatrix<f64>,
    r11: DMatrix<f64>,
    perm_a: Vec<usize>,
    basis: DMatrix<f64>,
    system: EmbeddedSystem,
}

fn pow2(v: f64) -> f64 {
    if v.is_finite() && v > 0.0 {
        2f64.powi(v.log2().round() as i32)
    } else {
        1.0
    }
}

/// One pass of power-of-two equilibration: rows of `A`, then columns of the
/// stacked `[R_a A; G]`. Rows of `G` are left alone since rescaling them
/// would change the cone.
fn scaling(model: &ConicModel) -> (Vec<f64>, Vec<f64>) {
    let (a, g) = (model.a(), model.g());
    let row: Vec<f64> = (0..model.p())
        .map(|i| {
            let m = a.row(i).amax();
            if m > 0.0 { pow2(1.0 / m.sqrt()) } else { 1.0 }
        })
        .collect();
    let col: Vec<f64> = (0..model.n())
        .map(|j| {
            let ma = (0..model.p()).fold(0.0_f64, |m, i| m.max((a[(i, j)] * row[i]).abs()));
            let mg = if model.q() > 0 { g.column(j).amax() } else { 0.0 };
            let m = ma.max(mg);
            if m > 0.0 { pow2(1.0 / m.sqrt()) } else { 1.0 }
        })
        .collect();
    (row, col)
}

/// Eliminates the equality constraints and redundant columns of `G`.
pub fn preprocess(model: Arc<ConicModel>) -> Preprocessed {
    let (n, p, q) = (model.n(), model.p(), model.q());
    let (row_scale, col_scale) = scaling(&model);
    let mut a_s = model.a().clone();
    for i in 0..p {
        for j in 0..n {
            a_s[(i, j)] *= row_scale[i] * col_scale[j];
        }
    }
    let b_s = DVector::from_iterator(p, (0..p).map(|i| model.b()[i] * row_scale[i]));
    let c_s = DVector::from_iterator(n, (0..n).map(|j| model.c()[j] * col_scale[j]));
    let mut g_s = model.g().clone();
    for j in 0..n {
        g_s.column_mut(j).scale_mut(col_scale[j]);
    }

    // equalities
    let qr = PivotedQr::new(&a_s.transpose(), RANK_TOL);
    let r = qr.rank();
    let q1 = qr.q().columns(0, r).into_owned();
    let q2 = qr.q().columns(r, n - r).into_owned();
    let r11 = qr.r11();
    let perm_a = qr.perm().to_vec();
    let mut v1: Vec<f64> = perm_a[..r].iter().map(|&i| b_s[i]).collect();
    solve_upper_transpose(&r11, &mut v1);
    let xhat = &q1 * DVector::from_column_slice(&v1);

    if p > r {
        let resid = &a_s * &xhat - &b_s;
        let scale = 1.0 + norm_inf(b_s.as_slice()) + a_s.amax() * xhat.iter().map(|x| x.abs()).sum::<f64>();
        if resid.amax() > RANK_TOL * scale {
            return Preprocessed::Inconsistent(primal_inconsistency(&model, &a_s, &b_s, &q1, &row_scale));
        }
    }

    // dependent columns of G Q2
    let g2 = &g_s * &q2;
    let c2 = q2.tr_mul(&c_s);
    let m = n - r;
    let keep: Vec<usize> = if m == 0 {
        Vec::new()
    } else {
        let gqr = PivotedQr::new(&g2, RANK_TOL);
        let rg = if q == 0 { 0 } else { gqr.rank() };
        let perm = gqr.perm();
        let rr = gqr.r11();
        for t in rg..m {
            let j = perm[t];
            let mut w: Vec<f64> = (0..rg).map(|i| gqr.r()[(i, t)]).collect();
            solve_upper(&rr, &mut w);
            let mismatch = c2[j] - (0..rg).map(|i| c2[perm[i]] * w[i]).sum::<f64>();
            let scale = 1.0 + norm_inf(c2.as_slice()) * (1.0 + w.iter().map(|x| x.abs()).sum::<f64>());
            if mismatch.abs() > RANK_TOL * scale {
                // ray N with G2 N = 0 and c2'N < 0
                let sign = -mismatch.signum();
                let mut ray = DVector::zeros(m);
                ray[j] = sign;
                for i in 0..rg {
                    ray[perm[i]] -= sign * w[i];
                }
                let xs = &q2 * ray;
                let x: Vec<f64> = (0..n).map(|i| xs[i] * col_scale[i]).collect();
                let gx = model.g() * DVector::from_column_slice(&x);
                let witness = Witness {
                    x,
                    y: vec![0.0; p],
                    z: vec![0.0; q],
                    s: gx.iter().map(|v| -v).collect(),
                    tau: 0.0,
                    kappa: mismatch.abs(),
                };
                return Preprocessed::Inconsistent(InconsistencyReport {
                    status: SolveStatus::DualInfeasible,
                    witness,
                    residual: mismatch.abs(),
                });
            }
        }
        let mut keep = perm[..rg].to_vec();
        keep.sort_unstable();
        keep
    };

    let basis = DMatrix::from_fn(n, keep.len(), |i, j| q2[(i, keep[j])]);
    let c_r = basis.tr_mul(&c_s);
    let g_r = &g_s * &basis;
    let h_r = model.h() - &g_s * &xhat;
    let offset = dot(c_s.as_slice(), xhat.as_slice());
    let system = EmbeddedSystem::new(
        c_r,
        DMatrix::zeros(0, keep.len()),
        DVector::zeros(0),
        g_r,
        h_r,
        offset,
        model.cones().to_vec(),
    );
    Preprocessed::Ready(PreprocessedModel {
        original: model,
        row_scale,
        col_scale,
        c_scaled: c_s,
        g_scaled: g_s,
        xhat,
        q1,
        r11,
        perm_a,
        basis,
        system,
    })
}

/// Farkas ray `y = -(I - U U') b̃` for an orthonormal basis `U` of the range
/// of `Ã`, so that `Ã'y = 0` and `b̃'y = -‖y‖²`.
fn primal_inconsistency(
    model: &ConicModel,
    a_s: &DMatrix<f64>,
    b_s: &DVector<f64>,
    q1: &DMatrix<f64>,
    row_scale: &[f64],
) -> InconsistencyReport {
    let range = a_s * q1;
    let u = if range.ncols() == 0 { range.clone() } else { range.qr().q() };
    let proj = &u * u.tr_mul(b_s);
    let ys = proj - b_s;
    let y: Vec<f64> = ys.iter().zip(row_scale).map(|(v, r)| v * r).collect();
    let residual = ys.norm_squared();
    InconsistencyReport {
        status: SolveStatus::PrimalInfeasible,
        witness: Witness {
            x: vec![0.0; model.n()],
            y,
            z: vec![0.0; model.q()],
            s: vec![0.0; model.q()],
            tau: 0.0,
            kappa: residual,
        },
        residual,
    }
}

impl PreprocessedModel {
    pub fn original(&self) -> &Arc<ConicModel> {
        &self.original
    }

    /// The reduced embedding the iterations run on (no equalities).
    pub fn system(&self) -> &EmbeddedSystem {
        &self.system
    }

    pub fn n_red(&self) -> usize {
        self.basis.ncols()
    }

    /// Number of equalities kept after removing redundant ones.
    pub fn rank_a(&self) -> usize {
        self.q1.ncols()
    }

    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    pub fn col_scale(&self) -> &[f64] {
        &self.col_scale
    }

    /// Maps a reduced homogeneous point to original coordinates.
    pub fn lift(&self, w: &IteratePoint) -> Witness {
        let n = self.original.n();
        let p = self.original.p();
        let xs = &self.xhat * w.tau + &self.basis * DVector::from_column_slice(&w.x);
        let x: Vec<f64> = (0..n).map(|i| xs[i] * self.col_scale[i]).collect();

        let r = self.rank_a();
        let mut y = vec![0.0; p];
        if r > 0 {
            let gz = self.g_scaled.tr_mul(&DVector::from_column_slice(&w.z)) + &self.c_scaled * w.tau;
            let mut y1: Vec<f64> = self.q1.tr_mul(&gz).iter().map(|v| -v).collect();
            solve_upper(&self.r11, &mut y1);
            for (i, v) in y1.into_iter().enumerate() {
                let row = self.perm_a[i];
                y[row] = v * self.row_scale[row];
            }
        }
        Witness { x, y, z: w.z.clone(), s: w.s.clone(), tau: w.tau, kappa: w.kappa }
    }

    /// Reduced `x` of an original homogeneous point (inverse of the `x`
    /// part of [`lift`](Self::lift) on the affine solution set).
    pub fn reduce_x(&self, x: &[f64], tau: f64) -> Vec<f64> {
        let xs = DVector::from_iterator(x.len(), x.iter().zip(&self.col_scale).map(|(v, c)| v / c));
        self.basis.tr_mul(&(xs - &self.xhat * tau)).as_slice().to_vec()
    }
}

/// `ω⁰`: `(z̄_k, s̄_k) = (-g_k(t_k), t_k)`, `τ = κ = 1`, and `x⁰` the
/// minimum-norm least-squares solution of `G x = h - s⁰`.
pub fn initial_iterate(pre: &PreprocessedModel) -> Result<IteratePoint, ConeError> {
    initial_point_for(pre.system())
}

pub(crate) fn initial_point_for(sys: &EmbeddedSystem) -> Result<IteratePoint, ConeError> {
    let mut w = sys.zero_point();
    for (k, cone) in sys.cones.iter().enumerate() {
        let t = cone.initial_point();
        let mut ws = OracleWorkspace::new(cone.clone());
        let g = ws.gradient(&t)?.to_vec();
        w.sbar_mut(k).copy_from_slice(&t);
        for (zi, gi) in w.zbar_mut(k).iter_mut().zip(&g) {
            *zi = -gi;
        }
    }
    w.tau = 1.0;
    w.kappa = 1.0;
    if sys.n() > 0 && sys.q() > 0 {
        let rhs = DVector::from_iterator(sys.q(), (0..sys.q()).map(|i| sys.h[i] - w.s[i]));
        let svd = sys.g.clone().svd(true, true);
        let x = svd.solve(&rhs, 1e-14 * svd.singular_values.max()).map_err(|_| ConeError::NumericalFailure)?;
        w.x.copy_from_slice(x.as_slice());
    }
    Ok(w)
}
