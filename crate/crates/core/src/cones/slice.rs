//! Cones of the form `{w : Λ_l(w) ⪰ 0 ∀ l}` for linear maps `Λ_l` into
//! symmetric matrices, with barrier `f(w) = -Σ_l logdet Λ_l(w)`.
//!
//! All oracles only need `Λ`, `Λ*` and a Cholesky factor `Λ(w) = L L'`:
//!
//! ```text
//! g      = -Λ*(Λ⁻¹)
//! H δ    =  Λ*(Λ⁻¹ Λ(δ) Λ⁻¹)
//! T(w,δ) =  Λ*(Y'Y),  Y = L⁻¹ Λ(δ) Λ⁻¹
//! ```

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Barrier, FEASIBILITY_MARGIN};
use crate::linalg::{self, frob_dot, sdim, smat, svec_into};

/// Linear map from `R^dim` into symmetric `side × side` matrices.
pub trait SliceMap: Send + Sync + Debug {
    fn side(&self) -> usize;
    fn dim(&self) -> usize;
    fn apply(&self, w: &[f64]) -> DMatrix<f64>;
    /// `out += Λ*(m)`
    fn adjoint_add(&self, m: &DMatrix<f64>, out: &mut [f64]);

    /// `out += ∇²(-logdet Λ)` given the Cholesky factor `l` and `inv = Λ⁻¹`.
    fn hessian_add(&self, l: &DMatrix<f64>, inv: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let _ = l;
        let n = self.dim();
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let m = inv * self.apply(&e) * inv;
            col.fill(0.0);
            self.adjoint_add(&m, &mut col);
            for i in 0..n {
                out[(i, j)] += col[i];
            }
            e[j] = 0.0;
        }
    }

    /// Matrix `F` with `F'F` equal to this frame's Hessian term, when the
    /// map has a cheap one. Factoring `F` instead of `F'F` halves the
    /// condition number exponent.
    fn gram_factor(&self, _l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// Application and adjoint of one slice map.
#[derive(Debug, Clone)]
pub struct SliceFrame {
    map: Arc<dyn SliceMap>,
}

impl SliceFrame {
    pub fn side(&self) -> usize {
        self.map.side()
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn apply(&self, w: &[f64]) -> DMatrix<f64> {
        self.map.apply(w)
    }

    pub fn adjoint(&self, m: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.map.dim()];
        self.map.adjoint_add(m, &mut out);
        out
    }
}

#[derive(Debug)]
struct PsdMap {
    side: usize,
}

impl SliceMap for PsdMap {
    fn side(&self) -> usize {
        self.side
    }

    fn dim(&self) -> usize {
        sdim(self.side)
    }

    fn apply(&self, w: &[f64]) -> DMatrix<f64> {
        smat(w, self.side)
    }

    fn adjoint_add(&self, m: &DMatrix<f64>, out: &mut [f64]) {
        let mut v = vec![0.0; out.len()];
        svec_into(m, &mut v);
        linalg::axpy(1.0, &v, out);
    }

    // H_{(ij),(kl)} = ρ_ij ρ_kl / 2 · (V_ik V_jl + V_il V_jk), V = S⁻¹,
    // ρ = 1 on the diagonal and √2 off it
    fn hessian_add(&self, _l: &DMatrix<f64>, v: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let idx: Vec<(usize, usize)> = (0..self.side).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
        let rho = |i: usize, j: usize| if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
        for (c, &(k, l)) in idx.iter().enumerate() {
            for (r, &(i, j)) in idx.iter().enumerate().skip(c) {
                let h = 0.5 * rho(i, j) * rho(k, l) * (v[(i, k)] * v[(j, l)] + v[(i, l)] * v[(j, k)]);
                out[(r, c)] += h;
                if r != c {
                    out[(c, r)] += h;
                }
            }
        }
    }
}

#[derive(Debug)]
struct LmiMap {
    mats: Vec<DMatrix<f64>>,
}

impl SliceMap for LmiMap {
    fn side(&self) -> usize {
        self.mats[0].nrows()
    }

    fn dim(&self) -> usize {
        self.mats.len()
    }

    fn apply(&self, w: &[f64]) -> DMatrix<f64> {
        let s = self.side();
        let mut out = DMatrix::zeros(s, s);
        for (p, wi) in self.mats.iter().zip(w) {
            if *wi != 0.0 {
                out += p * *wi;
            }
        }
        out
    }

    fn adjoint_add(&self, m: &DMatrix<f64>, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.mats) {
            *o += frob_dot(p, m);
        }
    }

    // H_ij = ⟨Q_i, Q_j⟩ with Q_i = L⁻¹ P_i L⁻ᵀ
    fn hessian_add(&self, l: &DMatrix<f64>, _inv: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let q: Vec<DMatrix<f64>> = self
            .mats
            .iter()
            .map(|p| {
                let a = l.solve_lower_triangular(p).expect("nonsingular Cholesky factor");
                let b = l.solve_lower_triangular(&a.transpose()).expect("nonsingular Cholesky factor");
                b.transpose()
            })
            .collect();
        for j in 0..q.len() {
            for i in j..q.len() {
                let h = frob_dot(&q[i], &q[j]);
                out[(i, j)] += h;
                if i != j {
                    out[(j, i)] += h;
                }
            }
        }
    }

    // columns svec(L⁻¹ P_i L⁻ᵀ)
    fn gram_factor(&self, l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let side = self.side();
        let mut f = DMatrix::zeros(sdim(side), self.mats.len());
        let mut col = vec![0.0; sdim(side)];
        for (j, p) in self.mats.iter().enumerate() {
            let a = l.solve_lower_triangular(p)?;
            let q = l.solve_lower_triangular(&a.transpose())?;
            svec_into(&q, &mut col);
            f.column_mut(j).copy_from_slice(&col);
        }
        Some(f)
    }
}

/// `Λ(w) = P' Diag(w) P` with `P ∈ R^{d × s}`.
#[derive(Debug)]
struct WsosMap {
    p: DMatrix<f64>,
}

impl SliceMap for WsosMap {
    fn side(&self) -> usize {
        self.p.ncols()
    }

    fn dim(&self) -> usize {
        self.p.nrows()
    }

    fn apply(&self, w: &[f64]) -> DMatrix<f64> {
        let mut dp = self.p.clone();
        for (i, wi) in w.iter().enumerate() {
            dp.row_mut(i).scale_mut(*wi);
        }
        self.p.tr_mul(&dp)
    }

    // Λ*(M)_i = p_i' M p_i for the rows p_i of P
    fn adjoint_add(&self, m: &DMatrix<f64>, out: &mut [f64]) {
        let pm = &self.p * m;
        for (i, o) in out.iter_mut().enumerate() {
            *o += pm.row(i).dot(&self.p.row(i));
        }
    }

    // H = K ∘ K with K = P Λ⁻¹ P'
    fn hessian_add(&self, _l: &DMatrix<f64>, inv: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let k = &self.p * inv * self.p.transpose();
        out.zip_apply(&k, |o, kij| *o += kij * kij);
    }

    // K = BB' with B = P L⁻ᵀ, so K ∘ K = F'F where column i of F is
    // svec(b_i b_i')
    fn gram_factor(&self, l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let b = l.solve_lower_triangular(&self.p.transpose())?.transpose();
        let side = self.side();
        let mut f = DMatrix::zeros(sdim(side), self.dim());
        for i in 0..self.dim() {
            let mut r = 0;
            for k in 0..side {
                for j in 0..=k {
                    let w = if j == k { 1.0 } else { std::f64::consts::SQRT_2 };
                    f[(r, i)] = w * b[(i, j)] * b[(i, k)];
                    r += 1;
                }
            }
        }
        Some(f)
    }
}

struct FrameCache {
    l: DMatrix<f64>,
    inv: DMatrix<f64>,
    lam: DMatrix<f64>,
}

pub(crate) struct SliceBarrier {
    maps: Vec<Arc<dyn SliceMap>>,
    cache: Vec<FrameCache>,
    /// Upper triangular `R` with `R'R = H`, built on first use.
    gram_r: Option<DMatrix<f64>>,
    dim: usize,
    psd: bool,
}

impl SliceBarrier {
    fn from_maps(maps: Vec<Arc<dyn SliceMap>>, psd: bool) -> Self {
        let dim = maps[0].dim();
        SliceBarrier { maps, cache: Vec::new(), gram_r: None, dim, psd }
    }

    pub fn psd(side: usize) -> Self {
        Self::from_maps(vec![Arc::new(PsdMap { side })], true)
    }

    pub fn lmi(mats: Vec<DMatrix<f64>>) -> Self {
        Self::from_maps(vec![Arc::new(LmiMap { mats })], false)
    }

    pub fn wsos(mats: Vec<DMatrix<f64>>) -> Self {
        let maps = mats.into_iter().map(|p| Arc::new(WsosMap { p }) as Arc<dyn SliceMap>).collect();
        Self::from_maps(maps, false)
    }
}

impl SliceBarrier {
    fn gram_upper(&self) -> Option<DMatrix<f64>> {
        let mut parts = Vec::with_capacity(self.maps.len());
        for (map, c) in self.maps.iter().zip(&self.cache) {
            parts.push(map.gram_factor(&c.l)?);
        }
        let rows: usize = parts.iter().map(|p| p.nrows()).sum();
        if rows < self.dim {
            return None;
        }
        let mut f = DMatrix::zeros(rows, self.dim);
        let mut at = 0;
        for p in &parts {
            f.rows_mut(at, p.nrows()).copy_from(p);
            at += p.nrows();
        }
        let r = f.qr().r();
        let floor = r.diagonal().amax() * 1e-15;
        if r.diagonal().iter().any(|d| !(d.abs() > floor)) {
            return None;
        }
        Some(r)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

impl Barrier for SliceBarrier {
    fn load(&mut self, s: &[f64]) -> bool {
        self.cache.clear();
        self.gram_r = None;
        for map in &self.maps {
            let mut lam = map.apply(s);
            symmetrize(&mut lam);
            let Some(chol) = linalg::cholesky_with_floor(lam.clone(), FEASIBILITY_MARGIN) else {
                self.cache.clear();
                return false;
            };
            let inv = chol.inverse();
            self.cache.push(FrameCache { l: chol.l(), inv, lam });
        }
        true
    }

    fn gradient(&mut self, g: &mut [f64]) {
        g.fill(0.0);
        for (map, c) in self.maps.iter().zip(&self.cache) {
            map.adjoint_add(&c.inv, g);
        }
        g.iter_mut().for_each(|x| *x = -*x);
    }

    fn hess_prod(&mut self, delta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (map, c) in self.maps.iter().zip(&self.cache) {
            let m = &c.inv * map.apply(delta) * &c.inv;
            map.adjoint_add(&m, out);
        }
    }

    fn hessian(&mut self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for (map, c) in self.maps.iter().zip(&self.cache) {
            map.hessian_add(&c.l, &c.inv, &mut h);
        }
        h
    }

    fn too(&mut self, delta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (map, c) in self.maps.iter().zip(&self.cache) {
            let b = map.apply(delta) * &c.inv;
            let y = c.l.solve_lower_triangular(&b).expect("nonsingular Cholesky factor");
            let z = y.tr_mul(&y);
            map.adjoint_add(&z, out);
        }
    }

    // PSD cone: H⁻¹ r = svec(S R S); otherwise two triangular solves with
    // the R factor of the stacked Gram factors
    fn inv_hess_prod(&mut self, r: &[f64], out: &mut [f64]) -> bool {
        if !self.psd {
            if self.gram_r.is_none() {
                self.gram_r = self.gram_upper();
            }
            let Some(rr) = &self.gram_r else {
                return false;
            };
            let b = nalgebra::DVector::from_column_slice(r);
            let Some(y) = rr.tr_solve_upper_triangular(&b) else {
                return false;
            };
            let Some(x) = rr.solve_upper_triangular(&y) else {
                return false;
            };
            out.copy_from_slice(x.as_slice());
            return x.iter().all(|v| v.is_finite());
        }
        let c = &self.cache[0];
        let side = c.lam.nrows();
        let m = &c.lam * smat(r, side) * &c.lam;
        svec_into(&m, out);
        true
    }

    fn dual_feasible(&self, z: &[f64]) -> Option<bool> {
        if !self.psd {
            return None;
        }
        let mut m = self.maps[0].apply(z);
        symmetrize(&mut m);
        Some(linalg::cholesky_with_floor(m, FEASIBILITY_MARGIN).is_some())
    }

    fn slice_frames(&self) -> Option<Vec<SliceFrame>> {
        Some(self.maps.iter().map(|m| SliceFrame { map: m.clone() }).collect())
    }
}
