//! Epigraphs of the ℓ∞ norm, the Euclidean norm and the perspective of the
//! squared Euclidean norm.

use nalgebra::DMatrix;

use super::{Barrier, FEASIBILITY_MARGIN};
use crate::linalg::{dot, norm_inf};

/// `f(u, w) = -Σ log(u² - w_i²) + (d - 1) log u`
pub(crate) struct LinfBarrier {
    d: usize,
    u: f64,
    w: Vec<f64>,
    phi: Vec<f64>,
}

impl LinfBarrier {
    pub fn new(d: usize) -> Self {
        LinfBarrier { d, u: 0.0, w: vec![0.0; d], phi: vec![0.0; d] }
    }

    // 4u²/φ² - 2/φ and 4w²/φ² + 2/φ rewritten with φ = u² - w² to avoid
    // cancellation near the boundary
    fn arrow(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let u = self.u;
        let mut huu = -(self.d as f64 - 1.0) / (u * u);
        let mut b = vec![0.0; self.d];
        let mut c = vec![0.0; self.d];
        for i in 0..self.d {
            let (p, wi) = (self.phi[i], self.w[i]);
            let p2 = p * p;
            let diag = 2.0 * (u * u + wi * wi) / p2;
            huu += diag;
            b[i] = -4.0 * u * wi / p2;
            c[i] = diag;
        }
        (huu, b, c)
    }
}

impl Barrier for LinfBarrier {
    fn load(&mut self, s: &[f64]) -> bool {
        let u = s[0];
        if !(u > 0.0) {
            return false;
        }
        let w = &s[1..];
        if w.iter().any(|wi| !(u - wi.abs() > FEASIBILITY_MARGIN * u)) {
            return false;
        }
        self.u = u;
        self.w.copy_from_slice(w);
        for (p, wi) in self.phi.iter_mut().zip(w) {
            *p = (u - wi.abs()) * (u + wi.abs());
        }
        true
    }

    fn gradient(&mut self, g: &mut [f64]) {
        let u = self.u;
        let mut gu = (self.d as f64 - 1.0) / u;
        for i in 0..self.d {
            gu -= 2.0 * u / self.phi[i];
            g[1 + i] = 2.0 * self.w[i] / self.phi[i];
        }
        g[0] = gu;
    }

    fn hess_prod(&mut self, delta: &[f64], out: &mut [f64]) {
        let (huu, b, c) = self.arrow();
        let du = delta[0];
        let mut ou = huu * du;
        for i in 0..self.d {
            ou += b[i] * delta[1 + i];
            out[1 + i] = b[i] * du + c[i] * delta[1 + i];
        }
        out[0] = ou;
    }

    fn hessian(&mut self) -> DMatrix<f64> {
        let (huu, b, c) = self.arrow();
        let mut h = DMatrix::zeros(self.d + 1, self.d + 1);
        h[(0, 0)] = huu;
        for i in 0..self.d {
            h[(0, 1 + i)] = b[i];
            h[(1 + i, 0)] = b[i];
            h[(1 + i, 1 + i)] = c[i];
        }
        h
    }

    fn too(&mut self, delta: &[f64], out: &mut [f64]) {
        let (u, du) = (self.u, delta[0]);
        let mut tu = -(self.d as f64 - 1.0) * du * du / (u * u * u);
        for i in 0..self.d {
            let (p, wi, dw) = (self.phi[i], self.w[i], delta[1 + i]);
            let a = 2.0 * (u * du - wi * dw);
            let b = 2.0 * (du * du - dw * dw);
            let p2 = p * p;
            let p3 = p2 * p;
            tu += a * a * 2.0 * u / p3 - (2.0 * a * du + b * u) / p2;
            out[1 + i] = -a * a * 2.0 * wi / p3 - (-2.0 * a * dw - b * wi) / p2;
        }
        out[0] = tu;
    }

    // arrow elimination of the w block; the Schur complement simplifies to
    // Σ 2/(u² + w_i²) - (d - 1)/u² and b_i/c_i to -2u w_i/(u² + w_i²)
    fn inv_hess_prod(&mut self, r: &[f64], out: &mut [f64]) -> bool {
        let u = self.u;
        let mut schur = -(self.d as f64 - 1.0) / (u * u);
        let mut rhs = r[0];
        let mut ratio = vec![0.0; self.d];
        for i in 0..self.d {
            let wi = self.w[i];
            let sq = u * u + wi * wi;
            schur += 2.0 / sq;
            ratio[i] = -2.0 * u * wi / sq;
            rhs -= ratio[i] * r[1 + i];
        }
        let xu = rhs / schur;
        out[0] = xu;
        for i in 0..self.d {
            let p = self.phi[i];
            let ci_inv = p * p / (2.0 * (u * u + self.w[i] * self.w[i]));
            out[1 + i] = r[1 + i] * ci_inv - ratio[i] * xu;
        }
        true
    }

    // dual cone: epigraph of the ℓ1 norm
    fn dual_feasible(&self, z: &[f64]) -> Option<bool> {
        let l1: f64 = z[1..].iter().map(|x| x.abs()).sum();
        Some(z[0] - l1 > FEASIBILITY_MARGIN * z[0].abs().max(f64::MIN_POSITIVE))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Form {
    /// `J = Diag(1, -1, ..., -1)`
    L2,
    /// `J` swaps the first two coordinates and negates the rest
    Sqr,
}

/// `f(s) = -log(s'Js)`; covers the second order cone and its rotated form.
pub(crate) struct EuclBarrier {
    form: Form,
    s: Vec<f64>,
    js: Vec<f64>,
    jbar: f64,
}

impl EuclBarrier {
    pub fn l2(d: usize) -> Self {
        Self::new(Form::L2, 1 + d)
    }

    pub fn sqr(d: usize) -> Self {
        Self::new(Form::Sqr, 2 + d)
    }

    fn new(form: Form, n: usize) -> Self {
        EuclBarrier { form, s: vec![0.0; n], js: vec![0.0; n], jbar: 0.0 }
    }

    fn apply_j(&self, x: &[f64], out: &mut [f64]) {
        match self.form {
            Form::L2 => {
                out[0] = x[0];
                for (o, xi) in out[1..].iter_mut().zip(&x[1..]) {
                    *o = -xi;
                }
            }
            Form::Sqr => {
                out[0] = x[1];
                out[1] = x[0];
                for (o, xi) in out[2..].iter_mut().zip(&x[2..]) {
                    *o = -xi;
                }
            }
        }
    }

    /// `s'Js` in factored form, accurate near the boundary.
    fn quad(&self, s: &[f64]) -> f64 {
        match self.form {
            Form::L2 => {
                let nw = crate::linalg::norm2(&s[1..]);
                (s[0] - nw) * (s[0] + nw)
            }
            Form::Sqr => {
                let nw = crate::linalg::norm2(&s[2..]);
                let r = (2.0 * s[0] * s[1]).sqrt();
                (r - nw) * (r + nw)
            }
        }
    }

    fn interior(&self, s: &[f64]) -> bool {
        let lead_ok = match self.form {
            Form::L2 => s[0] > 0.0,
            Form::Sqr => s[0] > 0.0 && s[1] > 0.0,
        };
        if !lead_ok {
            return false;
        }
        let scale = norm_inf(s);
        self.quad(s) > FEASIBILITY_MARGIN * scale * scale
    }
}

impl Barrier for EuclBarrier {
    fn load(&mut self, s: &[f64]) -> bool {
        if !self.interior(s) {
            return false;
        }
        self.s.copy_from_slice(s);
        let mut js = std::mem::take(&mut self.js);
        self.apply_j(s, &mut js);
        self.jbar = 1.0 / self.quad(s);
        self.js = js;
        true
    }

    fn gradient(&mut self, g: &mut [f64]) {
        for (gi, x) in g.iter_mut().zip(&self.js) {
            *gi = -2.0 * self.jbar * x;
        }
    }

    // 2J̄ (2J̄ Js (s'Jδ) - Jδ)
    fn hess_prod(&mut self, delta: &[f64], out: &mut [f64]) {
        let sjd = dot(&self.js, delta);
        self.apply_j(delta, out);
        let j = self.jbar;
        for (o, x) in out.iter_mut().zip(&self.js) {
            *o = 2.0 * j * (2.0 * j * x * sjd - *o);
        }
    }

    fn hessian(&mut self) -> DMatrix<f64> {
        let n = self.s.len();
        let j = self.jbar;
        let mut h = DMatrix::from_fn(n, n, |a, b| 4.0 * j * j * self.js[a] * self.js[b]);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            self.apply_j(&e, &mut col);
            for r in 0..n {
                h[(r, c)] -= 2.0 * j * col[r];
            }
            e[c] = 0.0;
        }
        h
    }

    // 8J̄³(s'Jδ)² Js - 2J̄²(δ'Jδ) Js - 4J̄²(s'Jδ) Jδ
    fn too(&mut self, delta: &[f64], out: &mut [f64]) {
        let sjd = dot(&self.js, delta);
        self.apply_j(delta, out);
        let djd = dot(delta, out);
        let j = self.jbar;
        let a = 8.0 * j * j * j * sjd * sjd - 2.0 * j * j * djd;
        let b = 4.0 * j * j * sjd;
        for (o, x) in out.iter_mut().zip(&self.js) {
            *o = a * x - b * *o;
        }
    }

    // s (s'r) - (s'Js / 2) J r
    fn inv_hess_prod(&mut self, r: &[f64], out: &mut [f64]) -> bool {
        let sr = dot(&self.s, r);
        let half = 0.5 / self.jbar;
        self.apply_j(r, out);
        for (o, si) in out.iter_mut().zip(&self.s) {
            *o = si * sr - half * *o;
        }
        true
    }

    // both cones are self-dual
    fn dual_feasible(&self, z: &[f64]) -> Option<bool> {
        Some(self.interior(z))
    }
}
