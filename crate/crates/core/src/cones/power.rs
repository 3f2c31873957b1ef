//! Generalized power cone and hypograph of the weighted power mean.

use nalgebra::DMatrix;

use super::logpsi::{self, Product};
use super::{Barrier, FEASIBILITY_MARGIN};
use crate::linalg::{dot, norm2, norm_inf};

/// Central point of the geometric mean hypograph `(u, c e)` in closed form;
/// also used as the initial point for unequal exponents.
pub(crate) fn mean_initial_point(d: usize, out: &mut [f64]) {
    let k = 1.0 + 1.0 / d as f64;
    let x = 0.5 * (k + (k * k + 4.0).sqrt());
    let t = (1.0 + x).sqrt();
    out[0] = -1.0 / t;
    out[1..].fill(t - 1.0 / t);
}

/// `f(u, w) = -log(Π u_i^{2α_i} - ‖w‖²) - Σ (1 - α_i) log u_i`
pub(crate) struct GenPowerBarrier {
    alpha: Vec<f64>,
    a: Vec<f64>,
    r: usize,
    s: Vec<f64>,
    psi: f64,
    dpsi: Vec<f64>,
}

impl GenPowerBarrier {
    pub fn new(alpha: Vec<f64>, dim_w: usize) -> Self {
        let r = alpha.len();
        let a = alpha.iter().map(|x| 2.0 * x).collect();
        GenPowerBarrier { alpha, a, r, s: vec![0.0; r + dim_w], psi: 0.0, dpsi: vec![0.0; r + dim_w] }
    }

    fn product(&self) -> Product<'_> {
        Product::new(&self.a, &self.s[..self.r])
    }

    fn d2psi_prod(&self, delta: &[f64], out: &mut [f64]) {
        self.product().hess_prod(&delta[..self.r], &mut out[..self.r]);
        for (o, d) in out[self.r..].iter_mut().zip(&delta[self.r..]) {
            *o = -2.0 * d;
        }
    }
}

impl Barrier for GenPowerBarrier {
    fn load(&mut self, s: &[f64]) -> bool {
        let r = self.r;
        let scale = norm_inf(s);
        if s[..r].iter().any(|&x| !(x > FEASIBILITY_MARGIN * scale)) {
            return false;
        }
        let phi = Product::new(&self.a, &s[..r]).phi;
        let (root, nw) = (phi.sqrt(), norm2(&s[r..]));
        let psi = (root - nw) * (root + nw);
        if !(psi > FEASIBILITY_MARGIN * phi) {
            return false;
        }
        self.s.copy_from_slice(s);
        self.psi = psi;
        let mut dpsi = std::mem::take(&mut self.dpsi);
        self.product().grad(&mut dpsi[..r]);
        for (o, w) in dpsi[r..].iter_mut().zip(&s[r..]) {
            *o = -2.0 * w;
        }
        self.dpsi = dpsi;
        true
    }

    fn gradient(&mut self, g: &mut [f64]) {
        g.fill(0.0);
        logpsi::grad(self.psi, &self.dpsi, g);
        for i in 0..self.r {
            g[i] -= (1.0 - self.alpha[i]) / self.s[i];
        }
    }

    fn hess_prod(&mut self, delta: &[f64], out: &mut [f64]) {
        let mut h = vec![0.0; delta.len()];
        self.d2psi_prod(delta, &mut h);
        out.fill(0.0);
        logpsi::hess_prod(self.psi, &self.dpsi, &h, delta, out);
        for i in 0..self.r {
            out[i] += (1.0 - self.alpha[i]) * delta[i] / (self.s[i] * self.s[i]);
        }
    }

    fn hessian(&mut self) -> DMatrix<f64> {
        let n = self.s.len();
        let mut d2 = DMatrix::zeros(n, n);
        d2.view_mut((0, 0), (self.r, self.r)).copy_from(&self.product().hessian());
        for i in self.r..n {
            d2[(i, i)] = -2.0;
        }
        let mut h = DMatrix::zeros(n, n);
        logpsi::hessian(self.psi, &self.dpsi, &d2, &mut h);
        for i in 0..self.r {
            h[(i, i)] += (1.0 - self.alpha[i]) / (self.s[i] * self.s[i]);
        }
        h
    }

    fn too(&mut self, delta: &[f64], out: &mut [f64]) {
        let n = delta.len();
        let mut h = vec![0.0; n];
        self.d2psi_prod(delta, &mut h);
        let mut t3 = vec![0.0; n];
        self.product().third(&delta[..self.r], &mut t3[..self.r]);
        out.fill(0.0);
        logpsi::too(self.psi, &self.dpsi, &h, &t3, delta, out);
        for i in 0..self.r {
            let u = self.s[i];
            out[i] += (1.0 - self.alpha[i]) * delta[i] * delta[i] / (u * u * u);
        }
    }

    // With Φ = Π u^{2α}, ζ = Φ - ‖w‖², D_i = 2Φα_i + (1 - α_i)ζ, the Hessian is
    // P + (4/ζ²) x x' with P = Diag(D_i/(ζu_i²)) ⊕ (2/ζ)(I - 2ŵŵ'), and
    // H⁻¹ = P⁻¹ - (4/den) y y', y = P⁻¹x/ζ, den = 1 - 2Φ Σ α_i(1 + α_i)/D_i ≤ -1.
    fn inv_hess_prod(&mut self, r: &[f64], out: &mut [f64]) -> bool {
        let m = self.r;
        let zeta = self.psi;
        let phi = self.product().phi;
        let root = phi.sqrt();
        let (u, w) = self.s.split_at(m);
        let nw = norm2(w);
        let mut den = 1.0;
        let mut y = vec![0.0; self.s.len()];
        for i in 0..m {
            let a = self.alpha[i];
            let d = 2.0 * phi * a + (1.0 - a) * zeta;
            den -= 2.0 * phi * a * (1.0 + a) / d;
            out[i] = r[i] * u[i] * u[i] * zeta / d;
            y[i] = nw * root * a * u[i] / d;
        }
        let rw = &r[m..];
        if nw > 0.0 {
            let wr = dot(w, rw) / (nw * nw);
            for j in 0..w.len() {
                out[m + j] = 0.5 * zeta * (rw[j] - 2.0 * w[j] * wr);
                y[m + j] = root * w[j] / (2.0 * nw);
            }
        } else {
            for j in 0..w.len() {
                out[m + j] = 0.5 * zeta * rw[j];
            }
        }
        let k = 4.0 / den * dot(&y, r);
        for (o, yi) in out.iter_mut().zip(&y) {
            *o -= k * yi;
        }
        true
    }

    // dual cone: Π (u_i / α_i)^{α_i} ≥ ‖w‖
    fn dual_feasible(&self, z: &[f64]) -> Option<bool> {
        let u = &z[..self.r];
        if u.iter().any(|&x| !(x > 0.0)) {
            return Some(false);
        }
        let lhs = self.alpha.iter().zip(u).map(|(a, x)| a * (x / a).ln()).sum::<f64>().exp();
        Some(lhs - norm2(&z[self.r..]) > FEASIBILITY_MARGIN * lhs)
    }
}

/// `f(u, w) = -log(Π w_i^{α_i} - u) - Σ log w_i`
pub(crate) struct PowerMeanBarrier {
    alpha: Vec<f64>,
    s: Vec<f64>,
    psi: f64,
    dpsi: Vec<f64>,
}

impl PowerMeanBarrier {
    pub fn new(alpha: Vec<f64>) -> Self {
        let n = 1 + alpha.len();
        PowerMeanBarrier { alpha, s: vec![0.0; n], psi: 0.0, dpsi: vec![0.0; n] }
    }

    fn product(&self) -> Product<'_> {
        Product::new(&self.alpha, &self.s[1..])
    }
}

impl Barrier for PowerMeanBarrier {
    fn load(&mut self, s: &[f64]) -> bool {
        let scale = norm_inf(s);
        let w = &s[1..];
        if w.iter().any(|&x| !(x > FEASIBILITY_MARGIN * scale)) {
            return false;
        }
        let phi = Product::new(&self.alpha, w).phi;
        let psi = phi - s[0];
        if !(psi > FEASIBILITY_MARGIN * (phi + s[0].abs())) {
            return false;
        }
        self.s.copy_from_slice(s);
        self.psi = psi;
        let mut dpsi = std::mem::take(&mut self.dpsi);
        dpsi[0] = -1.0;
        self.product().grad(&mut dpsi[1..]);
        self.dpsi = dpsi;
        true
    }

    fn gradient(&mut self, g: &mut [f64]) {
        g.fill(0.0);
        logpsi::grad(self.psi, &self.dpsi, g);
        for (gi, w) in g[1..].iter_mut().zip(&self.s[1..]) {
            *gi -= 1.0 / w;
        }
    }

    fn hess_prod(&mut self, delta: &[f64], out: &mut [f64]) {
        let mut h = vec![0.0; delta.len()];
        self.product().hess_prod(&delta[1..], &mut h[1..]);
        out.fill(0.0);
        logpsi::hess_prod(self.psi, &self.dpsi, &h, delta, out);
        for ((o, d), w) in out[1..].iter_mut().zip(&delta[1..]).zip(&self.s[1..]) {
            *o += d / (w * w);
        }
    }

    fn hessian(&mut self) -> DMatrix<f64> {
        let n = self.s.len();
        let mut d2 = DMatrix::zeros(n, n);
        d2.view_mut((1, 1), (n - 1, n - 1)).copy_from(&self.product().hessian());
        let mut h = DMatrix::zeros(n, n);
        logpsi::hessian(self.psi, &self.dpsi, &d2, &mut h);
        for i in 1..n {
            h[(i, i)] += 1.0 / (self.s[i] * self.s[i]);
        }
        h
    }

    fn too(&mut self, delta: &[f64], out: &mut [f64]) {
        let n = delta.len();
        let prod = self.product();
        let mut h = vec![0.0; n];
        prod.hess_prod(&delta[1..], &mut h[1..]);
        let mut t3 = vec![0.0; n];
        prod.third(&delta[1..], &mut t3[1..]);
        out.fill(0.0);
        logpsi::too(self.psi, &self.dpsi, &h, &t3, delta, out);
        for ((o, d), w) in out[1..].iter_mut().zip(&delta[1..]).zip(&self.s[1..]) {
            *o += d * d / (w * w * w);
        }
    }

    // With ψ = φ - u, e_i = w_i²ψ/(ψ + φα_i), f_i = w_i α_i/(ψ + φα_i),
    // S = Σ α_i/(ψ + φα_i), T = Σ α_i²/(ψ + φα_i):
    // H⁻¹ = [ψ² + φ²T/S, (φ/S) f'; (φ/S) f, Diag(e) + (φ/S) f f'].
    // Every term is positive, so this stays accurate near the boundary.
    fn inv_hess_prod(&mut self, r: &[f64], out: &mut [f64]) -> bool {
        let psi = self.psi;
        let w = &self.s[1..];
        let phi = self.product().phi;
        let (mut big_s, mut big_t, mut fr) = (0.0, 0.0, 0.0);
        let mut f = vec![0.0; w.len()];
        for i in 0..w.len() {
            let a = self.alpha[i];
            let den = psi + phi * a;
            big_s += a / den;
            big_t += a * a / den;
            f[i] = w[i] * a / den;
            fr += f[i] * r[1 + i];
        }
        let k = phi / big_s;
        out[0] = (psi * psi + phi * phi * big_t / big_s) * r[0] + k * fr;
        for i in 0..w.len() {
            let e = w[i] * w[i] * psi / (psi + phi * self.alpha[i]);
            out[1 + i] = e * r[1 + i] + k * f[i] * (fr + r[0]);
        }
        true
    }

    // dual cone: u < 0, w > 0, Π (w_i / α_i)^{α_i} ≥ -u
    fn dual_feasible(&self, z: &[f64]) -> Option<bool> {
        let w = &z[1..];
        if !(z[0] < 0.0) || w.iter().any(|&x| !(x > 0.0)) {
            return Some(false);
        }
        let lhs = self.alpha.iter().zip(w).map(|(a, x)| a * (x / a).ln()).sum::<f64>().exp();
        Some(lhs + z[0] > FEASIBILITY_MARGIN * lhs)
    }
}
