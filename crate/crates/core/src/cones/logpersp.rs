use nalgebra::DMatrix;

use super::logpsi;
use super::{Barrier, FEASIBILITY_MARGIN};

/// `f(u, v, w) = -log(v Σ log(w_i / v) - u) - log v - Σ log w_i`
pub(crate) struct LogPerspBarrier {
    d: usize,
    s: Vec<f64>,
    psi: f64,
    dpsi: Vec<f64>,
}

impl LogPerspBarrier {
    pub fn new(d: usize) -> Self {
        LogPerspBarrier { d, s: vec![0.0; d + 2], psi: 0.0, dpsi: vec![0.0; d + 2] }
    }

    fn d2psi_prod(&self, delta: &[f64], out: &mut [f64]) {
        let v = self.s[1];
        let dv = delta[1];
        out[0] = 0.0;
        let mut ov = -(self.d as f64) * dv / v;
        for i in 0..self.d {
            let (w, dw) = (self.s[2 + i], delta[2 + i]);
            ov += dw / w;
            out[2 + i] = dv / w - v * dw / (w * w);
        }
        out[1] = ov;
    }

    /// `K⁻¹y` for `K = I + c·BB'` with `B` the columns `e_i - e_v` over the
    /// `(v, w)` coordinates; every term is a sum of nonnegative parts.
    fn k_inv(c: f64, y: &[f64], out: &mut [f64]) {
        let d = (y.len() - 1) as f64;
        let den = 1.0 + c + c * d;
        let sw: f64 = y[1..].iter().sum();
        out[0] = ((1.0 + c) * y[0] + c * sw) / den;
        let common = c * y[0] / den + c * c * sw / ((1.0 + c) * den);
        for (o, yi) in out[1..].iter_mut().zip(&y[1..]) {
            *o = yi / (1.0 + c) + common;
        }
    }

    /// `P⁻¹y` where `P = D K D` is the `(v, w)` block of the Hessian without
    /// the rank-one term, `D = Diag(1/v, 1/w)`.
    fn p_inv(&self, y: &[f64], out: &mut [f64]) {
        let c = self.s[1] / self.psi;
        let scaled: Vec<f64> = y.iter().zip(&self.s[1..]).map(|(a, x)| a * x).collect();
        Self::k_inv(c, &scaled, out);
        for (o, x) in out.iter_mut().zip(&self.s[1..]) {
            *o *= x;
        }
    }

    fn d3psi(&self, delta: &[f64], out: &mut [f64]) {
        let v = self.s[1];
        let dv = delta[1];
        out[0] = 0.0;
        let mut ov = self.d as f64 * dv * dv / (v * v);
        for i in 0..self.d {
            let (w, dw) = (self.s[2 + i], delta[2 + i]);
            let w2 = w * w;
            ov -= dw * dw / w2;
            out[2 + i] = -2.0 * dv * dw / w2 + 2.0 * v * dw * dw / (w2 * w);
        }
        out[1] = ov;
    }
}

impl Barrier for LogPerspBarrier {
    fn load(&mut self, s: &[f64]) -> bool {
        let (u, v, w) = (s[0], s[1], &s[2..]);
        let scale = crate::linalg::norm_inf(s);
        if !(v > FEASIBILITY_MARGIN * scale) || w.iter().any(|&x| !(x > FEASIBILITY_MARGIN * scale)) {
            return false;
        }
        let logs: Vec<f64> = w.iter().map(|x| (x / v).ln()).collect();
        let sum_log: f64 = logs.iter().sum();
        let psi = v * sum_log - u;
        let mag = u.abs() + v * logs.iter().map(|x| x.abs()).sum::<f64>() + v;
        if !(psi > FEASIBILITY_MARGIN * mag) {
            return false;
        }
        self.s.copy_from_slice(s);
        self.psi = psi;
        self.dpsi[0] = -1.0;
        self.dpsi[1] = sum_log - self.d as f64;
        for (o, x) in self.dpsi[2..].iter_mut().zip(w) {
            *o = v / x;
        }
        true
    }

    fn gradient(&mut self, g: &mut [f64]) {
        g.fill(0.0);
        logpsi::grad(self.psi, &self.dpsi, g);
        for (gi, x) in g[1..].iter_mut().zip(&self.s[1..]) {
            *gi -= 1.0 / x;
        }
    }

    fn hess_prod(&mut self, delta: &[f64], out: &mut [f64]) {
        let mut h = vec![0.0; delta.len()];
        self.d2psi_prod(delta, &mut h);
        out.fill(0.0);
        logpsi::hess_prod(self.psi, &self.dpsi, &h, delta, out);
        for ((o, d), x) in out[1..].iter_mut().zip(&delta[1..]).zip(&self.s[1..]) {
            *o += d / (x * x);
        }
    }

    fn hessian(&mut self) -> DMatrix<f64> {
        let n = self.s.len();
        let v = self.s[1];
        let mut d2 = DMatrix::zeros(n, n);
        d2[(1, 1)] = -(self.d as f64) / v;
        for i in 0..self.d {
            let w = self.s[2 + i];
            d2[(1, 2 + i)] = 1.0 / w;
            d2[(2 + i, 1)] = 1.0 / w;
            d2[(2 + i, 2 + i)] = -v / (w * w);
        }
        let mut h = DMatrix::zeros(n, n);
        logpsi::hessian(self.psi, &self.dpsi, &d2, &mut h);
        for i in 1..n {
            h[(i, i)] += 1.0 / (self.s[i] * self.s[i]);
        }
        h
    }

    fn too(&mut self, delta: &[f64], out: &mut [f64]) {
        let n = delta.len();
        let mut h = vec![0.0; n];
        self.d2psi_prod(delta, &mut h);
        let mut t3 = vec![0.0; n];
        self.d3psi(delta, &mut t3);
        out.fill(0.0);
        logpsi::too(self.psi, &self.dpsi, &h, &t3, delta, out);
        for ((o, d), x) in out[1..].iter_mut().zip(&delta[1..]).zip(&self.s[1..]) {
            *o += d * d / (x * x * x);
        }
    }

    // H = ∇ψ∇ψ'/ψ² + [0 0; 0 P] with ∇ψ = (-1, q), so
    // H⁻¹ = [ψ² + q'P⁻¹q, (P⁻¹q)'; P⁻¹q, P⁻¹]
    fn inv_hess_prod(&mut self, r: &[f64], out: &mut [f64]) -> bool {
        let n = self.s.len();
        let mut pq = vec![0.0; n - 1];
        self.p_inv(&self.dpsi[1..], &mut pq);
        let mut pr = vec![0.0; n - 1];
        self.p_inv(&r[1..], &mut pr);
        let qpq = crate::linalg::dot(&self.dpsi[1..], &pq);
        out[0] = (self.psi * self.psi + qpq) * r[0] + crate::linalg::dot(&pq, &r[1..]);
        for i in 1..n {
            out[i] = pq[i - 1] * r[0] + pr[i - 1];
        }
        true
    }

    // dual cone: u < 0, w > 0, v - u (Σ log(-w_i / u) + d) > 0
    fn dual_feasible(&self, z: &[f64]) -> Option<bool> {
        let (u, v, w) = (z[0], z[1], &z[2..]);
        if !(u < 0.0) || w.iter().any(|&x| !(x > 0.0)) {
            return Some(false);
        }
        let sum_log: f64 = w.iter().map(|x| (-x / u).ln()).sum();
        let t = -u * (sum_log + self.d as f64);
        Some(v + t > FEASIBILITY_MARGIN * (v.abs() + t.abs()))
    }
}
