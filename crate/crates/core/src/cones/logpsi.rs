//! Derivatives of `f = -log ψ` from derivatives of `ψ`, and of the product
//! term `φ(x) = Π x_i^{a_i}` used by the power cones.

use crate::linalg::dot;

/// `out += -∇ψ / ψ`
pub fn grad(psi: f64, dpsi: &[f64], out: &mut [f64]) {
    for (o, d) in out.iter_mut().zip(dpsi) {
        *o -= d / psi;
    }
}

/// `out += (∇ψ'δ) ∇ψ / ψ² - ∇²ψ δ / ψ`
pub fn hess_prod(psi: f64, dpsi: &[f64], d2psi_delta: &[f64], delta: &[f64], out: &mut [f64]) {
    let dd = dot(dpsi, delta) / (psi * psi);
    for ((o, d), h) in out.iter_mut().zip(dpsi).zip(d2psi_delta) {
        *o += dd * d - h / psi;
    }
}

/// `out += -½ ∇³f[δ, δ]`, i.e.
/// `(∇ψ'δ)² ∇ψ / ψ³ - ((∇ψ'δ) ∇²ψδ + ½ (δ'∇²ψδ) ∇ψ) / ψ² + ½ ∇³ψ[δ, δ] / ψ`
pub fn too(psi: f64, dpsi: &[f64], d2psi_delta: &[f64], d3psi_dd: &[f64], delta: &[f64], out: &mut [f64]) {
    let a = dot(dpsi, delta);
    let b = dot(delta, d2psi_delta);
    let psi2 = psi * psi;
    let c1 = a * a / (psi2 * psi) - 0.5 * b / psi2;
    for (((o, d), h), t) in out.iter_mut().zip(dpsi).zip(d2psi_delta).zip(d3psi_dd) {
        *o += c1 * d - a * h / psi2 + 0.5 * t / psi;
    }
}

/// Explicit Hessian of `-log ψ`: `∇ψ∇ψ' / ψ² - ∇²ψ / ψ`, added to `out`.
pub fn hessian(psi: f64, dpsi: &[f64], d2psi: &nalgebra::DMatrix<f64>, out: &mut nalgebra::DMatrix<f64>) {
    let n = dpsi.len();
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] += dpsi[i] * dpsi[j] / (psi * psi) - d2psi[(i, j)] / psi;
        }
    }
}

/// Derivatives of `φ(x) = Π x_i^{a_i}` for `x > 0`.
pub struct Product<'a> {
    pub a: &'a [f64],
    pub x: &'a [f64],
    pub phi: f64,
}

impl<'a> Product<'a> {
    pub fn new(a: &'a [f64], x: &'a [f64]) -> Self {
        let log_phi: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi.ln()).sum();
        Product { a, x, phi: log_phi.exp() }
    }

    pub fn grad(&self, out: &mut [f64]) {
        for ((o, ai), xi) in out.iter_mut().zip(self.a).zip(self.x) {
            *o = self.phi * ai / xi;
        }
    }

    fn p(&self, d: &[f64]) -> f64 {
        self.a.iter().zip(self.x).zip(d).map(|((ai, xi), di)| ai * di / xi).sum()
    }

    /// `∇²φ δ`
    pub fn hess_prod(&self, d: &[f64], out: &mut [f64]) {
        let p = self.p(d);
        for (((o, ai), xi), di) in out.iter_mut().zip(self.a).zip(self.x).zip(d) {
            *o = self.phi * (ai / xi * p - ai * di / (xi * xi));
        }
    }

    /// `∇³φ[δ, δ]`
    pub fn third(&self, d: &[f64], out: &mut [f64]) {
        let p = self.p(d);
        let q: f64 = self.a.iter().zip(self.x).zip(d).map(|((ai, xi), di)| ai * di * di / (xi * xi)).sum();
        for (((o, ai), xi), di) in out.iter_mut().zip(self.a).zip(self.x).zip(d) {
            let x2 = xi * xi;
            *o = self.phi * (ai / xi * (p * p - q) - 2.0 * p * ai * di / x2 + 2.0 * ai * di * di / (x2 * xi));
        }
    }

    /// Explicit `∇²φ`.
    pub fn hessian(&self) -> nalgebra::DMatrix<f64> {
        let n = self.a.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let v = self.a[i] * self.a[j] / (self.x[i] * self.x[j]);
            if i == j {
                self.phi * (v - self.a[i] / (self.x[i] * self.x[i]))
            } else {
                self.phi * v
            }
        })
    }
}
