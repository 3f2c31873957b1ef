//! Iterates `ω = (x, y, z, τ, s, κ)` of the homogeneous self-dual embedding.

use std::ops::Range;
use std::sync::Arc;

use crate::cones::ConeDescriptor;
use crate::linalg::dot;

/// Row ranges, oracle side and barrier parameter of every cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeLayout {
    pub ranges: Vec<Range<usize>>,
    pub use_dual: Vec<bool>,
    pub nu: Vec<f64>,
}

impl ConeLayout {
    pub fn new(cones: &[ConeDescriptor]) -> Self {
        let mut ranges = Vec::with_capacity(cones.len());
        let mut off = 0;
        for k in cones {
            ranges.push(off..off + k.dim());
            off += k.dim();
        }
        ConeLayout {
            ranges,
            use_dual: cones.iter().map(|k| k.use_dual()).collect(),
            nu: cones.iter().map(|k| k.nu()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// `Σ_k ν_k + 1`, counting the `(τ, κ)` pair.
    pub fn total_nu(&self) -> f64 {
        self.nu.iter().sum::<f64>() + 1.0
    }
}

/// A point of the embedding. The per-cone views `(z̄_k, s̄_k)` are
/// `(z_k, s_k)` for cones with primal oracles and `(s_k, z_k)` for cones
/// entering through their dual.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub tau: f64,
    pub s: Vec<f64>,
    pub kappa: f64,
    layout: Arc<ConeLayout>,
}

impl IteratePoint {
    pub fn zeros(n: usize, p: usize, layout: Arc<ConeLayout>) -> Self {
        let q = layout.ranges.last().map_or(0, |r| r.end);
        IteratePoint { x: vec![0.0; n], y: vec![0.0; p], z: vec![0.0; q], tau: 0.0, s: vec![0.0; q], kappa: 0.0, layout }
    }

    pub fn layout(&self) -> &Arc<ConeLayout> {
        &self.layout
    }

    /// Barrier-side slice `s̄_k`.
    pub fn sbar(&self, k: usize) -> &[f64] {
        let r = self.layout.ranges[k].clone();
        if self.layout.use_dual[k] {
            &self.z[r]
        } else {
            &self.s[r]
        }
    }

    /// Conjugate-side slice `z̄_k`.
    pub fn zbar(&self, k: usize) -> &[f64] {
        let r = self.layout.ranges[k].clone();
        if self.layout.use_dual[k] {
            &self.s[r]
        } else {
            &self.z[r]
        }
    }

    pub fn sbar_mut(&mut self, k: usize) -> &mut [f64] {
        let r = self.layout.ranges[k].clone();
        if self.layout.use_dual[k] {
            &mut self.z[r]
        } else {
            &mut self.s[r]
        }
    }

    pub fn zbar_mut(&mut self, k: usize) -> &mut [f64] {
        let r = self.layout.ranges[k].clone();
        if self.layout.use_dual[k] {
            &mut self.s[r]
        } else {
            &mut self.z[r]
        }
    }

    /// Complementarity gap `μ = (s'z + τκ) / (Σ ν_k + 1)`.
    pub fn mu(&self) -> f64 {
        (dot(&self.s, &self.z) + self.tau * self.kappa) / self.layout.total_nu()
    }

    /// `ω + Σ_i a_i δ_i`, accumulated left to right.
    pub fn combine(&self, terms: &[(f64, &IteratePoint)]) -> IteratePoint {
        let mut out = self.clone();
        for (a, d) in terms {
            out.axpy(*a, d);
        }
        out
    }

    /// `self += a δ`
    pub fn axpy(&mut self, a: f64, d: &IteratePoint) {
        crate::linalg::axpy(a, &d.x, &mut self.x);
        crate::linalg::axpy(a, &d.y, &mut self.y);
        crate::linalg::axpy(a, &d.z, &mut self.z);
        self.tau += a * d.tau;
        crate::linalg::axpy(a, &d.s, &mut self.s);
        self.kappa += a * d.kappa;
    }

    pub fn scale(&mut self, a: f64) {
        for v in [&mut self.x, &mut self.y, &mut self.z, &mut self.s] {
            v.iter_mut().for_each(|x| *x *= a);
        }
        self.tau *= a;
        self.kappa *= a;
    }

    /// Flattened `(x, y, z, τ, s, κ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.z);
        v.push(self.tau);
        v.extend_from_slice(&self.s);
        v.push(self.kappa);
        v
    }

    /// Inverse of [`to_vec`](Self::to_vec) using this point's dimensions.
    pub fn from_slice_like(&self, v: &[f64]) -> IteratePoint {
        let (n, p, q) = (self.x.len(), self.y.len(), self.z.len());
        assert_eq!(v.len(), self.len());
        let mut o = 0;
        let mut take = |k: usize| {
            let s = v[o..o + k].to_vec();
            o += k;
            s
        };
        let x = take(n);
        let y = take(p);
        let z = take(q);
        let tau = take(1)[0];
        let s = take(q);
        let kappa = take(1)[0];
        IteratePoint { x, y, z, tau, s, kappa, layout: self.layout.clone() }
    }

    pub fn len(&self) -> usize {
        self.x.len() + self.y.len() + 2 * self.z.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn norm_inf(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}
