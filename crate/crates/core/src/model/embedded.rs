use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cones::ConeDescriptor;
use crate::linalg::{dot, norm_inf};
use crate::point::{ConeLayout, IteratePoint};

/// The linear part of the embedding over (possibly preprocessed) data:
///
/// ```text
///   [ 0   A'  G'  c ] [x]   [0]
///   [-A   0   0   b ] [y] = [0]
///   [-G   0   0   h ] [z]   [s]
///   [-c' -b' -h'  0 ] [τ]   [κ]
/// ```
///
/// `E ω` stacks the four row blocks after moving `s` and `κ` to the left.
/// `offset` is a constant objective term: the original objective is
/// `c'x + τ·offset` and the original dual objective `b'y + h'z - τ·offset`.
#[derive(Debug, Clone)]
pub struct EmbeddedSystem {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub offset: f64,
    pub cones: Vec<ConeDescriptor>,
    layout: Arc<ConeLayout>,
}

/// Row blocks of `E ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct EResidual {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub tau: f64,
}

impl EResidual {
    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.x).max(norm_inf(&self.y)).max(norm_inf(&self.z)).max(self.tau.abs())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.z);
        v.push(self.tau);
        v
    }

    pub fn scaled(&self, a: f64) -> EResidual {
        EResidual {
            x: self.x.iter().map(|v| a * v).collect(),
            y: self.y.iter().map(|v| a * v).collect(),
            z: self.z.iter().map(|v| a * v).collect(),
            tau: a * self.tau,
        }
    }

    pub fn zeros(n: usize, p: usize, q: usize) -> EResidual {
        EResidual { x: vec![0.0; n], y: vec![0.0; p], z: vec![0.0; q], tau: 0.0 }
    }
}

fn mul(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

fn tr_mul(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    m.tr_mul(&DVector::from_column_slice(v)).as_slice().to_vec()
}

impl EmbeddedSystem {
    pub fn new(
        c: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        g: DMatrix<f64>,
        h: DVector<f64>,
        offset: f64,
        cones: Vec<ConeDescriptor>,
    ) -> Self {
        let layout = Arc::new(ConeLayout::new(&cones));
        EmbeddedSystem { c, a, b, g, h, offset, cones, layout }
    }

    /// Embedding of a model without preprocessing.
    pub fn from_model(model: &super::ConicModel) -> Self {
        Self::new(
            model.c().clone(),
            model.a().clone(),
            model.b().clone(),
            model.g().clone(),
            model.h().clone(),
            0.0,
            model.cones().to_vec(),
        )
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> usize {
        self.h.len()
    }

    pub fn layout(&self) -> &Arc<ConeLayout> {
        &self.layout
    }

    pub fn zero_point(&self) -> IteratePoint {
        IteratePoint::zeros(self.n(), self.p(), self.layout.clone())
    }

    /// `E ω`
    pub fn apply(&self, w: &IteratePoint) -> EResidual {
        let mut rx = tr_mul(&self.g, &w.z);
        if self.p() > 0 {
            for (r, v) in rx.iter_mut().zip(tr_mul(&self.a, &w.y)) {
                *r += v;
            }
        }
        for (r, ci) in rx.iter_mut().zip(self.c.iter()) {
            *r += ci * w.tau;
        }
        let ax = mul(&self.a, &w.x);
        let ry: Vec<f64> = ax.iter().zip(self.b.iter()).map(|(v, bi)| -v + bi * w.tau).collect();
        let gx = if self.n() == 0 { vec![0.0; self.q()] } else { mul(&self.g, &w.x) };
        let rz: Vec<f64> = (0..self.q()).map(|i| -gx[i] + self.h[i] * w.tau - w.s[i]).collect();
        let rt = -dot(self.c.as_slice(), &w.x) - dot(self.b.as_slice(), &w.y) - dot(self.h.as_slice(), &w.z) - w.kappa;
        EResidual { x: rx, y: ry, z: rz, tau: rt }
    }

    /// Primal objective `c'x + τ·offset` of the homogeneous point.
    pub fn primal_obj(&self, w: &IteratePoint) -> f64 {
        dot(self.c.as_slice(), &w.x) + w.tau * self.offset
    }

    /// `b'y + h'z - τ·offset`, the negated dual objective.
    pub fn dual_obj_neg(&self, w: &IteratePoint) -> f64 {
        dot(self.b.as_slice(), &w.y) + dot(self.h.as_slice(), &w.z) - w.tau * self.offset
    }

    /// Dense matrix of `E`, columns ordered as [`IteratePoint::to_vec`].
    pub fn dense(&self) -> DMatrix<f64> {
        let (n, p, q) = (self.n(), self.p(), self.q());
        let rows = n + p + q + 1;
        let cols = n + p + 2 * q + 2;
        let (cx, cy, cz, ct, cs, ck) = (0, n, n + p, n + p + q, n + p + q + 1, n + p + 2 * q + 1);
        let (rx, ry, rz, rt) = (0, n, n + p, n + p + q);
        let mut e = DMatrix::zeros(rows, cols);
        for i in 0..n {
            for j in 0..p {
                e[(rx + i, cy + j)] = self.a[(j, i)];
                e[(ry + j, cx + i)] = -self.a[(j, i)];
            }
            for j in 0..q {
                e[(rx + i, cz + j)] = self.g[(j, i)];
                e[(rz + j, cx + i)] = -self.g[(j, i)];
            }
            e[(rx + i, ct)] = self.c[i];
            e[(rt, cx + i)] = -self.c[i];
        }
        for j in 0..p {
            e[(ry + j, ct)] = self.b[j];
            e[(rt, cy + j)] = -self.b[j];
        }
        for j in 0..q {
            e[(rz + j, ct)] = self.h[j];
            e[(rt, cz + j)] = -self.h[j];
            e[(rz + j, cs + j)] = -1.0;
        }
        e[(rt, ck)] = -1.0;
        e
    }
}
