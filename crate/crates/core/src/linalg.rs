//! Dense linear algebra helpers shared by the cones and the preprocessor.

use nalgebra::{DMatrix, DVector};

/// Dimension of the svec vectorization of a `side × side` symmetric matrix.
pub fn sdim(side: usize) -> usize {
    side * (side + 1) / 2
}

/// Inverse of [`sdim`]; `None` when `len` is not a triangular number.
pub fn side_from_sdim(len: usize) -> Option<usize> {
    let side = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (sdim(side) == len).then_some(side)
}

/// Scaled upper-triangle vectorization with `√2` on off-diagonals, stacking
/// columns of the upper triangle: `(S11, √2 S12, S22, √2 S13, ...)`.
pub fn svec(mat: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0; sdim(mat.nrows())];
    svec_into(mat, &mut out);
    out
}

pub fn svec_into(mat: &DMatrix<f64>, out: &mut [f64]) {
    let side = mat.nrows();
    debug_assert_eq!(out.len(), sdim(side));
    let mut k = 0;
    for j in 0..side {
        for i in 0..j {
            out[k] = std::f64::consts::SQRT_2 * 0.5 * (mat[(i, j)] + mat[(j, i)]);
            k += 1;
        }
        out[k] = mat[(j, j)];
        k += 1;
    }
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], side: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), sdim(side));
    let mut mat = DMatrix::zeros(side, side);
    let mut k = 0;
    for j in 0..side {
        for i in 0..j {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            mat[(i, j)] = x;
            mat[(j, i)] = x;
            k += 1;
        }
        mat[(j, j)] = v[k];
        k += 1;
    }
    mat
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Frobenius inner product of two equally shaped matrices.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Householder QR with column pivoting on remaining column norms,
/// `A P = Q R`, with `Q` formed explicitly (square).
///
/// Only intended for the small dense matrices of the preprocessing step.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factorizes `a`; diagonal entries of `R` smaller than
    /// `rank_tol * |R_00|` are treated as zero when computing the rank.
    pub fn new(a: &DMatrix<f64>, rank_tol: f64) -> Self {
        let (m, k) = a.shape();
        let mut r = a.clone();
        let mut q = DMatrix::<f64>::identity(m, m);
        let mut perm: Vec<usize> = (0..k).collect();
        let steps = m.min(k);
        let mut v = vec![0.0; m];

        for j in 0..steps {
            // pivot: remaining column with the largest trailing norm
            let (mut best, mut best_norm) = (j, -1.0);
            for c in j..k {
                let nrm: f64 = (j..m).map(|i| r[(i, c)] * r[(i, c)]).sum();
                if nrm > best_norm {
                    best = c;
                    best_norm = nrm;
                }
            }
            if best != j {
                r.swap_columns(j, best);
                perm.swap(j, best);
            }

            let alpha = best_norm.sqrt();
            if alpha == 0.0 {
                continue;
            }
            let x0 = r[(j, j)];
            let beta = if x0 >= 0.0 { -alpha } else { alpha };
            for (i, vi) in v.iter_mut().enumerate().take(m).skip(j) {
                *vi = r[(i, j)];
            }
            v[j] = x0 - beta;
            let vnorm2: f64 = v[j..m].iter().map(|x| x * x).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            // apply H = I - 2 v v' / (v'v) to trailing columns of R
            for c in j..k {
                let s: f64 = (j..m).map(|i| v[i] * r[(i, c)]).sum();
                let f = 2.0 * s / vnorm2;
                for i in j..m {
                    r[(i, c)] -= f * v[i];
                }
            }
            for i in (j + 1)..m {
                r[(i, j)] = 0.0;
            }
            // accumulate Q <- Q H
            for row in 0..m {
                let s: f64 = (j..m).map(|i| q[(row, i)] * v[i]).sum();
                let f = 2.0 * s / vnorm2;
                for i in j..m {
                    q[(row, i)] -= f * v[i];
                }
            }
        }

        let lead = if steps > 0 { r[(0, 0)].abs() } else { 0.0 };
        let rank = (0..steps)
            .take_while(|&i| lead > 0.0 && r[(i, i)].abs() > rank_tol * lead)
            .count();
        PivotedQr { q, r, perm, rank }
    }

    /// Orthogonal factor, `m × m`.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Upper trapezoidal factor, `m × k`.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// `perm[j]` is the original column placed at position `j`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Leading `rank × rank` block of `R`.
    pub fn r11(&self) -> DMatrix<f64> {
        self.r.view((0, 0), (self.rank, self.rank)).into_owned()
    }
}

/// Solves `U x = b` for upper triangular `U` in place.
pub fn solve_upper(u: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= u[(i, j)] * b[j];
        }
        b[i] = s / u[(i, i)];
    }
}

/// Solves `U' x = b` for upper triangular `U` in place.
pub fn solve_upper_transpose(u: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= u[(j, i)] * b[j];
        }
        b[i] = s / u[(i, i)];
    }
}

/// Cholesky factor of a symmetric matrix with a relative pivot floor:
/// fails if any pivot falls below `floor * max(diag)`.
pub fn cholesky_with_floor(mat: DMatrix<f64>, floor: f64) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if mat.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let scale = mat.diagonal().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let chol = nalgebra::Cholesky::new(mat)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).fold(f64::INFINITY, |m, i| m.min(l[(i, i)] * l[(i, i)]));
    if l.nrows() > 0 && !(min_pivot > floor * scale) {
        return None;
    }
    Some(chol)
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
