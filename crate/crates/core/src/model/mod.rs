//! Conic problems in the primal form
//!
//! ```text
//! min c'x  s.t.  b - A x = 0,  h - G x ∈ K = K_1 × ... × K_K
//! ```
//!
//! with the dual `max -b'y - h'z  s.t.  c + A'y + G'z = 0, z ∈ K*`.

mod certificate;
mod embedded;
mod preprocess;
pub mod text;

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cones::{ConeDescriptor, ConeError};

pub use certificate::{verify_certificate, SolveStatus, CertificateReport, CheckItem, ConditionCheck, Tolerances, Witness};
pub use embedded::{EResidual, EmbeddedSystem};
pub use preprocess::{initial_iterate, preprocess, InconsistencyReport, Preprocessed, PreprocessedModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch in {block}: expected {expected}, got {got}")]
    DimensionMismatch { block: &'static str, expected: String, got: String },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Validated problem data. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicModel {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    cones: Vec<ConeDescriptor>,
    offsets: Vec<usize>,
}

fn mismatch(block: &'static str, expected: impl ToString, got: impl ToString) -> ModelError {
    ModelError::DimensionMismatch { block, expected: expected.to_string(), got: got.to_string() }
}

/// Checks dimensions and returns the model. `A` must be `p × n` and `G`
/// must be `q × n` where `q` is the total cone dimension.
pub fn build_model(
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    cones: Vec<ConeDescriptor>,
) -> Result<ConicModel, ModelError> {
    let n = c.len();
    let p = b.len();
    if a.shape() != (p, n) {
        return Err(mismatch("A", format!("{p}×{n}"), format!("{}×{}", a.nrows(), a.ncols())));
    }
    let mut offsets = Vec::with_capacity(cones.len() + 1);
    let mut q = 0;
    for k in &cones {
        offsets.push(q);
        q += k.dim();
    }
    offsets.push(q);
    if h.len() != q {
        return Err(mismatch("h", format!("{q} (sum of cone dimensions)"), h.len()));
    }
    if g.shape() != (q, n) {
        return Err(mismatch("G", format!("{q}×{n}"), format!("{}×{}", g.nrows(), g.ncols())));
    }
    for (name, ok) in [
        ("c", c.iter().all(|x| x.is_finite())),
        ("A", a.iter().all(|x| x.is_finite())),
        ("b", b.iter().all(|x| x.is_finite())),
        ("G", g.iter().all(|x| x.is_finite())),
        ("h", h.iter().all(|x| x.is_finite())),
    ] {
        if !ok {
            return Err(ModelError::NonFinite(name));
        }
    }
    Ok(ConicModel { c, a, b, g, h, cones, offsets })
}

impl ConicModel {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> usize {
        self.h.len()
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn cones(&self) -> &[ConeDescriptor] {
        &self.cones
    }

    /// Rows of `G` and `h` belonging to cone `k`.
    pub fn cone_range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn into_shared(self) -> Arc<ConicModel> {
        Arc::new(self)
    }
}

#[cfg(test)]
mod tests;
