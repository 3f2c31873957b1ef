//! Cone descriptors and barrier oracles.
//!
//! Every primitive cone supplies a logarithmically homogeneous
//! self-concordant barrier `f` through five oracles: a strict feasibility
//! check, the gradient `g(s)`, Hessian products `H(s) δ`, the third order
//! oracle `T(s, δ) = -½ ∇³f(s)[δ, δ]` and an initial interior point.
//!
//! Oracles are evaluated through an [`OracleWorkspace`], which caches the
//! factorizations computed by the feasibility check for the last point it
//! saw. Calling any oracle at a new point re-runs the feasibility check
//! first.

mod epinorm;
mod logpersp;
mod logpsi;
mod nonneg;
mod power;
mod slice;

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{self, sdim};

pub use slice::{SliceFrame, SliceMap};

/// Relative margin below which a barrier argument (log argument or Cholesky
/// pivot) counts as being on the boundary.
pub const FEASIBILITY_MARGIN: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("invalid cone parameters: {0}")]
    InvalidParameters(String),
    #[error("oracle called at a point outside the cone interior")]
    OracleMisuse,
    #[error("point has length {got}, cone dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("inverse Hessian factorization broke down")]
    NumericalFailure,
    #[error("cone `{0}` is not a slice of the PSD cone")]
    UnsupportedCone(&'static str),
}

/// Primitive cone types.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeKind {
    /// Nonnegative orthant of dimension `dim`.
    Nonneg { dim: usize },
    /// PSD matrices of side `side`, svec-vectorized.
    PsdSvec { side: usize },
    /// Epigraph of the ℓ∞ norm: `(u, w)`, `w ∈ R^dim`.
    LinfEpi { dim: usize },
    /// Epigraph of the Euclidean norm (second order cone): `(u, w)`, `w ∈ R^dim`.
    L2Epi { dim: usize },
    /// Epigraph of the perspective of the squared norm (rotated second
    /// order cone): `(u, v, w)` with `2uv ≥ ‖w‖²`, `w ∈ R^dim`.
    SqrEpi { dim: usize },
    /// Generalized power cone `(u, w)`, `Π u_i^{α_i} ≥ ‖w‖`, `w ∈ R^dim_w`.
    GenPower { alpha: Vec<f64>, dim_w: usize },
    /// Hypograph of the weighted power mean: `(u, w)`, `u ≤ Π w_i^{α_i}`.
    PowerMean { alpha: Vec<f64> },
    /// Hypograph of the geometric mean of `dim` entries.
    GeoMean { dim: usize },
    /// Hypograph of the perspective of a sum of logs:
    /// `(u, v, w)`, `u ≤ Σ v log(w_i / v)`, `w ∈ R^dim`.
    LogPersp { dim: usize },
    /// Linear matrix inequality `Σ w_i P_i ⪰ 0` with `P_1 ≻ 0`.
    Lmi { mats: Vec<DMatrix<f64>> },
    /// Dual of the scalar weighted sum-of-squares cone in an interpolant
    /// basis with `points` nodes: `P_l' Diag(w) P_l ⪰ 0` for every `l`.
    WsosDualScalar { points: usize, mats: Vec<DMatrix<f64>> },
}

/// One primitive cone of a product cone.
///
/// When `use_dual` is set, the model constraint is `h - G x ∈ C*` where `C`
/// is the cone described by `kind`; the barrier oracles of `C` are then
/// evaluated at the dual slack `z` instead of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeDescriptor {
    kind: ConeKind,
    use_dual: bool,
}

impl ConeDescriptor {
    pub fn nonneg(dim: usize) -> Result<Self, ConeError> {
        if dim == 0 {
            return Err(ConeError::InvalidParameters("nonnegative cone needs dim ≥ 1".into()));
        }
        Ok(Self::primal(ConeKind::Nonneg { dim }))
    }

    pub fn psd(side: usize) -> Result<Self, ConeError> {
        if side == 0 {
            return Err(ConeError::InvalidParameters("PSD cone needs side ≥ 1".into()));
        }
        Ok(Self::primal(ConeKind::PsdSvec { side }))
    }

    pub fn linf(dim: usize) -> Result<Self, ConeError> {
        if dim == 0 {
            return Err(ConeError::InvalidParameters("ℓ∞ epigraph needs dim ≥ 1".into()));
        }
        Ok(Self::primal(ConeKind::LinfEpi { dim }))
    }

    pub fn l2(dim: usize) -> Result<Self, ConeError> {
        if dim == 0 {
            return Err(ConeError::InvalidParameters("ℓ2 epigraph needs dim ≥ 1".into()));
        }
        Ok(Self::primal(ConeKind::L2Epi { dim }))
    }

    pub fn sqr(dim: usize) -> Result<Self, ConeError> {
        if dim == 0 {
            return Err(ConeError::InvalidParameters("squared-norm epigraph needs dim ≥ 1".into()));
        }
        Ok(Self::primal(ConeKind::SqrEpi { dim }))
    }

    pub fn gen_power(alpha: Vec<f64>, dim_w: usize) -> Result<Self, ConeError> {
        check_exponents(&alpha)?;
        if dim_w == 0 {
            return Err(ConeError::InvalidParameters("generalized power cone needs dim_w ≥ 1".into()));
        }
        Ok(Self::primal(ConeKind::GenPower { alpha, dim_w }))
    }

    pub fn power_mean(alpha: Vec<f64>) -> Result<Self, ConeError> {
        check_exponents(&alpha)?;
        Ok(Self::primal(ConeKind::PowerMean { alpha }))
    }

    pub fn geo_mean(dim: usize) -> Result<Self, ConeError> {
        if dim == 0 {
            return Err(ConeError::InvalidParameters("geometric mean cone needs dim ≥ 1".into()));
        }
        Ok(Self::primal(ConeKind::GeoMean { dim }))
    }

    pub fn log_persp(dim: usize) -> Result<Self, ConeError> {
        if dim == 0 {
            return Err(ConeError::InvalidParameters("log cone needs dim ≥ 1".into()));
        }
        Ok(Self::primal(ConeKind::LogPersp { dim }))
    }

    /// LMI cone over the symmetric pencil `mats`; `mats[0]` must be positive
    /// definite.
    pub fn lmi(mats: Vec<DMatrix<f64>>) -> Result<Self, ConeError> {
        let first = mats
            .first()
            .ok_or_else(|| ConeError::InvalidParameters("LMI cone needs at least one matrix".into()))?;
        let side = first.nrows();
        if side == 0 {
            return Err(ConeError::InvalidParameters("LMI matrices must be nonempty".into()));
        }
        for (i, m) in mats.iter().enumerate() {
            if m.shape() != (side, side) {
                return Err(ConeError::InvalidParameters(format!("LMI matrix {i} is not {side}×{side}")));
            }
            let asym = (m - m.transpose()).amax();
            if asym > 1e-12 * m.amax().max(1.0) {
                return Err(ConeError::InvalidParameters(format!("LMI matrix {i} is not symmetric")));
            }
        }
        if linalg::cholesky_with_floor(first.clone(), FEASIBILITY_MARGIN).is_none() {
            return Err(ConeError::InvalidParameters("first LMI matrix must be positive definite".into()));
        }
        Ok(Self::primal(ConeKind::Lmi { mats }))
    }

    /// Scalar WSOS dual cone from `r` interpolant matrices `P_l ∈ R^{d × s_l}`.
    /// Each `P_l' P_l` must be positive definite so that the all-ones vector
    /// is interior.
    pub fn wsos_dual(mats: Vec<DMatrix<f64>>) -> Result<Self, ConeError> {
        let first = mats
            .first()
            .ok_or_else(|| ConeError::InvalidParameters("WSOS cone needs at least one matrix".into()))?;
        let points = first.nrows();
        if points == 0 {
            return Err(ConeError::InvalidParameters("WSOS matrices need at least one row".into()));
        }
        for (l, p) in mats.iter().enumerate() {
            if p.nrows() != points || p.ncols() == 0 {
                return Err(ConeError::InvalidParameters(format!("WSOS matrix {l} has shape {:?}", p.shape())));
            }
            if linalg::cholesky_with_floor(p.transpose() * p, FEASIBILITY_MARGIN).is_none() {
                return Err(ConeError::InvalidParameters(format!("WSOS matrix {l} is column rank deficient")));
            }
        }
        Ok(Self::primal(ConeKind::WsosDualScalar { points, mats }))
    }

    fn primal(kind: ConeKind) -> Self {
        ConeDescriptor { kind, use_dual: false }
    }

    /// Marks the cone as entering the model through its dual.
    pub fn dual(mut self) -> Self {
        self.use_dual = true;
        self
    }

    pub fn with_dual(mut self, use_dual: bool) -> Self {
        self.use_dual = use_dual;
        self
    }

    pub fn kind(&self) -> &ConeKind {
        &self.kind
    }

    pub fn use_dual(&self) -> bool {
        self.use_dual
    }

    /// Short lowercase name, also used as the tag in the model text format.
    pub fn tag(&self) -> &'static str {
        match self.kind {
            ConeKind::Nonneg { .. } => "nonneg",
            ConeKind::PsdSvec { .. } => "psd",
            ConeKind::LinfEpi { .. } => "linf",
            ConeKind::L2Epi { .. } => "l2",
            ConeKind::SqrEpi { .. } => "sqr",
            ConeKind::GenPower { .. } => "gpower",
            ConeKind::PowerMean { .. } => "power",
            ConeKind::GeoMean { .. } => "geomean",
            ConeKind::LogPersp { .. } => "log",
            ConeKind::Lmi { .. } => "lmi",
            ConeKind::WsosDualScalar { .. } => "wsosdual",
        }
    }

    /// Vectorized dimension `q_k`.
    pub fn dim(&self) -> usize {
        match &self.kind {
            ConeKind::Nonneg { dim } => *dim,
            ConeKind::PsdSvec { side } => sdim(*side),
            ConeKind::LinfEpi { dim } | ConeKind::L2Epi { dim } => 1 + dim,
            ConeKind::SqrEpi { dim } => 2 + dim,
            ConeKind::GenPower { alpha, dim_w } => alpha.len() + dim_w,
            ConeKind::PowerMean { alpha } => 1 + alpha.len(),
            ConeKind::GeoMean { dim } => 1 + dim,
            ConeKind::LogPersp { dim } => 2 + dim,
            ConeKind::Lmi { mats } => mats.len(),
            ConeKind::WsosDualScalar { points, .. } => *points,
        }
    }

    /// Barrier parameter `ν`.
    pub fn nu(&self) -> f64 {
        match &self.kind {
            ConeKind::Nonneg { dim } => *dim as f64,
            ConeKind::PsdSvec { side } => *side as f64,
            ConeKind::LinfEpi { dim } => 1.0 + *dim as f64,
            ConeKind::L2Epi { .. } | ConeKind::SqrEpi { .. } => 2.0,
            ConeKind::GenPower { alpha, .. } => 1.0 + alpha.len() as f64,
            ConeKind::PowerMean { alpha } => 1.0 + alpha.len() as f64,
            ConeKind::GeoMean { dim } => 1.0 + *dim as f64,
            ConeKind::LogPersp { dim } => 2.0 + *dim as f64,
            ConeKind::Lmi { mats } => mats[0].nrows() as f64,
            ConeKind::WsosDualScalar { mats, .. } => mats.iter().map(|p| p.ncols()).sum::<usize>() as f64,
        }
    }

    /// Whether the oracles are implemented through a slice of the PSD cone.
    pub fn is_slice(&self) -> bool {
        matches!(
            self.kind,
            ConeKind::PsdSvec { .. } | ConeKind::Lmi { .. } | ConeKind::WsosDualScalar { .. }
        )
    }

    /// Initial interior point of the barrier cone; the central point where
    /// it has a closed form.
    pub fn initial_point(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.dim()];
        match &self.kind {
            ConeKind::Nonneg { .. } | ConeKind::WsosDualScalar { .. } => t.fill(1.0),
            ConeKind::PsdSvec { side } => {
                let mut k = 0;
                for j in 0..*side {
                    k += j;
                    t[k] = 1.0;
                    k += 1;
                }
            }
            ConeKind::LinfEpi { dim } => t[0] = (1.0 + *dim as f64).sqrt(),
            ConeKind::L2Epi { .. } => t[0] = std::f64::consts::SQRT_2,
            ConeKind::SqrEpi { .. } => {
                t[0] = 1.0;
                t[1] = 1.0;
            }
            ConeKind::GenPower { alpha, .. } => {
                for (ti, a) in t.iter_mut().zip(alpha) {
                    *ti = (1.0 + a).sqrt();
                }
            }
            ConeKind::PowerMean { alpha } => power::mean_initial_point(alpha.len(), &mut t),
            ConeKind::GeoMean { dim } => power::mean_initial_point(*dim, &mut t),
            ConeKind::LogPersp { .. } => {
                t.fill(1.0);
                t[0] = -1.0;
            }
            ConeKind::Lmi { .. } => t[0] = 1.0,
        }
        t
    }

    pub(crate) fn barrier(&self) -> Box<dyn Barrier> {
        match &self.kind {
            ConeKind::Nonneg { dim } => Box::new(nonneg::NonnegBarrier::new(*dim)),
            ConeKind::PsdSvec { side } => Box::new(slice::SliceBarrier::psd(*side)),
            ConeKind::LinfEpi { dim } => Box::new(epinorm::LinfBarrier::new(*dim)),
            ConeKind::L2Epi { dim } => Box::new(epinorm::EuclBarrier::l2(*dim)),
            ConeKind::SqrEpi { dim } => Box::new(epinorm::EuclBarrier::sqr(*dim)),
            ConeKind::GenPower { alpha, dim_w } => Box::new(power::GenPowerBarrier::new(alpha.clone(), *dim_w)),
            ConeKind::PowerMean { alpha } => Box::new(power::PowerMeanBarrier::new(alpha.clone())),
            ConeKind::GeoMean { dim } => {
                Box::new(power::PowerMeanBarrier::new(vec![1.0 / *dim as f64; *dim]))
            }
            ConeKind::LogPersp { dim } => Box::new(logpersp::LogPerspBarrier::new(*dim)),
            ConeKind::Lmi { mats } => Box::new(slice::SliceBarrier::lmi(mats.clone())),
            ConeKind::WsosDualScalar { mats, .. } => Box::new(slice::SliceBarrier::wsos(mats.clone())),
        }
    }
}

fn check_exponents(alpha: &[f64]) -> Result<(), ConeError> {
    if alpha.is_empty() {
        return Err(ConeError::InvalidParameters("exponent vector is empty".into()));
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(ConeError::InvalidParameters("exponents must be strictly positive".into()));
    }
    let sum: f64 = alpha.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(ConeError::InvalidParameters(format!("exponents sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Per-cone barrier kernel. `load` runs the feasibility check and caches
/// whatever the other oracles need; the other methods may assume the last
/// `load` succeeded.
pub(crate) trait Barrier: Send {
    fn load(&mut self, s: &[f64]) -> bool;
    fn gradient(&mut self, g: &mut [f64]);
    fn hess_prod(&mut self, delta: &[f64], out: &mut [f64]);
    fn hessian(&mut self) -> DMatrix<f64>;
    fn too(&mut self, delta: &[f64], out: &mut [f64]);

    /// Closed-form inverse Hessian product; `false` means not available and
    /// the workspace falls back to a Cholesky factorization of `hessian`.
    fn inv_hess_prod(&mut self, _r: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Strict membership of `z` in the dual cone, where a check exists.
    fn dual_feasible(&self, _z: &[f64]) -> Option<bool> {
        None
    }

    fn slice_frames(&self) -> Option<Vec<SliceFrame>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Unknown,
    Yes,
    No,
}

/// Mutable oracle state for one cone: the last point checked, its
/// feasibility, and the cached gradient / Hessian factorization.
///
/// A workspace belongs to one solve and must not be shared across threads
/// concurrently.
pub struct OracleWorkspace {
    cone: Arc<ConeDescriptor>,
    kernel: Box<dyn Barrier>,
    last_point: Vec<f64>,
    feasible: Feasibility,
    grad: Option<Vec<f64>>,
    hess_chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    scratch: Vec<f64>,
}

impl std::fmt::Debug for OracleWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleWorkspace")
            .field("cone", &self.cone.tag())
            .field("feasible", &self.feasible)
            .finish()
    }
}

impl Clone for OracleWorkspace {
    fn clone(&self) -> Self {
        OracleWorkspace::new(self.cone.clone())
    }
}

impl OracleWorkspace {
    pub fn new(cone: impl Into<Arc<ConeDescriptor>>) -> Self {
        let cone = cone.into();
        let dim = cone.dim();
        OracleWorkspace {
            kernel: cone.barrier(),
            cone,
            last_point: Vec::with_capacity(dim),
            feasible: Feasibility::Unknown,
            grad: None,
            hess_chol: None,
            scratch: vec![0.0; dim],
        }
    }

    pub fn cone(&self) -> &ConeDescriptor {
        &self.cone
    }

    pub fn dim(&self) -> usize {
        self.cone.dim()
    }

    pub fn nu(&self) -> f64 {
        self.cone.nu()
    }

    pub fn feasibility(&self) -> Feasibility {
        self.feasible
    }

    pub fn last_point(&self) -> &[f64] {
        &self.last_point
    }

    /// Strict feasibility check of the barrier cone at `s`; caches the
    /// factorizations on success.
    pub fn is_feasible(&mut self, s: &[f64]) -> bool {
        if self.feasible != Feasibility::Unknown && s == self.last_point.as_slice() {
            return self.feasible == Feasibility::Yes;
        }
        self.last_point.clear();
        self.last_point.extend_from_slice(s);
        self.grad = None;
        self.hess_chol = None;
        let ok = s.len() == self.dim() && s.iter().all(|x| x.is_finite()) && self.kernel.load(s);
        self.feasible = if ok { Feasibility::Yes } else { Feasibility::No };
        ok
    }

    fn ensure(&mut self, s: &[f64]) -> Result<(), ConeError> {
        if s.len() != self.dim() {
            return Err(ConeError::DimensionMismatch { expected: self.dim(), got: s.len() });
        }
        if self.is_feasible(s) {
            Ok(())
        } else {
            Err(ConeError::OracleMisuse)
        }
    }

    pub fn gradient(&mut self, s: &[f64]) -> Result<&[f64], ConeError> {
        self.ensure(s)?;
        if self.grad.is_none() {
            let mut g = vec![0.0; self.dim()];
            self.kernel.gradient(&mut g);
            self.grad = Some(g);
        }
        Ok(self.grad.as_deref().unwrap())
    }

    pub fn hessian_apply(&mut self, s: &[f64], delta: &[f64], out: &mut [f64]) -> Result<(), ConeError> {
        self.ensure(s)?;
        check_len(self.dim(), delta)?;
        check_len(self.dim(), out)?;
        self.kernel.hess_prod(delta, out);
        Ok(())
    }

    /// Explicit dense Hessian at `s`.
    pub fn hessian(&mut self, s: &[f64]) -> Result<DMatrix<f64>, ConeError> {
        self.ensure(s)?;
        Ok(self.kernel.hessian())
    }

    /// `H(s)⁻¹ r`, with one round of iterative refinement when the solve
    /// goes through a Cholesky factorization of the explicit Hessian.
    pub fn hessian_solve(&mut self, s: &[f64], r: &[f64], out: &mut [f64]) -> Result<(), ConeError> {
        self.ensure(s)?;
        check_len(self.dim(), r)?;
        check_len(self.dim(), out)?;
        if self.kernel.inv_hess_prod(r, out) {
            return Ok(());
        }
        if self.hess_chol.is_none() {
            let h = self.kernel.hessian();
            let chol = linalg::cholesky_with_floor(h, 1e-15).ok_or(ConeError::NumericalFailure)?;
            self.hess_chol = Some(chol);
        }
        let chol = self.hess_chol.as_ref().unwrap();
        let mut x = nalgebra::DVector::from_column_slice(r);
        chol.solve_mut(&mut x);
        // one refinement pass against the matrix-free Hessian product
        let mut hx = std::mem::take(&mut self.scratch);
        self.kernel.hess_prod(x.as_slice(), &mut hx);
        let mut res = nalgebra::DVector::from_iterator(r.len(), r.iter().zip(&hx).map(|(a, b)| a - b));
        self.scratch = hx;
        chol.solve_mut(&mut res);
        x += res;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ConeError::NumericalFailure);
        }
        out.copy_from_slice(x.as_slice());
        Ok(())
    }

    pub fn too(&mut self, s: &[f64], delta: &[f64], out: &mut [f64]) -> Result<(), ConeError> {
        self.ensure(s)?;
        check_len(self.dim(), delta)?;
        check_len(self.dim(), out)?;
        self.kernel.too(delta, out);
        Ok(())
    }

    /// Strict dual cone membership of `z`; `None` when the cone has no
    /// dual feasibility check.
    pub fn dual_feasible(&self, z: &[f64]) -> Option<bool> {
        if z.len() != self.dim() || z.iter().any(|x| !x.is_finite()) {
            return Some(false);
        }
        self.kernel.dual_feasible(z)
    }
}

fn check_len(expected: usize, v: &[f64]) -> Result<(), ConeError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(ConeError::DimensionMismatch { expected, got: v.len() })
    }
}

/// Barrier parameter `ν` of a cone.
pub fn barrier_parameter(cone: &ConeDescriptor) -> f64 {
    cone.nu()
}

/// Strict interior membership of `s` in the barrier cone.
pub fn is_feasible(cone: &ConeDescriptor, s: &[f64]) -> bool {
    OracleWorkspace::new(cone.clone()).is_feasible(s)
}

pub fn gradient(cone: &ConeDescriptor, s: &[f64]) -> Result<Vec<f64>, ConeError> {
    OracleWorkspace::new(cone.clone()).gradient(s).map(<[f64]>::to_vec)
}

pub fn hessian_apply(cone: &ConeDescriptor, s: &[f64], delta: &[f64]) -> Result<Vec<f64>, ConeError> {
    let mut out = vec![0.0; cone.dim()];
    OracleWorkspace::new(cone.clone()).hessian_apply(s, delta, &mut out)?;
    Ok(out)
}

pub fn hessian_solve(cone: &ConeDescriptor, s: &[f64], r: &[f64]) -> Result<Vec<f64>, ConeError> {
    let mut out = vec![0.0; cone.dim()];
    OracleWorkspace::new(cone.clone()).hessian_solve(s, r, &mut out)?;
    Ok(out)
}

pub fn too(cone: &ConeDescriptor, s: &[f64], delta: &[f64]) -> Result<Vec<f64>, ConeError> {
    let mut out = vec![0.0; cone.dim()];
    OracleWorkspace::new(cone.clone()).too(s, delta, &mut out)?;
    Ok(out)
}

pub fn initial_point(cone: &ConeDescriptor) -> Vec<f64> {
    cone.initial_point()
}

/// Linear maps `Λ` and adjoints `Λ*` of a slice-type cone (one per PSD
/// block for WSOS cones with several weight polynomials).
pub fn slice_frame(cone: &ConeDescriptor) -> Result<Vec<SliceFrame>, ConeError> {
    cone.barrier().slice_frames().ok_or(ConeError::UnsupportedCone(cone.tag()))
}
