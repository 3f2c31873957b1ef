//! Desk-scale instance generators.
//!
//! Every generator is a deterministic function of its [`InstanceSpec`]: the
//! random stream is a ChaCha8 generator seeded from the spec seed, so the same
//! spec always produces a bit-identical model.

use std::fmt;

use conic_core::linalg::svec;
use conic_core::model::build_model;
use conic_core::{ConeDescriptor, ConicModel, SolveStatus};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::BenchError;

/// Largest column count for which the LP optimum is computed by enumerating
/// basic solutions.
pub const ENUMERATION_MAX_N: usize = 14;

/// Second-order cone used for the portfolio risk constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RiskCone {
    /// `(γ, F x) ∈ K_ℓ2`
    L2,
    /// `(γ²/2, 1, F x) ∈ K_sqr`
    Sqr,
}

/// Cone used for the volume objective of the maximum volume instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolumeCone {
    GeoMean,
    PowerMean,
    GenPower,
    LogPersp,
}

impl RiskCone {
    fn as_str(self) -> &'static str {
        match self {
            RiskCone::L2 => "l2",
            RiskCone::Sqr => "sqr",
        }
    }
}

impl VolumeCone {
    fn as_str(self) -> &'static str {
        match self {
            VolumeCone::GeoMean => "geo",
            VolumeCone::PowerMean => "power",
            VolumeCone::GenPower => "gpower",
            VolumeCone::LogPersp => "log",
        }
    }
}

/// Generator name, size parameters and seed.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSpec {
    /// Feasible, bounded standard-form LP `min c'x, Ax = b, x ≥ 0`.
    LpRandom { n: usize, p: usize, seed: u64 },
    /// Standard-form LP with a planted Farkas ray.
    LpInfeasible { n: usize, p: usize, seed: u64 },
    /// Long-only portfolio with box deviations and a factor risk bound
    /// (cones K≥, Kℓ∞ and Kℓ2 or Ksqr).
    Portfolio { d: usize, risk: RiskCone, seed: u64 },
    /// Maximum volume box inside an ellipsoid and an ℓ1 ball.
    MaxVolume { d: usize, cone: VolumeCone, seed: u64 },
    /// Smallest maximum eigenvalue of an affine pencil whose minimum
    /// eigenvalue is at least one (cones Klmi and Kpsd).
    LmiCondnum { side: usize, m: usize, seed: u64 },
    /// Lower bound of a univariate polynomial of degree `2·half_degree` on
    /// `[-1, 1]` via the interpolant WSOS cone.
    WsosPolymin { half_degree: usize, seed: u64 },
}

/// Generated model with whatever reference answer is known.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub spec: InstanceSpec,
    pub model: ConicModel,
    /// Expected terminal status.
    pub expected: SolveStatus,
    /// Optimal objective from an independent oracle, when available.
    pub known_objective: Option<f64>,
    /// Factor by which the solver tolerances should be loosened.
    pub loosen: f64,
}

impl InstanceSpec {
    pub const GENERATORS: [&'static str; 6] =
        ["lp_random", "lp_infeasible", "portfolio", "maxvolume", "lmi_condnum", "wsos_polymin"];

    pub fn generator(&self) -> &'static str {
        match self {
            InstanceSpec::LpRandom { .. } => "lp_random",
            InstanceSpec::LpInfeasible { .. } => "lp_infeasible",
            InstanceSpec::Portfolio { .. } => "portfolio",
            InstanceSpec::MaxVolume { .. } => "maxvolume",
            InstanceSpec::LmiCondnum { .. } => "lmi_condnum",
            InstanceSpec::WsosPolymin { .. } => "wsos_polymin",
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            InstanceSpec::LpRandom { seed, .. }
            | InstanceSpec::LpInfeasible { seed, .. }
            | InstanceSpec::Portfolio { seed, .. }
            | InstanceSpec::MaxVolume { seed, .. }
            | InstanceSpec::LmiCondnum { seed, .. }
            | InstanceSpec::WsosPolymin { seed, .. } => seed,
        }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            InstanceSpec::LpRandom { seed, .. }
            | InstanceSpec::LpInfeasible { seed, .. }
            | InstanceSpec::Portfolio { seed, .. }
            | InstanceSpec::MaxVolume { seed, .. }
            | InstanceSpec::LmiCondnum { seed, .. }
            | InstanceSpec::WsosPolymin { seed, .. } => *seed = new_seed,
        }
        self
    }

    /// Default sizes for a generator name.
    pub fn default_for(generator: &str, seed: u64) -> Result<Self, BenchError> {
        Ok(match generator {
            "lp_random" => InstanceSpec::LpRandom { n: 10, p: 3, seed },
            "lp_infeasible" => InstanceSpec::LpInfeasible { n: 10, p: 4, seed },
            "portfolio" => InstanceSpec::Portfolio { d: 8, risk: RiskCone::L2, seed },
            "maxvolume" => InstanceSpec::MaxVolume { d: 6, cone: VolumeCone::GeoMean, seed },
            "lmi_condnum" => InstanceSpec::LmiCondnum { side: 4, m: 3, seed },
            "wsos_polymin" => InstanceSpec::WsosPolymin { half_degree: 3, seed },
            other => return Err(BenchError::Spec(format!("unknown generator '{other}'"))),
        })
    }

    /// Parses `name` or `name:key=value,key=value`. Keys: `n`, `p` (LPs),
    /// `d`, `risk=l2|sqr` (portfolio), `d`, `cone=geo|power|gpower|log`
    /// (maxvolume), `side`, `m` (lmi_condnum), `half_degree` (wsos_polymin).
    pub fn parse(text: &str, seed: u64) -> Result<Self, BenchError> {
        let (name, params) = match text.split_once(':') {
            Some((name, params)) => (name.trim(), params),
            None => (text.trim(), ""),
        };
        let mut spec = Self::default_for(name, seed)?;
        for kv in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| BenchError::Spec(format!("expected key=value, got '{kv}'")))?;
            let num = || {
                value
                    .parse::<usize>()
                    .map_err(|_| BenchError::Spec(format!("'{key}' needs a nonnegative integer, got '{value}'")))
            };
            match (&mut spec, key) {
                (InstanceSpec::LpRandom { n, .. } | InstanceSpec::LpInfeasible { n, .. }, "n") => *n = num()?,
                (InstanceSpec::LpRandom { p, .. } | InstanceSpec::LpInfeasible { p, .. }, "p") => *p = num()?,
                (InstanceSpec::Portfolio { d, .. } | InstanceSpec::MaxVolume { d, .. }, "d") => *d = num()?,
                (InstanceSpec::Portfolio { risk, .. }, "risk") => {
                    *risk = match value {
                        "l2" => RiskCone::L2,
                        "sqr" => RiskCone::Sqr,
                        _ => return Err(BenchError::Spec(format!("unknown risk cone '{value}'"))),
                    }
                }
                (InstanceSpec::MaxVolume { cone, .. }, "cone") => {
                    *cone = match value {
                        "geo" => VolumeCone::GeoMean,
                        "power" => VolumeCone::PowerMean,
                        "gpower" => VolumeCone::GenPower,
                        "log" => VolumeCone::LogPersp,
                        _ => return Err(BenchError::Spec(format!("unknown volume cone '{value}'"))),
                    }
                }
                (InstanceSpec::LmiCondnum { side, .. }, "side") => *side = num()?,
                (InstanceSpec::LmiCondnum { m, .. }, "m") => *m = num()?,
                (InstanceSpec::WsosPolymin { half_degree, .. }, "half_degree") => *half_degree = num()?,
                _ => return Err(BenchError::Spec(format!("parameter '{key}' does not apply to {name}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: &str| Err(BenchError::Spec(format!("{}: {msg}", self.generator())));
        match *self {
            InstanceSpec::LpRandom { n, p, .. } | InstanceSpec::LpInfeasible { n, p, .. } => {
                if p == 0 || n <= p {
                    return bad("need 0 < p < n");
                }
            }
            InstanceSpec::Portfolio { d, .. } | InstanceSpec::MaxVolume { d, .. } => {
                if d < 2 {
                    return bad("need d ≥ 2");
                }
            }
            InstanceSpec::LmiCondnum { side, m, .. } => {
                if side == 0 || m == 0 {
                    return bad("need side ≥ 1 and m ≥ 1");
                }
            }
            InstanceSpec::WsosPolymin { half_degree, .. } => {
                if half_degree == 0 {
                    return bad("need half_degree ≥ 1");
                }
            }
        }
        Ok(())
    }

    /// Instance label used in CSV output.
    pub fn name(&self) -> String {
        match *self {
            InstanceSpec::LpRandom { n, p, seed } => format!("lp_random_n{n}_p{p}_s{seed}"),
            InstanceSpec::LpInfeasible { n, p, seed } => format!("lp_infeasible_n{n}_p{p}_s{seed}"),
            InstanceSpec::Portfolio { d, risk, seed } => format!("portfolio_{}_d{d}_s{seed}", risk.as_str()),
            InstanceSpec::MaxVolume { d, cone, seed } => format!("maxvolume_{}_d{d}_s{seed}", cone.as_str()),
            InstanceSpec::LmiCondnum { side, m, seed } => format!("lmi_condnum_side{side}_m{m}_s{seed}"),
            InstanceSpec::WsosPolymin { half_degree, seed } => format!("wsos_polymin_hd{half_degree}_s{seed}"),
        }
    }
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Builds the model for `spec`.
pub fn generate(spec: &InstanceSpec) -> Result<Instance, BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed());
    let (model, expected, known_objective) = match *spec {
        InstanceSpec::LpRandom { n, p, .. } => lp_random(&mut rng, n, p)?,
        InstanceSpec::LpInfeasible { n, p, .. } => lp_infeasible(&mut rng, n, p)?,
        InstanceSpec::Portfolio { d, risk, .. } => portfolio(&mut rng, d, risk)?,
        InstanceSpec::MaxVolume { d, cone, .. } => maxvolume(&mut rng, d, cone)?,
        InstanceSpec::LmiCondnum { side, m, .. } => lmi_condnum(&mut rng, side, m)?,
        InstanceSpec::WsosPolymin { half_degree, .. } => wsos_polymin(half_degree, &mut rng)?,
    };
    Ok(Instance { name: spec.name(), spec: spec.clone(), model, expected, known_objective, loosen: 1.0 })
}

/// Default benchmark suite: 22 instances, every cone kind at least once,
/// `n + p + q ≤ 400` for each.
pub fn default_suite() -> Vec<InstanceSpec> {
    use InstanceSpec::*;
    vec![
        LpRandom { n: 10, p: 3, seed: 7 },
        LpRandom { n: 12, p: 5, seed: 2 },
        LpRandom { n: 30, p: 10, seed: 3 },
        LpRandom { n: 60, p: 20, seed: 4 },
        LpInfeasible { n: 10, p: 4, seed: 1 },
        LpInfeasible { n: 20, p: 6, seed: 2 },
        Portfolio { d: 8, risk: RiskCone::L2, seed: 1 },
        Portfolio { d: 20, risk: RiskCone::L2, seed: 2 },
        Portfolio { d: 12, risk: RiskCone::Sqr, seed: 3 },
        Portfolio { d: 30, risk: RiskCone::Sqr, seed: 4 },
        MaxVolume { d: 6, cone: VolumeCone::GeoMean, seed: 1 },
        MaxVolume { d: 12, cone: VolumeCone::GeoMean, seed: 2 },
        MaxVolume { d: 8, cone: VolumeCone::PowerMean, seed: 3 },
        MaxVolume { d: 6, cone: VolumeCone::GenPower, seed: 4 },
        MaxVolume { d: 10, cone: VolumeCone::GenPower, seed: 5 },
        MaxVolume { d: 8, cone: VolumeCone::LogPersp, seed: 6 },
        LmiCondnum { side: 4, m: 3, seed: 1 },
        LmiCondnum { side: 6, m: 4, seed: 2 },
        LmiCondnum { side: 8, m: 6, seed: 3 },
        WsosPolymin { half_degree: 2, seed: 1 },
        WsosPolymin { half_degree: 4, seed: 2 },
        WsosPolymin { half_degree: 6, seed: 3 },
    ]
}

type Generated = (ConicModel, SolveStatus, Option<f64>);

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // filled row by row so the stream order does not depend on storage order
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = normal(rng);
        }
    }
    m
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.random_range(lo..hi)))
}

fn normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| normal(rng)))
}

fn cone(result: Result<ConeDescriptor, conic_core::ConeError>) -> Result<ConeDescriptor, BenchError> {
    result.map_err(|e| BenchError::Generator(e.to_string()))
}

fn model(
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    cones: Vec<ConeDescriptor>,
) -> Result<ConicModel, BenchError> {
    build_model(c, a, b, g, h, cones).map_err(|e| BenchError::Generator(e.to_string()))
}

/// `x ≥ 0` written as `0 - (-I) x ∈ K≥`.
fn nonneg_rows(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    (-DMatrix::identity(n, n), DVector::zeros(n))
}

fn lp_random(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Result<Generated, BenchError> {
    let a = normal_matrix(rng, p, n);
    let x0 = uniform_vector(rng, n, 0.5, 1.5);
    let y0 = normal_vector(rng, p);
    let z0 = uniform_vector(rng, n, 0.5, 1.5);
    // strictly feasible primal x0 and dual (y0, z0)
    let b = &a * &x0;
    let c = &z0 - a.transpose() * &y0;
    let known = if n <= ENUMERATION_MAX_N { enumerate_lp_optimum(&c, &a, &b) } else { None };
    let (g, h) = nonneg_rows(n);
    let m = model(c, a, b, g, h, vec![cone(ConeDescriptor::nonneg(n))?])?;
    Ok((m, SolveStatus::Optimal, known))
}

/// Best objective over all basic feasible solutions of `Ax = b, x ≥ 0`.
/// Exponential in `n`; only for tiny sizes.
pub fn enumerate_lp_optimum(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Option<f64> {
    let (p, n) = a.shape();
    let mut best: Option<f64> = None;
    let mut basis: Vec<usize> = (0..p).collect();
    loop {
        let ab = DMatrix::from_fn(p, p, |i, j| a[(i, basis[j])]);
        let lu = ab.clone().lu();
        if let Some(xb) = lu.solve(b) {
            let scale = 1.0 + xb.amax();
            if xb.iter().all(|v| v.is_finite()) && xb.min() >= -1e-10 * scale {
                let resid = (&ab * &xb - b).amax();
                if resid <= 1e-9 * (1.0 + b.amax()) {
                    let obj: f64 = basis.iter().zip(xb.iter()).map(|(&j, v)| c[j] * v).sum();
                    best = Some(best.map_or(obj, |o| o.min(obj)));
                }
            }
        }
        // next combination in lexicographic order
        let mut i = p;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if basis[i] < n - p + i {
                basis[i] += 1;
                for k in i + 1..p {
                    basis[k] = basis[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn lp_infeasible(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Result<Generated, BenchError> {
    // planted ray: A'y* = z* > 0 and b'y* = -1, so Ax = b, x ≥ 0 is empty
    let a0 = normal_matrix(rng, p, n);
    let ystar = normal_vector(rng, p);
    let zstar = uniform_vector(rng, n, 0.1, 1.0);
    let b0 = normal_vector(rng, p);
    let c = normal_vector(rng, n);
    let yy = ystar.norm_squared();
    let a = &a0 + &ystar * (&zstar - a0.transpose() * &ystar).transpose() / yy;
    let b = &b0 - &ystar * ((b0.dot(&ystar) + 1.0) / yy);
    let (g, h) = nonneg_rows(n);
    let m = model(c, a, b, g, h, vec![cone(ConeDescriptor::nonneg(n))?])?;
    Ok((m, SolveStatus::PrimalInfeasible, None))
}

fn portfolio(rng: &mut ChaCha8Rng, d: usize, risk: RiskCone) -> Result<Generated, BenchError> {
    let k = (d / 2).max(1);
    let returns = uniform_vector(rng, d, 0.0, 1.0);
    let factors = normal_matrix(rng, k, d) * 0.3;
    let equal = DVector::from_element(d, 1.0 / d as f64);
    let gamma = 1.2 * (&factors * &equal).norm() + 1e-3;
    let delta = 1.5 / d as f64;

    let c = -returns;
    let a = DMatrix::from_element(1, d, 1.0);
    let b = DVector::from_element(1, 1.0);

    let risk_dim = match risk {
        RiskCone::L2 => 1 + k,
        RiskCone::Sqr => 2 + k,
    };
    let q = d + (1 + d) + risk_dim;
    let mut g = DMatrix::zeros(q, d);
    let mut h = DVector::zeros(q);
    let mut row = 0;
    // x ≥ 0
    for j in 0..d {
        g[(row + j, j)] = -1.0;
    }
    row += d;
    // ‖x - e/d‖∞ ≤ δ
    h[row] = delta;
    for j in 0..d {
        h[row + 1 + j] = -1.0 / d as f64;
        g[(row + 1 + j, j)] = -1.0;
    }
    row += 1 + d;
    // risk bound on F x
    let mut cones = vec![cone(ConeDescriptor::nonneg(d))?, cone(ConeDescriptor::linf(d))?];
    let lead = match risk {
        RiskCone::L2 => {
            h[row] = gamma;
            cones.push(cone(ConeDescriptor::l2(k))?);
            1
        }
        RiskCone::Sqr => {
            h[row] = 0.5 * gamma * gamma;
            h[row + 1] = 1.0;
            cones.push(cone(ConeDescriptor::sqr(k))?);
            2
        }
    };
    for i in 0..k {
        for j in 0..d {
            g[(row + lead + i, j)] = -factors[(i, j)];
        }
    }
    let m = model(c, a, b, g, h, cones)?;
    Ok((m, SolveStatus::Optimal, None))
}

fn random_weights(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn maxvolume(rng: &mut ChaCha8Rng, d: usize, kind: VolumeCone) -> Result<Generated, BenchError> {
    // variables (t, x_1..x_d); maximize t
    let n = 1 + d;
    let shape = DMatrix::identity(d, d) + normal_matrix(rng, d, d) * (0.3 / (d as f64).sqrt());
    let mut c = DVector::zeros(n);
    c[0] = -1.0;

    let (vol_dim, vol_cone) = match kind {
        VolumeCone::GeoMean => (1 + d, cone(ConeDescriptor::geo_mean(d))?),
        VolumeCone::PowerMean => (1 + d, cone(ConeDescriptor::power_mean(random_weights(rng, d)))?),
        VolumeCone::GenPower => (d + 1, cone(ConeDescriptor::gen_power(random_weights(rng, d), 1))?),
        VolumeCone::LogPersp => (2 + d, cone(ConeDescriptor::log_persp(d))?),
    };
    let q = vol_dim + (1 + d) + (1 + d);
    let mut g = DMatrix::zeros(q, n);
    let mut h = DVector::zeros(q);
    match kind {
        // hypograph (t, x)
        VolumeCone::GeoMean | VolumeCone::PowerMean => {
            for j in 0..n {
                g[(j, j)] = -1.0;
            }
        }
        // (x, t): Π x^α ≥ |t|
        VolumeCone::GenPower => {
            for j in 0..d {
                g[(j, 1 + j)] = -1.0;
            }
            g[(d, 0)] = -1.0;
        }
        // (t, 1, x): t ≤ Σ log x_i
        VolumeCone::LogPersp => {
            g[(0, 0)] = -1.0;
            h[1] = 1.0;
            for j in 0..d {
                g[(2 + j, 1 + j)] = -1.0;
            }
        }
    }
    let mut row = vol_dim;
    // ‖S x‖₂ ≤ 1
    h[row] = 1.0;
    for i in 0..d {
        for j in 0..d {
            g[(row + 1 + i, 1 + j)] = -shape[(i, j)];
        }
    }
    row += 1 + d;
    // ‖x‖₁ ≤ √d through the dual of the ℓ∞ epigraph
    h[row] = (d as f64).sqrt();
    for j in 0..d {
        g[(row + 1 + j, 1 + j)] = -1.0;
    }
    let cones = vec![vol_cone, cone(ConeDescriptor::l2(d))?, cone(ConeDescriptor::linf(d))?.dual()];
    let m = model(c, DMatrix::zeros(0, n), DVector::zeros(0), g, h, cones)?;
    Ok((m, SolveStatus::Optimal, None))
}

fn random_symmetric(rng: &mut ChaCha8Rng, side: usize) -> DMatrix<f64> {
    let b = normal_matrix(rng, side, side);
    (&b + b.transpose()) * 0.5
}

fn lmi_condnum(rng: &mut ChaCha8Rng, side: usize, m: usize) -> Result<Generated, BenchError> {
    // variables (γ, y_1..y_m); M(y) = M0 + Σ y_i M_i
    // min γ  s.t.  M(y) - I ⪰ 0 (LMI over (1, y, 1)),  γI - M(y) ⪰ 0 (PSD)
    let b = normal_matrix(rng, side, side);
    let m0 = DMatrix::identity(side, side) * 2.0 + &b * b.transpose() / side as f64;
    let pencil: Vec<DMatrix<f64>> = (0..m).map(|_| random_symmetric(rng, side)).collect();
    let n = 1 + m;
    let mut c = DVector::zeros(n);
    c[0] = 1.0;

    let lmi_dim = m + 2;
    let psd_dim = side * (side + 1) / 2;
    let q = lmi_dim + psd_dim;
    let mut g = DMatrix::zeros(q, n);
    let mut h = DVector::zeros(q);
    h[0] = 1.0;
    for i in 0..m {
        g[(1 + i, 1 + i)] = -1.0;
    }
    h[m + 1] = 1.0;
    let mut mats = Vec::with_capacity(m + 2);
    mats.push(m0.clone());
    mats.extend(pencil.iter().cloned());
    mats.push(-DMatrix::identity(side, side));

    let row = lmi_dim;
    let eye = svec(&DMatrix::identity(side, side));
    for (r, v) in svec(&m0).iter().enumerate() {
        h[row + r] = -v;
    }
    for r in 0..psd_dim {
        g[(row + r, 0)] = -eye[r];
    }
    for (i, mi) in pencil.iter().enumerate() {
        for (r, v) in svec(mi).iter().enumerate() {
            g[(row + r, 1 + i)] = *v;
        }
    }
    let cones = vec![cone(ConeDescriptor::lmi(mats))?, cone(ConeDescriptor::psd(side))?];
    let model = model(c, DMatrix::zeros(0, n), DVector::zeros(0), g, h, cones)?;
    Ok((model, SolveStatus::Optimal, None))
}

/// Chebyshev polynomials `T_0..T_{count-1}` at `t`.
fn chebyshev(t: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        out.push(match k {
            0 => 1.0,
            1 => t,
            _ => 2.0 * t * out[k - 1] - out[k - 2],
        });
    }
    out
}

/// Evaluates `Σ coef_k T_k(t)`.
pub fn chebyshev_eval(coef: &[f64], t: f64) -> f64 {
    chebyshev(t, coef.len()).iter().zip(coef).map(|(a, b)| a * b).sum()
}

/// Minimum of a Chebyshev series on `[-1, 1]`: dense grid followed by golden
/// section refinement around the best grid points.
pub fn chebyshev_min(coef: &[f64]) -> f64 {
    const GRID: usize = 20_000;
    let f = |t: f64| chebyshev_eval(coef, t);
    let step = 2.0 / GRID as f64;
    let values: Vec<f64> = (0..=GRID).map(|i| f(-1.0 + step * i as f64)).collect();
    let mut best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    for i in 0..=GRID {
        let is_local = (i == 0 || values[i] <= values[i - 1]) && (i == GRID || values[i] <= values[i + 1]);
        if !is_local {
            continue;
        }
        let (mut lo, mut hi) = ((-1.0 + step * (i as f64 - 1.0)).max(-1.0), (-1.0 + step * (i as f64 + 1.0)).min(1.0));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - ratio * (hi - lo);
            let m2 = lo + ratio * (hi - lo);
            if f(m1) <= f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best = best.min(f(0.5 * (lo + hi)));
    }
    best
}

/// Orthonormal basis of the column space.
fn orthonormalize(p: DMatrix<f64>) -> DMatrix<f64> {
    p.qr().q()
}

/// Interpolant matrices for `σ_0 + (1 - t²) σ_1` on `2·half_degree + 1`
/// Chebyshev–Lobatto points, with the points themselves.
pub fn interval_interpolant(half_degree: usize) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let u = 2 * half_degree + 1;
    let points: Vec<f64> = (0..u).map(|j| (std::f64::consts::PI * j as f64 / (u - 1) as f64).cos()).collect();
    let p0 = DMatrix::from_fn(u, half_degree + 1, |i, k| chebyshev(points[i], half_degree + 1)[k]);
    let p1 = DMatrix::from_fn(u, half_degree, |i, k| {
        (1.0 - points[i] * points[i]).max(0.0).sqrt() * chebyshev(points[i], half_degree)[k]
    });
    (points, vec![orthonormalize(p0), orthonormalize(p1)])
}

fn wsos_polymin(half_degree: usize, rng: &mut ChaCha8Rng) -> Result<Generated, BenchError> {
    // maximize γ  s.t.  p - γ is nonnegative on [-1, 1], in interpolant values;
    // the SOS cone is the dual of the WSOS dual cone
    let coef: Vec<f64> = (0..=2 * half_degree).map(|k| normal(rng) / (1.0 + k as f64)).collect();
    let (points, mats) = interval_interpolant(half_degree);
    let u = points.len();
    let h = DVector::from_iterator(u, points.iter().map(|&t| chebyshev_eval(&coef, t)));
    let g = DMatrix::from_element(u, 1, 1.0);
    let c = DVector::from_element(1, -1.0);
    let cones = vec![cone(ConeDescriptor::wsos_dual(mats))?.dual()];
    let m = model(c, DMatrix::zeros(0, 1), DVector::zeros(0), g, h, cones)?;
    Ok((m, SolveStatus::Optimal, Some(-chebyshev_min(&coef))))
}
