//! Shared fixtures: a catalogue covering every cone kind, an interior point
//! sampler and a few tiny models with known answers.
#![allow(dead_code)]

use std::sync::Arc;

use conic_core::cones::{self, ConeDescriptor};
use conic_core::model::{build_model, initial_iterate, preprocess, EmbeddedSystem, Preprocessed};
use conic_core::{ConicModel, IteratePoint, OracleWorkspace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖a - b‖∞ / max(‖b‖∞, floor)`
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / norm_inf(b).max(floor)
}

/// One cone of every kind. LMI and WSOS data are random but fixed by `seed`.
pub fn catalogue(seed: u64) -> Vec<(&'static str, ConeDescriptor)> {
    let mut r = rng(seed);
    let side = 3;
    let mut mats = Vec::new();
    let b = normal_matrix(&mut r, side, side);
    mats.push(&b * b.transpose() + DMatrix::identity(side, side));
    for _ in 0..3 {
        let m = normal_matrix(&mut r, side, side);
        mats.push(&m + m.transpose());
    }
    let p0 = normal_matrix(&mut r, 7, 3);
    let p1 = normal_matrix(&mut r, 7, 2);
    vec![
        ("nonneg", ConeDescriptor::nonneg(4).unwrap()),
        ("psd", ConeDescriptor::psd(3).unwrap()),
        ("linf", ConeDescriptor::linf(4).unwrap()),
        ("l2", ConeDescriptor::l2(4).unwrap()),
        ("sqr", ConeDescriptor::sqr(3).unwrap()),
        ("gpower", ConeDescriptor::gen_power(vec![0.3, 0.2, 0.5], 2).unwrap()),
        ("power", ConeDescriptor::power_mean(vec![0.2, 0.3, 0.5]).unwrap()),
        ("geo", ConeDescriptor::geo_mean(4).unwrap()),
        ("log", ConeDescriptor::log_persp(3).unwrap()),
        ("lmi", ConeDescriptor::lmi(mats).unwrap()),
        ("wsos", ConeDescriptor::wsos_dual(vec![p0, p1]).unwrap()),
    ]
}

/// Cones whose initial point is the analytic central point `t = -g(t)`.
pub fn has_central_initial_point(name: &str) -> bool {
    matches!(name, "nonneg" | "psd" | "linf" | "l2" | "sqr" | "gpower" | "geo")
}

/// Largest `α` with `s + αd` feasible, capped at `cap`, by doubling and
/// bisection.
pub fn max_step(ws: &mut OracleWorkspace, s: &[f64], d: &[f64], cap: f64) -> f64 {
    let at = |a: f64| -> Vec<f64> { s.iter().zip(d).map(|(x, y)| x + a * y).collect() };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ws.is_feasible(&at(hi)) {
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            return cap;
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ws.is_feasible(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Random interior point: the initial point moved a random fraction (at
/// most `reach`) of the way to the boundary along a random direction, then
/// scaled by a random positive factor.
pub fn interior_point_with_reach(cone: &ConeDescriptor, rng: &mut ChaCha8Rng, reach: f64) -> Vec<f64> {
    let mut ws = OracleWorkspace::new(cone.clone());
    let t = cone.initial_point();
    let mut d = normal_vec(rng, t.len());
    let scale = norm(&t) / norm(&d);
    d.iter_mut().for_each(|x| *x *= scale);
    let amax = max_step(&mut ws, &t, &d, 4.0);
    let a = rng.random_range(0.0..reach) * amax;
    let theta = (rng.random_range(-1.5..1.5f64)).exp();
    let s: Vec<f64> = t.iter().zip(&d).map(|(x, y)| theta * (x + a * y)).collect();
    assert!(ws.is_feasible(&s), "sampler produced an infeasible point");
    s
}

pub fn interior_point(cone: &ConeDescriptor, rng: &mut ChaCha8Rng) -> Vec<f64> {
    interior_point_with_reach(cone, rng, 0.9)
}

/// Direction of norm `‖s‖`.
pub fn direction(s: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut d = normal_vec(rng, s.len());
    let k = norm(s) / norm(&d);
    d.iter_mut().for_each(|x| *x *= k);
    d
}

pub fn grad(cone: &ConeDescriptor, s: &[f64]) -> Vec<f64> {
    cones::gradient(cone, s).unwrap()
}

pub fn hess(cone: &ConeDescriptor, s: &[f64], d: &[f64]) -> Vec<f64> {
    cones::hessian_apply(cone, s, d).unwrap()
}

pub fn too(cone: &ConeDescriptor, s: &[f64], d: &[f64]) -> Vec<f64> {
    cones::too(cone, s, d).unwrap()
}

fn lp(c: &[f64], g: DMatrix<f64>, h: &[f64]) -> ConicModel {
    let n = c.len();
    let q = h.len();
    build_model(
        DVector::from_column_slice(c),
        DMatrix::zeros(0, n),
        DVector::zeros(0),
        g,
        DVector::from_column_slice(h),
        vec![ConeDescriptor::nonneg(q).unwrap()],
    )
    .unwrap()
}

/// `min x  s.t.  x ≥ 1`, optimum 1.
pub fn tiny_lp() -> ConicModel {
    lp(&[1.0], DMatrix::from_element(1, 1, -1.0), &[-1.0])
}

/// `x ≥ 1` and `-x ≥ 0`: primal infeasible.
pub fn infeasible_lp() -> ConicModel {
    lp(&[1.0], DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]), &[-1.0, 0.0])
}

/// `min -x  s.t.  x ≥ 0`: unbounded, dual infeasible.
pub fn unbounded_lp() -> ConicModel {
    lp(&[-1.0], DMatrix::from_element(1, 1, -1.0), &[0.0])
}

/// Reduced system, initial iterate and fresh oracle workspaces.
pub fn embed(model: &ConicModel) -> (EmbeddedSystem, IteratePoint, Vec<OracleWorkspace>) {
    let Preprocessed::Ready(pre) = preprocess(Arc::new(model.clone())) else {
        panic!("model is inconsistent");
    };
    let w = initial_iterate(&pre).unwrap();
    let sys = pre.system().clone();
    let ws = sys.cones.iter().map(|k| OracleWorkspace::new(k.clone())).collect();
    (sys, w, ws)
}

/// A model mixing every cone kind, with a couple of equality rows.
pub fn mixed_model(seed: u64) -> ConicModel {
    let mut r = rng(seed);
    let cones: Vec<ConeDescriptor> = catalogue(seed).into_iter().map(|(_, k)| k).collect();
    let q: usize = cones.iter().map(|k| k.dim()).sum();
    let n = 6;
    let p = 2;
    let g = normal_matrix(&mut r, q, n);
    // h = G x0 + s0 with s0 interior makes the primal strictly feasible
    let x0 = DVector::from_vec(normal_vec(&mut r, n));
    let mut s0 = Vec::new();
    for k in &cones {
        s0.extend(interior_point(k, &mut r));
    }
    let h = &g * &x0 + DVector::from_vec(s0);
    let a = normal_matrix(&mut r, p, n);
    let b = &a * &x0;
    let c = DVector::from_vec(normal_vec(&mut r, n));
    build_model(c, a, b, g, h, cones).unwrap()
}

/// `a·b` in roughly twice the working precision (compensated dot product
/// with error-free transformations).
pub fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let pe = x.mul_add(*y, -p);
        let t = s + p;
        let z = t - s;
        let se = (s - (t - z)) + (p - z);
        s = t;
        c += pe + se;
    }
    s + c
}

/// Dense reference solve of `M x = b`: LU followed by refinement with
/// residuals accumulated by [`dot2`], so the result is accurate to working
/// precision whenever `cond(M)·ε` is well below one.
pub fn refined_solve(m: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let lu = m.clone().lu();
    let mut x = lu.solve(&DVector::from_column_slice(b)).expect("nonsingular system");
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect();
    for _ in 0..6 {
        let r = DVector::from_iterator(
            b.len(),
            rows.iter().zip(b).map(|(row, bi)| {
                let mut aug = row.clone();
                aug.push(-1.0);
                let mut xv = x.as_slice().to_vec();
                xv.push(*bi);
                -dot2(&aug, &xv)
            }),
        );
        let dx = lu.solve(&r).expect("nonsingular system");
        x += dx;
    }
    x.as_slice().to_vec()
}
