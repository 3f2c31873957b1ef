use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use super::text::{deserialize, serialize};
use super::*;
use crate::cones::ConeDescriptor;

fn nonneg(d: usize) -> ConeDescriptor {
    ConeDescriptor::nonneg(d).unwrap()
}

fn tiny_lp() -> ConicModel {
    build_model(dvector![1.0], DMatrix::zeros(0, 1), DVector::zeros(0), dmatrix![-1.0], dvector![-1.0], vec![nonneg(1)])
        .unwrap()
}

fn ready(model: ConicModel) -> PreprocessedModel {
    match preprocess(Arc::new(model)) {
        Preprocessed::Ready(p) => p,
        Preprocessed::Inconsistent(r) => panic!("unexpected inconsistency {r:?}"),
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    m * DVector::from_column_slice(v)
}

#[test]
fn tiny_lp_encodes_x_at_least_one() {
    let m = tiny_lp();
    assert_eq!((m.n(), m.p(), m.q()), (1, 0, 1));
    // h - Gx = x - 1
    let slack = m.h() - m.g() * dvector![3.0];
    assert_eq!(slack[0], 2.0);
    assert_eq!(m.cone_range(0), 0..1);
}

#[test]
fn cone_dimension_mismatch_is_rejected() {
    let err = build_model(dvector![1.0], DMatrix::zeros(0, 1), DVector::zeros(0), dmatrix![-1.0], dvector![-1.0], vec![
        nonneg(2),
    ])
    .unwrap_err();
    assert!(matches!(err, ModelError::DimensionMismatch { block: "h", .. }), "{err}");

    let err = build_model(dvector![1.0], DMatrix::zeros(1, 1), DVector::zeros(0), dmatrix![-1.0], dvector![-1.0], vec![
        nonneg(1),
    ])
    .unwrap_err();
    assert!(matches!(err, ModelError::DimensionMismatch { block: "A", .. }));

    let err = build_model(dvector![1.0], DMatrix::zeros(0, 1), DVector::zeros(0), dmatrix![-1.0, 0.0], dvector![-1.0], vec![
        nonneg(1),
    ])
    .unwrap_err();
    assert!(matches!(err, ModelError::DimensionMismatch { block: "G", .. }));
}

#[test]
fn non_finite_data_is_rejected() {
    let err = build_model(dvector![f64::NAN], DMatrix::zeros(0, 1), DVector::zeros(0), dmatrix![-1.0], dvector![-1.0], vec![
        nonneg(1),
    ])
    .unwrap_err();
    assert_eq!(err, ModelError::NonFinite("c"));
}

fn simplex_lp(a: DMatrix<f64>, b: DVector<f64>) -> ConicModel {
    let n = a.ncols();
    build_model(DVector::from_fn(n, |i, _| 1.0 + i as f64), a, b, -DMatrix::identity(n, n), DVector::zeros(n), vec![
        nonneg(n),
    ])
    .unwrap()
}

#[test]
fn single_equality_is_eliminated() {
    let pre = ready(simplex_lp(dmatrix![1.0, 1.0], dvector![1.0]));
    assert_eq!(pre.n_red(), 1);
    assert_eq!(pre.rank_a(), 1);
    assert_eq!(pre.system().p(), 0);
}

#[test]
fn conflicting_duplicate_rows_are_primal_infeasible() {
    let model = simplex_lp(dmatrix![1.0, 1.0; 1.0, 1.0], dvector![1.0, 2.0]);
    let rep = match preprocess(Arc::new(model.clone())) {
        Preprocessed::Inconsistent(r) => r,
        Preprocessed::Ready(_) => panic!("inconsistency not detected"),
    };
    assert_eq!(rep.status, SolveStatus::PrimalInfeasible);
    let report = CertificateReport { status: rep.status, witness: rep.witness };
    let chk = verify_certificate(&model, &report, &Tolerances::default());
    assert!(chk.passed(), "{chk:?}");
}

#[test]
fn consistent_duplicate_rows_drop_one() {
    let pre = ready(simplex_lp(dmatrix![1.0, 1.0, 1.0; 2.0, 2.0, 2.0; 1.0, -1.0, 0.0], dvector![1.0, 2.0, 0.0]));
    assert_eq!(pre.rank_a(), 2);
    assert_eq!(pre.n_red(), 1);
}

#[test]
fn redundant_objective_direction_is_dual_infeasible() {
    // x2 does not appear in the cone constraint and has a nonzero cost
    let model = build_model(
        dvector![1.0, -1.0],
        DMatrix::zeros(0, 2),
        DVector::zeros(0),
        dmatrix![-1.0, 0.0],
        dvector![0.0],
        vec![nonneg(1)],
    )
    .unwrap();
    let rep = match preprocess(Arc::new(model.clone())) {
        Preprocessed::Inconsistent(r) => r,
        Preprocessed::Ready(_) => panic!("dual inconsistency not detected"),
    };
    assert_eq!(rep.status, SolveStatus::DualInfeasible);
    let report = CertificateReport { status: rep.status, witness: rep.witness };
    assert!(verify_certificate(&model, &report, &Tolerances::default()).passed());
}

#[test]
fn redundant_zero_cost_column_is_removed() {
    let model = build_model(
        dvector![1.0, 0.0],
        DMatrix::zeros(0, 2),
        DVector::zeros(0),
        dmatrix![-1.0, 0.0],
        dvector![0.0],
        vec![nonneg(1)],
    )
    .unwrap();
    assert_eq!(ready(model).n_red(), 1);
}

#[test]
fn initial_iterate_of_tiny_lp() {
    let pre = ready(tiny_lp());
    let w = initial_iterate(&pre).unwrap();
    assert_eq!(w.s, vec![1.0]);
    assert_eq!(w.z, vec![1.0]);
    assert_eq!((w.tau, w.kappa), (1.0, 1.0));
    // -G x + h - s = x - 1 - 1 = 0
    assert!((w.x[0] - 2.0).abs() < 1e-14);
    assert!((w.mu() - 1.0).abs() < 1e-12);
    assert!((pre.lift(&w).x[0] - 2.0).abs() < 1e-14);
}

#[test]
fn initial_iterate_nonneg_is_all_ones() {
    let pre = ready(simplex_lp(dmatrix![1.0, 1.0, 1.0], dvector![1.0]));
    let w = initial_iterate(&pre).unwrap();
    assert_eq!(w.s, vec![1.0; 3]);
    assert_eq!(w.z, vec![1.0; 3]);
    assert!((w.mu() - 1.0).abs() < 1e-12);
}

#[test]
fn initial_iterate_lmi_uses_first_unit_vector() {
    let p0 = DMatrix::<f64>::identity(2, 2);
    let p1 = dmatrix![0.0, 1.0; 1.0, 0.0];
    let cone = ConeDescriptor::lmi(vec![p0, p1]).unwrap();
    let model = build_model(
        dvector![0.0, 1.0],
        DMatrix::zeros(0, 2),
        DVector::zeros(0),
        -DMatrix::<f64>::identity(2, 2),
        DVector::zeros(2),
        vec![cone.clone()],
    )
    .unwrap();
    let w = initial_iterate(&ready(model)).unwrap();
    assert_eq!(w.s, vec![1.0, 0.0]);
    let g = crate::cones::gradient(&cone, &[1.0, 0.0]).unwrap();
    assert_eq!(w.z, g.iter().map(|v| -v).collect::<Vec<_>>());
    assert!((w.mu() - 1.0).abs() < 1e-12);
}

#[test]
fn initial_mu_is_one_for_every_cone_kind() {
    let cones = vec![
        nonneg(2),
        ConeDescriptor::psd(2).unwrap(),
        ConeDescriptor::linf(2).unwrap().dual(),
        ConeDescriptor::l2(2).unwrap(),
        ConeDescriptor::sqr(2).unwrap(),
        ConeDescriptor::gen_power(vec![0.3, 0.7], 2).unwrap(),
        ConeDescriptor::power_mean(vec![0.5, 0.5]).unwrap(),
        ConeDescriptor::geo_mean(3).unwrap().dual(),
        ConeDescriptor::log_persp(2).unwrap(),
    ];
    let q: usize = cones.iter().map(|k| k.dim()).sum();
    let n = 3;
    let g = DMatrix::from_fn(q, n, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let model =
        build_model(DVector::from_element(n, 1.0), DMatrix::zeros(0, n), DVector::zeros(0), g, DVector::zeros(q), cones)
            .unwrap();
    let w = initial_iterate(&ready(model)).unwrap();
    assert!((w.mu() - 1.0).abs() < 1e-12, "mu = {}", w.mu());
}

#[test]
fn tiny_lp_optimum_verifies() {
    let model = tiny_lp();
    let report = CertificateReport {
        status: SolveStatus::Optimal,
        witness: Witness { x: vec![1.0], y: vec![], z: vec![1.0], s: vec![0.0], tau: 1.0, kappa: 0.0 },
    };
    let chk = verify_certificate(&model, &report, &Tolerances::default());
    assert!(chk.passed(), "{chk:?}");
    assert_eq!(chk.get("residual").unwrap().value, 0.0);
    assert_eq!(chk.get("gap").unwrap().value, 0.0);

    let wrong = CertificateReport {
        status: SolveStatus::Optimal,
        witness: Witness { x: vec![2.0], y: vec![], z: vec![1.0], s: vec![1.0], tau: 1.0, kappa: 0.0 },
    };
    assert!(!verify_certificate(&model, &wrong, &Tolerances::default()).passed());
}

#[test]
fn farkas_certificate_verifies() {
    // x >= 1 and -x >= 0
    let model = build_model(
        dvector![0.0],
        DMatrix::zeros(0, 1),
        DVector::zeros(0),
        dmatrix![-1.0; 1.0],
        dvector![-1.0, 0.0],
        vec![nonneg(2)],
    )
    .unwrap();
    let report = CertificateReport {
        status: SolveStatus::PrimalInfeasible,
        witness: Witness { x: vec![0.0], y: vec![], z: vec![1.0, 1.0], s: vec![0.0, 0.0], tau: 0.0, kappa: 1.0 },
    };
    let chk = verify_certificate(&model, &report, &Tolerances::default());
    assert!(chk.passed(), "{chk:?}");
    assert!(chk.get("dual_objective_negative").unwrap().value < 0.0);

    let bad = CertificateReport {
        status: SolveStatus::PrimalInfeasible,
        witness: Witness { z: vec![-1.0, -1.0], ..report.witness.clone() },
    };
    assert!(!verify_certificate(&model, &bad, &Tolerances::default()).passed());
}

#[test]
fn unbounded_ray_verifies() {
    let model =
        build_model(dvector![-1.0], DMatrix::zeros(0, 1), DVector::zeros(0), dmatrix![-1.0], dvector![0.0], vec![nonneg(1)])
            .unwrap();
    let report = CertificateReport {
        status: SolveStatus::DualInfeasible,
        witness: Witness { x: vec![1.0], y: vec![], z: vec![0.0], s: vec![1.0], tau: 0.0, kappa: 1.0 },
    };
    let chk = verify_certificate(&model, &report, &Tolerances::default());
    assert!(chk.passed(), "{chk:?}");
    assert_eq!(chk.get("primal_objective_negative").unwrap().value, -1.0);
}

#[test]
fn dimension_errors_fail_verification() {
    let report = CertificateReport { status: SolveStatus::Optimal, witness: Witness::default() };
    assert!(!verify_certificate(&tiny_lp(), &report, &Tolerances::default()).passed());
}

#[test]
fn identity_preprocessing_keeps_witness() {
    let model = build_model(
        dvector![1.0, 1.0],
        DMatrix::zeros(0, 2),
        DVector::zeros(0),
        dmatrix![-1.0, 0.0; 0.0, -1.0; 1.0, 1.0],
        dvector![0.0, 0.0, 1.0],
        vec![nonneg(3)],
    )
    .unwrap();
    let pre = ready(model);
    assert_eq!(pre.col_scale(), &[1.0, 1.0]);
    let mut w = pre.system().zero_point();
    w.x = vec![0.25, 0.5];
    w.z = vec![1.0, 2.0, 3.0];
    w.s = vec![4.0, 5.0, 6.0];
    w.tau = 1.0;
    w.kappa = 0.5;
    let lifted = pre.lift(&w);
    for (a, b) in lifted.x.iter().zip(&w.x) {
        assert!((a - b).abs() < 1e-15);
    }
    assert_eq!(lifted.z, w.z);
    assert_eq!(lifted.s, w.s);
    assert_eq!((lifted.tau, lifted.kappa), (1.0, 0.5));
}

fn redundant_model() -> (ConicModel, Vec<f64>, Vec<f64>) {
    // A has a repeated row, G a repeated column pattern through A
    let a = dmatrix![1.0, 2.0, 0.0, 1.0; 2.0, 4.0, 0.0, 2.0; 0.0, 1.0, 3.0, 0.0];
    let b = dvector![3.0, 6.0, 1.0];
    let g = dmatrix![-1.0, 0.0, 0.0, -1.0; 0.0, -4.0, 0.0, 0.0; 0.0, 0.0, -1.0, 0.0; 0.5, 0.0, 0.0, 0.5];
    let z0 = vec![1.0, 0.5, 2.0, 0.25];
    let y0 = vec![0.3, -0.1, 0.7];
    // c chosen so that (y0, z0) is dual feasible
    let c = -(a.tr_mul(&DVector::from_column_slice(&y0)) + g.tr_mul(&DVector::from_column_slice(&z0)));
    let model = build_model(c, a, b, g, DVector::from_element(4, 1.0), vec![nonneg(4)]).unwrap();
    (model, y0, z0)
}

#[test]
fn lifted_x_satisfies_equalities() {
    let (model, _, _) = redundant_model();
    let pre = ready(model.clone());
    assert_eq!(pre.rank_a(), 2);
    let mut w = pre.system().zero_point();
    w.x = (0..pre.n_red()).map(|i| 0.3 * i as f64 - 0.7).collect();
    w.tau = 1.7;
    let lifted = pre.lift(&w);
    let r = mat_vec(model.a(), &lifted.x) - model.b() * w.tau;
    assert!(r.amax() < 1e-10, "{r}");
    let back = pre.reduce_x(&lifted.x, w.tau);
    for (a, b) in back.iter().zip(&w.x) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn lifted_y_restores_dual_residual() {
    let (model, _, z0) = redundant_model();
    let pre = ready(model.clone());
    let sys = pre.system();
    let mut w = sys.zero_point();
    w.z = z0.clone();
    w.tau = 1.0;
    // reduced dual residual vanishes at (z0, τ = 1)
    let rx = sys.apply(&w).x;
    assert!(crate::linalg::norm_inf(&rx) < 1e-12, "{rx:?}");
    let lifted = pre.lift(&w);
    let res = model.a().tr_mul(&DVector::from_column_slice(&lifted.y))
        + model.g().tr_mul(&DVector::from_column_slice(&lifted.z))
        + model.c();
    let scale = 1.0 + model.c().amax();
    assert!(res.amax() < 1e-9 * scale, "{res}");
}

#[test]
fn reduced_objective_matches_original() {
    let (model, _, _) = redundant_model();
    let pre = ready(model.clone());
    let mut w = pre.system().zero_point();
    w.x = vec![0.4; pre.n_red()];
    w.tau = 2.0;
    let lifted = pre.lift(&w);
    let orig = model.c().dot(&DVector::from_column_slice(&lifted.x));
    assert!((pre.system().primal_obj(&w) - orig).abs() < 1e-12 * (1.0 + orig.abs()));
    // the conic rows are identical in both spaces
    let s_orig = model.h() * w.tau - mat_vec(model.g(), &lifted.x);
    let s_red = &pre.system().h * w.tau - mat_vec(&pre.system().g, &w.x);
    assert!((s_orig - s_red).amax() < 1e-12);
}

#[test]
fn text_roundtrip_tiny_lp() {
    let m = tiny_lp();
    let text = serialize(&m);
    assert_eq!(deserialize(&text).unwrap(), m);
}

#[test]
fn text_roundtrip_sparse_and_lmi() {
    let p0 = dmatrix![2.0, 0.1, 0.0; 0.1, 1.0, 0.3; 0.0, 0.3, 1.5];
    let p1 = dmatrix![1.0 / 3.0, std::f64::consts::PI, 0.0; std::f64::consts::PI, -1e-300, 7.0; 0.0, 7.0, 2.0];
    let lmi = ConeDescriptor::lmi(vec![p0, p1]).unwrap();
    let mut g = DMatrix::zeros(5, 4);
    g[(0, 0)] = -1.0;
    g[(2, 3)] = 0.1;
    g[(4, 1)] = -std::f64::consts::E;
    let model = build_model(
        dvector![0.1, 0.2, 0.3, 1e-17],
        dmatrix![1.0, 1.0, 1.0, 1.0],
        dvector![1.0],
        g,
        dvector![0.0, 1.0, 0.0, 0.0, 0.0],
        vec![lmi, ConeDescriptor::gen_power(vec![0.25, 0.75], 1).unwrap().dual()],
    )
    .unwrap();
    let text = serialize(&model);
    assert!(text.contains("CONE_MATRIX COO"));
    assert!(text.contains("EQ_MATRIX DENSE"));
    let back = deserialize(&text).unwrap();
    assert_eq!(back, model);
    for (x, y) in back.g().iter().zip(model.g().iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn text_roundtrip_all_tags() {
    let p = dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0];
    let cones = vec![
        nonneg(1),
        ConeDescriptor::psd(2).unwrap(),
        ConeDescriptor::linf(1).unwrap(),
        ConeDescriptor::l2(1).unwrap().dual(),
        ConeDescriptor::sqr(1).unwrap(),
        ConeDescriptor::power_mean(vec![0.4, 0.6]).unwrap(),
        ConeDescriptor::geo_mean(2).unwrap(),
        ConeDescriptor::log_persp(1).unwrap(),
        ConeDescriptor::wsos_dual(vec![p.clone(), p.columns(0, 1).into_owned()]).unwrap().dual(),
    ];
    let q: usize = cones.iter().map(|k| k.dim()).sum();
    let model = build_model(
        dvector![1.0],
        DMatrix::zeros(0, 1),
        DVector::zeros(0),
        DMatrix::from_element(q, 1, 1.0),
        DVector::zeros(q),
        cones,
    )
    .unwrap();
    assert_eq!(deserialize(&serialize(&model)).unwrap(), model);
}

#[test]
fn unknown_cone_tag_is_named() {
    let text = serialize(&tiny_lp()).replace("CONE nonneg", "CONE hyperbolic");
    let err = deserialize(&text).unwrap_err();
    match err {
        ModelError::Parse { line, msg } => {
            assert!(msg.contains("hyperbolic"), "{msg}");
            assert!(line > 0);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = "CONIC 1\n# comment\nDIMS 1 0 1\nOBJ\nabc\n";
    match deserialize(text).unwrap_err() {
        ModelError::Parse { line, msg } => {
            assert_eq!(line, 5);
            assert!(msg.contains("abc"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(deserialize("CONIC 1\nDIMS 1 0"), Err(ModelError::Parse { .. })));
}

#[test]
fn coo_entries_out_of_range_are_rejected() {
    let text = "CONIC 1\nDIMS 1 0 1\nOBJ\n1\nEQ_MATRIX DENSE\nEQ_RHS\nCONE_MATRIX COO 1\n3 0 1.0\nCONE_RHS\n0\nCONES 1\nCONE nonneg primal 1\nEND\n";
    match deserialize(text).unwrap_err() {
        ModelError::Parse { line, .. } => assert_eq!(line, 8),
        other => panic!("unexpected {other:?}"),
    }
}
