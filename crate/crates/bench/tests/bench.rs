use std::collections::BTreeSet;
use std::sync::Arc;

use conic_bench::suite::{read_runs_csv, write_runs_csv};
use conic_bench::*;
use conic_core::model::{initial_iterate, preprocess, text, Preprocessed};
use conic_core::{solve, ConeKind, SolveStatus, SolverOptions, StepperMode};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn every_generator_sample() -> Vec<InstanceSpec> {
    let mut specs = default_suite();
    for seed in 11..14 {
        for g in InstanceSpec::GENERATORS {
            specs.push(InstanceSpec::default_for(g, seed).unwrap());
        }
    }
    specs
}

#[test]
fn same_spec_gives_identical_bytes() {
    let spec = InstanceSpec::LpRandom { n: 10, p: 3, seed: 7 };
    let a = text::serialize(&generate(&spec).unwrap().model);
    let b = text::serialize(&generate(&spec).unwrap().model);
    assert_eq!(a, b);
    let other = text::serialize(&generate(&spec.clone().with_seed(8)).unwrap().model);
    assert_ne!(a, other);
}

#[test]
fn planted_farkas_ray_gives_primal_infeasible() {
    let inst = generate(&InstanceSpec::LpInfeasible { n: 10, p: 4, seed: 1 }).unwrap();
    assert_eq!(inst.expected, SolveStatus::PrimalInfeasible);
    let res = solve(&inst.model, &SolverOptions::default());
    assert_eq!(res.status, SolveStatus::PrimalInfeasible);
    assert!(res.check.passed());
}

#[test]
fn portfolio_uses_nonneg_linf_and_l2() {
    let inst = generate(&InstanceSpec::Portfolio { d: 8, risk: RiskCone::L2, seed: 1 }).unwrap();
    let kinds: Vec<&ConeKind> = inst.model.cones().iter().map(|k| k.kind()).collect();
    assert!(kinds.iter().any(|k| matches!(k, ConeKind::Nonneg { .. })));
    assert!(kinds.iter().any(|k| matches!(k, ConeKind::LinfEpi { .. })));
    assert!(kinds.iter().any(|k| matches!(k, ConeKind::L2Epi { .. })));
}

#[test]
fn initial_complementarity_is_one_on_generated_instances() {
    for spec in every_generator_sample() {
        let inst = generate(&spec).unwrap();
        let Preprocessed::Ready(pre) = preprocess(Arc::new(inst.model)) else { panic!("{}", inst.name) };
        let mu = initial_iterate(&pre).unwrap().mu();
        assert!((mu - 1.0).abs() <= 1e-12, "{}: μ = {mu}", inst.name);
    }
}

#[test]
fn default_suite_composition() {
    let specs = default_suite();
    assert!(specs.len() >= 20);
    let mut seen = BTreeSet::new();
    let mut names = BTreeSet::new();
    for spec in &specs {
        let inst = generate(spec).unwrap();
        let m = &inst.model;
        assert!(m.n() + m.p() + m.q() <= 400, "{} too large", inst.name);
        assert!(names.insert(inst.name.clone()), "duplicate name {}", inst.name);
        for k in m.cones() {
            let tag = match k.kind() {
                ConeKind::Nonneg { .. } => "nonneg",
                ConeKind::PsdSvec { .. } => "psd",
                ConeKind::LinfEpi { .. } => "linf",
                ConeKind::L2Epi { .. } => "l2",
                ConeKind::SqrEpi { .. } => "sqr",
                ConeKind::GenPower { .. } => "gpower",
                ConeKind::PowerMean { .. } => "power",
                ConeKind::GeoMean { .. } => "geo",
                ConeKind::LogPersp { .. } => "log",
                ConeKind::Lmi { .. } => "lmi",
                ConeKind::WsosDualScalar { .. } => "wsos",
            };
            seen.insert(tag);
        }
    }
    let all = ["nonneg", "psd", "linf", "l2", "sqr", "gpower", "power", "geo", "log", "lmi", "wsos"];
    for k in all {
        assert!(seen.contains(k), "cone {k} missing from the default suite");
    }
}

#[test]
fn enumerated_lp_optimum_is_consistent() {
    for seed in 1..6 {
        let inst = generate(&InstanceSpec::LpRandom { n: 8, p: 3, seed }).unwrap();
        let known = inst.known_objective.expect("small LPs carry an enumerated optimum");
        let m = &inst.model;
        let res = solve(m, &SolverOptions::default());
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.primal_obj - known).abs() <= 1e-6 * (1.0 + known.abs()), "seed {seed}: {} vs {known}", res.primal_obj);
        // the dual objective never exceeds the true optimum
        assert!(res.dual_obj <= known + 1e-6 * (1.0 + known.abs()));
    }
}

#[test]
fn enumeration_oracle_on_a_hand_lp() {
    // min x1 + 2 x2 + 3 x3, x1 + x2 + x3 = 1, x ≥ 0  → 1
    let c = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
    let b = DVector::from_vec(vec![1.0]);
    assert_eq!(generators::enumerate_lp_optimum(&c, &a, &b), Some(1.0));
    // x1 - x2 = -1 with x ≥ 0 and x1 + x2 = 0 is infeasible
    let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 1.0]);
    let b = DVector::from_vec(vec![-1.0, 0.0]);
    assert_eq!(generators::enumerate_lp_optimum(&DVector::from_vec(vec![1.0, 1.0]), &a, &b), None);
}

/// Barycentric evaluation of the interpolating polynomial through
/// Chebyshev-Lobatto nodes `x_j = cos(πj/(u-1))`.
fn lobatto_interp(values: &[f64], t: f64) -> f64 {
    let u = values.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (j, v) in values.iter().enumerate() {
        let x = (std::f64::consts::PI * j as f64 / (u - 1) as f64).cos();
        if t == x {
            return *v;
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == u - 1 {
            w *= 0.5;
        }
        num += w * v / (t - x);
        den += w / (t - x);
    }
    num / den
}

#[test]
fn wsos_instances_reach_the_polynomial_minimum() {
    for hd in [2, 3, 5] {
        let inst = generate(&InstanceSpec::WsosPolymin { half_degree: hd, seed: 9 }).unwrap();
        // h holds the polynomial's values at the nodes
        let vals: Vec<f64> = inst.model.h().iter().cloned().collect();
        let grid = 200_000;
        let pmin = (0..=grid).map(|i| lobatto_interp(&vals, -1.0 + 2.0 * i as f64 / grid as f64)).fold(f64::INFINITY, f64::min);
        let known = inst.known_objective.unwrap();
        assert!((known + pmin).abs() <= 1e-8 * (1.0 + pmin.abs()), "hd {hd}: {known} vs {}", -pmin);
        let res = solve(&inst.model, &SolverOptions::default());
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.primal_obj - known).abs() <= 1e-6 * (1.0 + known.abs()), "hd {hd}: {} vs {known}", res.primal_obj);
    }
}

#[test]
fn shifted_geomean_examples() {
    assert!((shifted_geomean(&[1.0, 3.0], 1.0) - (8f64.sqrt() - 1.0)).abs() <= 1e-15);
    assert!((shifted_geomean(&[2.0, 8.0], 0.0) - 4.0).abs() <= 1e-14);
    assert!(shifted_geomean(&[], 1.0).is_nan());
}

proptest! {
    #[test]
    fn shifted_geomean_of_a_constant_is_the_constant(c in 1e-3..1e4f64, n in 1usize..20, s in 0.0..10.0f64) {
        let v = vec![c; n];
        prop_assert!((shifted_geomean(&v, s) - c).abs() <= 1e-12 * c.max(1.0));
    }

    #[test]
    fn shifted_geomean_lies_between_min_and_max(v in prop::collection::vec(1e-3..1e4f64, 1..20), s in 0.0..10.0f64) {
        let m = shifted_geomean(&v, s);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(0.0, f64::max);
        prop_assert!(m >= lo * (1.0 - 1e-12) && m <= hi * (1.0 + 1e-12));
    }
}

#[test]
fn perf_profile_examples() {
    let (a, b) = perf_profile(&[1.0, 2.0], &[2.0, 2.0]);
    assert_eq!(a, vec![(0.0, 1.0)]);
    assert_eq!(b, vec![(0.0, 0.5), (1.0, 1.0)]);
    let (a, b) = perf_profile(&[3.0, 5.0, 7.0], &[3.0, 5.0, 7.0]);
    assert_eq!(a, vec![(0.0, 1.0)]);
    assert_eq!(a, b);
    let (a, b) = perf_profile(&[2.0], &[8.0]);
    assert_eq!(a, vec![(0.0, 1.0)]);
    assert_eq!(b, vec![(2.0, 1.0)]);
}

/// Brute force: fraction of instances whose ratio is at most `2^x`.
fn profile_at(values: &[f64], other: &[f64], x: f64) -> f64 {
    let hits = values.iter().zip(other).filter(|(v, o)| (*v / v.min(**o)).log2() <= x).count();
    hits as f64 / values.len() as f64
}

proptest! {
    #[test]
    fn perf_profile_matches_the_definition(pairs in prop::collection::vec((1.0..100.0f64, 1.0..100.0f64), 1..15)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (ca, cb) = perf_profile(&a, &b);
        for (curve, (v, o)) in [(ca, (&a, &b)), (cb, (&b, &a))] {
            for (x, y) in &curve {
                prop_assert_eq!(*y, profile_at(v, o, *x));
            }
            prop_assert!(curve.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            prop_assert_eq!(curve.last().unwrap().1, 1.0);
            prop_assert!(curve[0].0 >= 0.0);
        }
        // at x = 0 the two curves together cover every instance at least once
        let at0 = profile_at(&a, &b, 0.0) + profile_at(&b, &a, 0.0);
        prop_assert!(at0 >= 1.0);
    }
}

fn record(instance: &str, mode: StepperMode, status: SolveStatus, iters: usize, ms: f64) -> RunRecord {
    RunRecord {
        instance: instance.into(),
        mode,
        status,
        iters,
        solve_ms: ms,
        init_ms: 0.1 * ms,
        lhs_ms: 0.2 * ms,
        rhs_ms: 0.1 * ms,
        direc_ms: 0.3 * ms,
        search_ms: 0.2 * ms,
    }
}

#[test]
fn smoke_suite_every_count_is_three() {
    let specs = vec![
        InstanceSpec::LpRandom { n: 10, p: 3, seed: 7 },
        InstanceSpec::LpRandom { n: 12, p: 5, seed: 2 },
        InstanceSpec::LpInfeasible { n: 10, p: 4, seed: 1 },
    ];
    let table = run_suite(&specs, &StepperMode::ALL, &SuiteOptions::default()).unwrap();
    assert_eq!(table.runs.len(), 15);
    assert_eq!(table.every_set().len(), 3);
    for mode in StepperMode::ALL {
        for set in AggregateSet::ALL {
            assert_eq!(table.aggregate(mode, set).conv, 3);
        }
    }
}

#[test]
fn failed_run_takes_twice_the_best_converged_value() {
    use SolveStatus::*;
    use StepperMode::*;
    let table = MetricsTable::new(vec![
        record("a", Basic, Optimal, 10, 4.0),
        record("a", Comb, Optimal, 4, 2.0),
        record("b", Basic, Optimal, 20, 8.0),
        record("b", Comb, Stalled, 7, 1.0),
        record("c", Basic, NumericalFailure, 3, 1.0),
        record("c", Comb, IterationLimit, 400, 50.0),
    ]);
    assert_eq!(table.every_set(), vec!["a".to_string()]);
    let all = table.all_values(Comb);
    // c converged nowhere and is dropped; b is substituted
    assert_eq!(all, vec![(4.0, 2.0), (40.0, 16.0)]);
    let row = table.aggregate(Comb, AggregateSet::All);
    assert!((row.iters_sgm - shifted_geomean(&[4.0, 40.0], 1.0)).abs() <= 1e-12);
    assert!((row.time_sgm - shifted_geomean(&[2.0, 16.0], 1.0)).abs() <= 1e-12);
    assert_eq!(row.conv, 1);
    assert_eq!(table.aggregate(Basic, AggregateSet::This).conv, 2);
}

fn status_strategy() -> impl Strategy<Value = SolveStatus> {
    prop_oneof![
        4 => Just(SolveStatus::Optimal),
        1 => Just(SolveStatus::PrimalInfeasible),
        1 => Just(SolveStatus::Stalled),
        1 => Just(SolveStatus::NumericalFailure),
        1 => Just(SolveStatus::IterationLimit),
    ]
}

fn table_strategy() -> impl Strategy<Value = MetricsTable> {
    prop::collection::vec(prop::collection::vec((status_strategy(), 1usize..200, 0.01..500.0f64), 5), 1..10).prop_map(
        |rows| {
            let mut runs = Vec::new();
            for (i, per_mode) in rows.into_iter().enumerate() {
                for (mode, (st, it, ms)) in StepperMode::ALL.into_iter().zip(per_mode) {
                    runs.push(record(&format!("inst{i}"), mode, st, it, ms));
                }
            }
            MetricsTable::new(runs)
        },
    )
}

proptest! {
    #[test]
    fn aggregation_set_algebra(table in table_strategy()) {
        let every: BTreeSet<String> = table.every_set().into_iter().collect();
        for mode in StepperMode::ALL {
            let this: BTreeSet<String> = table.this_set(mode).into_iter().collect();
            prop_assert!(every.is_subset(&this));
            // on "this" instances the all values are the mode's own; elsewhere
            // they are at least the largest converged value of the instance
            let with_some: Vec<String> = table
                .instances()
                .into_iter()
                .filter(|i| table.runs.iter().any(|r| &r.instance == i && r.converged()))
                .collect();
            let all = table.all_values(mode);
            prop_assert_eq!(all.len(), with_some.len());
            for (inst, (it, ms)) in with_some.iter().zip(&all) {
                let own = table.run(inst, mode).unwrap();
                if this.contains(inst) {
                    prop_assert_eq!(*it, own.iters as f64);
                    prop_assert_eq!(*ms, own.solve_ms);
                } else {
                    for r in table.runs.iter().filter(|r| &r.instance == inst && r.converged()) {
                        prop_assert!(*it >= r.iters as f64 && *ms >= r.solve_ms);
                    }
                }
            }
        }
    }

    #[test]
    fn runs_csv_round_trips_exactly(table in table_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        write_runs_csv(&path, &table).unwrap();
        let back = read_runs_csv(&path).unwrap();
        prop_assert_eq!(back.runs, table.runs);
    }
}

#[test]
fn suite_rows_do_not_depend_on_worker_count() {
    let specs: Vec<InstanceSpec> = default_suite().into_iter().take(6).collect();
    let one = run_suite(&specs, &StepperMode::ALL, &SuiteOptions { jobs: 1, ..Default::default() }).unwrap();
    let many = run_suite(&specs, &StepperMode::ALL, &SuiteOptions { jobs: 4, ..Default::default() }).unwrap();
    let cols = |t: &MetricsTable| t.runs.iter().map(|r| (r.instance.clone(), r.mode, r.status, r.iters)).collect::<Vec<_>>();
    assert_eq!(cols(&one), cols(&many));
}

#[test]
fn suite_files_are_written() {
    let specs = vec![InstanceSpec::LpRandom { n: 10, p: 3, seed: 7 }];
    let table = run_suite(&specs, &[StepperMode::Basic, StepperMode::Comb], &SuiteOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_suite(dir.path(), &table).unwrap();
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("mode,set,conv,iters_sgm,time_sgm"));
    assert_eq!(agg.lines().count(), 1 + 2 * 3);
    let back = read_runs_csv(&dir.path().join("runs.csv")).unwrap();
    assert_eq!(back.runs, table.runs);
}
