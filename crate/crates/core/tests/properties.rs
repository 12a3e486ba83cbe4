use far2::driver::acceptance_and_sigma_update;
use far2::harness::{performance_profile, read_csv, write_csv, Metric, ReportRow};
use far2::krylov::{containment_residual, orth_augment, project, KrylovBasis};
use far2::problems::{load_libsvm, write_libsvm, ClassificationData, LabelSet};
use far2::secular::{solve_secular_reduced, FactorizationCounter};
use far2::{ModelContext, SolverConfig, SymMatrix};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

fn sym_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0..3.0_f64, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        (&a + a.transpose()) * 0.5
    })
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0_f64, n).prop_map(DVector::from_vec)
}

fn model_value(g: &DVector<f64>, h: &DMatrix<f64>, sigma: f64, s: &DVector<f64>) -> f64 {
    g.dot(s) + 0.5 * s.dot(&(h * s)) + sigma / 3.0 * s.norm().powi(3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curvature_bounds_every_direction(
        (h, s, dirs) in (2usize..7).prop_flat_map(|n| (sym_matrix(n), vector(n), prop::collection::vec(vector(n), 100))),
        sigma in 0.1..5.0_f64,
    ) {
        let g = DVector::zeros(h.nrows());
        let hm = SymMatrix::from_dense(h.clone());
        let ctx = ModelContext::new(0.0, &g, &hm, sigma).unwrap();
        let mu = ctx.curvature_min(&s).unwrap();
        let sn = s.norm();
        let mut hess = h.clone();
        if sn > 0.0 {
            hess += DMatrix::identity(h.nrows(), h.nrows()) * (sigma * sn) + &s * s.transpose() * (sigma / sn);
        }
        for d in &dirs {
            prop_assert!(d.dot(&(&hess * d)) >= mu * d.norm_squared() - 1e-9 * (1.0 + d.norm_squared()));
        }
        let oracle = SymmetricEigen::new(hess).eigenvalues.min();
        prop_assert!((mu - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()));
    }

    #[test]
    fn sigma_rule(f in -10.0..10.0_f64, drop in -2.0..3.0_f64, dec in 1e-6..2.0_f64, sigma in 1e-9..1e3_f64) {
        let cfg = SolverConfig::default();
        let a = acceptance_and_sigma_update(f, f - drop * dec, dec, sigma, &cfg).unwrap();
        let rho = (f - (f - drop * dec)) / dec;
        prop_assert!((a.rho - rho).abs() <= 1e-9 * (1.0 + rho.abs()));
        prop_assert_eq!(a.accepted, a.rho >= cfg.eta1);
        let expect = if a.rho >= cfg.eta2 {
            (cfg.gamma1 * sigma).max(cfg.sigma_min)
        } else if a.rho >= cfg.eta1 {
            sigma
        } else {
            cfg.gamma2 * sigma
        };
        prop_assert_eq!(a.sigma_next, expect);
    }

    #[test]
    fn reduced_solution_is_a_global_minimizer(
        (h, g, probes) in (1usize..6).prop_flat_map(|n| (sym_matrix(n), vector(n), prop::collection::vec(vector(n), 200))),
        sigma in 0.2..4.0_f64,
    ) {
        let sol = solve_secular_reduced(&g, &h, sigma, 1e-12).unwrap();
        let best = model_value(&g, &h, sigma, &sol.step);
        prop_assert!(best <= 1e-12);
        for z in &probes {
            prop_assert!(best <= model_value(&g, &h, sigma, z) + 1e-9);
            let near = &sol.step + z * 1e-3;
            prop_assert!(best <= model_value(&g, &h, sigma, &near) + 1e-10);
        }
        prop_assert!((sol.lambda - sigma * sol.step.norm()).abs() <= 1e-8 * (1.0 + sol.lambda));
    }

    #[test]
    fn krylov_sequences_stay_orthonormal(
        (h, g, shifts) in (3usize..12).prop_flat_map(|n| (sym_matrix(n), vector(n), prop::collection::vec(0.5..8.0_f64, 6))),
        steps in 1usize..8,
        rational in any::<bool>(),
    ) {
        prop_assume!(g.norm() > 1e-3);
        let n = h.nrows();
        let hm = SymMatrix::from_dense(h.clone());
        let mut solves = FactorizationCounter::new();
        let mut basis = if rational {
            KrylovBasis::rational(&g, n, 0).unwrap()
        } else {
            KrylovBasis::polynomial(&g, n, 0).unwrap()
        };
        for j in 0..steps.min(n - 1) {
            let r = if rational {
                basis.rational_expand_with_shift(&hm, shifts[j % shifts.len()] + 6.0, &mut solves)
            } else {
                basis.poly_expand(&hm)
            };
            if r.is_err() || basis.is_invariant() {
                break;
            }
        }
        prop_assert!(basis.orthonormality_error() <= 1e-10);
        let w = orth_augment(&basis, &g).unwrap();
        prop_assert!(containment_residual(&w.w, &g) <= 1e-10);
        let p = project(&hm, &g, &w);
        prop_assert!((&p.h_r - p.h_r.transpose()).abs().max() <= 1e-12);
    }

    #[test]
    fn profiles_are_monotone_and_bounded(costs in prop::collection::vec(prop::option::of(0usize..50), 12)) {
        let rows: Vec<ReportRow> = costs
            .iter()
            .enumerate()
            .map(|(i, c)| row(&format!("S{}", i % 3), &format!("P{}", i / 3), c.unwrap_or(0), c.is_some()))
            .collect();
        let t = performance_profile(&rows, Metric::Factorizations).unwrap();
        for curve in &t.curves {
            prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(curve.iter().all(|p| (0.0..=1.0).contains(p)));
        }
        for p in 0..t.problems.len() {
            let below = t.ratios.iter().filter(|r| r[p] < 1.0).count();
            prop_assert_eq!(below, 0);
            let solved = t.costs.iter().any(|c| c[p].is_some());
            prop_assert_eq!(solved, t.ratios.iter().any(|r| r[p] == 1.0));
        }
    }

    #[test]
    fn csv_rows_round_trip(
        specs in prop::collection::vec((0usize..1000, 0usize..1000, -1e6..1e6_f64, 0.0..1e3_f64, any::<bool>()), 1..8),
    ) {
        let rows: Vec<ReportRow> = specs
            .iter()
            .enumerate()
            .map(|(i, &(nli, fact, f, k, ok))| ReportRow {
                n_nli: nli,
                ave_k: k,
                f_final: f,
                ..row("FAR2-PK", &format!("P,{i}"), fact, ok)
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_csv(&path, &rows).unwrap();
        prop_assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn libsvm_round_trip(rows in prop::collection::vec((prop::collection::vec(prop::option::of(-5.0..5.0_f64), 4), any::<bool>()), 1..10)) {
        let dense: Vec<Vec<f64>> = rows.iter().map(|(r, _)| r.iter().map(|v| v.unwrap_or(0.0)).collect()).collect();
        prop_assume!(dense.iter().any(|r| r[3] != 0.0));
        let labels: Vec<f64> = rows.iter().map(|(_, b)| if *b { 1.0 } else { -1.0 }).collect();
        let data = ClassificationData::from_dense_rows(&dense, labels, LabelSet::PlusMinusOne).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.svm");
        write_libsvm(&path, &data).unwrap();
        let back = load_libsvm(&path).unwrap();
        prop_assert_eq!(back.labels(), data.labels());
        prop_assert_eq!(back.features().to_dense(), data.features().to_dense());
    }
}

fn row(solver: &str, problem: &str, fact: usize, ok: bool) -> ReportRow {
    ReportRow {
        problem: problem.into(),
        n: 3,
        solver: solver.into(),
        status: if ok { "FirstOrderPoint" } else { "IterLimit" }.into(),
        n_nli: 1,
        n_fact: fact,
        n_refresh: 0,
        ave_k: 0.0,
        n_sub: 0,
        n_sec: 0,
        f_final: 0.0,
        gnorm_final: 0.0,
        wall_s: 0.0,
    }
}
