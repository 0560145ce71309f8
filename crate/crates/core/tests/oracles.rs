mod common;

use approx::assert_relative_eq;
use coca::baselines::{cca_leading, pca_leading};
use coca::coca::{build_augmented, fit_dense, limit_eigenpair, DenseConfig};
use coca::lasso::{kkt_check, solve_lasso, LassoProblem};
use coca::linalg::{leading_singular_triplet, spd_solve};
use common::*;
use ndarray::{s, Array1, Array2};

fn tight() -> DenseConfig {
    DenseConfig {
        tol: 1e-12,
        max_iter: 200_000,
        ..Default::default()
    }
}

/// Dense CoCA direction from the symmetric form `A^{-1/2} G A^{-1/2}`,
/// `A = I + ρDGD`.
fn oracle_dense(x: &Array2<f64>, p1: usize, rho: f64) -> (Array1<f64>, f64) {
    let p = x.ncols();
    let g = x.t().dot(x);
    let sign = |i: usize| if i < p1 { 1.0 } else { -1.0 };
    let a = Array2::from_shape_fn((p, p), |(i, j)| {
        f64::from(u8::from(i == j)) + rho * sign(i) * sign(j) * g[[i, j]]
    });
    let (av, ae) = jacobi_eigen(&a);
    let root_inv = Array2::from_shape_fn((p, p), |(i, j)| {
        (0..p).map(|k| ae[[i, k]] * ae[[j, k]] / av[k].sqrt()).sum::<f64>()
    });
    let m = root_inv.dot(&g).dot(&root_inv);
    let (mv, me) = jacobi_eigen(&m);
    (root_inv.dot(&me.column(0)), mv[0])
}

#[test]
fn singular_triplet_matches_jacobi_svd() {
    for seed in 0..10 {
        let x = gaussian(30, 7, seed);
        let t = leading_singular_triplet(x.view(), 1e-13, 100_000).unwrap();
        let (v, d) = oracle_pca(&x);
        assert!(line_angle(&t.v, &v) < 1e-8, "seed {seed}");
        assert_relative_eq!(t.d, d, max_relative = 1e-12);
        let (pv, pd) = pca_leading(x.view()).unwrap();
        assert!(line_angle(&pv, &v) < 1e-8);
        assert_relative_eq!(pd, d, max_relative = 1e-12);
    }
}

#[test]
fn jacobi_oracles_self_consistent() {
    let x = gaussian(12, 5, 99);
    let g = x.t().dot(&x);
    let (vals, vecs) = jacobi_eigen(&g);
    let (sv, _) = jacobi_svd(&x);
    for k in 0..5 {
        assert_relative_eq!(vals[k], sv[k] * sv[k], max_relative = 1e-12);
        let col = vecs.column(k).to_owned();
        let r = &g.dot(&col) - &(vals[k] * &col);
        assert!(vnorm(&r) < 1e-10 * vals[0]);
    }
}

#[test]
fn spd_solve_matches_residual() {
    let x = gaussian(20, 6, 4);
    let mut g = x.t().dot(&x);
    g.diag_mut().mapv_inplace(|v| v + 0.5);
    let b = Array1::from_iter((0..6).map(|i| i as f64 - 2.0));
    let sol = spd_solve(g.view(), &b).unwrap();
    assert!(vnorm(&(&g.dot(&sol) - &b)) < 1e-10);
}

#[test]
fn dense_fit_matches_generalized_eigen_oracle() {
    for seed in 0..6 {
        let d = centered(gaussian(40, 3, seed), gaussian(40, 4, 100 + seed));
        let x = d.concat();
        for &rho in &[0.0, 0.01, 0.3, 2.0, 50.0] {
            let m = fit_dense(&d, rho, &tight()).unwrap();
            let (v, lam) = oracle_dense(&x, 3, rho);
            assert!(line_angle(&m.v, &v) < 1e-6, "seed {seed} rho {rho}");
            assert_relative_eq!(m.eigenvalue.unwrap(), lam, max_relative = 1e-9);
            // ‖Xv‖ = λ₁
            assert_relative_eq!(vnorm(&x.dot(&m.v)), lam, max_relative = 1e-9);
        }
    }
}

#[test]
fn dense_endpoints_match_oracles() {
    for seed in 0..5 {
        let d = centered(gaussian(60, 3, 10 + seed), gaussian(60, 3, 20 + seed));
        let x = d.concat();
        let m0 = fit_dense(&d, 0.0, &tight()).unwrap();
        assert!(line_angle(&m0.v, &oracle_pca(&x).0) < 1e-7);

        let (w1, w2, r) = oracle_cca(d.x1(), d.x2());
        let big = fit_dense(&d, 1e6, &tight()).unwrap();
        assert!(line_angle(&big.v1, &w1) < 1e-3, "seed {seed}");
        assert!(line_angle(&big.v2, &w2) < 1e-3, "seed {seed}");

        let lib = cca_leading(d.x1().view(), d.x2().view(), 0.0).unwrap();
        assert_relative_eq!(lib.correlation, r, max_relative = 1e-10);
        assert!(line_angle(&lib.w1, &w1) < 1e-6);
        assert!(line_angle(&lib.w2, &w2) < 1e-6);

        let (_, lam) = limit_eigenpair(&d, &tight()).unwrap();
        assert_relative_eq!(lam, (1.0 + r) / (1.0 - r), max_relative = 1e-6);
    }
}

#[test]
fn lasso_matches_proximal_gradient() {
    for seed in 0..10 {
        let (n, p) = (25 + seed as usize, 8 + (seed as usize % 5));
        let a = gaussian(n, p, 300 + seed);
        let y = gaussian(n, 1, 400 + seed).column(0).to_owned();
        let lmax = 2.0 * a.t().dot(&y).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for frac in [0.01, 0.2, 0.6] {
            let prob = LassoProblem::new(a.clone(), y.clone(), frac * lmax).unwrap();
            let sol = solve_lasso(&prob, 1e-10, 100_000, None).unwrap();
            let reference = ista(&a, &y, frac * lmax, 500_000);
            let f_ref = lasso_objective(&a, &y, frac * lmax, &reference);
            assert!(sol.objective <= f_ref + 1e-8 * f_ref.max(1.0), "seed {seed}");
            assert!((sol.objective - f_ref).abs() <= 1e-8 * f_ref.max(1.0));
            assert!(oracle_kkt(&a, &y, frac * lmax, &sol.beta) <= 1e-6);
            assert_relative_eq!(
                kkt_check(&prob, sol.beta.view()).unwrap(),
                oracle_kkt(&a, &y, frac * lmax, &sol.beta),
                epsilon = 1e-12
            );
        }
    }
}

#[test]
fn lasso_above_lambda_max_is_zero() {
    let a = gaussian(15, 4, 1);
    let y = gaussian(15, 1, 2).column(0).to_owned();
    let prob = LassoProblem::new(a, y, 0.0).unwrap();
    let lmax = prob.lambda_max();
    let prob = LassoProblem::new(prob.design, prob.response, lmax * 1.0001).unwrap();
    let sol = solve_lasso(&prob, 1e-12, 1000, None).unwrap();
    assert!(sol.beta.iter().all(|&b| b == 0.0));
}

#[test]
fn augmented_lasso_identity() {
    let d = centered(gaussian(20, 3, 5), gaussian(20, 4, 6));
    let x = d.concat();
    let u0 = gaussian(20, 1, 7).column(0).to_owned();
    let u = &u0 / vnorm(&u0);
    let (rho, lambda) = (0.7, 0.3);
    let prob = build_augmented(x.view(), 3, rho, lambda, &u).unwrap();
    assert_eq!(prob.design.dim(), (7 + 20, 7));
    let xtu = x.t().dot(&u);
    for k in 0..20 {
        let v = gaussian(7, 1, 1000 + k).column(0).to_owned();
        let fit = &xtu - &v;
        let gap = d.x1().dot(&v.slice(s![..3])) - d.x2().dot(&v.slice(s![3..]));
        let direct = fit.dot(&fit) + rho * gap.dot(&gap) + lambda * v.iter().map(|a| a.abs()).sum::<f64>();
        assert_relative_eq!(prob.objective(v.view()), direct, max_relative = 1e-10);
    }
}

#[test]
fn score_correlation_rises_along_dense_path() {
    // correlation of the per-view scores is the agreement trend diagnostic
    let spec = coca::simulate::illustrative_spec();
    let d = cov_scaled(&coca::data::standardize(&coca::simulate::draw(&spec, 200, 3).unwrap(), false).0);
    let grid: Vec<f64> = (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect();
    let path = coca::coca::solution_path(&d, &grid, &[0.0], false, &coca::SolverConfig::default()).unwrap();
    let corr: Vec<f64> = path.cells.iter().map(|c| c.diagnostics.as_ref().unwrap().score_correlation).collect();
    for w in corr.windows(2) {
        assert!(w[1] >= w[0] - 1e-8, "{corr:?}");
    }
}
