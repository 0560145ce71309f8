//! CoCA solvers.
//!
//! The dense fit (no ℓ1 penalty) finds the leading eigenvector of
//! `(I + ρDXᵀXD)⁻¹XᵀX` by power iteration, `D = diag(I_p1, −I_p2)`. The
//! sparse fit alternates a Lasso v-update with the closed-form
//! `u = Xv/‖Xv‖`. `D` is never formed; it is a sign flip on the columns
//! of the second view.

use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::MultiViewData;
use crate::error::{CocaError, Result};
use crate::lasso::{GramLasso, LassoProblem};
use crate::linalg::{self, canonicalize_sign, norm, Cholesky, PowerConfig};
use crate::metrics;

/// Above this width the dense operator is applied matrix-free.
pub const P_DENSE_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DenseConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub p_dense_cap: usize,
}

impl Default for DenseConfig {
    fn default() -> Self {
        Self {
            tol: linalg::DEFAULT_TOL,
            max_iter: linalg::DEFAULT_MAX_ITER,
            seed: 0,
            p_dense_cap: P_DENSE_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparseConfig {
    /// Relative change in the objective.
    pub obj_tol: f64,
    /// Relative change in v.
    pub v_tol: f64,
    pub max_iter: usize,
    /// KKT tolerance of each v-update, relative to `max(1, ‖Xᵀu‖∞)`.
    pub lasso_tol: f64,
    pub lasso_max_sweeps: usize,
}

impl Default for SparseConfig {
    fn default() -> Self {
        Self {
            obj_tol: 1e-7,
            v_tol: 1e-6,
            max_iter: 500,
            lasso_tol: 1e-9,
            lasso_max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SolverConfig {
    pub dense: DenseConfig,
    pub sparse: SparseConfig,
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.dense.seed = seed;
        self
    }
}

/// Which objective the `objective` field reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveConvention {
    /// `½‖X − uvᵀ‖²_F + (ρ/2)‖X1v1 − X2v2‖²`
    Half,
    /// `‖X − uvᵀ‖²_F + ρ‖X1v1 − X2v2‖² + λ‖v‖₁`
    Unscaled,
}

/// A fitted component.
///
/// `v` is in the unconstrained-scale parameterization (for dense fits
/// `‖Xv‖ = λ₁`); `direction = v/‖v‖` and `d = ‖v‖` give the
/// unit-norm parameterization, so `d·u·directionᵀ = u·vᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocaModel {
    pub rho: f64,
    pub lambda: f64,
    pub p1: usize,
    pub d: f64,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub direction: Array1<f64>,
    pub v1: Array1<f64>,
    pub v2: Array1<f64>,
    pub scores1: Array1<f64>,
    pub scores2: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub objective_convention: ObjectiveConvention,
    /// Leading eigenvalue λ₁ (dense fits only).
    pub eigenvalue: Option<f64>,
    /// `‖(I+ρDXᵀXD)⁻¹XᵀXv − λ₁v‖` (dense fits only).
    pub fixed_point_residual: Option<f64>,
    /// The ℓ1 penalty shrank v to zero.
    pub all_zero: bool,
}

impl CocaModel {
    pub fn nnz(&self) -> usize {
        self.v.iter().filter(|&&x| x != 0.0).count()
    }

    /// Rank-1 reconstruction `u·vᵀ` of the training data.
    pub fn reconstruction(&self) -> Array2<f64> {
        let u = self.u.view().insert_axis(ndarray::Axis(1));
        let v = self.v.view().insert_axis(ndarray::Axis(0));
        u.dot(&v)
    }
}

fn flip_second_view(v: &mut Array1<f64>, p1: usize) {
    v.slice_mut(s![p1..]).mapv_inplace(|x| -x);
}

fn sum_sq(x: ArrayView2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `I + ρDGD` for `G = XᵀX`.
fn penalized_gram(gram: &Array2<f64>, p1: usize, rho: f64) -> Array2<f64> {
    let p = gram.nrows();
    Array2::from_shape_fn((p, p), |(i, j)| {
        let sign = if (i < p1) == (j < p1) { 1.0 } else { -1.0 };
        let id = if i == j { 1.0 } else { 0.0 };
        id + rho * sign * gram[[i, j]]
    })
}

/// Applies `(I + ρDXᵀXD)⁻¹XᵀX`.
enum Operator<'a> {
    Dense {
        gram: Array2<f64>,
        chol: Cholesky,
    },
    MatrixFree {
        x: ArrayView2<'a, f64>,
        p1: usize,
        rho: f64,
    },
}

impl<'a> Operator<'a> {
    fn new(x: ArrayView2<'a, f64>, p1: usize, rho: f64, cap: usize) -> Result<Self> {
        if x.ncols() <= cap {
            let gram = x.t().dot(&x);
            let chol = Cholesky::factor(penalized_gram(&gram, p1, rho).view())?;
            Ok(Operator::Dense { gram, chol })
        } else {
            Ok(Operator::MatrixFree { x, p1, rho })
        }
    }

    fn apply(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        match self {
            Operator::Dense { gram, chol } => Ok(chol.solve(&gram.dot(v))),
            Operator::MatrixFree { x, p1, rho } => {
                let y = x.t().dot(&x.dot(v));
                let (x, p1, rho) = (*x, *p1, *rho);
                linalg::conjugate_gradient(
                    |z| {
                        let mut dz = z.clone();
                        flip_second_view(&mut dz, p1);
                        let mut out = x.t().dot(&x.dot(&dz));
                        flip_second_view(&mut out, p1);
                        z + &(rho * out)
                    },
                    &y,
                    1e-13,
                    10 * x.ncols() + 100,
                )
            }
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(CocaError::InvalidInput(format!("rho must be finite and >= 0, got {rho}")));
    }
    Ok(())
}

fn warn_if_uncentered(data: &MultiViewData) {
    let scale = data
        .x1()
        .iter()
        .chain(data.x2().iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if data.max_abs_column_mean() > 1e-8 * scale.max(1.0) {
        log::warn!("data are not column-centered; fitting as given");
    }
}

/// Dense fit from the seeded start vector.
pub fn fit_dense(data: &MultiViewData, rho: f64, cfg: &DenseConfig) -> Result<CocaModel> {
    fit_dense_from(data, rho, cfg, None)
}

/// Dense fit by power iteration, optionally warm-started from `start`.
pub fn fit_dense_from(
    data: &MultiViewData,
    rho: f64,
    cfg: &DenseConfig,
    start: Option<&Array1<f64>>,
) -> Result<CocaModel> {
    check_rho(rho)?;
    warn_if_uncentered(data);
    let x = data.concat();
    let p1 = data.p1();
    let op = Operator::new(x.view(), p1, rho, cfg.p_dense_cap)?;

    let mut failure = None;
    let apply = |w: &Array1<f64>| match op.apply(w) {
        Ok(y) => y,
        Err(e) => {
            failure.get_or_insert(e);
            Array1::from_elem(w.len(), f64::NAN)
        }
    };
    let result = match start {
        Some(s) if s.len() == x.ncols() => {
            linalg::leading_eigenvector_from(apply, s.clone(), cfg.tol, cfg.max_iter)
        }
        Some(s) => {
            return Err(CocaError::DimensionMismatch(format!(
                "start vector has length {}, expected {}",
                s.len(),
                x.ncols()
            )))
        }
        None => linalg::leading_eigenvector(
            apply,
            x.ncols(),
            &PowerConfig {
                tol: cfg.tol,
                max_iter: cfg.max_iter,
                seed: cfg.seed,
            },
        ),
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let (w, lambda1) = result?;
    let xw = x.dot(&w);
    let nxw = norm(xw.view());
    if !(lambda1 > 0.0) || nxw == 0.0 {
        return Err(CocaError::Degenerate(format!(
            "leading eigenvalue {lambda1:.3e} at rho = {rho}; is X zero?"
        )));
    }
    // Scale so that ‖Xv‖ = λ₁.
    let v = (lambda1 / nxw) * &w;
    let u = xw / nxw;
    let fixed_point_residual = norm((&op.apply(&v)? - &(lambda1 * &v)).view());
    let objective = half_objective(&x, p1, rho, &u, &v);
    let mut model = assemble(data, rho, 0.0, u, v, ObjectiveConvention::Half, objective);
    model.eigenvalue = Some(lambda1);
    model.fixed_point_residual = Some(fixed_point_residual);
    model.converged = true;
    Ok(model)
}

fn agreement_sq(x: &Array2<f64>, p1: usize, v: &Array1<f64>) -> f64 {
    let mut dv = v.clone();
    flip_second_view(&mut dv, p1);
    let g = x.dot(&dv);
    g.dot(&g)
}

/// `‖X − uvᵀ‖²_F` for unit `u`.
fn approx_error(x: &Array2<f64>, u: &Array1<f64>, v: &Array1<f64>) -> f64 {
    sum_sq(x.view()) - 2.0 * u.dot(&x.dot(v)) + v.dot(v)
}

fn half_objective(x: &Array2<f64>, p1: usize, rho: f64, u: &Array1<f64>, v: &Array1<f64>) -> f64 {
    0.5 * approx_error(x, u, v) + 0.5 * rho * agreement_sq(x, p1, v)
}

/// Sparse objective `‖X − uvᵀ‖²_F + ρ‖X1v1 − X2v2‖² + λ‖v‖₁` (requires unit `u`).
pub fn sparse_objective(data: &MultiViewData, rho: f64, lambda: f64, u: &Array1<f64>, v: &Array1<f64>) -> f64 {
    let x = data.concat();
    unscaled_objective(&x, data.p1(), rho, lambda, u, v)
}

fn unscaled_objective(x: &Array2<f64>, p1: usize, rho: f64, lambda: f64, u: &Array1<f64>, v: &Array1<f64>) -> f64 {
    approx_error(x, u, v) + rho * agreement_sq(x, p1, v) + lambda * v.iter().map(|a| a.abs()).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    data: &MultiViewData,
    rho: f64,
    lambda: f64,
    u: Array1<f64>,
    v: Array1<f64>,
    convention: ObjectiveConvention,
    objective: f64,
) -> CocaModel {
    let p1 = data.p1();
    let d = norm(v.view());
    let direction = if d > 0.0 { &v / d } else { v.clone() };
    let v1 = v.slice(s![..p1]).to_owned();
    let v2 = v.slice(s![p1..]).to_owned();
    let scores1 = data.x1().dot(&v1);
    let scores2 = data.x2().dot(&v2);
    let all_zero = v.iter().all(|&a| a == 0.0);
    CocaModel {
        rho,
        lambda,
        p1,
        d,
        u,
        v,
        direction,
        v1,
        v2,
        scores1,
        scores2,
        converged: false,
        iterations: 0,
        objective,
        objective_convention: convention,
        eigenvalue: None,
        fixed_point_residual: None,
        all_zero,
    }
}

/// Augmented Lasso form of the v-update for a fixed unit `u`:
/// design `[I_p; √ρ·X·D]`, response `[Xᵀu; 0_n]`.
pub fn build_augmented(x: ArrayView2<f64>, p1: usize, rho: f64, lambda: f64, u: &Array1<f64>) -> Result<LassoProblem> {
    check_rho(rho)?;
    let (n, p) = x.dim();
    if u.len() != n {
        return Err(CocaError::DimensionMismatch(format!("u has length {}, X has {n} rows", u.len())));
    }
    if p1 == 0 || p1 >= p {
        return Err(CocaError::InvalidInput(format!("view split {p1} outside 1..{p}")));
    }
    if (norm(u.view()) - 1.0).abs() > 1e-8 {
        return Err(CocaError::InvalidInput("u must have unit norm".into()));
    }
    let mut design = Array2::zeros((p + n, p));
    design.slice_mut(s![..p, ..]).assign(&Array2::<f64>::eye(p));
    let sr = rho.sqrt();
    {
        let mut bottom = design.slice_mut(s![p.., ..]);
        bottom.assign(&(sr * &x));
        bottom.slice_mut(s![.., p1..]).mapv_inplace(|v| -v);
    }
    let mut response = Array1::zeros(p + n);
    response.slice_mut(s![..p]).assign(&x.t().dot(u));
    LassoProblem::new(design, response, lambda)
}

/// Sparse fit with `u⁰` = leading left singular vector of X.
pub fn fit_sparse(data: &MultiViewData, rho: f64, lambda: f64, cfg: &SolverConfig) -> Result<CocaModel> {
    fit_sparse_from(data, rho, lambda, cfg, None)
}

/// Alternating sparse fit. `warm` supplies `(u, v)` from a neighbouring fit.
pub fn fit_sparse_from(
    data: &MultiViewData,
    rho: f64,
    lambda: f64,
    cfg: &SolverConfig,
    warm: Option<(&Array1<f64>, &Array1<f64>)>,
) -> Result<CocaModel> {
    check_rho(rho)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CocaError::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    warn_if_uncentered(data);
    let sc = &cfg.sparse;
    let x = data.concat();
    let (n, p) = x.dim();
    let p1 = data.p1();

    let (mut u, mut v) = match warm {
        Some((u0, v0)) => {
            if u0.len() != n || v0.len() != p {
                return Err(CocaError::DimensionMismatch("warm start shape".into()));
            }
            let nu = norm(u0.view());
            if nu == 0.0 {
                return Err(CocaError::InvalidInput("warm-start u is zero".into()));
            }
            (u0 / nu, v0.clone())
        }
        None => {
            let t = linalg::leading_singular_triplet(x.view(), cfg.dense.tol, cfg.dense.max_iter)?;
            (t.u, Array1::zeros(p))
        }
    };

    // Gram of the augmented design: I + ρDXᵀXD.
    let mut lasso = GramLasso {
        gram: penalized_gram(&x.t().dot(&x), p1, rho),
        xty: Array1::zeros(p),
        yty: 0.0,
        lambda,
    };

    let slack = |f: f64| 1e-10 * f.abs().max(1.0);
    let mut obj = unscaled_objective(&x, p1, rho, lambda, &u, &v);
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=sc.max_iter {
        iterations = k;
        lasso.xty = x.t().dot(&u);
        lasso.yty = lasso.xty.dot(&lasso.xty);
        let scale = lasso.xty.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        let sol = lasso.solve(sc.lasso_tol * scale, sc.lasso_max_sweeps, Some(&v))?;
        let v_new = sol.beta;

        let obj_half = unscaled_objective(&x, p1, rho, lambda, &u, &v_new);
        if obj_half > obj + slack(obj) {
            return Err(CocaError::ObjectiveIncreased {
                iteration: k,
                before: obj,
                after: obj_half,
            });
        }

        if v_new.iter().all(|&a| a == 0.0) {
            let objective = unscaled_objective(&x, p1, rho, lambda, &u, &v_new);
            let mut m = assemble(data, rho, lambda, u, v_new, ObjectiveConvention::Unscaled, objective);
            m.converged = true;
            m.iterations = k;
            return Ok(m);
        }

        let xv = x.dot(&v_new);
        let nxv = norm(xv.view());
        if nxv == 0.0 {
            return Err(CocaError::Degenerate("v lies in the null space of X".into()));
        }
        let u_new = xv / nxv;
        let obj_new = unscaled_objective(&x, p1, rho, lambda, &u_new, &v_new);
        if obj_new > obj_half + slack(obj_half) {
            return Err(CocaError::ObjectiveIncreased {
                iteration: k,
                before: obj_half,
                after: obj_new,
            });
        }

        let obj_change = (obj - obj_new).abs() / obj_new.abs().max(f64::MIN_POSITIVE);
        let v_change = norm((&v_new - &v).view()) / norm(v_new.view());
        u = u_new;
        v = v_new;
        obj = obj_new;
        if k > 1 && obj_change < sc.obj_tol && v_change < sc.v_tol {
            converged = true;
            break;
        }
    }

    if canonicalize_sign(&mut v) {
        u.mapv_inplace(|a| -a);
    }
    let mut m = assemble(data, rho, lambda, u, v, ObjectiveConvention::Unscaled, obj);
    m.converged = converged;
    m.iterations = iterations;
    Ok(m)
}

/// Dense fit when `lambda == 0`, sparse fit otherwise.
pub fn fit(data: &MultiViewData, rho: f64, lambda: f64, cfg: &SolverConfig) -> Result<CocaModel> {
    if lambda == 0.0 {
        fit_dense(data, rho, &cfg.dense)
    } else {
        fit_sparse(data, rho, lambda, cfg)
    }
}

/// Leading eigenpair of `(DXᵀXD)⁻¹XᵀX`, the ρ → ∞ limit of the dense
/// operator scaled by ρ. Requires `XᵀX` nonsingular.
pub fn limit_eigenpair(data: &MultiViewData, cfg: &DenseConfig) -> Result<(Array1<f64>, f64)> {
    let x = data.concat();
    let p1 = data.p1();
    if x.nrows() <= x.ncols() {
        log::warn!("rank(X) = p < n does not hold; the CCA limit is undefined");
    }
    let gram = x.t().dot(&x);
    let mut dgd = penalized_gram(&gram, p1, 1.0);
    for i in 0..dgd.nrows() {
        dgd[[i, i]] -= 1.0;
    }
    let chol = Cholesky::factor(dgd.view()).map_err(|e| match e {
        CocaError::NotPositiveDefinite { pivot, .. } => {
            CocaError::Singular(format!("XᵀX is singular (pivot {pivot}); the limit needs rank(X) = p"))
        }
        other => other,
    })?;
    linalg::leading_eigenvector(
        |v| chol.solve(&gram.dot(v)),
        x.ncols(),
        &PowerConfig {
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            seed: cfg.seed,
        },
    )
}

/// Per-cell summary along a path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDiagnostics {
    /// `‖X1v1 − X2v2‖` with v rescaled to `‖Xv‖ = 1`.
    pub agreement_gap: f64,
    /// `‖Xv‖²` at the fitted scale.
    pub variance: f64,
    pub sparsity: usize,
    pub score_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathCell {
    pub rho: f64,
    pub lambda: f64,
    pub model: Option<CocaModel>,
    pub diagnostics: Option<PathDiagnostics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionPath {
    pub cells: Vec<PathCell>,
}

impl SolutionPath {
    pub fn models(&self) -> impl Iterator<Item = &CocaModel> {
        self.cells.iter().filter_map(|c| c.model.as_ref())
    }
}

fn check_grid(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(CocaError::InvalidInput(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(CocaError::InvalidInput(format!("{name} grid must be finite and nonnegative")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CocaError::InvalidInput(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Fit every `(ρ, λ)` cell, ρ-major. With `warm_start`, each cell starts
/// from the previous cell's solution. Cell failures are recorded, not
/// propagated.
pub fn solution_path(
    data: &MultiViewData,
    rho_grid: &[f64],
    lambda_grid: &[f64],
    warm_start: bool,
    cfg: &SolverConfig,
) -> Result<SolutionPath> {
    check_grid(rho_grid, "rho")?;
    check_grid(lambda_grid, "lambda")?;
    let mut cells = Vec::with_capacity(rho_grid.len() * lambda_grid.len());
    let mut prev: Option<CocaModel> = None;
    for &rho in rho_grid {
        for &lambda in lambda_grid {
            let warm = if warm_start { prev.as_ref() } else { None };
            let result = if lambda == 0.0 {
                fit_dense_from(data, rho, &cfg.dense, warm.filter(|m| !m.all_zero).map(|m| &m.direction))
            } else {
                fit_sparse_from(data, rho, lambda, cfg, warm.filter(|m| !m.all_zero).map(|m| (&m.u, &m.v)))
            };
            match result {
                Ok(model) => {
                    let diagnostics = path_diagnostics(data, &model);
                    prev = Some(model.clone());
                    cells.push(PathCell {
                        rho,
                        lambda,
                        model: Some(model),
                        diagnostics: Some(diagnostics),
                        error: None,
                    });
                }
                Err(e) => cells.push(PathCell {
                    rho,
                    lambda,
                    model: None,
                    diagnostics: None,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    Ok(SolutionPath { cells })
}

fn path_diagnostics(data: &MultiViewData, model: &CocaModel) -> PathDiagnostics {
    let (gap, corr) = metrics::agreement_diagnostics(data, model);
    let x = data.concat();
    let xv = x.dot(&model.v);
    PathDiagnostics {
        agreement_gap: gap,
        variance: xv.dot(&xv),
        sparsity: model.nnz(),
        score_correlation: corr,
    }
}
