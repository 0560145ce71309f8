//! Cyclic coordinate descent for `min ‖y − Xβ‖² + λ‖β‖₁`.
//!
//! No ½ on the loss, so each coordinate is soft-thresholded at λ/2. The
//! solver works on the Gram form `(XᵀX, Xᵀy, yᵀy)`, which lets callers that
//! re-solve with a fixed design and a changing response (the CoCA
//! v-update) pay for `XᵀX` once.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{CocaError, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// Design, response and penalty weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    pub design: Array2<f64>,
    pub response: Array1<f64>,
    pub lambda: f64,
}

impl LassoProblem {
    pub fn new(design: Array2<f64>, response: Array1<f64>, lambda: f64) -> Result<Self> {
        if design.nrows() != response.len() {
            return Err(CocaError::DimensionMismatch(format!(
                "design has {} rows, response has {}",
                design.nrows(),
                response.len()
            )));
        }
        if design.ncols() == 0 {
            return Err(CocaError::InvalidInput("design has no columns".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(CocaError::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(CocaError::InvalidInput("non-finite entries".into()));
        }
        Ok(Self {
            design,
            response,
            lambda,
        })
    }

    pub fn n_features(&self) -> usize {
        self.design.ncols()
    }

    pub fn objective(&self, beta: ArrayView1<f64>) -> f64 {
        let r = &self.response - &self.design.dot(&beta);
        r.dot(&r) + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Smallest λ for which β = 0 is optimal.
    pub fn lambda_max(&self) -> f64 {
        2.0 * self
            .design
            .t()
            .dot(&self.response)
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn to_gram(&self) -> GramLasso {
        GramLasso {
            gram: self.design.t().dot(&self.design),
            xty: self.design.t().dot(&self.response),
            yty: self.response.dot(&self.response),
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LassoSolution {
    pub beta: Array1<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Coordinate sweeps performed (full and active-set).
    pub iterations: usize,
    pub converged: bool,
}

/// The same problem in sufficient-statistic form.
#[derive(Debug, Clone, PartialEq)]
pub struct GramLasso {
    pub gram: Array2<f64>,
    pub xty: Array1<f64>,
    pub yty: f64,
    pub lambda: f64,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest violation of the subgradient optimality conditions, given
/// `grad = 2(Gβ − Xᵀy)`.
fn kkt_from_grad(grad: &Array1<f64>, beta: &Array1<f64>, lambda: f64, zero_col: &[bool]) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..beta.len() {
        if zero_col[j] {
            continue;
        }
        let v = if beta[j] != 0.0 {
            (grad[j] + lambda * beta[j].signum()).abs()
        } else {
            (grad[j].abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

impl GramLasso {
    pub fn n_features(&self) -> usize {
        self.xty.len()
    }

    /// Objective from the sufficient statistics.
    pub fn objective(&self, beta: &Array1<f64>) -> f64 {
        let q = self.gram.dot(beta);
        self.yty - 2.0 * self.xty.dot(beta) + beta.dot(&q) + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    pub fn kkt_residual(&self, beta: &Array1<f64>) -> f64 {
        let grad = 2.0 * (&self.gram.dot(beta) - &self.xty);
        let zero_col: Vec<bool> = (0..beta.len()).map(|j| self.gram[[j, j]] <= 0.0).collect();
        kkt_from_grad(&grad, beta, self.lambda, &zero_col)
    }

    /// Coordinate descent from `warm` (or zero), handing over to an exact
    /// active-set search if the sweeps stall on an ill-conditioned Gram.
    pub fn solve(&self, tol: f64, max_sweeps: usize, warm: Option<&Array1<f64>>) -> Result<LassoSolution> {
        let p = self.n_features();
        if self.gram.dim() != (p, p) {
            return Err(CocaError::DimensionMismatch("gram shape".into()));
        }
        if !(tol > 0.0) {
            return Err(CocaError::InvalidInput("tol must be positive".into()));
        }
        let zero_col: Vec<bool> = (0..p).map(|j| self.gram[[j, j]] <= 0.0).collect();
        let mut beta = match warm {
            Some(w) if w.len() == p => w.clone(),
            Some(w) => {
                return Err(CocaError::DimensionMismatch(format!(
                    "warm start has length {}, expected {p}",
                    w.len()
                )))
            }
            None => Array1::zeros(p),
        };
        for j in 0..p {
            if zero_col[j] {
                beta[j] = 0.0;
            }
        }

        let budget = max_sweeps.min(CD_SWEEPS_BEFORE_POLISH);
        let (mut kkt, mut sweeps) = self.coordinate_descent(&mut beta, tol, budget, &zero_col);
        if kkt > tol {
            self.feature_sign(&mut beta, tol, &zero_col);
            kkt = self.kkt_residual(&beta);
            if kkt > tol && sweeps < max_sweeps {
                let (k, s) = self.coordinate_descent(&mut beta, tol, max_sweeps - sweeps, &zero_col);
                kkt = k;
                sweeps += s;
            }
        }

        let objective = self.objective(&beta);
        Ok(LassoSolution {
            beta,
            objective,
            kkt_residual: kkt,
            iterations: sweeps,
            converged: kkt <= tol,
        })
    }

    /// Full sweeps until the KKT residual falls under `tol`; between full
    /// sweeps, sweeps restricted to the nonzero coordinates.
    fn coordinate_descent(&self, beta: &mut Array1<f64>, tol: f64, max_sweeps: usize, zero_col: &[bool]) -> (f64, usize) {
        let p = beta.len();
        let half_lambda = 0.5 * self.lambda;
        let mut q = self.gram.dot(&*beta);
        let mut sweeps = 0usize;
        let mut kkt = kkt_from_grad(&(2.0 * (&q - &self.xty)), beta, self.lambda, zero_col);
        if kkt <= tol || max_sweeps == 0 {
            return (kkt, 0);
        }
        #[cfg(debug_assertions)]
        let mut last_obj = self.objective(beta);

        // One coordinate step; returns |Δβ_j|·√G_jj.
        let step = |j: usize, beta: &mut Array1<f64>, q: &mut Array1<f64>| -> f64 {
            let gjj = self.gram[[j, j]];
            let old = beta[j];
            let z = self.xty[j] - (q[j] - gjj * old);
            let new = soft_threshold(z, half_lambda) / gjj;
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                q.scaled_add(delta, &self.gram.column(j));
            }
            delta.abs() * gjj.sqrt()
        };

        loop {
            let mut full_change = 0.0_f64;
            for j in 0..p {
                if !zero_col[j] {
                    full_change = full_change.max(step(j, beta, &mut q));
                }
            }
            sweeps += 1;
            q = self.gram.dot(&*beta);
            let grad = 2.0 * (&q - &self.xty);
            kkt = kkt_from_grad(&grad, beta, self.lambda, zero_col);

            #[cfg(debug_assertions)]
            {
                let obj = self.objective(beta);
                let slack = 1e-9 * (1.0 + last_obj.abs() + self.yty.abs());
                debug_assert!(obj <= last_obj + slack, "lasso objective rose: {last_obj} -> {obj}");
                last_obj = obj;
            }

            if kkt <= tol || sweeps >= max_sweeps || full_change == 0.0 {
                break;
            }

            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            if active.is_empty() {
                continue;
            }
            while sweeps < max_sweeps {
                let mut change = 0.0_f64;
                for &j in &active {
                    change = change.max(step(j, beta, &mut q));
                }
                sweeps += 1;
                if change <= 0.1 * tol || change == 0.0 {
                    break;
                }
                let worst = active
                    .iter()
                    .map(|&j| {
                        let g = 2.0 * (q[j] - self.xty[j]);
                        if beta[j] != 0.0 {
                            (g + self.lambda * beta[j].signum()).abs()
                        } else {
                            (g.abs() - self.lambda).max(0.0)
                        }
                    })
                    .fold(0.0_f64, f64::max);
                if worst <= 0.1 * tol {
                    break;
                }
            }
        }
        (kkt, sweeps)
    }

    /// Feature-sign search: with the signs of the active set fixed, jump to
    /// the exact minimizer of the resulting quadratic, backtracking to the
    /// best zero crossing on the way. Each step lowers the objective, and
    /// the number of steps does not depend on the conditioning of the Gram.
    fn feature_sign(&self, beta: &mut Array1<f64>, tol: f64, zero_col: &[bool]) {
        let p = beta.len();
        let mut theta: Array1<f64> = beta.mapv(|b| if b == 0.0 { 0.0 } else { b.signum() });
        for _ in 0..(20 * p + 100) {
            let grad = 2.0 * (&self.gram.dot(&*beta) - &self.xty);
            let nonzero_ok = (0..p)
                .filter(|&j| beta[j] != 0.0)
                .all(|j| (grad[j] + self.lambda * theta[j]).abs() <= tol);
            if nonzero_ok {
                let entering = (0..p)
                    .filter(|&j| beta[j] == 0.0 && !zero_col[j])
                    .map(|j| (j, grad[j].abs() - self.lambda))
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match entering {
                    Some((j, excess)) if excess > tol => theta[j] = -grad[j].signum(),
                    _ => return,
                }
            }
            let active: Vec<usize> = (0..p).filter(|&j| theta[j] != 0.0).collect();
            let k = active.len();
            let sub = Array2::from_shape_fn((k, k), |(a, b)| self.gram[[active[a], active[b]]]);
            let rhs = Array1::from_shape_fn(k, |a| self.xty[active[a]] - 0.5 * self.lambda * theta[active[a]]);
            let Ok(target) = crate::linalg::spd_solve(sub.view(), &rhs) else {
                return;
            };
            let start: Array1<f64> = active.iter().map(|&j| beta[j]).collect();

            // Candidates: the target and every interior zero crossing.
            let mut ts: Vec<f64> = (0..k)
                .filter(|&a| start[a] != 0.0 && target[a].signum() != start[a].signum())
                .map(|a| start[a] / (start[a] - target[a]))
                .filter(|t| *t > 0.0 && *t < 1.0)
                .collect();
            ts.push(1.0);
            let at = |t: f64| {
                let mut b = beta.clone();
                for (a, &j) in active.iter().enumerate() {
                    let v = start[a] + t * (target[a] - start[a]);
                    // snap the crossing coordinate to zero
                    let crossing = start[a] != 0.0 && (start[a] / (start[a] - target[a]) - t).abs() <= 1e-15;
                    b[j] = if crossing { 0.0 } else { v };
                }
                b
            };
            let current = self.objective(beta);
            let best = ts
                .into_iter()
                .map(|t| {
                    let b = at(t);
                    (self.objective(&b), b)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            match best {
                Some((obj, b)) if obj < current || (obj <= current && b != *beta) => {
                    *beta = b;
                    theta = beta.mapv(|v| if v == 0.0 { 0.0 } else { v.signum() });
                }
                _ => return,
            }
        }
    }
}

/// Sweeps of plain coordinate descent before the active-set search.
const CD_SWEEPS_BEFORE_POLISH: usize = 200;

/// Solve a Lasso problem to KKT tolerance `tol`.
pub fn solve_lasso(
    problem: &LassoProblem,
    tol: f64,
    max_sweeps: usize,
    warm: Option<&Array1<f64>>,
) -> Result<LassoSolution> {
    let mut sol = problem.to_gram().solve(tol, max_sweeps, warm)?;
    // report the objective and certificate from the original data
    sol.objective = problem.objective(sol.beta.view());
    sol.kkt_residual = kkt_check(problem, sol.beta.view())?;
    sol.converged = sol.kkt_residual <= tol;
    Ok(sol)
}

/// Largest violation of the Lasso optimality conditions at `beta`;
/// zero means exact stationarity.
pub fn kkt_check(problem: &LassoProblem, beta: ArrayView1<f64>) -> Result<f64> {
    if beta.len() != problem.n_features() {
        return Err(CocaError::DimensionMismatch(format!(
            "beta has length {}, design has {} columns",
            beta.len(),
            problem.n_features()
        )));
    }
    let r = &problem.design.dot(&beta) - &problem.response;
    let grad = 2.0 * problem.design.t().dot(&r);
    let zero_col: Vec<bool> = problem
        .design
        .columns()
        .into_iter()
        .map(|c| c.dot(&c) == 0.0)
        .collect();
    Ok(kkt_from_grad(&grad, &beta.to_owned(), problem.lambda, &zero_col))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn orthonormal_design_soft_thresholds() {
        let p = LassoProblem::new(Array2::eye(2), array![3.0, -1.0], 2.0).unwrap();
        let s = solve_lasso(&p, 1e-12, 100, None).unwrap();
        assert_eq!(s.beta, array![2.0, 0.0]);
        assert!(s.converged);
        assert!(kkt_check(&p, s.beta.view()).unwrap() < 1e-12);
    }

    #[test]
    fn null_threshold() {
        let x = array![[1.0, 2.0], [0.5, -1.0], [2.0, 0.0]];
        let y = array![1.0, -0.5, 2.0];
        let p0 = LassoProblem::new(x.clone(), y.clone(), 0.0).unwrap();
        let lmax = p0.lambda_max();
        let p = LassoProblem::new(x, y, lmax).unwrap();
        let s = solve_lasso(&p, 1e-12, 100, None).unwrap();
        assert_eq!(s.beta, array![0.0, 0.0]);
        assert_eq!(kkt_check(&p, s.beta.view()).unwrap(), 0.0);
    }

    #[test]
    fn tie_at_threshold_stays_zero() {
        // |Xᵀy| = λ/2 exactly on the first coordinate
        let p = LassoProblem::new(Array2::eye(2), array![1.0, 3.0], 2.0).unwrap();
        let s = solve_lasso(&p, 1e-12, 100, None).unwrap();
        assert_eq!(s.beta[0], 0.0);
        assert_eq!(s.beta[1], 2.0);
    }

    #[test]
    fn zero_column_stays_zero() {
        let x = array![[1.0, 0.0], [1.0, 0.0]];
        let p = LassoProblem::new(x, array![1.0, 2.0], 0.0).unwrap();
        let s = solve_lasso(&p, 1e-12, 100, Some(&array![0.0, 5.0])).unwrap();
        assert_eq!(s.beta[1], 0.0);
        assert!((s.beta[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn warm_start_length_checked() {
        let p = LassoProblem::new(Array2::eye(2), array![1.0, 1.0], 0.1).unwrap();
        assert!(solve_lasso(&p, 1e-10, 10, Some(&array![1.0])).is_err());
    }

    #[test]
    fn rejects_negative_lambda() {
        assert!(LassoProblem::new(Array2::eye(2), array![1.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn gram_and_direct_objectives_agree() {
        let x = array![[1.0, 2.0, 0.0], [0.5, -1.0, 1.0], [2.0, 0.0, -0.3], [0.1, 0.2, 0.3]];
        let y = array![1.0, -0.5, 2.0, 0.0];
        let p = LassoProblem::new(x, y, 0.7).unwrap();
        let b = array![0.3, -0.2, 0.9];
        let g = p.to_gram();
        assert!((g.objective(&b) - p.objective(b.view())).abs() < 1e-12);
        let sol = g.solve(1e-12, 1000, None).unwrap();
        assert!(sol.converged);
        assert!(g.kkt_residual(&sol.beta) <= 1e-12);
    }
}
