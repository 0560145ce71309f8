//! Choosing (ρ, λ): K-fold reconstruction CV, speckled CV, and
//! supervised CV through a downstream LDA on the multi-view scores.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::coca::{self, CocaModel, SolverConfig};
use crate::data::MultiViewData;
use crate::error::{CocaError, Result};
use crate::linalg::Cholesky;
use crate::metrics;
use crate::simulate::NormalStream;

pub const DEFAULT_SHRINKAGE: f64 = 0.1;
/// Cells whose mean is this close to the best count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperGrid {
    pub rho_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
}

impl HyperGrid {
    pub fn new(rho_values: Vec<f64>, lambda_values: Vec<f64>) -> Result<Self> {
        for (name, g) in [("rho", &rho_values), ("lambda", &lambda_values)] {
            if g.is_empty() {
                return Err(CocaError::InvalidInput(format!("{name} grid is empty")));
            }
            if g.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(CocaError::InvalidInput(format!("{name} grid must be finite and nonnegative")));
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CocaError::InvalidInput(format!(
                    "{name} grid must be sorted with no duplicates"
                )));
            }
        }
        Ok(Self {
            rho_values,
            lambda_values,
        })
    }

    /// All `(ρ, λ)` cells, ρ-major.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.rho_values
            .iter()
            .flat_map(|&r| self.lambda_values.iter().map(move |&l| (r, l)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.rho_values.len() * self.lambda_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    Minimum,
    OneStandardError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auroc,
    Auprc,
    Misclassification,
}

impl Metric {
    fn maximize(self) -> bool {
        !matches!(self, Metric::Misclassification)
    }
}

impl std::str::FromStr for Metric {
    type Err = CocaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auroc" => Ok(Metric::Auroc),
            "auprc" => Ok(Metric::Auprc),
            "misclassification" => Ok(Metric::Misclassification),
            other => Err(CocaError::InvalidInput(format!(
                "unknown metric '{other}' (expected auroc, auprc or misclassification)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub rho: f64,
    pub lambda: f64,
    /// Mean over successful folds; `None` when every fold failed.
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub fold_values: Vec<Option<f64>>,
    pub failures: usize,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectedCell {
    pub index: usize,
    pub rho: f64,
    pub lambda: f64,
    pub mean: f64,
}

/// Cells whose mean lies within `TIE_TOL` of the best, or within one
/// standard error under that rule, are resolved toward larger λ, then
/// smaller ρ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub procedure: String,
    pub metric: String,
    pub maximize: bool,
    pub selection_rule: SelectionRule,
    pub seed: u64,
    pub grid: HyperGrid,
    pub cells: Vec<CellResult>,
    pub folds: Option<usize>,
    pub fold_assignment: Option<Vec<usize>>,
    pub mask: Option<SpeckleMask>,
    pub selected: SelectedCell,
}

impl CvReport {
    pub fn cell(&self, rho: f64, lambda: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.rho == rho && c.lambda == lambda)
    }
}

fn summarize(rho: f64, lambda: f64, values: Vec<Result<f64>>) -> CellResult {
    let mut messages = Vec::new();
    let fold_values: Vec<Option<f64>> = values
        .into_iter()
        .map(|r| match r {
            Ok(v) if v.is_finite() => Some(v),
            Ok(v) => {
                messages.push(format!("non-finite value {v}"));
                None
            }
            Err(e) => {
                messages.push(e.to_string());
                None
            }
        })
        .collect();
    let ok: Vec<f64> = fold_values.iter().flatten().copied().collect();
    let failures = fold_values.len() - ok.len();
    let (mean, se) = if ok.is_empty() {
        (None, None)
    } else {
        let m = ok.iter().sum::<f64>() / ok.len() as f64;
        let se = if ok.len() > 1 {
            let var = ok.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64;
            (var / ok.len() as f64).sqrt()
        } else {
            0.0
        };
        (Some(m), Some(se))
    };
    CellResult {
        rho,
        lambda,
        mean,
        se,
        fold_values,
        failures,
        messages,
    }
}

/// Pick a cell per `rule`.
pub fn select(cells: &[CellResult], maximize: bool, rule: SelectionRule) -> Result<SelectedCell> {
    let sign = if maximize { -1.0 } else { 1.0 };
    let best = cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.mean.map(|m| (i, sign * m)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| CocaError::Degenerate("every grid cell failed in every fold".into()))?;
    let mut threshold = best.1 + TIE_TOL * best.1.abs().max(1.0);
    if rule == SelectionRule::OneStandardError {
        threshold += cells[best.0].se.unwrap_or(0.0);
    }
    let (index, cell) = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.mean.is_some_and(|m| sign * m <= threshold))
        .max_by(|(_, a), (_, b)| {
            a.lambda
                .total_cmp(&b.lambda)
                .then_with(|| b.rho.total_cmp(&a.rho))
        })
        .expect("best cell is within threshold");
    Ok(SelectedCell {
        index,
        rho: cell.rho,
        lambda: cell.lambda,
        mean: cell.mean.expect("eligible"),
    })
}

/// Seeded fold labels for `n` samples; sizes differ by at most one.
pub fn kfold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(CocaError::InvalidInput(format!("need 2 <= K <= n, got K = {k}, n = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    NormalStream::new(seed).shuffle(&mut perm);
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

/// Seeded stratified fold labels. Each class is dealt round-robin, so
/// per-fold class counts differ by at most one.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(CocaError::InvalidInput(format!("need 2 <= K <= n, got K = {k}, n = {n}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = NormalStream::new(seed);
    let mut folds = vec![0; n];
    let mut offset = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(CocaError::Stratification(format!(
                "class {c} has {} samples, fewer than K = {k} folds",
                members.len()
            )));
        }
        rng.shuffle(&mut members);
        for (pos, &i) in members.iter().enumerate() {
            folds[i] = (offset + pos) % k;
        }
        offset += members.len();
    }
    Ok(folds)
}

/// Fit every cell of `grid`. Within each ρ row the fits run along
/// ascending λ, each warm-started from its predecessor; the row starts
/// from the dense fit at that ρ.
pub fn fit_grid(data: &MultiViewData, grid: &HyperGrid, cfg: &SolverConfig) -> Vec<Result<CocaModel>> {
    let mut out = Vec::with_capacity(grid.len());
    for &rho in &grid.rho_values {
        out.extend(fit_row(data, rho, &grid.lambda_values, cfg));
    }
    out
}

fn fit_row(data: &MultiViewData, rho: f64, lambdas: &[f64], cfg: &SolverConfig) -> Vec<Result<CocaModel>> {
    let mut prev = coca::fit_dense(data, rho, &cfg.dense).ok();
    lambdas
        .iter()
        .map(|&lambda| {
            let warm = prev.as_ref().filter(|m| !m.all_zero).map(|m| (&m.u, &m.v));
            let r = if lambda == 0.0 {
                coca::fit_dense(data, rho, &cfg.dense)
            } else {
                coca::fit_sparse_from(data, rho, lambda, cfg, warm)
            };
            if let Ok(m) = &r {
                prev = Some(m.clone());
            }
            r
        })
        .collect()
}

/// Refit one cell on `data` along its λ row, as the CV routines do.
pub fn refit_cell(data: &MultiViewData, grid: &HyperGrid, rho: f64, lambda: f64, cfg: &SolverConfig) -> Result<CocaModel> {
    let upto: Vec<f64> = grid.lambda_values.iter().copied().filter(|&l| l <= lambda).collect();
    if upto.last() != Some(&lambda) {
        return Err(CocaError::InvalidInput(format!("lambda {lambda} is not on the grid")));
    }
    fit_row(data, rho, &upto, cfg).pop().expect("nonempty row")
}

fn column_means(x: ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).expect("nonempty")
}

fn fold_rows(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != f)
}

/// K-fold CV on held-out projection reconstruction error per row.
pub fn kfold_unsupervised(
    data: &MultiViewData,
    grid: &HyperGrid,
    k: usize,
    cfg: &SolverConfig,
    seed: u64,
    rule: SelectionRule,
) -> Result<CvReport> {
    let folds = kfold_assignment(data.n(), k, seed)?;
    let x = data.concat();
    let p1 = data.p1();
    let cells = grid.cells();
    let mut values: Vec<Vec<Result<f64>>> = cells.iter().map(|_| Vec::with_capacity(k)).collect();
    for f in 0..k {
        let (train, test) = fold_rows(&folds, f);
        let xtr = x.select(Axis(0), &train);
        let mu = column_means(xtr.view());
        let train_data = MultiViewData::split((&xtr - &mu).view(), p1)?;
        let xte = &x.select(Axis(0), &test) - &mu;
        for (ci, fitted) in fit_grid(&train_data, grid, cfg).into_iter().enumerate() {
            let v = fitted
                .and_then(|m| metrics::projection_error(xte.view(), m.v.view()))
                .map(|e| e / test.len() as f64);
            values[ci].push(v);
        }
    }
    let results: Vec<CellResult> = cells
        .iter()
        .zip(values)
        .map(|(&(r, l), v)| summarize(r, l, v))
        .collect();
    let selected = select(&results, false, rule)?;
    Ok(CvReport {
        procedure: "kfold_unsupervised".into(),
        metric: "reconstruction_error".into(),
        maximize: false,
        selection_rule: rule,
        seed,
        grid: grid.clone(),
        cells: results,
        folds: Some(k),
        fold_assignment: Some(folds),
        mask: None,
        selected,
    })
}

/// Masked cells of the concatenated matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeckleMask {
    /// Sorted `(row, col)` pairs.
    pub cells: Vec<(usize, usize)>,
    pub fraction: f64,
    pub seed: u64,
    /// Masked cells falling in each view.
    pub per_view: (usize, usize),
}

impl SpeckleMask {
    /// `round(fraction·n·p)` cells, chosen greedily in seeded random order
    /// so that every row and column keeps an unmasked entry.
    pub fn new(n: usize, p: usize, p1: usize, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 0.5) {
            return Err(CocaError::InvalidInput(format!("speckle fraction must lie in (0, 0.5], got {fraction}")));
        }
        let target = (fraction * (n * p) as f64).round() as usize;
        if target == 0 {
            return Err(CocaError::InvalidInput(format!(
                "fraction {fraction} masks no cells of a {n}x{p} matrix"
            )));
        }
        let mut order: Vec<usize> = (0..n * p).collect();
        NormalStream::new(seed).shuffle(&mut order);
        let mut row_left = vec![p; n];
        let mut col_left = vec![n; p];
        let mut cells = Vec::with_capacity(target);
        for idx in order {
            if cells.len() == target {
                break;
            }
            let (i, j) = (idx / p, idx % p);
            if row_left[i] > 1 && col_left[j] > 1 {
                row_left[i] -= 1;
                col_left[j] -= 1;
                cells.push((i, j));
            }
        }
        if cells.len() < target {
            return Err(CocaError::InvalidInput(format!(
                "cannot mask {target} cells while keeping an unmasked entry in every row and column"
            )));
        }
        cells.sort_unstable();
        let in_first = cells.iter().filter(|&&(_, j)| j < p1).count();
        Ok(Self {
            per_view: (in_first, cells.len() - in_first),
            cells,
            fraction,
            seed,
        })
    }

    /// Masked entries replaced by their column's unmasked mean.
    pub fn impute(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (n, p) = x.dim();
        let mut masked = Array2::from_elem((n, p), false);
        for &(i, j) in &self.cells {
            masked[[i, j]] = true;
        }
        let mut out = x.to_owned();
        for j in 0..p {
            let (sum, cnt) = (0..n)
                .filter(|&i| !masked[[i, j]])
                .fold((0.0, 0usize), |(s, c), i| (s + x[[i, j]], c + 1));
            let mean = sum / cnt as f64;
            for i in 0..n {
                if masked[[i, j]] {
                    out[[i, j]] = mean;
                }
            }
        }
        out
    }

    /// Mean squared error of `reconstruction` against `x` over masked cells.
    pub fn masked_error(&self, reconstruction: ArrayView2<f64>, x: ArrayView2<f64>) -> f64 {
        self.cells
            .iter()
            .map(|&(i, j)| (reconstruction[[i, j]] - x[[i, j]]).powi(2))
            .sum::<f64>()
            / self.cells.len() as f64
    }
}

/// Speckled CV: mask, impute once by column means, fit each cell, and
/// score the rank-1 reconstruction on the masked cells.
pub fn speckled_cv(
    data: &MultiViewData,
    grid: &HyperGrid,
    fraction: f64,
    cfg: &SolverConfig,
    seed: u64,
    rule: SelectionRule,
) -> Result<CvReport> {
    let x = data.concat();
    let mask = SpeckleMask::new(data.n(), data.p(), data.p1(), fraction, seed)?;
    let imputed = MultiViewData::split(mask.impute(x.view()).view(), data.p1())?;
    let results: Vec<CellResult> = grid
        .cells()
        .into_iter()
        .zip(fit_grid(&imputed, grid, cfg))
        .map(|((rho, lambda), fitted)| {
            let v = fitted.map(|m| mask.masked_error(m.reconstruction().view(), x.view()));
            summarize(rho, lambda, vec![v])
        })
        .collect();
    let selected = select(&results, false, rule)?;
    Ok(CvReport {
        procedure: "speckled".into(),
        metric: "masked_mse".into(),
        maximize: false,
        selection_rule: rule,
        seed,
        grid: grid.clone(),
        cells: results,
        folds: None,
        fold_assignment: None,
        mask: Some(mask),
        selected,
    })
}

/// Per-sample multi-view scores `[X1v1, X2v2]` as an n×2 matrix.
pub fn score_matrix(model: &CocaModel) -> Array2<f64> {
    ndarray::stack(Axis(1), &[model.scores1.view(), model.scores2.view()]).expect("equal lengths")
}

/// Scores of new data under a fitted model.
pub fn project_scores(data: &MultiViewData, model: &CocaModel) -> Result<Array2<f64>> {
    if data.p1() != model.v1.len() || data.p2() != model.v2.len() {
        return Err(CocaError::DimensionMismatch("view widths differ from the model".into()));
    }
    let s1 = data.x1().dot(&model.v1);
    let s2 = data.x2().dot(&model.v2);
    Ok(ndarray::stack(Axis(1), &[s1.view(), s2.view()]).expect("equal lengths"))
}

/// Supervised CV. Each cell's component is fitted once on all of `data`;
/// the stratified folds then cross-validate the LDA stage on its scores.
#[allow(clippy::too_many_arguments)]
pub fn kfold_supervised(
    data: &MultiViewData,
    labels: &[usize],
    grid: &HyperGrid,
    k: usize,
    metric: Metric,
    cfg: &SolverConfig,
    seed: u64,
    rule: SelectionRule,
) -> Result<CvReport> {
    if labels.len() != data.n() {
        return Err(CocaError::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            data.n()
        )));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    if n_classes < 2 {
        return Err(CocaError::Stratification("labels contain a single class".into()));
    }
    if metric != Metric::Misclassification && n_classes != 2 {
        return Err(CocaError::InvalidInput(format!("{metric:?} needs binary labels")));
    }
    let folds = stratified_folds(labels, k, seed)?;
    let results: Vec<CellResult> = grid
        .cells()
        .into_iter()
        .zip(fit_grid(data, grid, cfg))
        .map(|((rho, lambda), fitted)| {
            let values = match fitted {
                Ok(model) => {
                    let scores = score_matrix(&model);
                    (0..k)
                        .map(|f| lda_fold_metric(scores.view(), labels, &folds, f, metric))
                        .collect()
                }
                Err(e) => vec![Err(e)],
            };
            summarize(rho, lambda, values)
        })
        .collect();
    let selected = select(&results, metric.maximize(), rule)?;
    Ok(CvReport {
        procedure: "kfold_supervised".into(),
        metric: serde_json::to_value(metric)?.as_str().unwrap_or_default().to_string(),
        maximize: metric.maximize(),
        selection_rule: rule,
        seed,
        grid: grid.clone(),
        cells: results,
        folds: Some(k),
        fold_assignment: Some(folds),
        mask: None,
        selected,
    })
}

fn lda_fold_metric(scores: ArrayView2<f64>, labels: &[usize], folds: &[usize], f: usize, metric: Metric) -> Result<f64> {
    let (train, test) = fold_rows(folds, f);
    let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let yte: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let model = lda_fit(scores.select(Axis(0), &train).view(), &ytr, DEFAULT_SHRINKAGE)?;
    score_predictions(&model, scores.select(Axis(0), &test).view(), &yte, metric)
}

/// Evaluate `metric` for LDA predictions on labelled data.
pub fn score_predictions(model: &LdaModel, scores: ArrayView2<f64>, labels: &[usize], metric: Metric) -> Result<f64> {
    match metric {
        Metric::Misclassification => {
            let pred = lda_classify(model, scores)?;
            let wrong = pred.iter().zip(labels).filter(|(a, b)| a != b).count();
            Ok(wrong as f64 / labels.len() as f64)
        }
        Metric::Auroc | Metric::Auprc => {
            let s = lda_decision(model, scores)?;
            let y: Vec<bool> = labels.iter().map(|&c| c == 1).collect();
            if metric == Metric::Auroc {
                auroc(s.view(), &y)
            } else {
                auprc(s.view(), &y)
            }
        }
    }
}

/// Linear discriminant analysis with a shrunk pooled covariance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdaModel {
    /// Class means, one row per class.
    pub means: Array2<f64>,
    /// `(1−s)·Σ_pool + s·(tr Σ_pool / d)·I`.
    pub covariance: Array2<f64>,
    pub shrinkage: f64,
    pub priors: Vec<f64>,
    #[serde(skip)]
    chol: Option<Cholesky>,
}

/// Fit LDA; `labels` are class indices `0..K`.
pub fn lda_fit(x: ArrayView2<f64>, labels: &[usize], shrinkage: f64) -> Result<LdaModel> {
    let (n, d) = x.dim();
    if labels.len() != n {
        return Err(CocaError::DimensionMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(CocaError::InvalidInput(format!("shrinkage must lie in [0, 1], got {shrinkage}")));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let counts: Vec<usize> = (0..k).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
    if k < 2 || counts.iter().any(|&c| c < 2) {
        return Err(CocaError::Stratification(format!(
            "LDA needs at least two classes with two samples each; class counts {counts:?}"
        )));
    }
    let mut means = Array2::zeros((k, d));
    for (row, &c) in x.outer_iter().zip(labels) {
        let mut m = means.row_mut(c);
        m += &row;
    }
    for c in 0..k {
        means.row_mut(c).mapv_inplace(|v| v / counts[c] as f64);
    }
    let mut pooled = Array2::<f64>::zeros((d, d));
    for (row, &c) in x.outer_iter().zip(labels) {
        let r = &row - &means.row(c);
        for a in 0..d {
            for b in 0..d {
                pooled[[a, b]] += r[a] * r[b];
            }
        }
    }
    pooled /= (n - k) as f64;
    let target = pooled.diag().sum() / d as f64;
    let mut covariance = pooled * (1.0 - shrinkage);
    covariance.diag_mut().mapv_inplace(|v| v + shrinkage * target);
    let chol = Cholesky::factor(covariance.view()).map_err(|_| {
        CocaError::Singular("pooled covariance is singular; increase the LDA shrinkage".into())
    })?;
    Ok(LdaModel {
        means,
        covariance,
        shrinkage,
        priors: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        chol: Some(chol),
    })
}

impl LdaModel {
    fn chol(&self) -> Result<Cholesky> {
        match &self.chol {
            Some(c) => Ok(c.clone()),
            None => Cholesky::factor(self.covariance.view()),
        }
    }

    /// `Σ⁻¹(μ₁ − μ₀)` for two classes.
    pub fn direction(&self) -> Result<Array1<f64>> {
        if self.means.nrows() != 2 {
            return Err(CocaError::InvalidInput("direction is defined for two classes".into()));
        }
        let diff = &self.means.row(1) - &self.means.row(0);
        Ok(self.chol()?.solve(&diff))
    }

    fn discriminants(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.ncols() {
            return Err(CocaError::DimensionMismatch("score width".into()));
        }
        let chol = self.chol()?;
        let k = self.means.nrows();
        let mut coef = Array2::zeros((k, x.ncols()));
        let mut offset = Array1::zeros(k);
        for c in 0..k {
            let mu = self.means.row(c).to_owned();
            let w = chol.solve(&mu);
            offset[c] = -0.5 * mu.dot(&w) + self.priors[c].ln();
            coef.row_mut(c).assign(&w);
        }
        Ok(x.dot(&coef.t()) + &offset)
    }
}

/// Posterior class probabilities, one row per sample.
pub fn lda_predict(model: &LdaModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut g = model.discriminants(x)?;
    for mut row in g.outer_iter_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    Ok(g)
}

/// Most probable class per sample.
pub fn lda_classify(model: &LdaModel, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    let g = model.discriminants(x)?;
    Ok(g.outer_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0
        })
        .collect())
}

/// Two-class log-odds of class 1 over class 0.
pub fn lda_decision(model: &LdaModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    if model.means.nrows() != 2 {
        return Err(CocaError::InvalidInput("decision scores need two classes".into()));
    }
    let g = model.discriminants(x)?;
    Ok(&g.column(1) - &g.column(0))
}

fn class_counts(scores: ArrayView1<f64>, labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(CocaError::DimensionMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(CocaError::InvalidInput("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&b| b).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(CocaError::InvalidInput("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score.
fn descending(scores: ArrayView1<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Area under the ROC curve; ties count one half.
pub fn auroc(scores: ArrayView1<f64>, labels: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let order = descending(scores);
    // Walk tie groups from the top, counting negatives ranked below each positive.
    let mut concordant = 0.0;
    let mut neg_above = 0usize;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let gp = order[start..end].iter().filter(|&&i| labels[i]).count();
        let gn = (end - start) - gp;
        concordant += gp as f64 * ((neg - neg_above - gn) as f64 + 0.5 * gn as f64);
        neg_above += gn;
        start = end;
    }
    Ok(concordant / (pos as f64 * neg as f64))
}

/// Average precision over the descending-score sweep, tied scores
/// entering together.
pub fn auprc(scores: ArrayView1<f64>, labels: &[bool]) -> Result<f64> {
    let (pos, _) = class_counts(scores, labels)?;
    let order = descending(scores);
    let (mut tp, mut seen, mut area) = (0usize, 0usize, 0.0);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let gp = order[start..end].iter().filter(|&&i| labels[i]).count();
        tp += gp;
        seen += end - start;
        area += (gp as f64 / pos as f64) * (tp as f64 / seen as f64);
        start = end;
    }
    Ok(area)
}
