//! Command-line front end. Every command stages its outputs in memory
//! and commits them with temp-file-then-rename writes at the end, so a
//! failure leaves no partial artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use serde::Serialize;
use serde_json::{json, Value};

use crate::baselines;
use crate::coca::{self, CocaModel, SolverConfig};
use crate::data::{self, fmt_f64, MultiViewData, StandardizationRecord};
use crate::error::{CocaError, Result};
use crate::metrics;
use crate::selection::{self, HyperGrid, Metric, SelectionRule};
use crate::simulate::{self, FactorModelSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser, Serialize)]
#[command(name = "coca", version, about = "Cooperative component analysis for two-view data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Draw two-view data from a latent factor model.
    Simulate(SimulateArgs),
    /// Fit one component.
    Fit(FitArgs),
    /// Fit every cell of a (rho, lambda) grid.
    Path(PathArgs),
    /// Cross-validate over a (rho, lambda) grid and refit the selected cell.
    Cv(CvArgs),
    /// Score a fitted model on held-out views.
    Eval(EvalArgs),
    /// LDA on the multi-view scores of a fitted model.
    Predict(PredictArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Power-iteration tolerance.
    #[arg(long, default_value_t = crate::linalg::DEFAULT_TOL)]
    pub tol: f64,
    /// Iteration cap for power iteration and the alternating solver.
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl Common {
    fn solver(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default().with_seed(self.seed);
        cfg.dense.tol = self.tol;
        if let Some(m) = self.max_iter {
            cfg.dense.max_iter = m;
            cfg.sparse.max_iter = m;
        }
        cfg
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ViewArgs {
    #[arg(long)]
    pub view1: PathBuf,
    #[arg(long)]
    pub view2: PathBuf,
    /// CSV files have no header row.
    #[arg(long)]
    pub no_header: bool,
    /// First CSV column holds sample ids.
    #[arg(long)]
    pub ids: bool,
    /// Also scale columns to unit variance after centering.
    #[arg(long)]
    pub scale: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Illustrative,
    Sparse,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// 1 when the shared factor z is positive.
    SignZ,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Factor-model spec as JSON; overrides --preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "illustrative")]
    pub preset: Preset,
    /// Coordinates per view for the sparse preset.
    #[arg(long, default_value_t = 30)]
    pub p_per_view: usize,
    /// Coordinates carrying the shared factor, sparse preset.
    #[arg(long, default_value_t = 2)]
    pub dense_dims: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum)]
    pub label_rule: Option<LabelRule>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Coca,
    Pca,
    Cca,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub views: ViewArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value = "coca")]
    pub method: Method,
    /// Ridge added to each view's Gram matrix for --method cca.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PathArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub views: ViewArgs,
    /// Comma list or log:start:stop:count.
    #[arg(long)]
    pub rho_grid: String,
    #[arg(long, default_value = "0")]
    pub lambda_grid: String,
    /// Start each cell from the previous cell's solution.
    #[arg(long)]
    pub warm_start: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleArg {
    Min,
    OneSe,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub views: ViewArgs,
    #[arg(long)]
    pub rho_grid: String,
    #[arg(long, default_value = "0")]
    pub lambda_grid: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Run speckled CV masking this fraction of entries.
    #[arg(long)]
    pub speckle_frac: Option<f64>,
    /// Labels CSV; switches to supervised CV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// auroc, auprc or misclassification (supervised CV only).
    #[arg(long, default_value = "auroc")]
    pub metric: String,
    #[arg(long, value_enum, default_value = "min")]
    pub rule: RuleArg,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub views: ViewArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// truth.json from `simulate`, for errors against the planted component.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: PathBuf,
    /// Labels of the samples the model was fitted on.
    #[arg(long)]
    pub labels: PathBuf,
    /// Held-out first view; predictions default to the training scores.
    #[arg(long, requires = "view2")]
    pub view1: Option<PathBuf>,
    #[arg(long, requires = "view1")]
    pub view2: Option<PathBuf>,
    /// Labels of the held-out samples, for AUROC/AUPRC.
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value_t = selection::DEFAULT_SHRINKAGE)]
    pub shrinkage: f64,
}

/// Parse `a,b,c` or `log:start:stop:count` into an increasing grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |m: String| CocaError::InvalidInput(format!("grid '{s}': {m}"));
    let values: Vec<f64> = if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected log:start:stop:count".into()));
        }
        let start: f64 = parts[0].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let stop: f64 = parts[1].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let count: usize = parts[2].trim().parse().map_err(|e| bad(format!("{e}")))?;
        if !(start > 0.0 && stop > start) || count < 2 {
            return Err(bad("need 0 < start < stop and count >= 2".into()));
        }
        let (a, b) = (start.log10(), stop.log10());
        (0..count)
            .map(|i| {
                if i == 0 {
                    start
                } else if i == count - 1 {
                    stop
                } else {
                    10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)
                }
            })
            .collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| bad(format!("'{t}': {e}"))))
            .collect::<Result<_>>()?
    };
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(bad("values must be finite and nonnegative".into()));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be strictly increasing".into()));
    }
    Ok(values)
}

/// Outputs staged for an all-or-nothing commit.
struct Staged {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    fn add_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.add(name, s);
        Ok(())
    }

    fn commit(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)?;
        let pid = std::process::id();
        let mut temps = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = self.dir.join(format!(".{name}.tmp-{pid}"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for t in &temps {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(e.into());
            }
            temps.push(tmp);
        }
        let mut written = Vec::new();
        for ((name, _), tmp) in self.files.iter().zip(&temps) {
            let dest = self.dir.join(name);
            fs::rename(tmp, &dest)?;
            written.push(dest);
        }
        Ok(written)
    }
}

struct Context {
    command: &'static str,
    config: Value,
    seed: u64,
    started: SystemTime,
    clock: Instant,
}

impl Context {
    fn provenance(&self) -> Value {
        json!({
            "tool": "coca",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
        })
    }

    fn wall_clock(&self) -> Value {
        let started = self
            .started
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        json!({
            "started_unix": started,
            "elapsed_seconds": self.clock.elapsed().as_secs_f64(),
        })
    }

    /// Versioned document with provenance; wall-clock time sits under its
    /// own key so reruns can be compared without it.
    fn document(&self, body: Value) -> Value {
        let mut doc = json!({
            "schema_version": SCHEMA_VERSION,
            "provenance": self.provenance(),
            "wall_clock": self.wall_clock(),
        });
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        doc
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CocaError::read(path, e))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn column_names(prefix: &str, p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("{prefix}_{j}")).collect()
}

fn load_views(v: &ViewArgs) -> Result<(MultiViewData, StandardizationRecord)> {
    let raw = read_views(&v.view1, &v.view2, !v.no_header, v.ids)?;
    Ok(data::standardize(&raw, v.scale))
}

fn read_views(view1: &Path, view2: &Path, header: bool, ids: bool) -> Result<MultiViewData> {
    let a = data::read_csv_view(view1, header, ids)?;
    let b = data::read_csv_view(view2, header, ids)?;
    let names = match (a.header, b.header) {
        (Some(h1), Some(h2)) => Some((h1, h2)),
        _ => None,
    };
    MultiViewData::new(a.matrix, b.matrix)?.with_labels(a.ids, names)
}

/// Labels CSV: one column, optional header. Classes are indexed in
/// sorted order of their text; the last class is the positive one.
fn read_labels(path: &Path, header: bool) -> Result<(Vec<usize>, Vec<String>)> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut raw = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CocaError::Parse {
            row: i + 1,
            col: None,
            message: e.to_string(),
        })?;
        let last = rec.iter().last().unwrap_or("").to_string();
        if last.is_empty() {
            return Err(CocaError::Parse {
                row: i + 1,
                col: None,
                message: "empty label".into(),
            });
        }
        raw.push(last);
    }
    if raw.is_empty() {
        return Err(CocaError::EmptyInput(format!("{} has no labels", path.display())));
    }
    let mut classes = raw.clone();
    classes.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    });
    classes.dedup();
    let idx = raw
        .iter()
        .map(|r| classes.iter().position(|c| c == r).expect("present"))
        .collect();
    Ok((idx, classes))
}

fn standardization_value(rec: &StandardizationRecord) -> Value {
    json!({
        "means": rec.means.to_vec(),
        "scales": rec.scales.to_vec(),
        "scaled": rec.scaled,
    })
}

fn standardization_from(v: &Value) -> Result<StandardizationRecord> {
    let vec = |key: &str| -> Result<Array1<f64>> {
        v.get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| CocaError::InvalidInput(format!("model.json: standardization.{key} missing")))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| CocaError::InvalidInput(format!("model.json: bad {key} entry")))
            })
            .collect()
    };
    let means = vec("means")?;
    let scales = vec("scales")?;
    Ok(StandardizationRecord {
        constant: vec![false; means.len()],
        means,
        scales,
        scaled: v.get("scaled").and_then(Value::as_bool).unwrap_or(false),
    })
}

fn model_body(model: &CocaModel, rec: &StandardizationRecord, data: &MultiViewData) -> Result<Value> {
    let (gap, corr) = metrics::agreement_diagnostics(data, model);
    let x = data.concat();
    Ok(json!({
        "method": "coca",
        "model": to_value(model)?,
        "diagnostics": {
            "agreement_gap": gap,
            "score_correlation": corr,
            "sparsity": model.nnz(),
            "reconstruction_error": metrics::reconstruction_error(x.view(), model)?,
        },
        "convergence": {
            "converged": model.converged,
            "iterations": model.iterations,
            "objective": model.objective,
            "objective_convention": to_value(&model.objective_convention)?,
            "fixed_point_residual": model.fixed_point_residual,
        },
        "standardization": standardization_value(rec),
    }))
}

fn load_model(path: &Path) -> Result<(CocaModel, StandardizationRecord)> {
    let text = read_text(path)?;
    let doc: Value = serde_json::from_str(&text)?;
    if doc.get("method").and_then(Value::as_str) != Some("coca") {
        return Err(CocaError::InvalidInput(format!(
            "{} does not hold a CoCA model",
            path.display()
        )));
    }
    let model: CocaModel = serde_json::from_value(doc["model"].clone())?;
    let rec = standardization_from(&doc["standardization"])?;
    Ok((model, rec))
}

fn warn_unconverged(model: &CocaModel) {
    if !model.converged {
        eprintln!(
            "warning: not_converged: solver stopped after {} iterations at rho = {}, lambda = {}",
            model.iterations, model.rho, model.lambda
        );
    }
}

fn cmd_simulate(a: &SimulateArgs, ctx: &Context) -> Result<Staged> {
    let spec: FactorModelSpec = match &a.spec {
        Some(p) => serde_json::from_str(&read_text(p)?)?,
        None => match a.preset {
            Preset::Illustrative => simulate::illustrative_spec(),
            Preset::Sparse => simulate::sparse_spec(a.p_per_view, a.dense_dims, 3)?,
        },
    };
    spec.validate()?;
    let draw = simulate::draw_with_latents(&spec, a.n, a.common.seed)?;
    let mut out = Staged::new(&a.common.out);
    let d = &draw.data;
    out.add("view1.csv", data::matrix_to_csv(d.x1().view(), Some(&column_names("x1", d.p1())), None));
    out.add("view2.csv", data::matrix_to_csv(d.x2().view(), Some(&column_names("x2", d.p2())), None));
    out.add_json(
        "truth.json",
        &ctx.document(json!({
            "beta": spec.beta().to_vec(),
            "spec": to_value(&spec)?,
            "n": a.n,
            "seed": a.common.seed,
        })),
    )?;
    if let Some(LabelRule::SignZ) = a.label_rule {
        let mut s = String::from("label\n");
        for z in draw.z.iter() {
            s.push_str(if *z > 0.0 { "1\n" } else { "0\n" });
        }
        out.add("labels.csv", s);
    }
    Ok(out)
}

fn cmd_fit(a: &FitArgs, ctx: &Context) -> Result<Staged> {
    let (data, rec) = load_views(&a.views)?;
    let mut out = Staged::new(&a.common.out);
    let body = match a.method {
        Method::Coca => {
            let model = coca::fit(&data, a.rho, a.lambda, &a.common.solver())?;
            warn_unconverged(&model);
            model_body(&model, &rec, &data)?
        }
        Method::Pca => {
            let (v, d) = baselines::pca_leading(data.concat().view())?;
            json!({
                "method": "pca",
                "model": { "v": to_value(&v)?, "d": d },
                "standardization": standardization_value(&rec),
            })
        }
        Method::Cca => {
            let s = baselines::cca_leading(data.x1().view(), data.x2().view(), a.ridge)?;
            json!({
                "method": "cca",
                "model": to_value(&s)?,
                "standardization": standardization_value(&rec),
            })
        }
    };
    out.add_json("model.json", &ctx.document(body))?;
    Ok(out)
}

fn cmd_path(a: &PathArgs, ctx: &Context) -> Result<Staged> {
    let (data, _) = load_views(&a.views)?;
    let rho = parse_grid(&a.rho_grid)?;
    let lambda = parse_grid(&a.lambda_grid)?;
    let path = coca::solution_path(&data, &rho, &lambda, a.warm_start, &a.common.solver())?;
    let x = data.concat();
    let mut csv = String::from(
        "rho,lambda,objective,objective_convention,agreement_gap,score_correlation,sparsity,reconstruction_error,converged,error\n",
    );
    for cell in &path.cells {
        match (&cell.model, &cell.diagnostics) {
            (Some(m), Some(d)) => {
                let conv = match m.objective_convention {
                    coca::ObjectiveConvention::Half => "half",
                    coca::ObjectiveConvention::Unscaled => "unscaled",
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},\n",
                    fmt_f64(cell.rho),
                    fmt_f64(cell.lambda),
                    fmt_f64(m.objective),
                    conv,
                    fmt_f64(d.agreement_gap),
                    fmt_f64(d.score_correlation),
                    d.sparsity,
                    fmt_f64(metrics::reconstruction_error(x.view(), m)?),
                    m.converged,
                ));
            }
            _ => csv.push_str(&format!(
                "{},{},,,,,,,false,\"{}\"\n",
                fmt_f64(cell.rho),
                fmt_f64(cell.lambda),
                cell.error.as_deref().unwrap_or("").replace('"', "'")
            )),
        }
    }
    let mut out = Staged::new(&a.common.out);
    out.add("path.csv", csv);
    out.add_json(
        "path.json",
        &ctx.document(json!({ "rho_grid": rho, "lambda_grid": lambda, "cells": to_value(&path.cells)? })),
    )?;
    Ok(out)
}

fn cmd_cv(a: &CvArgs, ctx: &Context) -> Result<Staged> {
    let (data, rec) = load_views(&a.views)?;
    let grid = HyperGrid::new(parse_grid(&a.rho_grid)?, parse_grid(&a.lambda_grid)?)?;
    let cfg = a.common.solver();
    let rule = match a.rule {
        RuleArg::Min => SelectionRule::Minimum,
        RuleArg::OneSe => SelectionRule::OneStandardError,
    };
    let seed = a.common.seed;
    let report = match (&a.labels, a.speckle_frac) {
        (Some(_), Some(_)) => {
            return Err(CocaError::InvalidInput(
                "--labels and --speckle-frac select different procedures; pass one".into(),
            ))
        }
        (Some(path), None) => {
            let (labels, _) = read_labels(path, !a.views.no_header)?;
            let metric: Metric = a.metric.parse()?;
            selection::kfold_supervised(&data, &labels, &grid, a.folds, metric, &cfg, seed, rule)?
        }
        (None, Some(frac)) => selection::speckled_cv(&data, &grid, frac, &cfg, seed, rule)?,
        (None, None) => selection::kfold_unsupervised(&data, &grid, a.folds, &cfg, seed, rule)?,
    };
    let model = selection::refit_cell(&data, &grid, report.selected.rho, report.selected.lambda, &cfg)?;
    warn_unconverged(&model);
    let mut out = Staged::new(&a.common.out);
    out.add_json("cv_report.json", &ctx.document(json!({ "report": to_value(&report)? })))?;
    out.add_json("model.json", &ctx.document(model_body(&model, &rec, &data)?))?;
    Ok(out)
}

fn read_truth(path: &Path) -> Result<Array1<f64>> {
    let doc: Value = serde_json::from_str(&read_text(path)?)?;
    doc.get("beta")
        .and_then(Value::as_array)
        .ok_or_else(|| CocaError::InvalidInput(format!("{}: no beta array", path.display())))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| CocaError::InvalidInput("non-numeric beta".into())))
        .collect()
}

fn cmd_eval(a: &EvalArgs, ctx: &Context) -> Result<Staged> {
    let (model, rec) = load_model(&a.model)?;
    let raw = read_views(&a.views.view1, &a.views.view2, !a.views.no_header, a.views.ids)?;
    let test = rec.apply(&raw)?;
    let beta = a.truth.as_deref().map(read_truth).transpose()?;
    let report = metrics::evaluate(&test, &model, beta.as_ref().map(|b| b.view()))?;
    let mut out = Staged::new(&a.common.out);
    out.add_json("metrics.json", &ctx.document(json!({ "metrics": to_value(&report)? })))?;
    Ok(out)
}

fn cmd_predict(a: &PredictArgs, ctx: &Context) -> Result<Staged> {
    let (model, rec) = load_model(&a.model)?;
    let (labels, classes) = read_labels(&a.labels, !a.no_header)?;
    let train_scores = selection::score_matrix(&model);
    if labels.len() != train_scores.nrows() {
        return Err(CocaError::DimensionMismatch(format!(
            "{} labels for a model fitted on {} samples",
            labels.len(),
            train_scores.nrows()
        )));
    }
    let lda = selection::lda_fit(train_scores.view(), &labels, a.shrinkage)?;
    let (scores, truth): (Array2<f64>, Option<Vec<usize>>) = match (&a.view1, &a.view2) {
        (Some(v1), Some(v2)) => {
            let test = rec.apply(&read_views(v1, v2, !a.no_header, false)?)?;
            let truth = match &a.test_labels {
                Some(p) => {
                    let (raw, test_classes) = read_labels(p, !a.no_header)?;
                    // Map through the training class names.
                    let mapped = raw
                        .iter()
                        .map(|&i| {
                            let name = &test_classes[i];
                            classes.iter().position(|c| c == name).ok_or_else(|| {
                                CocaError::InvalidInput(format!("test label '{name}' not seen in training"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Some(mapped)
                }
                None => None,
            };
            (selection::project_scores(&test, &model)?, truth)
        }
        _ => (train_scores.clone(), Some(labels.clone())),
    };
    let post = selection::lda_predict(&lda, scores.view())?;
    let pred = selection::lda_classify(&lda, scores.view())?;
    let mut csv = String::from("score1,score2");
    for c in &classes {
        csv.push_str(&format!(",posterior_{c}"));
    }
    csv.push_str(",predicted\n");
    for i in 0..scores.nrows() {
        csv.push_str(&format!("{},{}", fmt_f64(scores[[i, 0]]), fmt_f64(scores[[i, 1]])));
        for k in 0..classes.len() {
            csv.push_str(&format!(",{}", fmt_f64(post[[i, k]])));
        }
        csv.push_str(&format!(",{}\n", classes[pred[i]]));
    }
    let mut summary = json!({ "classes": classes, "lda": to_value(&lda)?, "n": scores.nrows() });
    if let Some(y) = truth {
        let mis = selection::score_predictions(&lda, scores.view(), &y, Metric::Misclassification)?;
        summary["misclassification"] = json!(mis);
        if classes.len() == 2 {
            summary["auroc"] = json!(selection::score_predictions(&lda, scores.view(), &y, Metric::Auroc)?);
            summary["auprc"] = json!(selection::score_predictions(&lda, scores.view(), &y, Metric::Auprc)?);
        }
    }
    let mut out = Staged::new(&a.common.out);
    out.add("predictions.csv", csv);
    out.add_json("predict.json", &ctx.document(summary))?;
    Ok(out)
}

/// Run a parsed command line, returning the written paths.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let (name, common) = match &cli.command {
        Command::Simulate(a) => ("simulate", &a.common),
        Command::Fit(a) => ("fit", &a.common),
        Command::Path(a) => ("path", &a.common),
        Command::Cv(a) => ("cv", &a.common),
        Command::Eval(a) => ("eval", &a.common),
        Command::Predict(a) => ("predict", &a.common),
    };
    let ctx = Context {
        command: name,
        config: to_value(&cli.command)?,
        seed: common.seed,
        started: SystemTime::now(),
        clock: Instant::now(),
    };
    let staged = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &ctx)?,
        Command::Fit(a) => cmd_fit(a, &ctx)?,
        Command::Path(a) => cmd_path(a, &ctx)?,
        Command::Cv(a) => cmd_cv(a, &ctx)?,
        Command::Eval(a) => cmd_eval(a, &ctx)?,
        Command::Predict(a) => cmd_predict(a, &ctx)?,
    };
    staged.commit()
}
