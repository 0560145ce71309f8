//! Two-view data container, column standardization, and CSV ingestion.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

use crate::error::{CocaError, Result};

/// Two feature matrices measured on the same samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewData {
    x1: Array2<f64>,
    x2: Array2<f64>,
    pub sample_ids: Option<Vec<String>>,
    pub feature_names: Option<(Vec<String>, Vec<String>)>,
}

impl MultiViewData {
    pub fn new(x1: Array2<f64>, x2: Array2<f64>) -> Result<Self> {
        let (n1, p1) = x1.dim();
        let (n2, p2) = x2.dim();
        if n1 != n2 {
            return Err(CocaError::DimensionMismatch(format!(
                "views have {n1} and {n2} rows"
            )));
        }
        if n1 < 2 {
            return Err(CocaError::InvalidInput(format!("need at least 2 samples, got {n1}")));
        }
        if p1 == 0 || p2 == 0 {
            return Err(CocaError::InvalidInput(format!(
                "each view needs at least one column (got {p1} and {p2})"
            )));
        }
        if x1.iter().chain(x2.iter()).any(|v| !v.is_finite()) {
            return Err(CocaError::InvalidInput("data contain non-finite values".into()));
        }
        Ok(Self {
            x1,
            x2,
            sample_ids: None,
            feature_names: None,
        })
    }

    /// Split a concatenated matrix after column `p1`.
    pub fn split(x: ArrayView2<f64>, p1: usize) -> Result<Self> {
        if p1 == 0 || p1 >= x.ncols() {
            return Err(CocaError::InvalidInput(format!(
                "split point {p1} must lie strictly inside 0..{}",
                x.ncols()
            )));
        }
        Self::new(
            x.slice(s![.., ..p1]).to_owned(),
            x.slice(s![.., p1..]).to_owned(),
        )
    }

    pub fn with_labels(
        mut self,
        sample_ids: Option<Vec<String>>,
        feature_names: Option<(Vec<String>, Vec<String>)>,
    ) -> Result<Self> {
        if let Some(ids) = &sample_ids {
            if ids.len() != self.n() {
                return Err(CocaError::DimensionMismatch(format!(
                    "{} sample ids for {} rows",
                    ids.len(),
                    self.n()
                )));
            }
        }
        if let Some((a, b)) = &feature_names {
            if a.len() != self.p1() || b.len() != self.p2() {
                return Err(CocaError::DimensionMismatch("feature name counts".into()));
            }
        }
        self.sample_ids = sample_ids;
        self.feature_names = feature_names;
        Ok(self)
    }

    pub fn x1(&self) -> &Array2<f64> {
        &self.x1
    }

    pub fn x2(&self) -> &Array2<f64> {
        &self.x2
    }

    pub fn n(&self) -> usize {
        self.x1.nrows()
    }

    pub fn p1(&self) -> usize {
        self.x1.ncols()
    }

    pub fn p2(&self) -> usize {
        self.x2.ncols()
    }

    pub fn p(&self) -> usize {
        self.p1() + self.p2()
    }

    /// `[X1 | X2]`.
    pub fn concat(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.x1.view(), self.x2.view()]).expect("row counts checked")
    }

    /// Subset of rows, in the given order. Labels are carried along.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut out = Self::new(self.x1.select(Axis(0), rows), self.x2.select(Axis(0), rows))?;
        out.sample_ids = self
            .sample_ids
            .as_ref()
            .map(|ids| rows.iter().map(|&i| ids[i].clone()).collect());
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    /// Largest absolute column mean over both views.
    pub fn max_abs_column_mean(&self) -> f64 {
        let m1 = self.x1.mean_axis(Axis(0)).expect("n >= 2");
        let m2 = self.x2.mean_axis(Axis(0)).expect("n >= 2");
        m1.iter().chain(m2.iter()).fold(0.0, |a, &b| a.max(b.abs()))
    }
}

/// Column means and scale factors over the concatenated columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationRecord {
    pub means: Array1<f64>,
    pub scales: Array1<f64>,
    pub scaled: bool,
    /// Columns with zero variance; left unscaled.
    pub constant: Vec<bool>,
}

impl StandardizationRecord {
    /// Apply the recorded transform to new data with the same layout.
    pub fn apply(&self, data: &MultiViewData) -> Result<MultiViewData> {
        let x = data.concat();
        if x.ncols() != self.means.len() {
            return Err(CocaError::DimensionMismatch(format!(
                "record has {} columns, data has {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let z = (&x - &self.means) / &self.scales;
        relabel(MultiViewData::split(z.view(), data.p1())?, data)
    }

    pub fn invert(&self, data: &MultiViewData) -> Result<MultiViewData> {
        let z = data.concat();
        if z.ncols() != self.means.len() {
            return Err(CocaError::DimensionMismatch("column count".into()));
        }
        let x = &z * &self.scales + &self.means;
        relabel(MultiViewData::split(x.view(), data.p1())?, data)
    }
}

fn relabel(mut out: MultiViewData, like: &MultiViewData) -> Result<MultiViewData> {
    out.sample_ids = like.sample_ids.clone();
    out.feature_names = like.feature_names.clone();
    Ok(out)
}

/// Center every column and, if `scale`, divide by its sample standard
/// deviation (n − 1 divisor). Constant columns are centered only.
pub fn standardize(data: &MultiViewData, scale: bool) -> (MultiViewData, StandardizationRecord) {
    let x = data.concat();
    let n = x.nrows() as f64;
    let means = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &means;
    let mut constant = vec![false; x.ncols()];
    let scales = Array1::from_shape_fn(x.ncols(), |j| {
        let col = centered.column(j);
        let ss = col.dot(&col);
        if ss == 0.0 || ss.sqrt() <= 1e-14 * x.column(j).iter().fold(0.0_f64, |m, v| m.max(v.abs())) {
            constant[j] = true;
            1.0
        } else if scale {
            (ss / (n - 1.0)).sqrt()
        } else {
            1.0
        }
    });
    // re-derive from the record so apply() and this path agree exactly
    let mut z = centered / &scales;
    for (j, &c) in constant.iter().enumerate() {
        if c {
            z.column_mut(j).fill(0.0);
        }
    }
    if constant.iter().any(|&c| c) {
        log::warn!(
            "{} constant column(s) centered and left unscaled",
            constant.iter().filter(|&&c| c).count()
        );
    }
    let record = StandardizationRecord {
        means,
        scales,
        scaled: scale,
        constant,
    };
    let out = MultiViewData::split(z.view(), data.p1()).expect("same shape as input");
    let out = relabel(out, data).expect("labels unchanged");
    (out, record)
}

/// Parsed CSV matrix with optional header and id column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub matrix: Array2<f64>,
    pub header: Option<Vec<String>>,
    pub ids: Option<Vec<String>>,
}

/// Read one view from a comma-separated file. `has_ids` treats the first
/// column as sample labels.
pub fn read_csv_view(path: impl AsRef<Path>, has_header: bool, has_ids: bool) -> Result<CsvMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CocaError::read(path, e))?;
    parse_csv_view(&text, has_header, has_ids)
}

pub fn parse_csv_view(text: &str, has_header: bool, has_ids: bool) -> Result<CsvMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut header = None;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CocaError::Parse {
            row,
            col: None,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let fields: Vec<&str> = record.iter().collect();
        let (id, body) = if has_ids {
            match fields.split_first() {
                Some((id, body)) => (Some(id.to_string()), body.to_vec()),
                None => (None, Vec::new()),
            }
        } else {
            (None, fields)
        };
        if has_header && header.is_none() {
            header = Some(body.iter().map(|s| s.to_string()).collect::<Vec<_>>());
            width = Some(body.len());
            continue;
        }
        match width {
            None => width = Some(body.len()),
            Some(w) if w != body.len() => {
                return Err(CocaError::Parse {
                    row,
                    col: None,
                    message: format!("expected {w} fields, found {}", body.len()),
                })
            }
            _ => {}
        }
        for (j, cell) in body.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| CocaError::Parse {
                row,
                col: Some(j + 1 + usize::from(has_ids)),
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(CocaError::Parse {
                    row,
                    col: Some(j + 1 + usize::from(has_ids)),
                    message: format!("non-finite value: {cell:?}"),
                });
            }
            values.push(v);
        }
        if let Some(id) = id {
            ids.push(id);
        }
        rows += 1;
    }
    let w = width.unwrap_or(0);
    if rows == 0 || w == 0 {
        return Err(CocaError::EmptyInput("no numeric rows".into()));
    }
    let matrix = Array2::from_shape_vec((rows, w), values).expect("rectangular body");
    Ok(CsvMatrix {
        matrix,
        header,
        ids: has_ids.then_some(ids),
    })
}

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render a matrix as CSV text, values at 17 significant digits.
pub fn matrix_to_csv(x: ArrayView2<f64>, header: Option<&[String]>, ids: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        if ids.is_some() {
            out.push_str("id,");
        }
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for (i, row) in x.rows().into_iter().enumerate() {
        if let Some(ids) = ids {
            let _ = write!(out, "{},", ids[i]);
        }
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
