//! Seeded draws from the two-view latent factor model
//!
//! ```text
//! x1 = β1·z + W1·z1 + B1·s + ε1
//! x2 = β2·z + W2·z2 + B2·s + ε2
//! ```
//!
//! with `z ~ N(0,1)`, `z1 ~ N(0, I_k1)`, `z2 ~ N(0, I_k2)`, `s ~ N(0, I_l)`,
//! `εi ~ N(0, Ωi)`, all independent.
//!
//! # Random stream
//!
//! Uniforms come from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`),
//! a counter-based generator. Each 64-bit output is mapped to
//! `(x >> 11)·2⁻⁵³`. Normals use the Box-Muller transform on consecutive
//! uniform pairs `(a, b)`: `r = √(−2 ln(1 − a))`, `θ = 2πb`, yielding
//! `r·cos θ` then `r·sin θ`. Per row the normals are consumed in the order
//! `z, z1, z2, s, ε1, ε2`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::data::MultiViewData;
use crate::error::{CocaError, Result};

/// Standard normal stream: ChaCha8 uniforms through Box-Muller.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let a = self.uniform();
        let b = self.uniform();
        let r = (-2.0 * (1.0 - a).ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * b;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform index in `0..n` (n > 0) by rejection.
    pub fn below(&mut self, n: usize) -> usize {
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.rng.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Parameters of the latent factor model. Matrices are row-major nested
/// vectors so the JSON form mirrors the field names directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModelSpec {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    /// p1 × k1
    pub w1: Vec<Vec<f64>>,
    /// p2 × k2
    pub w2: Vec<Vec<f64>>,
    /// p1 × l
    pub b1: Vec<Vec<f64>>,
    /// p2 × l
    pub b2: Vec<Vec<f64>>,
    pub omega1: Vec<Vec<f64>>,
    pub omega2: Vec<Vec<f64>>,
}

fn to_array(rows: &[Vec<f64>], nrows: usize, name: &str) -> Result<Array2<f64>> {
    if rows.len() != nrows {
        return Err(CocaError::InvalidInput(format!(
            "{name} has {} rows, expected {nrows}",
            rows.len()
        )));
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CocaError::InvalidInput(format!("{name} is ragged")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(CocaError::InvalidInput(format!("{name} has non-finite entries")));
    }
    Ok(Array2::from_shape_vec((nrows, ncols), flat).expect("checked shape"))
}

/// Symmetric square root of a PSD matrix; also serves as the noise factor.
fn psd_root(a: ArrayView2<f64>, name: &str) -> Result<Array2<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-10 * scale {
                return Err(CocaError::InvalidInput(format!("{name} is not symmetric")));
            }
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = SymmetricEigen::new(m);
    let tol = 1e-10 * scale;
    if let Some(&min) = eig.eigenvalues.iter().min_by(|x, y| x.total_cmp(y)) {
        if min < -tol {
            return Err(CocaError::InvalidInput(format!(
                "{name} is not positive semidefinite (eigenvalue {min:.3e})"
            )));
        }
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        (0..n).map(|k| v[(i, k)] * roots[k] * v[(j, k)]).sum()
    }))
}

/// Validated numeric form of a spec, with noise factors precomputed.
#[derive(Debug, Clone)]
struct Compiled {
    beta1: Array1<f64>,
    beta2: Array1<f64>,
    w1: Array2<f64>,
    w2: Array2<f64>,
    b1: Array2<f64>,
    b2: Array2<f64>,
    noise1: Array2<f64>,
    noise2: Array2<f64>,
}

impl FactorModelSpec {
    pub fn p1(&self) -> usize {
        self.beta1.len()
    }

    pub fn p2(&self) -> usize {
        self.beta2.len()
    }

    /// Planted shared direction `β = (β1, β2)`.
    pub fn beta(&self) -> Array1<f64> {
        self.beta1.iter().chain(self.beta2.iter()).copied().collect()
    }

    fn compile(&self) -> Result<Compiled> {
        let (p1, p2) = (self.p1(), self.p2());
        if p1 == 0 || p2 == 0 {
            return Err(CocaError::InvalidInput("each view needs at least one coordinate".into()));
        }
        let w1 = to_array(&self.w1, p1, "w1")?;
        let w2 = to_array(&self.w2, p2, "w2")?;
        let b1 = to_array(&self.b1, p1, "b1")?;
        let b2 = to_array(&self.b2, p2, "b2")?;
        if b1.ncols() != b2.ncols() {
            return Err(CocaError::InvalidInput(format!(
                "b1 and b2 must share the factor dimension ({} vs {})",
                b1.ncols(),
                b2.ncols()
            )));
        }
        let omega1 = to_array(&self.omega1, p1, "omega1")?;
        let omega2 = to_array(&self.omega2, p2, "omega2")?;
        if omega1.ncols() != p1 || omega2.ncols() != p2 {
            return Err(CocaError::InvalidInput("omega matrices must be square".into()));
        }
        if self.beta1.iter().chain(self.beta2.iter()).any(|v| !v.is_finite()) {
            return Err(CocaError::InvalidInput("beta has non-finite entries".into()));
        }
        Ok(Compiled {
            beta1: Array1::from(self.beta1.clone()),
            beta2: Array1::from(self.beta2.clone()),
            noise1: psd_root(omega1.view(), "omega1")?,
            noise2: psd_root(omega2.view(), "omega2")?,
            w1,
            w2,
            b1,
            b2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    /// `Σ = ββᵀ + blockdiag(W1W1ᵀ, W2W2ᵀ) + BBᵀ + blockdiag(Ω1, Ω2)`.
    pub fn covariance(&self) -> Result<Array2<f64>> {
        let c = self.compile()?;
        let (p1, p2) = (self.p1(), self.p2());
        let p = p1 + p2;
        let beta = self.beta();
        let mut sigma = Array2::from_shape_fn((p, p), |(i, j)| beta[i] * beta[j]);
        sigma.slice_mut(s![..p1, ..p1]).scaled_add(1.0, &c.w1.dot(&c.w1.t()));
        sigma.slice_mut(s![p1.., p1..]).scaled_add(1.0, &c.w2.dot(&c.w2.t()));
        let mut b = Array2::zeros((p, c.b1.ncols()));
        b.slice_mut(s![..p1, ..]).assign(&c.b1);
        b.slice_mut(s![p1.., ..]).assign(&c.b2);
        sigma += &b.dot(&b.t());
        sigma
            .slice_mut(s![..p1, ..p1])
            .scaled_add(1.0, &to_array(&self.omega1, p1, "omega1")?);
        sigma
            .slice_mut(s![p1.., p1..])
            .scaled_add(1.0, &to_array(&self.omega2, p2, "omega2")?);
        Ok(sigma)
    }
}

/// Exact parameters of the four-coordinate-per-view illustrative model.
///
/// `β1 = β2 = e1`, so `‖β‖ = √2`. The individual loadings point along
/// `(0, 1, −1, 0)` with norm `‖β‖ − 0.1`; the weak shared loadings are
/// `(‖β‖ − 1)·e4`; `Ω = diag(1, 1, 1, 0.09)`.
pub fn illustrative_spec() -> FactorModelSpec {
    sparse_spec(4, 1, 3).expect("fixed dimensions are valid")
}

/// Illustrative structure embedded in `p_per_view` coordinates per view.
///
/// Layout per view: `dense_dims` coordinates carrying `β` (equal entries,
/// unit norm per view), then `n_distractors ≤ 3` coordinates carrying the
/// individual factor `W` (first two) and the weak shared factor `B`
/// (third), then unit-variance pure-noise coordinates. `sparse_spec(4, 1, 3)`
/// is the illustrative model.
pub fn sparse_spec(p_per_view: usize, dense_dims: usize, n_distractors: usize) -> Result<FactorModelSpec> {
    if dense_dims == 0 {
        return Err(CocaError::InvalidInput("dense_dims must be at least 1".into()));
    }
    if n_distractors > 3 {
        return Err(CocaError::InvalidInput("at most 3 distractor coordinates".into()));
    }
    if dense_dims + n_distractors > p_per_view {
        return Err(CocaError::InvalidInput(format!(
            "dense_dims + n_distractors = {} exceeds p_per_view = {p_per_view}",
            dense_dims + n_distractors
        )));
    }
    let p = p_per_view;
    let beta_norm = 2.0_f64.sqrt();
    let mut beta = vec![0.0; p];
    let b_entry = 1.0 / (dense_dims as f64).sqrt();
    beta[..dense_dims].iter_mut().for_each(|b| *b = b_entry);

    let w_scale = beta_norm - 0.1;
    let b_scale = beta_norm - 1.0;
    let mut w = vec![vec![0.0]; p];
    let mut b = vec![vec![0.0]; p];
    let mut omega_diag = vec![1.0; p];
    let n_w = n_distractors.min(2);
    if n_w == 2 {
        let e = w_scale * std::f64::consts::FRAC_1_SQRT_2;
        w[dense_dims][0] = e;
        w[dense_dims + 1][0] = -e;
    } else if n_w == 1 {
        w[dense_dims][0] = w_scale;
    }
    if n_distractors == 3 {
        b[dense_dims + 2][0] = b_scale;
        omega_diag[dense_dims + 2] = 0.09;
    }
    let omega: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { omega_diag[i] } else { 0.0 }).collect())
        .collect();
    Ok(FactorModelSpec {
        beta1: beta.clone(),
        beta2: beta,
        w1: w.clone(),
        w2: w,
        b1: b.clone(),
        b2: b,
        omega1: omega.clone(),
        omega2: omega,
    })
}

/// A draw together with the shared latent factor `z` per row.
#[derive(Debug, Clone)]
pub struct Draw {
    pub data: MultiViewData,
    pub z: Array1<f64>,
}

pub fn draw(spec: &FactorModelSpec, n: usize, seed: u64) -> Result<MultiViewData> {
    draw_with_latents(spec, n, seed).map(|d| d.data)
}

/// Draw `n` rows. The result is a pure function of `(spec, n, seed)`.
pub fn draw_with_latents(spec: &FactorModelSpec, n: usize, seed: u64) -> Result<Draw> {
    if n < 2 {
        return Err(CocaError::InvalidInput(format!("need n >= 2 rows, got {n}")));
    }
    let c = spec.compile()?;
    let (p1, p2) = (spec.p1(), spec.p2());
    let (k1, k2, l) = (c.w1.ncols(), c.w2.ncols(), c.b1.ncols());
    let mut rng = NormalStream::new(seed);
    let mut x1 = Array2::zeros((n, p1));
    let mut x2 = Array2::zeros((n, p2));
    let mut z = Array1::zeros(n);
    let draw_vec = |len: usize, rng: &mut NormalStream| Array1::from_shape_fn(len, |_| rng.normal());
    for i in 0..n {
        let zi = rng.normal();
        let z1 = draw_vec(k1, &mut rng);
        let z2 = draw_vec(k2, &mut rng);
        let si = draw_vec(l, &mut rng);
        let e1 = draw_vec(p1, &mut rng);
        let e2 = draw_vec(p2, &mut rng);
        let row1 = zi * &c.beta1 + c.w1.dot(&z1) + c.b1.dot(&si) + c.noise1.dot(&e1);
        let row2 = zi * &c.beta2 + c.w2.dot(&z2) + c.b2.dot(&si) + c.noise2.dot(&e2);
        x1.row_mut(i).assign(&row1);
        x2.row_mut(i).assign(&row2);
        z[i] = zi;
    }
    Ok(Draw {
        data: MultiViewData::new(x1, x2)?,
        z,
    })
}

/// Symmetric PSD square root of the model covariance.
pub fn population_root(spec: &FactorModelSpec) -> Result<Array2<f64>> {
    let sigma = spec.covariance()?;
    psd_root(sigma.view(), "covariance")
}

/// Symmetric PSD square root of an arbitrary symmetric matrix.
pub fn symmetric_sqrt(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    psd_root(a, "matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn illustrative_values() {
        let s = illustrative_spec();
        assert_eq!(s.beta1, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.beta2, s.beta1);
        let beta_norm = crate::linalg::norm(s.beta().view());
        assert!((beta_norm - 1.414_213_562_373_095).abs() < 1e-15);
        let w: Vec<f64> = s.w1.iter().map(|r| r[0]).collect();
        let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((w_norm - (2.0_f64.sqrt() - 0.1)).abs() < 1e-15);
        assert!((w_norm - 1.31421).abs() < 1e-5);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[1], -w[2]);
        assert!(w[1] > 0.0);
        assert!((s.b1[3][0] - 0.41421).abs() < 1e-5);
        assert_eq!(s.omega1[3][3], 0.09);
        assert_eq!(s.omega1[0][0], 1.0);
    }

    #[test]
    fn sparse_layout() {
        let s = sparse_spec(30, 2, 3).unwrap();
        assert_eq!(s.beta1.iter().filter(|&&b| b != 0.0).count(), 2);
        assert_eq!(s.beta1.iter().filter(|&&b| b == 0.0).count(), 28);
        assert!((s.beta1.iter().map(|b| b * b).sum::<f64>() - 1.0).abs() < 1e-15);
        let dense = sparse_spec(5, 5, 0).unwrap();
        assert!(dense.beta1.iter().all(|&b| b != 0.0));
        assert!(sparse_spec(4, 2, 3).is_err());
    }

    #[test]
    fn noiseless_single_factor_is_rank_one() {
        let zero = vec![vec![0.0; 1]; 3];
        let spec = FactorModelSpec {
            beta1: vec![1.0, 0.0, 0.0],
            beta2: vec![1.0, 0.0, 0.0],
            w1: zero.clone(),
            w2: zero.clone(),
            b1: zero.clone(),
            b2: zero,
            omega1: vec![vec![0.0; 3]; 3],
            omega2: vec![vec![0.0; 3]; 3],
        };
        let d = draw_with_latents(&spec, 20, 5).unwrap();
        let x = d.data.concat();
        for i in 0..20 {
            for j in 0..6 {
                let expect = if j == 0 || j == 3 { d.z[i] } else { 0.0 };
                assert_eq!(x[[i, j]], expect);
            }
        }
    }

    #[test]
    fn rejects_non_psd_omega() {
        let mut s = illustrative_spec();
        s.omega1[0][0] = -1.0;
        assert!(draw(&s, 10, 1).is_err());
    }

    #[test]
    fn rejects_tiny_n() {
        assert!(draw(&illustrative_spec(), 0, 1).is_err());
    }

    #[test]
    fn root_of_diagonal() {
        let r = symmetric_sqrt(array![[4.0, 0.0], [0.0, 9.0]].view()).unwrap();
        assert!((r[[0, 0]] - 2.0).abs() < 1e-14 && (r[[1, 1]] - 3.0).abs() < 1e-14);
        assert!(r[[0, 1]].abs() < 1e-14);
        let i = symmetric_sqrt(Array2::<f64>::eye(3).view()).unwrap();
        assert!((&i - &Array2::<f64>::eye(3)).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn draws_are_deterministic() {
        let s = illustrative_spec();
        let a = draw(&s, 50, 9).unwrap();
        let b = draw(&s, 50, 9).unwrap();
        assert_eq!(a, b);
        let c = draw(&s, 50, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn spec_json_round_trip() {
        let s = sparse_spec(6, 2, 3).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: FactorModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
