//! Dense numerics shared by the rest of the crate: a small row-major matrix,
//! a Cholesky SPD solve, linear-interpolation quantiles and seeded random
//! streams.
//!
//! Everything here is sized for problems with a handful of unknowns (the
//! reward model has 8 coefficients), so plain `Vec<f64>` storage is used.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{input, Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(input(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        ensure_finite("matrix", &data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Stacks equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(input(format!(
                "row {bad} has length {}, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(input(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(input(format!("{what} has non-finite entry at index {i}"))),
        None => Ok(()),
    }
}

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n {
        return Err(input(format!(
            "SPD solve needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if b.len() != n {
        return Err(input(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    ensure_finite("matrix", &a.data)?;
    ensure_finite("right-hand side", b)?;
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (a.get(i, j), a.get(j, i));
            if (x - y).abs() > 1e-10 * x.abs().max(y.abs()).max(1.0) {
                return Err(input(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }

    let l = cholesky(a)?;

    // forward: L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l.get(i, k) * y[k]).sum();
        y[i] = (b[i] - s) / l.get(i, i);
    }
    // backward: L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l.get(k, i) * x[k]).sum();
        x[i] = (y[i] - s) / l.get(i, i);
    }
    Ok(x)
}

/// Lower Cholesky factor of an SPD matrix.
fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let s: f64 = (0..j).map(|k| l.get(j, k).powi(2)).sum();
        let pivot = a.get(j, j) - s;
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite: leading minor of order {} has pivot {pivot:e}",
                j + 1
            )));
        }
        let d = pivot.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| l.get(i, k) * l.get(j, k)).sum();
            l.set(i, j, (a.get(i, j) - s) / d);
        }
    }
    Ok(l)
}

/// Lower factor `L` with `L Lᵀ = a` for a symmetric positive semi-definite
/// matrix. Columns whose pivot vanishes (within `1e-12` of the diagonal
/// scale) are zeroed, so a zero matrix factors to zero.
pub fn cholesky_psd(a: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    if a.cols != n {
        return Err(input("covariance must be square"));
    }
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let s: f64 = (0..j).map(|k| l.get(j, k).powi(2)).sum();
        let pivot = a.get(j, j) - s;
        if pivot < -tol {
            return Err(Error::Numerical(format!(
                "matrix is not positive semi-definite: pivot {pivot:e} at order {}",
                j + 1
            )));
        }
        if pivot <= tol {
            continue;
        }
        let d = pivot.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| l.get(i, k) * l.get(j, k)).sum();
            l.set(i, j, (a.get(i, j) - s) / d);
        }
    }
    Ok(l)
}

/// Quantile by linear interpolation between order statistics:
/// `h = p (n - 1)`, result `v[floor h] + frac(h) (v[floor h + 1] - v[floor h])`.
pub fn quantile(data: &[f64], p: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(input("quantile of empty data"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(input(format!("quantile fraction {p} outside [0, 1]")));
    }
    ensure_finite("quantile data", data)?;
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Deterministic random stream keyed by `(seed, stream)`.
///
/// Backed by ChaCha8 with the stream id mapped to the cipher's stream
/// counter, so streams under one seed never overlap.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Draw from `N(mean, variance)`. A zero variance still consumes one
    /// draw and returns `mean` exactly.
    pub fn gauss(&mut self, mean: f64, variance: f64) -> Result<f64> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(input(format!(
                "variance must be finite and >= 0, got {variance}"
            )));
        }
        let z: f64 = self.rng.sample(StandardNormal);
        if variance == 0.0 {
            return Ok(mean);
        }
        Ok(mean + variance.sqrt() * z)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// `amount` distinct indices from `0..len`, in ascending order.
    pub fn distinct_indices(&mut self, len: usize, amount: usize) -> Vec<usize> {
        let mut picked = index::sample(&mut self.rng, len, amount).into_vec();
        picked.sort_unstable();
        picked
    }
}
