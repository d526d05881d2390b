//! Dense linear algebra, nonlinearities and seeded random sampling.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`; matrices are row-major [`Mat`].
//! The checked entry points (`matvec`, `softmax`, ...) validate their
//! contracts; the `*_into` / `*_acc` helpers are the unchecked hot paths
//! used inside the model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::contract(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract("matrix entries must be finite"));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::contract("ragged rows"));
        }
        Mat::from_vec(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += k * other`, shapes must agree.
    pub fn add_scaled(&mut self, other: &Mat, k: f64) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
    }

    /// `out = self[rows] · v` restricted to the row range `rows`.
    #[inline]
    pub fn matvec_rows_into(&self, rows: std::ops::Range<usize>, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), rows.len());
        for (o, r) in out.iter_mut().zip(rows) {
            *o = dot(self.row(r), v);
        }
    }

    /// `out += self · v`.
    #[inline]
    pub fn matvec_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(r), v);
        }
    }

    /// `out += self[rows]ᵀ · g` where `g` has one entry per selected row.
    #[inline]
    pub fn matvec_t_rows_acc(&self, rows: std::ops::Range<usize>, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols);
        debug_assert_eq!(g.len(), rows.len());
        for (gi, r) in g.iter().zip(rows) {
            if *gi != 0.0 {
                axpy(*gi, self.row(r), out);
            }
        }
    }

    /// `out += selfᵀ · g`.
    #[inline]
    pub fn matvec_t_acc(&self, g: &[f64], out: &mut [f64]) {
        self.matvec_t_rows_acc(0..self.rows, g, out);
    }

    /// `self[rows] += g ⊗ x` (rank-one update of a row block).
    #[inline]
    pub fn outer_rows_acc(&mut self, rows: std::ops::Range<usize>, g: &[f64], x: &[f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (gi, r) in g.iter().zip(rows) {
            if *gi != 0.0 {
                let row = self.row_mut(r);
                axpy(*gi, x, row);
            }
        }
    }

    #[inline]
    pub fn outer_acc(&mut self, g: &[f64], x: &[f64]) {
        self.outer_rows_acc(0..self.rows, g, x);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Checked matrix-vector product.
pub fn matvec(m: &Mat, v: &[f64]) -> Result<Vec<f64>> {
    if m.cols != v.len() {
        return Err(Error::contract(format!(
            "matvec: {}x{} matrix times {}-vector",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    let mut out = vec![0.0; m.rows];
    m.matvec_rows_into(0..m.rows, v, &mut out);
    Ok(out)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::contract(format!("{what}: empty input")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract(format!("{what}: non-finite input")));
    }
    Ok(())
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits, "softmax")?;
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits, "log_softmax")?;
    let mut out = logits.to_vec();
    log_softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

pub(crate) fn log_softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    for x in xs.iter_mut() {
        *x -= lse;
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of child stream `index` under `base`. Depends only on the pair, so
/// the children `0..m` of a base are a prefix of the children `0..m'` for
/// any `m' > m`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Deterministic random stream: identical seed gives an identical sequence
/// of draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream; see [`derive_seed`].
    pub fn child(&self, index: u64) -> RngStream {
        RngStream::new(derive_seed(self.seed, index))
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        use rand::seq::SliceRandom;
        xs.shuffle(&mut self.rng);
    }
}

/// `dim` i.i.d. draws from N(0, sigma²). `sigma == 0` returns exact zeros
/// and consumes no randomness.
pub fn gaussian_vec(rng: &mut RngStream, dim: usize, sigma: f64) -> Result<Vec<f64>> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::contract(format!(
            "gaussian_vec: sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0; dim]);
    }
    Ok((0..dim).map(|_| sigma * rng.standard_normal()).collect())
}

/// Draw an index with probability `probs[j]`.
pub fn categorical_sample(rng: &mut RngStream, probs: &[f64]) -> Result<usize> {
    if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::contract(
            "categorical_sample: entries must be finite and non-negative",
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::contract(format!(
            "categorical_sample: probabilities sum to {total}"
        )));
    }
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
            acc += p;
            if u < acc {
                return Ok(j);
            }
        }
    }
    // u landed in the rounding gap at the top of the cumulative sum
    Ok(last_positive)
}
