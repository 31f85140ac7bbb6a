//! Dense numeric kernels shared by every network module: row-major matrices,
//! activations, Xavier initialization, global-norm gradient clipping, and
//! momentum SGD.
//!
//! Everything here is `f64`; gradient checking elsewhere in the crate depends
//! on the extra precision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A bias or activation vector. Plain `Vec<f64>`; length is the only shape.
pub type Vector1D = Vec<f64>;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix2D { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`; shape agreement at construction
    /// is a programmer obligation.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length must be rows*cols");
        Matrix2D { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self * v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Vector1D {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `self^T * v`, without materializing the transpose.
    pub fn matvec_transposed(&self, v: &[f64]) -> Vector1D {
        assert_eq!(self.rows, v.len(), "transposed matvec shape mismatch");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let vr = v[r];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vr;
            }
        }
        out
    }

    /// Rank-one update `self += a * b^T`; used for weight gradients.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        assert_eq!(self.rows, a.len(), "outer product row mismatch");
        assert_eq!(self.cols, b.len(), "outer product col mismatch");
        for (r, ar) in a.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (cell, bc) in row.iter_mut().zip(b) {
                *cell += ar * bc;
            }
        }
    }
}

/// Standard matrix product.
pub fn matmul(a: &Matrix2D, b: &Matrix2D) -> Result<Matrix2D, NnError> {
    if a.cols != b.rows {
        return Err(NnError::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix2D::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            let brow = b.row(k);
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Derivative of the sigmoid expressed in terms of its output `y = sigmoid(x)`.
#[inline]
pub fn sigmoid_prime(y: f64) -> f64 {
    y * (1.0 - y)
}

#[inline]
pub fn tanh_act(x: f64) -> f64 {
    x.tanh()
}

/// Derivative of tanh in terms of its output `y = tanh(x)`.
#[inline]
pub fn tanh_prime(y: f64) -> f64 {
    1.0 - y * y
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Subgradient of ReLU at the pre-activation `x`; 0 at the kink.
#[inline]
pub fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Derives an independent stream seed from a base seed (splitmix64 step).
/// All randomness in the crate flows through explicit seeds; this keeps
/// distinct consumers (weight matrices, shuffles, dropout masks) decorrelated
/// without sharing RNG state.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Xavier-uniform initialization: values in `±sqrt(6/(rows+cols))`,
/// deterministic per seed.
pub fn xavier_init(rows: usize, cols: usize, rng_seed: u64) -> Matrix2D {
    assert!(rows >= 1 && cols >= 1, "xavier_init needs positive dimensions");
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Matrix2D { rows, cols, data }
}

/// Global L2 norm over a set of tensors.
pub fn global_norm(tensors: &[&[f64]]) -> f64 {
    tensors
        .iter()
        .flat_map(|t| t.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales the gradient set in place so its global L2 norm does not exceed
/// `max_norm`. Returns the pre-clip norm.
///
/// A non-finite gradient is a divergence signal, reported as an error rather
/// than silently clipped.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> Result<f64, NnError> {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let mut sum_sq = 0.0;
    for g in grads.iter() {
        for v in g.iter() {
            if !v.is_finite() {
                return Err(NnError::NonFinite("gradient"));
            }
            sum_sq += v * v;
        }
    }
    let norm = sum_sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
    Ok(norm)
}

/// Optimizer hyperparameters. Annealing follows the schedule
/// `lr <- lr * anneal_factor` every `anneal_every` epochs.
#[derive(Debug, Clone, Copy)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub anneal_factor: f64,
    pub anneal_every: usize,
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { learning_rate: 0.01, anneal_factor: 0.1, anneal_every: 30, momentum: 0.9 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0) {
            return Err(NnError::Shape("learning_rate must be > 0".into()));
        }
        if !(self.anneal_factor > 0.0 && self.anneal_factor < 1.0) {
            return Err(NnError::Shape("anneal_factor must lie in (0,1)".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::Shape("momentum must lie in [0,1)".into()));
        }
        Ok(())
    }
}

/// Momentum SGD with per-tensor velocity state.
///
/// Update rule: `v <- momentum*v + g; p <- p - lr*v`. With momentum 0 this
/// reduces to plain SGD.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Sgd { momentum, velocity: Vec::new() }
    }

    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
        lr: f64,
    ) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::Shape(format!(
                "parameter/gradient group count mismatch: {} vs {}",
                params.len(),
                grads.len()
            )));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if self.velocity.len() != params.len() {
            return Err(NnError::Shape("velocity state does not match parameter groups".into()));
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            if p.len() != g.len() || p.len() != v.len() {
                return Err(NnError::Shape(format!(
                    "tensor length mismatch: param {} grad {} velocity {}",
                    p.len(),
                    g.len(),
                    v.len()
                )));
            }
            for ((pv, gv), vv) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                *vv = self.momentum * *vv + gv;
                *pv -= lr * *vv;
            }
        }
        Ok(())
    }
}
