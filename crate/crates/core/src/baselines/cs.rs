//! Compress-and-quantize: Gaussian projections, scalar-quantized
//! measurements, and sparse recovery by QIHT or FISTA.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{Reproduction, UniformQuantizer};
use crate::rng;

/// An `m × T` matrix of i.i.d. standard normal entries, row-major draws
/// from `seed`.
pub fn sensing_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, &[]);
    Array2::from_shape_simple_fn((rows, cols), || r.sample(StandardNormal))
}

/// A linear measurement operator: one dense matrix, or one matrix per
/// signal of an ensemble acting on the concatenated signals.
#[derive(Clone, Debug, PartialEq)]
pub enum Sensing {
    Dense(Array2<f64>),
    BlockDiagonal(Vec<Array2<f64>>),
}

impl Sensing {
    pub fn rows(&self) -> usize {
        match self {
            Sensing::Dense(a) => a.nrows(),
            Sensing::BlockDiagonal(blocks) => blocks.iter().map(Array2::nrows).sum(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Sensing::Dense(a) => a.ncols(),
            Sensing::BlockDiagonal(blocks) => blocks.iter().map(Array2::ncols).sum(),
        }
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self {
            Sensing::Dense(a) => a.dot(&x),
            Sensing::BlockDiagonal(blocks) => {
                let mut out = Array1::zeros(self.rows());
                let (mut r, mut c) = (0, 0);
                for a in blocks {
                    let y = a.dot(&x.slice(ndarray::s![c..c + a.ncols()]));
                    out.slice_mut(ndarray::s![r..r + a.nrows()]).assign(&y);
                    r += a.nrows();
                    c += a.ncols();
                }
                out
            }
        }
    }

    pub fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        match self {
            Sensing::Dense(a) => a.t().dot(&y),
            Sensing::BlockDiagonal(blocks) => {
                let mut out = Array1::zeros(self.cols());
                let (mut r, mut c) = (0, 0);
                for a in blocks {
                    let x = a.t().dot(&y.slice(ndarray::s![r..r + a.nrows()]));
                    out.slice_mut(ndarray::s![c..c + a.ncols()]).assign(&x);
                    r += a.nrows();
                    c += a.ncols();
                }
                out
            }
        }
    }

    /// Largest squared singular value, by power iteration on `AᵀA`.
    pub fn spectral_norm_sq(&self) -> f64 {
        let n = self.cols();
        if n == 0 || self.rows() == 0 {
            return 0.0;
        }
        let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
        let mut est = 0.0;
        for _ in 0..5000 {
            let w = self.adjoint(self.apply(v.view()).view());
            let rayleigh = v.dot(&w);
            let norm = w.dot(&w).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = w / norm;
            if (rayleigh - est).abs() <= 1e-13 * rayleigh {
                return rayleigh;
            }
            est = rayleigh;
        }
        est
    }

    fn scaled(self, factor: f64) -> Self {
        match self {
            Sensing::Dense(a) => Sensing::Dense(a * factor),
            Sensing::BlockDiagonal(b) => Sensing::BlockDiagonal(b.into_iter().map(|a| a * factor).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Set when the iterates blew up; `x` is then the best iterate seen.
    pub diverged: bool,
    /// Objective after each iteration (FISTA only).
    pub objective: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QihtOptions {
    pub iters: usize,
    /// Step size; `None` uses `1/‖A‖²`.
    pub step: Option<f64>,
}

impl Default for QihtOptions {
    fn default() -> Self {
        Self { iters: 300, step: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FistaOptions {
    pub iters: usize,
    /// Absolute ℓ1 weight.
    pub lambda: f64,
}

impl Default for FistaOptions {
    fn default() -> Self {
        Self {
            iters: 500,
            lambda: 0.0,
        }
    }
}

fn hard_threshold(x: &mut Array1<f64>, k: usize) {
    if k >= x.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    // Ties broken by index for determinism.
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    for &i in &idx[k..] {
        x[i] = 0.0;
    }
}

fn requantize(q: &UniformQuantizer, v: &Array1<f64>) -> Array1<f64> {
    v.mapv(|z| q.quantize(z).1)
}

/// Quantized iterative hard thresholding: `x ← H_k(x + μ Aᵀ(ŷ − Q(Ax)))`.
pub fn qiht_recover(
    y_hat: &[f64],
    a: &Sensing,
    q: &UniformQuantizer,
    k: usize,
    opts: &QihtOptions,
) -> Result<Recovery> {
    check_measurements(y_hat, a)?;
    let n = a.cols();
    if k == 0 {
        return Ok(Recovery {
            x: vec![0.0; n],
            iterations: 1,
            diverged: false,
            objective: Vec::new(),
        });
    }
    let y = ArrayView1::from(y_hat);
    let step = opts.step.unwrap_or_else(|| {
        let s = a.spectral_norm_sq();
        if s > 0.0 {
            1.0 / s
        } else {
            0.0
        }
    });
    let mut x = Array1::<f64>::zeros(n);
    let mut best = (f64::INFINITY, x.clone());
    let limit = 1e6 * (1.0 + y.dot(&y).sqrt());
    let mut diverged = false;
    let mut iterations = 0;
    for _ in 0..opts.iters {
        iterations += 1;
        let resid = &y - &requantize(q, &a.apply(x.view()));
        let r2 = resid.dot(&resid);
        if r2 < best.0 {
            best = (r2, x.clone());
        }
        x = x + a.adjoint(resid.view()) * step;
        hard_threshold(&mut x, k);
        let norm = x.dot(&x).sqrt();
        if !norm.is_finite() || norm > limit {
            diverged = true;
            break;
        }
    }
    if !diverged {
        let resid = &y - &requantize(q, &a.apply(x.view()));
        let r2 = resid.dot(&resid);
        if r2 <= best.0 {
            best = (r2, x);
        }
    }
    Ok(Recovery {
        x: best.1.to_vec(),
        iterations,
        diverged,
        objective: Vec::new(),
    })
}

fn soft_threshold(v: &Array1<f64>, t: f64) -> Array1<f64> {
    v.mapv(|z| z.signum() * (z.abs() - t).max(0.0))
}

/// FISTA on `‖Ax − ŷ‖² + λ‖x‖₁` with monotone restart: whenever the
/// accelerated step would raise the objective, momentum is reset and a
/// plain proximal-gradient step is taken from the current iterate.
pub fn fista_recover(y_hat: &[f64], a: &Sensing, opts: &FistaOptions) -> Result<Recovery> {
    check_measurements(y_hat, a)?;
    if opts.lambda.is_nan() || opts.lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be >= 0, got {}",
            opts.lambda
        )));
    }
    let n = a.cols();
    let y = ArrayView1::from(y_hat);
    let lip = 2.0 * a.spectral_norm_sq();
    let objective = |x: &Array1<f64>| {
        let r = a.apply(x.view()) - y;
        r.dot(&r) + opts.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut x = Array1::<f64>::zeros(n);
    let mut f_x = objective(&x);
    let mut history = Vec::with_capacity(opts.iters);
    if lip == 0.0 {
        return Ok(Recovery {
            x: x.to_vec(),
            iterations: 0,
            diverged: false,
            objective: history,
        });
    }
    let prox_step = |from: &Array1<f64>| {
        let grad = a.adjoint((a.apply(from.view()) - y).view()) * 2.0;
        soft_threshold(&(from - &(grad / lip)), opts.lambda / lip)
    };
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..opts.iters {
        let mut next = prox_step(&z);
        let mut f_next = objective(&next);
        if f_next > f_x {
            t = 1.0;
            next = prox_step(&x);
            f_next = objective(&next);
        }
        if f_next > f_x {
            // Rounding only: a gradient step from x cannot increase F.
            next = x.clone();
            f_next = f_x;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + &((&next - &x) * ((t - 1.0) / t_next));
        x = next;
        f_x = f_next;
        t = t_next;
        history.push(f_x);
    }
    Ok(Recovery {
        x: x.to_vec(),
        iterations: opts.iters,
        diverged: false,
        objective: history,
    })
}

fn check_measurements(y_hat: &[f64], a: &Sensing) -> Result<()> {
    if y_hat.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurements for an operator with {} rows",
            y_hat.len(),
            a.rows()
        )));
    }
    Ok(())
}

/// A rate-matched compress-and-quantize system.
///
/// Measurements `A s / scale` are quantized on `[-2, 2]` with
/// `2^⌊b/m⌋` cells, so `m · ⌊b/m⌋ ≤ b` bits are emitted. Recovery runs on
/// the normalized operator `A / scale`, which estimates `s` directly.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressQuantize {
    op: Sensing,
    quantizer: UniformQuantizer,
    bits_per_measurement: usize,
}

impl CompressQuantize {
    /// Single signal of length `t`, `m` measurements, at most `bits` bits.
    pub fn new(t: usize, m: usize, bits: usize, scale: f64, seed: u64) -> Result<Self> {
        Self::build(Sensing::Dense(sensing_matrix(m, t, seed)), m, bits, scale)
    }

    /// Ensemble of `n` signals, each with its own `m × t` matrix; the `bits`
    /// budget is shared by all `n·m` measurements.
    pub fn block_diagonal(n: usize, t: usize, m: usize, bits: usize, scale: f64, seed: u64) -> Result<Self> {
        let blocks = (0..n)
            .map(|j| sensing_matrix(m, t, rng::derive_seed(seed, &[j as u64])))
            .collect();
        Self::build(Sensing::BlockDiagonal(blocks), n * m, bits, scale)
    }

    fn build(op: Sensing, rows: usize, bits: usize, scale: f64) -> Result<Self> {
        if rows == 0 || op.cols() == 0 {
            return Err(Error::InvalidParameter(
                "need at least one measurement and one sample".into(),
            ));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "measurement scale must be positive, got {scale}"
            )));
        }
        let per = bits / rows;
        if per == 0 {
            return Err(Error::Infeasible(format!(
                "{rows} measurements do not fit in {bits} bits"
            )));
        }
        if per > 30 {
            return Err(Error::InvalidParameter(format!(
                "{per} bits per measurement is too many"
            )));
        }
        Ok(Self {
            op: op.scaled(1.0 / scale),
            quantizer: UniformQuantizer::new(1 << per, -2.0, 2.0, Reproduction::Midpoint)?,
            bits_per_measurement: per,
        })
    }

    pub fn sensing(&self) -> &Sensing {
        &self.op
    }

    pub fn quantizer(&self) -> &UniformQuantizer {
        &self.quantizer
    }

    pub fn measurements(&self) -> usize {
        self.op.rows()
    }

    pub fn bits_used(&self) -> usize {
        self.measurements() * self.bits_per_measurement
    }

    /// Cell index of each measurement.
    pub fn encode(&self, signal: &[f64]) -> Result<Vec<usize>> {
        if signal.len() != self.op.cols() {
            return Err(Error::DimensionMismatch(format!(
                "signal length {} for an operator with {} columns",
                signal.len(),
                self.op.cols()
            )));
        }
        let z = self.op.apply(ArrayView1::from(signal));
        Ok(z.iter().map(|&v| self.quantizer.cell(v)).collect())
    }

    pub fn dequantize(&self, cells: &[usize]) -> Vec<f64> {
        cells.iter().map(|&c| self.quantizer.value(c)).collect()
    }

    pub fn recover_qiht(&self, cells: &[usize], k: usize, opts: &QihtOptions) -> Result<Recovery> {
        qiht_recover(&self.dequantize(cells), &self.op, &self.quantizer, k, opts)
    }

    /// FISTA with `λ = factor · ‖Aᵀŷ‖∞`.
    pub fn recover_fista(&self, cells: &[usize], lambda_factor: f64, iters: usize) -> Result<Recovery> {
        let y = self.dequantize(cells);
        let lmax = self
            .op
            .adjoint(ArrayView1::from(&y[..]))
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        fista_recover(
            &y,
            &self.op,
            &FistaOptions {
                iters,
                lambda: lambda_factor * lmax,
            },
        )
    }
}
