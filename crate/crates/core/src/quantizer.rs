//! Scalar continuous-to-discrete mappings.
//!
//! [`UniformQuantizer`] tiles `[lo, hi]` with equal cells and saturates
//! outside the support. [`ScalarQuantizer`] is the mapping used by the codec:
//! it adds a dedicated exact-zero level `q_0 = 0` in front of the `l` uniform
//! cells, so its output alphabet has `l + 1` symbols.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng;
use crate::signal::SignalSampler;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(a < X < b)` for a standard normal `X`, computed on the tail that
/// keeps precision.
fn gaussian_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

fn pdf_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        std_normal_pdf(x)
    } else {
        0.0
    }
}

/// `E[X | a < X < b]` for a standard normal `X`. Falls back to the midpoint
/// (or the finite end) when the cell carries no measurable mass.
pub fn gaussian_centroid(a: f64, b: f64) -> f64 {
    let mass = gaussian_mass(a, b);
    if mass > 1e-300 {
        (pdf_or_zero(a) - pdf_or_zero(b)) / mass
    } else if a.is_finite() && b.is_finite() {
        0.5 * (a + b)
    } else if a.is_finite() {
        a
    } else {
        b
    }
}

/// `∫_a^b (x - m)^2 φ(x) dx`; either end may be infinite.
pub fn gaussian_cell_distortion(a: f64, b: f64, m: f64) -> f64 {
    let i0 = gaussian_mass(a, b);
    let i1 = pdf_or_zero(a) - pdf_or_zero(b);
    let xa = if a.is_finite() { a * std_normal_pdf(a) } else { 0.0 };
    let xb = if b.is_finite() { b * std_normal_pdf(b) } else { 0.0 };
    let i2 = i0 + xa - xb;
    (i2 - 2.0 * m * i1 + m * m * i0).max(0.0)
}

/// How a cell is mapped to its reproduction value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reproduction {
    #[default]
    Midpoint,
    /// Centroid of the standard-normal density restricted to the cell; the
    /// two boundary cells extend to infinity.
    GaussianCentroid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformQuantizer {
    lo: f64,
    hi: f64,
    width: f64,
    values: Vec<f64>,
}

impl UniformQuantizer {
    pub fn new(cells: usize, lo: f64, hi: f64, reproduction: Reproduction) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidParameter("quantizer needs at least one cell".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "quantizer support [{lo}, {hi}] is not a finite interval"
            )));
        }
        let width = (hi - lo) / cells as f64;
        let values = (0..cells)
            .map(|c| {
                let a = lo + c as f64 * width;
                let b = a + width;
                match reproduction {
                    Reproduction::Midpoint => 0.5 * (a + b),
                    Reproduction::GaussianCentroid => {
                        let a = if c == 0 { f64::NEG_INFINITY } else { a };
                        let b = if c + 1 == cells { f64::INFINITY } else { b };
                        gaussian_centroid(a, b)
                    }
                }
            })
            .collect();
        Ok(Self { lo, hi, width, values })
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Cell index of `x`, saturating outside `[lo, hi]`.
    #[inline]
    pub fn cell(&self, x: f64) -> usize {
        let c = ((x - self.lo) / self.width).floor();
        if c.is_nan() || c < 0.0 {
            0
        } else {
            (c as usize).min(self.values.len() - 1)
        }
    }

    #[inline]
    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    #[inline]
    pub fn quantize(&self, x: f64) -> (usize, f64) {
        let c = self.cell(x);
        (c, self.values[c])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Serialized form `{"l": .., "lo": .., "hi": ..}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub l: usize,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default)]
    pub reproduction: Reproduction,
}

fn default_lo() -> f64 {
    -2.0
}

fn default_hi() -> f64 {
    2.0
}

/// The serial quantizer `Q(·)`: index 0 is the exact-zero level, indices
/// `1..=l` are the uniform cells of `[lo, hi]` in increasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizerConfig", into = "QuantizerConfig")]
pub struct ScalarQuantizer {
    cells: UniformQuantizer,
    reproduction: Reproduction,
}

impl TryFrom<QuantizerConfig> for ScalarQuantizer {
    type Error = Error;

    fn try_from(c: QuantizerConfig) -> Result<Self> {
        ScalarQuantizer::with_support(c.l, c.lo, c.hi, c.reproduction)
    }
}

impl From<ScalarQuantizer> for QuantizerConfig {
    fn from(q: ScalarQuantizer) -> Self {
        QuantizerConfig {
            l: q.levels(),
            lo: q.lo(),
            hi: q.hi(),
            reproduction: q.reproduction,
        }
    }
}

impl ScalarQuantizer {
    /// `l` midpoint cells on `[-2, 2]`.
    pub fn new(l: usize) -> Result<Self> {
        Self::with_support(l, -2.0, 2.0, Reproduction::Midpoint)
    }

    pub fn with_support(l: usize, lo: f64, hi: f64, reproduction: Reproduction) -> Result<Self> {
        Ok(Self {
            cells: UniformQuantizer::new(l, lo, hi, reproduction)?,
            reproduction,
        })
    }

    /// Midpoint quantizer on `[-a, a]` with `a` chosen to minimize the
    /// distortion of a standard normal input.
    pub fn gaussian_loaded(l: usize) -> Result<Self> {
        let a = gaussian_loading(l)?;
        Self::with_support(l, -a, a, Reproduction::Midpoint)
    }

    /// Number of nonzero output levels `l`.
    pub fn levels(&self) -> usize {
        self.cells.cells()
    }

    pub fn lo(&self) -> f64 {
        self.cells.lo()
    }

    pub fn hi(&self) -> f64 {
        self.cells.hi()
    }

    pub fn reproduction(&self) -> Reproduction {
        self.reproduction
    }

    pub fn cells(&self) -> &UniformQuantizer {
        &self.cells
    }

    /// Returns `(j, q_j)`; `x == 0` maps to `(0, 0.0)`.
    #[inline]
    pub fn quantize(&self, x: f64) -> (usize, f64) {
        if x == 0.0 {
            (0, 0.0)
        } else {
            let (c, v) = self.cells.quantize(x);
            (c + 1, v)
        }
    }

    /// Reproduction value `q_j`, `j` in `0..=l`.
    #[inline]
    pub fn level_value(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.cells.value(j - 1)
        }
    }

    /// Expected distortion `E|X - Q(X)|^2` for a standard normal `X`.
    pub fn gaussian_distortion(&self) -> f64 {
        let l = self.levels();
        (0..l)
            .map(|c| {
                let a = if c == 0 {
                    f64::NEG_INFINITY
                } else {
                    self.lo() + c as f64 * self.cells.width()
                };
                let b = if c + 1 == l {
                    f64::INFINITY
                } else {
                    self.lo() + (c + 1) as f64 * self.cells.width()
                };
                gaussian_cell_distortion(a, b, self.cells.value(c))
            })
            .sum()
    }
}

/// Standard-normal distortion of `l` midpoint cells on `[-a, a]`.
fn uniform_gaussian_distortion(l: usize, a: f64) -> f64 {
    let w = 2.0 * a / l as f64;
    (0..l)
        .map(|c| {
            let lo = -a + c as f64 * w;
            let m = lo + 0.5 * w;
            let lo = if c == 0 { f64::NEG_INFINITY } else { lo };
            let hi = if c + 1 == l {
                f64::INFINITY
            } else {
                -a + (c + 1) as f64 * w
            };
            gaussian_cell_distortion(lo, hi, m)
        })
        .sum()
}

/// Half-width of the distortion-minimizing symmetric support for `l` cells.
pub fn gaussian_loading(l: usize) -> Result<f64> {
    if l == 0 {
        return Err(Error::InvalidParameter("quantizer needs at least one cell".into()));
    }
    let f = |a: f64| uniform_gaussian_distortion(l, a);
    let (mut lo, mut hi) = (0.05_f64, 12.0_f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monte Carlo estimate of an average per-sample distortion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl MseEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            trials: n,
        }
    }
}

/// Monte Carlo estimate of `D_T(l) = (1/T) Σ_i E|s[i] - Q(s[i])|^2`.
pub fn empirical_avg_mse<S: SignalSampler + Sync>(
    sampler: &S,
    q: &ScalarQuantizer,
    trials: usize,
    seed: u64,
) -> Result<MseEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let per_trial = Execution::Parallel.map(trials, |t| {
        let mut rng = rng::stream(seed, &[t as u64]);
        let s = sampler.sample(&mut rng);
        let n = s.len().max(1) as f64;
        s.values().iter().map(|&x| (x - q.quantize(x).1).powi(2)).sum::<f64>() / n
    });
    Ok(MseEstimate::from_samples(&per_trial))
}

/// Integration grid for [`panter_dite_mse`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for IntegrationGrid {
    fn default() -> Self {
        Self {
            lo: -10.0,
            hi: 10.0,
            points: 1 << 16,
        }
    }
}

/// `(∫ pdf^{1/3})^3` by the trapezoid rule on `grid`.
pub fn cube_root_integral_cubed<F: Fn(f64) -> f64>(pdf: F, grid: IntegrationGrid) -> Result<f64> {
    if grid.points < 2 || grid.lo.is_nan() || grid.hi.is_nan() || grid.lo >= grid.hi {
        return Err(Error::InvalidParameter(
            "integration grid needs two or more points on a nonempty interval".into(),
        ));
    }
    let h = (grid.hi - grid.lo) / (grid.points - 1) as f64;
    let mut acc = 0.0;
    for i in 0..grid.points {
        let x = grid.lo + i as f64 * h;
        let p = pdf(x);
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "pdf value {p} at x = {x} is not a finite density"
            )));
        }
        let w = if i == 0 || i + 1 == grid.points { 0.5 } else { 1.0 };
        acc += w * p.cbrt();
    }
    let v = (acc * h).powi(3);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter("integral is not finite".into()))
    }
}

/// Fine-resolution distortion of an optimal `(l + 1)`-level quantizer:
/// `(1/12) (l + 1)^{-2} (∫ pdf^{1/3})^3`.
pub fn panter_dite_mse<F: Fn(f64) -> f64>(pdf: F, l: usize, grid: IntegrationGrid) -> Result<f64> {
    let c = cube_root_integral_cubed(pdf, grid)?;
    let levels = (l + 1) as f64;
    Ok(c / (12.0 * levels * levels))
}
