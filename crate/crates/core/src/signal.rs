//! Sparse time sequences, their generators and the per-sample MSE.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A real sequence of length `T` designed for at most `support_budget`
/// nonzero entries. The budget is a design value: signals exceeding it are
/// representable so that mismatch experiments can be run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    values: Vec<f64>,
    support_budget: usize,
}

impl SparseSignal {
    pub fn new(values: Vec<f64>, support_budget: usize) -> Self {
        Self { values, support_budget }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len], 0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support_budget(&self) -> usize {
        self.support_budget
    }

    pub fn nonzeros(&self) -> usize {
        self.values.iter().filter(|&&x| x != 0.0).count()
    }

    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn within_budget(&self) -> bool {
        self.nonzeros() <= self.support_budget
    }
}

/// A distribution over sparse signals.
pub trait SignalSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SparseSignal;
}

/// `nonzeros` positions drawn uniformly without replacement, each filled
/// with an i.i.d. standard normal value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianSparse {
    pub len: usize,
    pub nonzeros: usize,
}

impl GaussianSparse {
    pub fn new(len: usize, nonzeros: usize) -> Self {
        assert!(nonzeros <= len, "cannot place {nonzeros} nonzeros in {len} samples");
        Self { len, nonzeros }
    }
}

impl SignalSampler for GaussianSparse {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SparseSignal {
        let mut values = vec![0.0; self.len];
        let mut idx = sample(rng, self.len, self.nonzeros).into_vec();
        idx.sort_unstable();
        for i in idx {
            // A standard normal draw is exactly zero with probability 0,
            // but the codec treats 0.0 as "no sample", so redraw.
            let mut v: f64 = rng.sample(StandardNormal);
            while v == 0.0 {
                v = rng.sample(StandardNormal);
            }
            values[i] = v;
        }
        SparseSignal::new(values, self.nonzeros)
    }
}

/// A `k_true`-sparse Gaussian sequence of length `len`.
pub fn gen_signal(len: usize, k_true: usize, seed: u64) -> Result<SparseSignal> {
    if k_true > len {
        return Err(Error::InvalidParameter(format!(
            "support size {k_true} exceeds signal length {len}"
        )));
    }
    let mut rng = rng::stream(seed, &[]);
    Ok(GaussianSparse::new(len, k_true).sample(&mut rng))
}

/// Per-sample squared error `(1/T) ||s - ŝ||^2`.
pub fn mse(s: &[f64], s_hat: &[f64]) -> f64 {
    assert_eq!(s.len(), s_hat.len(), "mse of sequences with different lengths");
    if s.is_empty() {
        return 0.0;
    }
    s.iter().zip(s_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / s.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_signal_edges() {
        assert!(gen_signal(10, 0, 1).unwrap().values().iter().all(|&x| x == 0.0));
        let dense = gen_signal(10, 10, 1).unwrap();
        assert_eq!(dense.nonzeros(), 10);
        assert!(gen_signal(3, 4, 1).is_err());
        let s = gen_signal(100, 3, 9).unwrap();
        assert_eq!(s.nonzeros(), 3);
        assert!(s.within_budget());
        assert_eq!(s, gen_signal(100, 3, 9).unwrap());
    }

    #[test]
    fn nonzero_variance_is_unit() {
        let n = 10_000;
        let mut rng = rng::stream(5, &[]);
        let s = GaussianSparse::new(n, n).sample(&mut rng);
        let mean = s.values().iter().sum::<f64>() / n as f64;
        let var = s.values().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Var of the sample variance of a Gaussian is 2/(n-1).
        let sigma = (2.0 / (n - 1) as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * sigma, "variance {var}");
    }

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(mse(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4]), 0.25);
    }

    #[test]
    fn mse_matches_naive_loop() {
        let a = gen_signal(37, 37, 1).unwrap();
        let b = gen_signal(37, 37, 2).unwrap();
        let mut acc = 0.0;
        for i in 0..37 {
            let d = a.values()[i] - b.values()[i];
            acc += d * d;
        }
        assert!((mse(a.values(), b.values()) - acc / 37.0).abs() < 1e-14);
    }
}
