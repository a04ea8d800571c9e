use std::ops::Range;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::codebook::{Codebook, CodebookParams, JointSparsityModel};
use crate::codec::{encode_bins, Register};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::quantizer::ScalarQuantizer;
use crate::rng;
use crate::signal::SparseSignal;

/// A codebook over `n·T` bins partitioned into `n` contiguous blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributedCodebook {
    base: Codebook,
    encoders: usize,
    len: usize,
}

impl DistributedCodebook {
    pub fn generate(
        encoders: usize,
        len: usize,
        levels: usize,
        sparsity: usize,
        bits: usize,
        seed: u64,
        exec: Execution,
    ) -> Result<Self> {
        if encoders == 0 || len == 0 {
            return Err(Error::InvalidParameter("need n >= 1 encoders and T >= 1".into()));
        }
        let base = Codebook::generate_with(CodebookParams::new(encoders * len, levels, sparsity, bits, seed), exec)?;
        Self::from_base(base, encoders)
    }

    pub fn from_base(base: Codebook, encoders: usize) -> Result<Self> {
        if encoders == 0 || !base.bins().is_multiple_of(encoders) {
            return Err(Error::DimensionMismatch(format!(
                "{} bins do not split evenly over {encoders} encoders",
                base.bins()
            )));
        }
        let len = base.bins() / encoders;
        Ok(Self { base, encoders, len })
    }

    pub fn base(&self) -> &Codebook {
        &self.base
    }

    pub fn encoders(&self) -> usize {
        self.encoders
    }

    /// Samples per encoder, `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bins owned by encoder `m` (0-based).
    pub fn bins_of(&self, m: usize) -> Range<usize> {
        assert!(m < self.encoders, "encoder {m} out of range");
        m * self.len..(m + 1) * self.len
    }
}

impl AsRef<[f64]> for SparseSignal {
    fn as_ref(&self) -> &[f64] {
        self.values()
    }
}

/// Draws an ensemble of `n` length-`t` signals with Gaussian nonzeros.
///
/// `Overall { k }` places `k` nonzeros uniformly over the `n × t` grid.
/// `Structured { k_t, k_s }` picks `k_s` active signals and `k_t` active times
/// and fills their cross product, so every signal has at most `k_t` and every
/// time column at most `k_s` nonzeros.
pub fn gen_joint_sparse(n: usize, t: usize, model: JointSparsityModel, seed: u64) -> Result<Vec<SparseSignal>> {
    let mut rng = rng::stream(seed, &[]);
    let mut grid = vec![vec![0.0; t]; n];
    let budget = match model {
        JointSparsityModel::Overall { k } => {
            if k > n * t {
                return Err(Error::Infeasible(format!("k = {k} exceeds n·T = {}", n * t)));
            }
            let mut cells = sample(&mut rng, n * t, k).into_vec();
            cells.sort_unstable();
            for c in cells {
                grid[c / t][c % t] = nonzero_gaussian(&mut rng);
            }
            k
        }
        JointSparsityModel::Structured { k_t, k_s } => {
            if k_s > n || k_t > t {
                return Err(Error::Infeasible(format!(
                    "structured sparsity (k_t={k_t}, k_s={k_s}) does not fit n={n}, T={t}"
                )));
            }
            let mut signals = sample(&mut rng, n, k_s).into_vec();
            let mut times = sample(&mut rng, t, k_t).into_vec();
            signals.sort_unstable();
            times.sort_unstable();
            for &m in &signals {
                for &i in &times {
                    grid[m][i] = nonzero_gaussian(&mut rng);
                }
            }
            k_t
        }
    };
    Ok(grid.into_iter().map(|v| SparseSignal::new(v, budget)).collect())
}

fn nonzero_gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = rng.sample(StandardNormal);
        if v != 0.0 {
            return v;
        }
    }
}

/// Encodes each signal separately with its own block of bins.
pub fn encode_distributed<S: AsRef<[f64]>>(
    signals: &[S],
    dcb: &DistributedCodebook,
    qz: &ScalarQuantizer,
) -> Result<Vec<Register>> {
    if signals.len() != dcb.encoders() {
        return Err(Error::DimensionMismatch(format!(
            "{} signals for {} encoders",
            signals.len(),
            dcb.encoders()
        )));
    }
    signals
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let s = s.as_ref();
            if s.len() != dcb.len() {
                return Err(Error::DimensionMismatch(format!(
                    "signal {m} has length {}, expected {}",
                    s.len(),
                    dcb.len()
                )));
            }
            encode_bins(s, dcb.base(), dcb.bins_of(m).start, qz)
        })
        .collect()
}

/// Splits a decoded `n·T` estimate back into `n` signals.
pub fn split_ensemble(estimate: &[f64], n: usize) -> Vec<Vec<f64>> {
    assert!(
        n > 0 && estimate.len().is_multiple_of(n),
        "estimate does not split into {n} signals"
    );
    estimate.chunks(estimate.len() / n).map(<[f64]>::to_vec).collect()
}
