//! Random binned binary codebooks.
//!
//! A codebook holds `T` bins of `l` codewords `c_{j,i}` of `b` bits each,
//! plus the shared all-zero word `c_0` which is never stored. Every bit is an
//! independent Bernoulli(`ln 2 / k`) draw.
//!
//! Bin `i` is drawn from its own ChaCha stream, so generation is
//! deterministic for a seed and can run bins in parallel.

mod io;
pub mod rates;

use std::collections::HashSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::{words_for, BitVector};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng;

pub use io::{read_codebook, write_codebook, CodebookHeader, FORMAT_VERSION, MAGIC};
pub use rates::*;

/// Position of a nonzero codeword: time bin `i` and level `j ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub bin: usize,
    pub level: usize,
}

impl Slot {
    pub fn new(bin: usize, level: usize) -> Self {
        Self { bin, level }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookParams {
    /// Number of bins `T`.
    pub bins: usize,
    /// Codewords per bin `l`.
    pub levels: usize,
    /// Design sparsity `k`.
    pub sparsity: usize,
    /// Codeword length `b`.
    pub bits: usize,
    pub seed: u64,
    #[serde(default)]
    pub reject_duplicates: bool,
}

impl CodebookParams {
    pub fn new(bins: usize, levels: usize, sparsity: usize, bits: usize, seed: u64) -> Self {
        Self {
            bins,
            levels,
            sparsity,
            bits,
            seed,
            reject_duplicates: false,
        }
    }

    pub fn reject_duplicates(mut self, on: bool) -> Self {
        self.reject_duplicates = on;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codebook {
    bins: usize,
    levels: usize,
    sparsity: usize,
    bits: usize,
    seed: u64,
    stride: usize,
    words: Vec<u64>,
}

/// Per-bit Bernoulli mean `ln 2 / k`.
pub fn bernoulli_mean(k: usize) -> f64 {
    std::f64::consts::LN_2 / k as f64
}

fn threshold(p: f64) -> u64 {
    // P(u < threshold) = p for u uniform on u64.
    if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

fn draw_codeword<R: RngCore>(rng: &mut R, bits: usize, thr: u64, out: &mut [u64]) {
    out.fill(0);
    for bit in 0..bits {
        if rng.next_u64() < thr {
            out[bit / 64] |= 1 << (bit % 64);
        }
    }
}

impl Codebook {
    pub fn generate(params: CodebookParams) -> Result<Self> {
        Self::generate_with(params, Execution::Parallel)
    }

    pub fn generate_with(params: CodebookParams, exec: Execution) -> Result<Self> {
        let CodebookParams {
            bins,
            levels,
            sparsity,
            bits,
            seed,
            reject_duplicates,
        } = params;
        if bins == 0 || levels == 0 || sparsity == 0 || bits == 0 {
            return Err(Error::InvalidParameter(format!(
                "codebook needs T, l, k, b >= 1 (got T={bins}, l={levels}, k={sparsity}, b={bits})"
            )));
        }
        if reject_duplicates && !distinct_codewords_feasible(bins * levels, sparsity, bits) {
            return Err(Error::Infeasible(format!(
                "{} distinct codewords of {bits} bits are not available at sparsity {sparsity}",
                bins * levels
            )));
        }
        let stride = words_for(bits);
        let thr = threshold(bernoulli_mean(sparsity));
        let per_bin = exec.map(bins, |bin| {
            let mut rng = rng::stream(seed, &[0, bin as u64]);
            let mut words = vec![0u64; levels * stride];
            for cw in words.chunks_exact_mut(stride) {
                draw_codeword(&mut rng, bits, thr, cw);
            }
            words
        });
        let mut cb = Self {
            bins,
            levels,
            sparsity,
            bits,
            seed,
            stride,
            words: per_bin.concat(),
        };
        if reject_duplicates {
            cb.redraw_duplicates(thr)?;
        }
        Ok(cb)
    }

    /// Replaces all-zero and repeated codewords, scanning slots in order and
    /// redrawing from a dedicated stream.
    fn redraw_duplicates(&mut self, thr: u64) -> Result<()> {
        let slots = self.bins * self.levels;
        let cap = 100 * slots as u64;
        let mut draws = 0u64;
        let mut rng = rng::stream(self.seed, &[1]);
        let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(slots);
        let mut cw = vec![0u64; self.stride];
        for s in 0..slots {
            cw.copy_from_slice(self.slot_words(s));
            while cw.iter().all(|&w| w == 0) || seen.contains(&cw) {
                if draws == cap {
                    return Err(Error::Infeasible(format!(
                        "duplicate-free codebook not found within {cap} redraws"
                    )));
                }
                draws += 1;
                draw_codeword(&mut rng, self.bits, thr, &mut cw);
            }
            let range = s * self.stride..(s + 1) * self.stride;
            self.words[range].copy_from_slice(&cw);
            seen.insert(cw.clone());
        }
        Ok(())
    }

    pub(crate) fn from_raw(
        bins: usize,
        levels: usize,
        sparsity: usize,
        bits: usize,
        seed: u64,
        words: Vec<u64>,
    ) -> Self {
        let stride = words_for(bits);
        assert_eq!(words.len(), bins * levels * stride);
        Self {
            bins,
            levels,
            sparsity,
            bits,
            seed,
            stride,
            words,
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bernoulli_mean(&self) -> f64 {
        bernoulli_mean(self.sparsity)
    }

    /// Words per codeword.
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Number of stored (nonzero) codeword slots, `l · T`.
    pub fn stored(&self) -> usize {
        self.bins * self.levels
    }

    /// Total distinct codeword slots including `c_0`, `l · T + 1`.
    pub fn total_slots(&self) -> usize {
        self.stored() + 1
    }

    #[inline]
    pub fn slot_index(&self, slot: Slot) -> usize {
        debug_assert!(slot.level >= 1 && slot.level <= self.levels && slot.bin < self.bins);
        slot.bin * self.levels + slot.level - 1
    }

    #[inline]
    pub fn slot_at(&self, index: usize) -> Slot {
        Slot::new(index / self.levels, index % self.levels + 1)
    }

    #[inline]
    pub(crate) fn slot_words(&self, index: usize) -> &[u64] {
        &self.words[index * self.stride..(index + 1) * self.stride]
    }

    /// Words of `c_{j,i}` with `j ≥ 1`.
    #[inline]
    pub fn codeword(&self, bin: usize, level: usize) -> &[u64] {
        assert!(
            level >= 1 && level <= self.levels && bin < self.bins,
            "slot ({bin}, {level}) outside codebook"
        );
        self.slot_words(bin * self.levels + level - 1)
    }

    pub fn codeword_bits(&self, bin: usize, level: usize) -> BitVector {
        BitVector::from_words(self.codeword(bin, level).to_vec(), self.bits)
    }

    pub fn zero_codeword(&self) -> BitVector {
        BitVector::zeros(self.bits)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// True when no stored codeword is all-zero or repeated.
    pub fn is_duplicate_free(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.stored());
        (0..self.stored()).all(|s| {
            let w = self.slot_words(s);
            !w.iter().all(|&x| x == 0) && seen.insert(w)
        })
    }
}
