//! The serial encoder and its decoders.
//!
//! The encoder quantizes each sample, picks the codeword of the sample's bin
//! indexed by the quantization level (the zero word for level 0), and ORs it
//! into a single `b`-bit register. Decoders recover `(bin, level)` pairs from
//! the final register: [`decode_ml`] searches jointly for the most likely
//! set of at most `k` codewords, [`decode_coma`] matches codewords one by
//! one.

mod coma;
mod fragment;
mod ml;

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::codebook::{Codebook, Slot};
use crate::error::{Error, Result};
use crate::quantizer::ScalarQuantizer;

pub use coma::decode_coma;
pub use fragment::{fragment_pipeline, FragmentCodec, FragmentDecoder, FragmentOutput, FragmentPlan};
pub use ml::{decode_ml, MlOptions, TieBreak};

/// The `b`-bit accumulator. Starts all-zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Register(BitVector);

impl Register {
    pub fn new(bits: usize) -> Self {
        Register(BitVector::zeros(bits))
    }

    pub fn from_bits(bits: BitVector) -> Self {
        Register(bits)
    }

    pub fn bits(&self) -> usize {
        self.0.len()
    }

    pub fn as_bits(&self) -> &BitVector {
        &self.0
    }

    pub fn bits_mut(&mut self) -> &mut BitVector {
        &mut self.0
    }

    pub fn into_bits(self) -> BitVector {
        self.0
    }

    #[inline]
    pub fn absorb(&mut self, codeword: &[u64]) {
        self.0.or_assign_words(codeword);
    }

    pub fn or_assign(&mut self, other: &Register) {
        self.0.or_assign(&other.0);
    }

    #[inline]
    pub fn covers(&self, codeword: &[u64]) -> bool {
        self.0.covers_words(codeword)
    }

    pub fn is_zero(&self) -> bool {
        self.0.all_zero()
    }

    /// `⌈b/8⌉` bytes, little-endian bit order.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8], bits: usize) -> Result<Self> {
        BitVector::from_bytes(bytes, bits).map(Register).ok_or_else(|| {
            Error::Format(format!(
                "register of {bits} bits needs {} bytes, got {}",
                bits.div_ceil(8),
                bytes.len()
            ))
        })
    }
}

/// Asymmetric bit-flip noise: `0 → 1` with probability `q`, `1 → 0` with
/// probability `u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub q: f64,
    pub u: f64,
}

impl NoiseModel {
    pub fn new(q: f64, u: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&q) || !(0.0..1.0).contains(&u) {
            return Err(Error::InvalidParameter(format!(
                "noise needs 0 <= q < 1/2 and 0 <= u < 1 (q={q}, u={u})"
            )));
        }
        Ok(Self { q, u })
    }

    pub fn noiseless() -> Self {
        Self { q: 0.0, u: 0.0 }
    }

    pub fn is_noiseless(&self) -> bool {
        self.q == 0.0 && self.u == 0.0
    }
}

/// How a decode result was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    /// Noiseless ML: the OR of the support equals the register.
    Exact,
    /// Noisy ML: best log-likelihood found.
    Likelihood { log_likelihood: f64 },
    /// Noiseless ML found no exact match and fell back to noisy scoring.
    Fallback { log_likelihood: f64 },
    /// CoMa column matching.
    ColumnMatching,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub signal: Vec<f64>,
    /// Recovered `(bin, level)` pairs in increasing order.
    pub support: Vec<Slot>,
    pub outcome: Outcome,
    pub candidates_examined: u64,
}

impl DecodeResult {
    pub(crate) fn from_support(
        support: Vec<Slot>,
        bins: usize,
        qz: &ScalarQuantizer,
        outcome: Outcome,
        candidates_examined: u64,
    ) -> Self {
        let mut signal = vec![0.0; bins];
        for s in &support {
            signal[s.bin] = qz.level_value(s.level);
        }
        Self {
            signal,
            support,
            outcome,
            candidates_examined,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.outcome, Outcome::Exact)
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self.outcome, Outcome::Fallback { .. })
    }
}

/// Codeword selected for sample `x` in bin `bin`, or `None` for `c_0`.
#[inline]
pub fn select<'a>(cb: &'a Codebook, qz: &ScalarQuantizer, bin: usize, x: f64) -> Option<&'a [u64]> {
    match qz.quantize(x).0 {
        0 => None,
        j => Some(cb.codeword(bin, j)),
    }
}

/// Streaming encoder: one call to [`Encoder::push`] per incoming sample.
pub struct Encoder<'a> {
    cb: &'a Codebook,
    qz: &'a ScalarQuantizer,
    next_bin: usize,
    end_bin: usize,
    register: Register,
}

impl<'a> Encoder<'a> {
    /// Encoder over all bins of `cb`.
    pub fn new(cb: &'a Codebook, qz: &'a ScalarQuantizer) -> Result<Self> {
        Self::over_bins(cb, qz, 0, cb.bins())
    }

    /// Encoder owning bins `first .. first + len` of `cb`.
    pub fn over_bins(cb: &'a Codebook, qz: &'a ScalarQuantizer, first: usize, len: usize) -> Result<Self> {
        if qz.levels() != cb.levels() {
            return Err(Error::DimensionMismatch(format!(
                "quantizer has {} levels, codebook has {}",
                qz.levels(),
                cb.levels()
            )));
        }
        if first + len > cb.bins() {
            return Err(Error::DimensionMismatch(format!(
                "bins {first}..{} exceed codebook size {}",
                first + len,
                cb.bins()
            )));
        }
        Ok(Self {
            cb,
            qz,
            next_bin: first,
            end_bin: first + len,
            register: Register::new(cb.bits()),
        })
    }

    pub fn push(&mut self, x: f64) -> Result<()> {
        if self.next_bin == self.end_bin {
            return Err(Error::DimensionMismatch("more samples than codebook bins".into()));
        }
        if let Some(cw) = select(self.cb, self.qz, self.next_bin, x) {
            self.register.absorb(cw);
        }
        self.next_bin += 1;
        Ok(())
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn register_mut(&mut self) -> &mut Register {
        &mut self.register
    }

    pub fn finish(self) -> Result<Register> {
        if self.next_bin != self.end_bin {
            return Err(Error::DimensionMismatch(format!(
                "encoder stopped {} samples short",
                self.end_bin - self.next_bin
            )));
        }
        Ok(self.register)
    }
}

/// Encodes a whole sequence whose length equals the number of bins.
pub fn encode(signal: &[f64], cb: &Codebook, qz: &ScalarQuantizer) -> Result<Register> {
    if signal.len() != cb.bins() {
        return Err(Error::DimensionMismatch(format!(
            "signal length {} differs from codebook T = {}",
            signal.len(),
            cb.bins()
        )));
    }
    encode_bins(signal, cb, 0, qz)
}

/// Encodes `signal` with bins `first .. first + signal.len()` of `cb`.
pub fn encode_bins(signal: &[f64], cb: &Codebook, first: usize, qz: &ScalarQuantizer) -> Result<Register> {
    let mut enc = Encoder::over_bins(cb, qz, first, signal.len())?;
    for &x in signal {
        enc.push(x)?;
    }
    enc.finish()
}

/// The true `(bin, level)` pairs of a signal under `qz`.
pub fn true_support(signal: &[f64], qz: &ScalarQuantizer) -> Vec<Slot> {
    signal
        .iter()
        .enumerate()
        .filter_map(|(i, &x)| match qz.quantize(x).0 {
            0 => None,
            j => Some(Slot::new(i, j)),
        })
        .collect()
}

/// All codewords covered by the register (`c OR y == y`), in slot order.
pub fn eliminate(reg: &Register, cb: &Codebook) -> Vec<Slot> {
    check_register(reg, cb).expect("register length must match codebook");
    (0..cb.stored())
        .filter(|&s| reg.covers(cb.slot_words(s)))
        .map(|s| cb.slot_at(s))
        .collect()
}

pub(crate) fn check_register(reg: &Register, cb: &Codebook) -> Result<()> {
    if reg.bits() != cb.bits() {
        return Err(Error::DimensionMismatch(format!(
            "register has {} bits, codebook has {}",
            reg.bits(),
            cb.bits()
        )));
    }
    Ok(())
}

pub(crate) fn check_quantizer(cb: &Codebook, qz: &ScalarQuantizer) -> Result<()> {
    if qz.levels() != cb.levels() {
        return Err(Error::DimensionMismatch(format!(
            "quantizer has {} levels, codebook has {}",
            qz.levels(),
            cb.levels()
        )));
    }
    Ok(())
}
