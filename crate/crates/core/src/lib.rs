//! Serial group-testing quantization of sparse time sequences.
//!
//! A length-`T` sequence with at most `k` nonzero samples is compressed into a
//! single `b`-bit register: each sample is scalar-quantized and the codeword
//! chosen by its time bin and level is ORed into the register. The decoder
//! inverts the OR by searching for the most likely small set of codewords.

pub mod baselines;
pub mod bits;
pub mod channel;
pub mod codebook;
pub mod codec;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod network;
pub mod quantizer;
pub mod rng;
pub mod signal;

pub use bits::BitVector;
pub use channel::{apply_noise, encode_noisy, NoiseInjection};
pub use codebook::{Codebook, CodebookParams, Slot};
pub use codec::{decode_coma, decode_ml, eliminate, encode, DecodeResult, MlOptions, NoiseModel, Register};
pub use error::{Error, Result};
pub use exec::Execution;
pub use quantizer::ScalarQuantizer;
pub use signal::{gen_signal, mse, SparseSignal};
