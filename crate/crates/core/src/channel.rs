//! Asymmetric bit-flip noise on the register.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::codec::{encode, Encoder, NoiseModel, Register};
use crate::error::Result;
use crate::quantizer::ScalarQuantizer;

/// Flips each 0-bit to 1 with probability `q` and each 1-bit to 0 with
/// probability `u`, drawing one uniform per bit in bit order.
pub fn apply_noise<R: Rng + ?Sized>(reg: &Register, noise: NoiseModel, rng: &mut R) -> Register {
    let mut out = reg.clone();
    if noise.is_noiseless() {
        return out;
    }
    let bits = out.bits_mut();
    for i in 0..bits.len() {
        let r: f64 = rng.random();
        let one = bits.get(i);
        if one && r < noise.u {
            bits.set(i, false);
        } else if !one && r < noise.q {
            bits.set(i, true);
        }
    }
    out
}

/// Where the channel acts during encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseInjection {
    /// Once, on the final register.
    #[default]
    Final,
    /// After every sample is absorbed.
    PerStep,
}

/// Encodes `signal` and passes the register through the channel.
pub fn encode_noisy<R: Rng + ?Sized>(
    signal: &[f64],
    cb: &Codebook,
    qz: &ScalarQuantizer,
    noise: NoiseModel,
    injection: NoiseInjection,
    rng: &mut R,
) -> Result<Register> {
    match injection {
        NoiseInjection::Final => {
            let reg = encode(signal, cb, qz)?;
            Ok(apply_noise(&reg, noise, rng))
        }
        NoiseInjection::PerStep => {
            let mut enc = Encoder::new(cb, qz)?;
            for &x in signal {
                enc.push(x)?;
                let noisy = apply_noise(enc.register(), noise, rng);
                *enc.register_mut() = noisy;
            }
            enc.finish()
        }
    }
}
