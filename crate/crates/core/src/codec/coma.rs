use rand::seq::IndexedRandom;
use rand::Rng;

use super::{check_quantizer, check_register, DecodeResult, Outcome, Register};
use crate::codebook::{Codebook, Slot};
use crate::error::Result;
use crate::quantizer::ScalarQuantizer;

/// Column matching: keep every codeword covered by the register, then pick
/// one survivor uniformly at random in each bin that has any.
pub fn decode_coma<R: Rng + ?Sized>(
    reg: &Register,
    cb: &Codebook,
    qz: &ScalarQuantizer,
    rng: &mut R,
) -> Result<DecodeResult> {
    check_register(reg, cb)?;
    check_quantizer(cb, qz)?;
    let mut support = Vec::new();
    let mut in_bin: Vec<Slot> = Vec::with_capacity(cb.levels());
    for bin in 0..cb.bins() {
        in_bin.clear();
        for level in 1..=cb.levels() {
            if reg.covers(cb.codeword(bin, level)) {
                in_bin.push(Slot::new(bin, level));
            }
        }
        if let Some(&s) = in_bin.choose(rng) {
            support.push(s);
        }
    }
    Ok(DecodeResult::from_support(
        support,
        cb.bins(),
        qz,
        Outcome::ColumnMatching,
        cb.stored() as u64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::CodebookParams;
    use crate::codec::{eliminate, encode};
    use crate::rng;

    #[test]
    fn picks_only_survivors() {
        let cb = Codebook::generate(CodebookParams::new(30, 6, 3, 40, 8)).unwrap();
        let qz = ScalarQuantizer::new(6).unwrap();
        let mut s = vec![0.0; 30];
        s[4] = 0.5;
        s[9] = -1.1;
        s[22] = 1.9;
        let reg = encode(&s, &cb, &qz).unwrap();
        let survivors = eliminate(&reg, &cb);
        let mut r = rng::stream(1, &[]);
        let out = decode_coma(&reg, &cb, &qz, &mut r).unwrap();
        assert!(out.support.iter().all(|x| survivors.contains(x)));
        for bin in [4, 9, 22] {
            assert!(out.support.iter().any(|x| x.bin == bin));
        }
    }

    #[test]
    fn zero_register_gives_zero() {
        let cb = Codebook::generate(CodebookParams::new(10, 3, 1, 30, 8)).unwrap();
        let qz = ScalarQuantizer::new(3).unwrap();
        let mut r = rng::stream(1, &[]);
        let out = decode_coma(&Register::new(30), &cb, &qz, &mut r).unwrap();
        assert!(out.support.is_empty());
    }
}
