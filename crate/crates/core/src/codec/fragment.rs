use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{decode_coma, decode_ml, encode, DecodeResult, MlOptions, Outcome};
use crate::codebook::{Codebook, CodebookParams, Slot};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::quantizer::ScalarQuantizer;
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FragmentDecoder {
    #[default]
    Ml,
    Coma,
}

/// Splits a length-`T` sequence into `groups` consecutive pieces of
/// `⌈T/groups⌉` samples (the last one zero-padded), each with its own
/// codebook and register.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragmentPlan {
    pub groups: usize,
    pub levels: usize,
    /// Sparsity of the whole sequence; each group designs for `⌈k/groups⌉`.
    pub sparsity: usize,
    pub bits_per_group: usize,
    pub seed: u64,
    pub decoder: FragmentDecoder,
}

impl FragmentPlan {
    pub fn group_len(&self, t: usize) -> usize {
        t.div_ceil(self.groups)
    }

    pub fn group_sparsity(&self) -> usize {
        self.sparsity.div_ceil(self.groups).max(1)
    }

    pub fn total_bits(&self) -> usize {
        self.groups * self.bits_per_group
    }
}

/// A fragmented encoder/decoder with all group codebooks generated.
#[derive(Clone, Debug)]
pub struct FragmentCodec {
    plan: FragmentPlan,
    len: usize,
    codebooks: Vec<Codebook>,
}

/// Merged decode of all groups.
#[derive(Clone, Debug, PartialEq)]
pub struct FragmentOutput {
    pub result: DecodeResult,
    /// Groups whose ML search ran out of budget; their partial result is used.
    pub budget_exceeded: usize,
    /// Groups decoded through the noisy fallback.
    pub fallbacks: usize,
}

impl FragmentCodec {
    pub fn new(plan: FragmentPlan, len: usize, exec: Execution) -> Result<Self> {
        if plan.groups == 0 || plan.groups > len.max(1) {
            return Err(Error::InvalidParameter(format!(
                "cannot split {len} samples into {} groups",
                plan.groups
            )));
        }
        let group_len = plan.group_len(len);
        let codebooks = (0..plan.groups)
            .map(|g| {
                let params = CodebookParams::new(
                    group_len,
                    plan.levels,
                    plan.group_sparsity(),
                    plan.bits_per_group,
                    rng::derive_seed(plan.seed, &[2, g as u64]),
                );
                Codebook::generate_with(params, exec)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { plan, len, codebooks })
    }

    pub fn plan(&self) -> &FragmentPlan {
        &self.plan
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    /// Encodes and decodes `signal`. `ml` supplies search options; its `k`
    /// is replaced by the per-group sparsity.
    pub fn run<R: Rng + ?Sized>(
        &self,
        signal: &[f64],
        qz: &ScalarQuantizer,
        ml: &MlOptions,
        rng: &mut R,
    ) -> Result<FragmentOutput> {
        if signal.len() != self.len {
            return Err(Error::DimensionMismatch(format!(
                "fragment codec built for {} samples, got {}",
                self.len,
                signal.len()
            )));
        }
        let group_len = self.plan.group_len(self.len);
        let opts = MlOptions {
            k: self.plan.group_sparsity(),
            ..*ml
        };
        let mut piece = vec![0.0; group_len];
        let mut estimate = vec![0.0; self.len];
        let mut support = Vec::new();
        let mut examined = 0;
        let mut budget_exceeded = 0;
        let mut fallbacks = 0;
        let mut fallback_ll = 0.0;
        for (g, cb) in self.codebooks.iter().enumerate() {
            let first = g * group_len;
            let end = (first + group_len).min(self.len);
            piece.fill(0.0);
            if first < end {
                piece[..end - first].copy_from_slice(&signal[first..end]);
            }
            let reg = encode(&piece, cb, qz)?;
            let out = match self.plan.decoder {
                FragmentDecoder::Coma => decode_coma(&reg, cb, qz, rng)?,
                FragmentDecoder::Ml => match decode_ml(&reg, cb, qz, &opts) {
                    Ok(r) => r,
                    Err(Error::BudgetExceeded { partial, .. }) => {
                        budget_exceeded += 1;
                        DecodeResult::from_support(
                            partial.support,
                            group_len,
                            qz,
                            partial.outcome,
                            partial.candidates_examined,
                        )
                    }
                    Err(e) => return Err(e),
                },
            };
            if let Outcome::Fallback { log_likelihood } = out.outcome {
                fallbacks += 1;
                fallback_ll += log_likelihood;
            }
            examined += out.candidates_examined;
            for s in out.support {
                let bin = first + s.bin;
                if bin < self.len {
                    estimate[bin] = qz.level_value(s.level);
                    support.push(Slot::new(bin, s.level));
                }
            }
        }
        let outcome = match self.plan.decoder {
            FragmentDecoder::Coma => Outcome::ColumnMatching,
            FragmentDecoder::Ml if fallbacks > 0 => Outcome::Fallback {
                log_likelihood: fallback_ll,
            },
            FragmentDecoder::Ml => Outcome::Exact,
        };
        Ok(FragmentOutput {
            result: DecodeResult {
                signal: estimate,
                support,
                outcome,
                candidates_examined: examined,
            },
            budget_exceeded,
            fallbacks,
        })
    }
}

/// One-shot fragmentation: builds the group codebooks and runs `signal`
/// through them. CoMa randomness is drawn from a stream derived from the
/// plan seed.
pub fn fragment_pipeline(
    signal: &[f64],
    plan: FragmentPlan,
    qz: &ScalarQuantizer,
    ml: &MlOptions,
) -> Result<FragmentOutput> {
    let codec = FragmentCodec::new(plan, signal.len(), Execution::Parallel)?;
    let mut r = rng::stream(plan.seed, &[3]);
    codec.run(signal, qz, ml, &mut r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(groups: usize, decoder: FragmentDecoder) -> FragmentPlan {
        FragmentPlan {
            groups,
            levels: 4,
            sparsity: 4,
            bits_per_group: 48,
            seed: 17,
            decoder,
        }
    }

    #[test]
    fn shapes() {
        let p = plan(3, FragmentDecoder::Ml);
        assert_eq!(p.group_len(10), 4);
        assert_eq!(p.group_sparsity(), 2);
        assert_eq!(p.total_bits(), 144);
        let codec = FragmentCodec::new(p, 10, Execution::Sequential).unwrap();
        assert_eq!(codec.codebooks().len(), 3);
        assert_ne!(codec.codebooks()[0], codec.codebooks()[1]);
        assert!(FragmentCodec::new(plan(11, FragmentDecoder::Ml), 10, Execution::Sequential).is_err());
    }

    #[test]
    fn recovers_spread_support() {
        let qz = ScalarQuantizer::new(4).unwrap();
        let mut s = vec![0.0; 10];
        s[1] = 1.0;
        s[9] = -1.0;
        let out = fragment_pipeline(&s, plan(3, FragmentDecoder::Ml), &qz, &MlOptions::new(1)).unwrap();
        let expect: Vec<f64> = s.iter().map(|&x| qz.quantize(x).1).collect();
        assert_eq!(out.result.signal, expect);
        assert_eq!(out.budget_exceeded, 0);
        let coma = fragment_pipeline(&s, plan(3, FragmentDecoder::Coma), &qz, &MlOptions::new(1)).unwrap();
        assert_eq!(coma.result.signal.len(), 10);
    }
}
