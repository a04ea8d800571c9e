use serde::{Deserialize, Serialize};

use super::{check_quantizer, check_register, DecodeResult, NoiseModel, Outcome, Register};
use crate::codebook::{Codebook, Slot};
use crate::error::{Error, Result};
use crate::quantizer::ScalarQuantizer;

/// Which of several equally good supports wins. Within one cardinality the
/// lexicographically smallest `(bin, level)` sequence is kept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    SmallestSupport,
    LargestSupport,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlOptions {
    /// Maximum support size searched.
    pub k: usize,
    /// Channel noise. `None` means a noiseless channel and exact matching.
    pub noise: Option<NoiseModel>,
    /// Model used when the noiseless search finds no exact match.
    pub fallback: NoiseModel,
    /// Maximum number of candidate supports scored before giving up.
    pub budget: u64,
    /// Noisy search only: keep at most this many codewords after pruning.
    pub max_candidates: usize,
    /// Noisy search only: disable pruning and candidate capping.
    pub exact: bool,
    /// Noisy search only: a codeword is discarded when its number of ones
    /// on zero bits of the register has upper-tail probability below this.
    pub prune_tail: f64,
    pub tie_break: TieBreak,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            k: 1,
            noise: None,
            fallback: NoiseModel { q: 0.01, u: 0.01 },
            budget: 50_000_000,
            max_candidates: 256,
            exact: false,
            prune_tail: 1e-6,
            tie_break: TieBreak::SmallestSupport,
        }
    }
}

impl MlOptions {
    pub fn new(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn noise(mut self, noise: Option<NoiseModel>) -> Self {
        self.noise = noise.filter(|n| !n.is_noiseless());
        self
    }

    pub fn fallback(mut self, model: NoiseModel) -> Self {
        self.fallback = model;
        self
    }

    pub fn budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn max_candidates(mut self, n: usize) -> Self {
        self.max_candidates = n;
        self
    }

    pub fn exact(mut self, on: bool) -> Self {
        self.exact = on;
        self
    }

    pub fn tie_break(mut self, tb: TieBreak) -> Self {
        self.tie_break = tb;
        self
    }
}

/// Maximum-likelihood decoding of at most `k` codewords, one per bin.
///
/// Noiseless: returns a support whose OR equals the register exactly, falling
/// back to likelihood scoring under `opts.fallback` when none exists. Noisy:
/// returns the support maximizing the bit-flip likelihood of the register.
pub fn decode_ml(reg: &Register, cb: &Codebook, qz: &ScalarQuantizer, opts: &MlOptions) -> Result<DecodeResult> {
    check_register(reg, cb)?;
    check_quantizer(cb, qz)?;
    match opts.noise {
        Some(noise) if !noise.is_noiseless() => {
            let found = likelihood_search(reg, cb, opts, noise)?;
            Ok(found.into_result(cb, qz, |ll| Outcome::Likelihood { log_likelihood: ll }))
        }
        _ => {
            let survivors: Vec<usize> = (0..cb.stored()).filter(|&s| reg.covers(cb.slot_words(s))).collect();
            let mut search = Search::new(cb, reg.as_bits().words(), survivors, opts);
            match search.exact_match() {
                Ok(Some(support)) => Ok(DecodeResult::from_support(
                    slots(cb, &support),
                    cb.bins(),
                    qz,
                    Outcome::Exact,
                    search.examined,
                )),
                Ok(None) => {
                    let spent = search.examined;
                    let remaining = MlOptions {
                        budget: opts.budget.saturating_sub(spent),
                        ..*opts
                    };
                    let mut found =
                        likelihood_search(reg, cb, &remaining, opts.fallback).map_err(|e| add_examined(e, spent))?;
                    found.examined += spent;
                    Ok(found.into_result(cb, qz, |ll| Outcome::Fallback { log_likelihood: ll }))
                }
                Err(()) => Err(Error::BudgetExceeded {
                    budget: opts.budget,
                    partial: Box::new(DecodeResult::from_support(
                        Vec::new(),
                        cb.bins(),
                        qz,
                        Outcome::Fallback {
                            log_likelihood: f64::NEG_INFINITY,
                        },
                        search.examined,
                    )),
                }),
            }
        }
    }
}

fn add_examined(e: Error, spent: u64) -> Error {
    match e {
        Error::BudgetExceeded { budget, mut partial } => {
            partial.candidates_examined += spent;
            Error::BudgetExceeded {
                budget: budget + spent,
                partial,
            }
        }
        other => other,
    }
}

fn slots(cb: &Codebook, indices: &[usize]) -> Vec<Slot> {
    indices.iter().map(|&s| cb.slot_at(s)).collect()
}

struct Found {
    support: Vec<usize>,
    log_likelihood: f64,
    examined: u64,
}

impl Found {
    fn into_result(self, cb: &Codebook, qz: &ScalarQuantizer, outcome: impl Fn(f64) -> Outcome) -> DecodeResult {
        DecodeResult::from_support(
            slots(cb, &self.support),
            cb.bins(),
            qz,
            outcome(self.log_likelihood),
            self.examined,
        )
    }
}

/// `n · ln p` with `0 · ln 0 = 0`.
#[inline]
fn term(n: usize, ln_p: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * ln_p
    }
}

#[derive(Clone, Copy)]
struct LogProbs {
    one_given_one: f64,
    zero_given_one: f64,
    one_given_zero: f64,
    zero_given_zero: f64,
}

impl LogProbs {
    fn new(noise: NoiseModel) -> Self {
        Self {
            one_given_one: (1.0 - noise.u).ln(),
            zero_given_one: noise.u.ln(),
            one_given_zero: noise.q.ln(),
            zero_given_zero: (1.0 - noise.q).ln(),
        }
    }

    /// Log-likelihood of observing `y` when the noiseless register is `z`.
    fn score(&self, z: &[u64], y: &[u64], y_ones: usize, bits: usize) -> f64 {
        let mut z_ones = 0;
        let mut both = 0;
        for (a, b) in z.iter().zip(y) {
            z_ones += a.count_ones() as usize;
            both += (a & b).count_ones() as usize;
        }
        let n10 = z_ones - both;
        let n01 = y_ones - both;
        let n00 = bits - z_ones - n01;
        term(both, self.one_given_one)
            + term(n10, self.zero_given_one)
            + term(n01, self.one_given_zero)
            + term(n00, self.zero_given_zero)
    }

    /// Likelihood gain of adding codeword `c` to an empty support.
    fn singleton_gain(&self, c: &[u64], y: &[u64]) -> f64 {
        let mut on = 0;
        let mut off = 0;
        for (a, b) in c.iter().zip(y) {
            on += (a & b).count_ones() as usize;
            off += (a & !b).count_ones() as usize;
        }
        let g =
            term(on, self.one_given_one - self.one_given_zero) + term(off, self.zero_given_one - self.zero_given_zero);
        if g.is_nan() {
            f64::NEG_INFINITY
        } else {
            g
        }
    }
}

/// Largest number of flipped-off ones a codeword of weight `w` may show
/// before its upper tail under Binomial(`w`, `u`) drops below `tail`.
fn binomial_upper_quantile(w: usize, u: f64, tail: f64) -> usize {
    if u <= 0.0 || w == 0 {
        return 0;
    }
    if u >= 1.0 {
        return w;
    }
    let target = 1.0 - tail;
    let ratio = (u / (1.0 - u)).ln();
    let mut lp = w as f64 * (1.0 - u).ln();
    let mut cdf = lp.exp();
    let mut m = 0;
    while cdf < target && m < w {
        lp += ((w - m) as f64 / (m + 1) as f64).ln() + ratio;
        m += 1;
        cdf += lp.exp();
    }
    m
}

fn likelihood_search(reg: &Register, cb: &Codebook, opts: &MlOptions, noise: NoiseModel) -> Result<Found> {
    let y = reg.as_bits().words();
    let lp = LogProbs::new(noise);
    let candidates: Vec<usize> = if opts.exact {
        (0..cb.stored()).collect()
    } else {
        let mut limits: Vec<Option<usize>> = vec![None; cb.bits() + 1];
        let mut kept: Vec<usize> = (0..cb.stored())
            .filter(|&s| {
                let c = cb.slot_words(s);
                let mut w = 0;
                let mut off = 0;
                for (a, b) in c.iter().zip(y) {
                    w += a.count_ones() as usize;
                    off += (a & !b).count_ones() as usize;
                }
                let lim = *limits[w].get_or_insert_with(|| binomial_upper_quantile(w, noise.u, opts.prune_tail));
                off <= lim
            })
            .collect();
        if kept.len() > opts.max_candidates {
            let mut scored: Vec<(f64, usize)> = kept
                .iter()
                .map(|&s| (lp.singleton_gain(cb.slot_words(s), y), s))
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            kept = scored[..opts.max_candidates].iter().map(|&(_, s)| s).collect();
            kept.sort_unstable();
        }
        kept
    };
    let mut search = Search::new(cb, y, candidates, opts);
    search.best_likelihood(&lp, reg.as_bits().count_ones())
}

/// Depth-first enumeration of supports with at most one codeword per bin,
/// visiting candidates in slot order.
struct Search<'a> {
    cb: &'a Codebook,
    y: &'a [u64],
    candidates: Vec<usize>,
    /// First candidate index in a later bin.
    next_bin: Vec<usize>,
    /// Distinct bins among `candidates[p..]`.
    bins_after: Vec<usize>,
    k: usize,
    budget: u64,
    tie_break: TieBreak,
    examined: u64,
    chosen: Vec<usize>,
    acc: Vec<u64>,
    best: Option<(f64, Vec<usize>)>,
}

impl<'a> Search<'a> {
    fn new(cb: &'a Codebook, y: &'a [u64], candidates: Vec<usize>, opts: &MlOptions) -> Self {
        let n = candidates.len();
        let bin = |p: usize| cb.slot_at(candidates[p]).bin;
        let mut next_bin = vec![n; n];
        let mut bins_after = vec![0; n + 1];
        for p in (0..n).rev() {
            if p + 1 < n && bin(p + 1) == bin(p) {
                next_bin[p] = next_bin[p + 1];
                bins_after[p] = bins_after[p + 1];
            } else {
                next_bin[p] = p + 1;
                bins_after[p] = bins_after[p + 1] + 1;
            }
        }
        let k = opts.k.min(cb.bins());
        let stride = cb.stride();
        Self {
            cb,
            y,
            candidates,
            next_bin,
            bins_after,
            k,
            budget: opts.budget,
            tie_break: opts.tie_break,
            examined: 0,
            chosen: Vec::with_capacity(k),
            acc: vec![0; (k + 1) * stride],
            best: None,
        }
    }

    fn tick(&mut self) -> Result<(), ()> {
        self.examined += 1;
        if self.examined > self.budget {
            Err(())
        } else {
            Ok(())
        }
    }

    fn push_acc(&mut self, depth: usize, p: usize) {
        let stride = self.cb.stride();
        let cw = self.cb.slot_words(self.candidates[p]);
        let (head, tail) = self.acc.split_at_mut((depth + 1) * stride);
        let prev = &head[depth * stride..];
        for ((dst, &a), &b) in tail[..stride].iter_mut().zip(prev).zip(cw) {
            *dst = a | b;
        }
    }

    /// Smallest (or largest) cardinality support matching `y` exactly.
    /// `Err(())` when the budget runs out.
    fn exact_match(&mut self) -> Result<Option<Vec<usize>>, ()> {
        let max = self.k.min(self.bins_after[0]);
        let order: Vec<usize> = match self.tie_break {
            TieBreak::SmallestSupport => (0..=max).collect(),
            TieBreak::LargestSupport => (0..=max).rev().collect(),
        };
        for card in order {
            if self.exact_at(0, 0, card)? {
                return Ok(Some(self.chosen.clone()));
            }
        }
        Ok(None)
    }

    fn exact_at(&mut self, depth: usize, start: usize, card: usize) -> Result<bool, ()> {
        let stride = self.cb.stride();
        if depth == card {
            self.tick()?;
            return Ok(self.acc[depth * stride..(depth + 1) * stride] == *self.y);
        }
        let need = card - depth;
        let mut p = start;
        while p < self.candidates.len() && self.bins_after[p] >= need {
            self.push_acc(depth, p);
            self.chosen.push(self.candidates[p]);
            if self.exact_at(depth + 1, self.next_bin[p], card)? {
                return Ok(true);
            }
            self.chosen.pop();
            p += 1;
        }
        Ok(false)
    }

    fn best_likelihood(&mut self, lp: &LogProbs, y_ones: usize) -> Result<Found> {
        let outcome = self.score_from(lp, y_ones, 0, 0);
        let (ll, support) = self.best.take().expect("empty support is always scored");
        match outcome {
            Ok(()) => Ok(Found {
                support,
                log_likelihood: ll,
                examined: self.examined,
            }),
            Err(()) => Err(Error::BudgetExceeded {
                budget: self.budget,
                partial: Box::new(DecodeResult {
                    signal: Vec::new(),
                    support: slots(self.cb, &support),
                    outcome: Outcome::Likelihood { log_likelihood: ll },
                    candidates_examined: self.examined,
                }),
            }),
        }
    }

    fn score_from(&mut self, lp: &LogProbs, y_ones: usize, depth: usize, start: usize) -> Result<(), ()> {
        let stride = self.cb.stride();
        let ll = lp.score(
            &self.acc[depth * stride..(depth + 1) * stride],
            self.y,
            y_ones,
            self.cb.bits(),
        );
        let better = match &self.best {
            None => true,
            Some((b, sup)) => {
                ll > *b
                    || (ll == *b
                        && match self.tie_break {
                            TieBreak::SmallestSupport => depth < sup.len(),
                            TieBreak::LargestSupport => depth > sup.len(),
                        })
            }
        };
        if better {
            self.best = Some((ll, self.chosen.clone()));
        }
        // Checked after recording so the partial result includes this node.
        self.tick()?;
        if depth == self.k {
            return Ok(());
        }
        for p in start..self.candidates.len() {
            self.push_acc(depth, p);
            self.chosen.push(self.candidates[p]);
            self.score_from(lp, y_ones, depth + 1, self.next_bin[p])?;
            self.chosen.pop();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::CodebookParams;
    use crate::codec::encode;

    #[test]
    fn quantile_small_cases() {
        assert_eq!(binomial_upper_quantile(10, 0.0, 1e-6), 0);
        // Bin(1, 0.5): P(X = 0) = 0.5 < 1 - tail, so the quantile is 1.
        assert_eq!(binomial_upper_quantile(1, 0.5, 1e-6), 1);
        // Bin(20, 0.01): P(X >= 5) ≈ 1.5e-6, P(X >= 6) ≈ 3.7e-8.
        assert_eq!(binomial_upper_quantile(20, 0.01, 1e-6), 5);
    }

    #[test]
    fn term_guards_zero_log_zero() {
        assert_eq!(term(0, f64::NEG_INFINITY), 0.0);
        assert_eq!(term(2, f64::NEG_INFINITY), f64::NEG_INFINITY);
    }

    #[test]
    fn noiseless_recovers_small_support() {
        let cb = Codebook::generate(CodebookParams::new(20, 4, 2, 60, 3)).unwrap();
        let qz = ScalarQuantizer::new(4).unwrap();
        let mut s = vec![0.0; 20];
        s[2] = 1.3;
        s[17] = -0.4;
        let reg = encode(&s, &cb, &qz).unwrap();
        let out = decode_ml(&reg, &cb, &qz, &MlOptions::new(2)).unwrap();
        assert!(out.is_exact());
        assert_eq!(out.support, vec![Slot::new(2, 4), Slot::new(17, 2)]);
        assert_eq!(encode(&out.signal, &cb, &qz).unwrap(), reg);
    }

    #[test]
    fn zero_register_decodes_to_zero() {
        let cb = Codebook::generate(CodebookParams::new(5, 2, 1, 10, 3)).unwrap();
        let qz = ScalarQuantizer::new(2).unwrap();
        let out = decode_ml(&Register::new(10), &cb, &qz, &MlOptions::new(1)).unwrap();
        assert!(out.support.is_empty());
        assert_eq!(out.signal, vec![0.0; 5]);
    }

    #[test]
    fn budget_is_reported() {
        let cb = Codebook::generate(CodebookParams::new(40, 8, 3, 8, 3)).unwrap();
        let qz = ScalarQuantizer::new(8).unwrap();
        let reg = Register::from_bits(crate::bits::BitVector::ones(8));
        let err = decode_ml(&reg, &cb, &qz, &MlOptions::new(3).budget(10)).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }
}
