//! Closed-form rate and feasibility calculators. All logarithms are base 2;
//! binomial coefficients are evaluated in log space.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `log2 C(n, r)`, or `None` when the coefficient is zero.
pub fn log2_binomial(n: usize, r: usize) -> Option<f64> {
    if r > n {
        return None;
    }
    if r == 0 || r == n {
        return Some(0.0);
    }
    let ln = ln_gamma(n as f64 + 1.0) - ln_gamma(r as f64 + 1.0) - ln_gamma((n - r) as f64 + 1.0);
    Some((ln / std::f64::consts::LN_2).max(0.0))
}

fn check_common(t: usize, k: usize, l: usize, epsilon: f64) -> Result<()> {
    if k == 0 || k > t {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= T (k={k}, T={t})")));
    }
    if l == 0 {
        return Err(Error::InvalidParameter("l must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// Sufficient rate for ML decoding:
/// `max_{1≤i≤k} ((1+ε)k / (iT)) · log2(C(T-k, i) · l^i)`.
///
/// Terms whose binomial vanishes are skipped; an empty maximum is 0.
pub fn sufficient_rate_ml(t: usize, k: usize, l: usize, epsilon: f64) -> Result<f64> {
    check_common(t, k, l, epsilon)?;
    let log_l = (l as f64).log2();
    let best = (1..=k)
        .filter_map(|i| {
            log2_binomial(t - k, i).map(|lb| (1.0 + epsilon) * k as f64 / (i * t) as f64 * (lb + i as f64 * log_l))
        })
        .fold(0.0, f64::max);
    Ok(best)
}

/// Upper bound `(1+ε)(k/T) log2(T·l)` on [`sufficient_rate_ml`].
pub fn rate_upper_bound(t: usize, k: usize, l: usize, epsilon: f64) -> Result<f64> {
    check_common(t, k, l, epsilon)?;
    Ok((1.0 + epsilon) * k as f64 / t as f64 * ((t * l) as f64).log2())
}

/// Order-of-growth witness `k log2 T + k log2 l` for the number of bits.
pub fn bits_growth(t: usize, k: usize, l: usize) -> f64 {
    k as f64 * (t as f64).log2() + k as f64 * (l as f64).log2()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComaRate {
    pub rate: f64,
    /// Bound `T^{-ε}` on the probability of a decoding failure.
    pub failure_bound: f64,
}

/// Sufficient rate for CoMa decoding, `((1+ε) e / T) · k · log2(T·l)`.
pub fn sufficient_rate_coma(t: usize, k: usize, l: usize, epsilon: f64) -> Result<ComaRate> {
    check_common(t, k, l, epsilon)?;
    let rate = (1.0 + epsilon) * std::f64::consts::E / t as f64 * k as f64 * ((t * l) as f64).log2();
    Ok(ComaRate {
        rate,
        failure_bound: (t as f64).powf(-epsilon),
    })
}

/// Joint sparsity of an ensemble of `n` signals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum JointSparsityModel {
    /// At most `k` nonzeros across the whole `n × T` ensemble.
    Overall { k: usize },
    /// Each signal is `k_t`-sparse in time and each time column is
    /// `k_s`-sparse across signals; `k = k_t · k_s`.
    Structured { k_t: usize, k_s: usize },
}

impl JointSparsityModel {
    pub fn k(&self) -> usize {
        match *self {
            JointSparsityModel::Overall { k } => k,
            JointSparsityModel::Structured { k_t, k_s } => k_t * k_s,
        }
    }
}

/// Sufficient rate for distributed ML decoding over `n` signals of length `T`:
/// `max_{u ∈ I(k)} ((1+ε)k / (u n T)) · log2(ϑ · l^u)`.
///
/// Overall sparsity uses `ϑ = C(nT, k)` and `I = {1..k}`. Structured sparsity
/// uses `ϑ = C(n, k_t) C(T, k_s)` and `I = {u_t u_s}`; `swap_structured`
/// exchanges the roles to `ϑ = C(n, k_s) C(T, k_t)`.
pub fn sufficient_rate_distributed(
    n: usize,
    t: usize,
    model: JointSparsityModel,
    l: usize,
    epsilon: f64,
    swap_structured: bool,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one signal".into()));
    }
    let k = model.k();
    check_common(n * t, k, l, epsilon)?;
    let (log_theta, index_set): (f64, Vec<usize>) = match model {
        JointSparsityModel::Overall { k } => (log2_binomial(n * t, k).expect("k <= nT checked"), (1..=k).collect()),
        JointSparsityModel::Structured { k_t, k_s } => {
            if k_t == 0 || k_s == 0 {
                return Err(Error::InvalidParameter(
                    "structured sparsity needs k_t, k_s >= 1".into(),
                ));
            }
            let (a, b) = if swap_structured { (k_s, k_t) } else { (k_t, k_s) };
            let theta = log2_binomial(n, a).zip(log2_binomial(t, b)).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "structured sparsity (k_t={k_t}, k_s={k_s}) does not fit n={n}, T={t}"
                ))
            })?;
            let mut set: Vec<usize> = (1..=k_t).flat_map(|ut| (1..=k_s).map(move |us| ut * us)).collect();
            set.sort_unstable();
            set.dedup();
            (theta.0 + theta.1, set)
        }
    };
    let log_l = (l as f64).log2();
    let nt = (n * t) as f64;
    Ok(index_set
        .into_iter()
        .map(|u| (1.0 + epsilon) * k as f64 / (u as f64 * nt) * (log_theta + u as f64 * log_l))
        .fold(0.0, f64::max))
}

/// Quantizer resolution for a target rate,
/// `max(⌊2^{T R / (k (1+ε))} / T⌋, 2)`, saturating at `usize::MAX`.
pub fn level_budget(t: usize, k: usize, rate: f64, epsilon: f64) -> usize {
    let exponent = t as f64 * rate / (k as f64 * (1.0 + epsilon));
    let log2_l = exponent - (t as f64).log2();
    if log2_l >= usize::BITS as f64 {
        return usize::MAX;
    }
    let l = 2f64.powf(log2_l).floor();
    (l as usize).max(2)
}

/// Bits for a rate over `samples` inputs: `⌈R · samples⌉`, robust to
/// floating-point noise in the product.
pub fn bits_for_rate(rate: f64, samples: usize) -> usize {
    let x = rate * samples as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Rate parameters `(ε, R, b = ⌈R·T⌉)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub epsilon: f64,
    pub rate: f64,
    pub bits: usize,
}

impl RateParams {
    pub fn new(epsilon: f64, rate: f64, samples: usize) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("rate must be positive, got {rate}")));
        }
        Ok(Self {
            epsilon,
            rate,
            bits: bits_for_rate(rate, samples),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepetitionFeasibility {
    /// `1 / (ln 2 · log2(k / ln 2)) − 1`.
    pub raw: f64,
    /// `raw` clamped at zero: the extra ε′ needed for repetition-free codebooks.
    pub required: f64,
}

pub fn repetition_feasibility(k: usize) -> Result<RepetitionFeasibility> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let ln2 = std::f64::consts::LN_2;
    let l2 = (k as f64 / ln2).log2();
    // l2 > 0 for every integer k >= 1 since ln 2 < 1.
    let raw = 1.0 / (ln2 * l2) - 1.0;
    Ok(RepetitionFeasibility {
        raw,
        required: raw.max(0.0),
    })
}

/// Whether `count` distinct codewords are available at weight `p·b`:
/// `count ≤ (k / ln 2)^{b ln 2 / k}`.
pub fn distinct_codewords_feasible(count: usize, k: usize, bits: usize) -> bool {
    let ln2 = std::f64::consts::LN_2;
    (count as f64).ln() <= bits as f64 * ln2 / k as f64 * (k as f64 / ln2).ln()
}

/// Codeword length inflation for bit-flip noise, `1 / ((1−q)(1−u)^2)`.
pub fn noisy_length_factor(q: f64, u: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&q) || !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!(
            "noise needs 0 <= q < 1/2 and 0 <= u < 1 (q={q}, u={u})"
        )));
    }
    Ok(1.0 / ((1.0 - q) * (1.0 - u) * (1.0 - u)))
}
