use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::NoiseInjection;
use crate::codebook::JointSparsityModel;
use crate::codec::{MlOptions, NoiseModel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::Topology;
use crate::quantizer::{Reproduction, ScalarQuantizer};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    #[default]
    Single,
    Noisy,
    Distributed,
    Fragmented,
    Mismatch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    #[default]
    Ml,
    Coma,
}

impl DecoderKind {
    pub fn label(self) -> &'static str {
        match self {
            DecoderKind::Ml => "ml",
            DecoderKind::Coma => "coma",
        }
    }
}

/// How `ε` (and through it `l`) is chosen at each rate point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonPolicy {
    /// Best of four values in `[0.8, 1.3]`.
    #[default]
    AutoGrid,
    /// The configured `epsilon_value`.
    Fixed,
    /// Best of sixteen values in `[0.3, 2.0]`.
    FineSearch,
}

pub const AUTO_GRID: [f64; 4] = [0.8, 0.8 + 0.5 / 3.0, 0.8 + 1.0 / 3.0, 1.3];

impl EpsilonPolicy {
    pub fn values(self, fixed: f64) -> Vec<f64> {
        match self {
            EpsilonPolicy::AutoGrid => AUTO_GRID.to_vec(),
            EpsilonPolicy::Fixed => vec![fixed],
            EpsilonPolicy::FineSearch => (0..16).map(|i| 0.3 + 1.7 * i as f64 / 15.0).collect(),
        }
    }
}

/// Support of the codec's scalar quantizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum QuantizerSupport {
    /// Symmetric support minimizing the standard-normal distortion for the
    /// chosen `l`.
    #[default]
    GaussianLoaded,
    /// A fixed interval.
    Fixed {
        lo: f64,
        hi: f64,
        #[serde(default)]
        reproduction: Reproduction,
    },
}

impl QuantizerSupport {
    pub fn build(&self, levels: usize) -> Result<ScalarQuantizer> {
        match *self {
            QuantizerSupport::GaussianLoaded => ScalarQuantizer::gaussian_loaded(levels),
            QuantizerSupport::Fixed { lo, hi, reproduction } => {
                ScalarQuantizer::with_support(levels, lo, hi, reproduction)
            }
        }
    }
}

/// Where the nonzeros of a test signal go.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportPlacement {
    /// Uniformly over all samples.
    #[default]
    Uniform,
    /// An equal share in each of the `fragments` consecutive groups.
    Even,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineToggles {
    pub direct: bool,
    pub qiht: bool,
    pub fista: bool,
}

impl BaselineToggles {
    pub fn any(&self) -> bool {
        self.direct || self.qiht || self.fista
    }
}

/// Compress-and-quantize sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsSweep {
    /// Measurement counts as multiples of `k`.
    pub multipliers: Vec<usize>,
    pub qiht_iters: usize,
    pub fista_iters: usize,
    /// `λ` candidates as fractions of `‖Aᵀŷ‖∞`.
    pub lambda_factors: Vec<f64>,
    /// Held-out trials used to pick `λ`.
    pub lambda_trials: usize,
}

impl Default for CsSweep {
    fn default() -> Self {
        Self {
            multipliers: (6..=20).step_by(2).collect(),
            qiht_iters: 300,
            fista_iters: 500,
            lambda_factors: vec![0.01, 0.03, 0.1, 0.3],
            lambda_trials: 10,
        }
    }
}

/// Decoder search limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub budget: u64,
    pub max_candidates: usize,
    pub fallback: NoiseModel,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let d = MlOptions::default();
        Self {
            budget: d.budget,
            max_candidates: d.max_candidates,
            fallback: d.fallback,
        }
    }
}

impl SearchConfig {
    pub fn options(&self, k: usize, noise: Option<NoiseModel>) -> MlOptions {
        MlOptions::new(k)
            .noise(noise)
            .fallback(self.fallback)
            .budget(self.budget)
            .max_candidates(self.max_candidates)
    }
}

/// A topology given inline or as a path to a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologyRef {
    Path(String),
    Inline(serde_json::Value),
}

impl TopologyRef {
    pub fn load(&self, base: Option<&Path>) -> Result<Topology> {
        match self {
            TopologyRef::Path(p) => {
                let path = match base {
                    Some(dir) => dir.join(p),
                    None => p.into(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Topology::from_json(&text)
            }
            TopologyRef::Inline(v) => Topology::from_json(&v.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Samples per signal.
    #[serde(rename = "T")]
    pub t: usize,
    /// Design sparsity.
    pub k: usize,
    /// True number of nonzeros; defaults to `k`.
    pub k_true: Option<usize>,
    /// Mismatch scenario: true nonzero counts to sweep.
    pub k_true_sweep: Vec<usize>,
    /// Distributed scenario: number of signals.
    pub n: usize,
    /// Distributed scenario: joint sparsity; defaults to `Overall { k }`.
    pub joint: Option<JointSparsityModel>,
    pub rates: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub decoders: Vec<DecoderKind>,
    pub epsilon: EpsilonPolicy,
    pub epsilon_value: f64,
    pub baselines: BaselineToggles,
    pub noise: Option<NoiseModel>,
    pub noise_injection: NoiseInjection,
    pub topology: Option<TopologyRef>,
    /// Fragmented scenario: number of groups.
    pub fragments: usize,
    pub placement: SupportPlacement,
    pub quantizer: QuantizerSupport,
    /// Upper limit on `l`.
    pub max_levels: usize,
    pub search: SearchConfig,
    pub cs: CsSweep,
    pub execution: Execution,
    /// Record wall-clock time per row; off keeps output byte-reproducible.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Single,
            t: 100,
            k: 3,
            k_true: None,
            k_true_sweep: (1..=6).collect(),
            n: 10,
            joint: None,
            rates: vec![0.5, 1.0],
            trials: 100,
            seed: 0,
            decoders: vec![DecoderKind::Ml],
            epsilon: EpsilonPolicy::AutoGrid,
            epsilon_value: 1.0,
            baselines: BaselineToggles::default(),
            noise: None,
            noise_injection: NoiseInjection::Final,
            topology: None,
            fragments: 1,
            placement: SupportPlacement::Uniform,
            quantizer: QuantizerSupport::GaussianLoaded,
            max_levels: 4096,
            search: SearchConfig::default(),
            cs: CsSweep::default(),
            execution: Execution::Parallel,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn k_true(&self) -> usize {
        self.k_true.unwrap_or(self.k)
    }

    pub fn joint_model(&self) -> JointSparsityModel {
        self.joint.unwrap_or(JointSparsityModel::Overall { k: self.k })
    }

    /// Samples covered by one register.
    pub fn total_samples(&self) -> usize {
        match self.scenario {
            Scenario::Distributed => self.n * self.t,
            _ => self.t,
        }
    }

    /// Rejects malformed configurations (`InvalidParameter`) and parameter
    /// combinations that cannot be realized (`Infeasible`).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.k == 0 {
            return bad("design k must be at least 1".into());
        }
        if self.t == 0 {
            return bad("T must be at least 1".into());
        }
        if self.rates.is_empty() {
            return bad("rate grid is empty".into());
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("rates must be positive".into());
        }
        if self.rates.windows(2).any(|w| w[1] <= w[0]) {
            return bad("rate grid must be strictly increasing".into());
        }
        if self.max_levels < 2 {
            return bad("max_levels must be at least 2".into());
        }
        if self.epsilon_value.is_nan() || self.epsilon_value <= 0.0 {
            return bad("epsilon_value must be positive".into());
        }
        if self.decoders.is_empty() && !self.baselines.any() {
            return bad("nothing to run: no decoders and no baselines".into());
        }
        if let Some(n) = self.noise {
            NoiseModel::new(n.q, n.u)?;
        }
        match self.scenario {
            Scenario::Noisy => {
                if self.noise.is_none() {
                    return bad("noisy scenario needs a noise model".into());
                }
                if self.decoders.contains(&DecoderKind::Coma) {
                    return bad("the column-matching decoder has no noisy variant".into());
                }
            }
            Scenario::Distributed => {
                if self.n == 0 {
                    return bad("distributed scenario needs n >= 1".into());
                }
            }
            Scenario::Fragmented => {
                if self.fragments == 0 || self.fragments > self.t {
                    return bad(format!("cannot split T = {} into {} groups", self.t, self.fragments));
                }
            }
            Scenario::Mismatch => {
                if self.k_true_sweep.is_empty() {
                    return bad("mismatch scenario needs k_true_sweep".into());
                }
            }
            Scenario::Single => {}
        }
        let total = self.total_samples();
        let ks: Vec<usize> = match self.scenario {
            Scenario::Mismatch => self.k_true_sweep.clone(),
            Scenario::Distributed => vec![self.joint_model().k()],
            _ => vec![self.k_true()],
        };
        if let Some(&k) = ks.iter().find(|&&k| k > total) {
            return Err(Error::Infeasible(format!("{k} nonzeros do not fit in {total} samples")));
        }
        if self.k > total {
            return Err(Error::Infeasible(format!(
                "design k = {} exceeds {total} samples",
                self.k
            )));
        }
        if self.placement == SupportPlacement::Even
            && self.scenario != Scenario::Distributed
            && (self.fragments == 0 || self.fragments > self.t)
        {
            return bad(format!("cannot split T = {} into {} groups", self.t, self.fragments));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_parse() {
        let cfg = ExperimentConfig::from_json(r#"{"T": 50, "k": 2, "rates": [0.5, 0.7], "trials": 3}"#).unwrap();
        assert_eq!(cfg.t, 50);
        assert_eq!(cfg.decoders, vec![DecoderKind::Ml]);
        assert_eq!(cfg.epsilon, EpsilonPolicy::AutoGrid);
        let cfg = ExperimentConfig::from_json(
            r#"{"scenario": "noisy", "noise": {"q": 0.1, "u": 0.1}, "epsilon": "fixed",
                "quantizer": {"kind": "fixed", "lo": -2, "hi": 2}}"#,
        )
        .unwrap();
        assert_eq!(cfg.noise, Some(NoiseModel { q: 0.1, u: 0.1 }));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"trials": 0}"#,
            r#"{"rates": [1.0, 0.5]}"#,
            r#"{"k": 0}"#,
            r#"{"scenario": "noisy"}"#,
            r#"{"bogus": 1}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(text), Err(Error::InvalidParameter(_))),
                "{text}"
            );
        }
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"T": 4, "k": 2, "k_true": 5}"#),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn epsilon_grids() {
        assert_eq!(EpsilonPolicy::Fixed.values(0.7), vec![0.7]);
        let fine = EpsilonPolicy::FineSearch.values(1.0);
        assert_eq!(fine.len(), 16);
        assert!((fine[15] - 2.0).abs() < 1e-12);
        assert!((AUTO_GRID[1] - 0.9667).abs() < 1e-4);
    }
}
