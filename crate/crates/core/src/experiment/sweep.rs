use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{DecoderKind, ExperimentConfig, Scenario, SupportPlacement};
use crate::baselines::{direct_quantize, CompressQuantize, DirectQuantizer, QihtOptions, Recovery};
use crate::channel::encode_noisy;
use crate::codebook::{bits_for_rate, level_budget, noisy_length_factor, Codebook, CodebookParams, Slot};
use crate::codec::{
    decode_coma, decode_ml, encode, true_support, DecodeResult, FragmentCodec, FragmentDecoder, FragmentPlan,
    MlOptions, Outcome, Register,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::{encode_distributed, gen_joint_sparse, DistributedCodebook, NetworkGraph, Topology};
use crate::quantizer::{MseEstimate, Reproduction, ScalarQuantizer};
use crate::rng;
use crate::signal::{mse, GaussianSparse, SignalSampler};

const SIGNAL: u64 = 1;
const NOISE: u64 = 2;
const CODEBOOK: u64 = 3;
const COMA: u64 = 4;
const HELDOUT: u64 = 5;
const SENSING: u64 = 6;

/// One line of the result table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    #[serde(rename = "R")]
    pub rate: f64,
    pub decoder: String,
    pub epsilon: Option<f64>,
    pub l: usize,
    pub b: usize,
    /// Per-sample MSE averaged over trials.
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub support_error_rate: f64,
    pub wall_ms: u64,
    /// `mse_mean` times the number of samples per register.
    pub mse_total: f64,
    /// `;`-separated notes such as `budget=3` or `levels-capped`.
    pub flags: String,
}

#[derive(Default)]
struct Tally {
    mse: Vec<f64>,
    support_errors: usize,
    budget: usize,
    fallbacks: usize,
    diverged: usize,
}

impl Tally {
    fn push(&mut self, t: TrialOut) {
        self.mse.push(t.mse);
        self.support_errors += t.support_error as usize;
        self.budget += t.budget as usize;
        self.fallbacks += t.fallback as usize;
        self.diverged += t.diverged as usize;
    }

    fn estimate(&self) -> MseEstimate {
        MseEstimate::from_samples(&self.mse)
    }

    fn flags(&self, extra: &[String]) -> String {
        let mut f: Vec<String> = Vec::new();
        if self.budget > 0 {
            f.push(format!("budget={}", self.budget));
        }
        if self.fallbacks > 0 {
            f.push(format!("fallback={}", self.fallbacks));
        }
        if self.diverged > 0 {
            f.push(format!("diverged={}", self.diverged));
        }
        f.extend(extra.iter().cloned());
        f.join(";")
    }
}

#[derive(Clone, Copy, Default)]
struct TrialOut {
    mse: f64,
    support_error: bool,
    budget: bool,
    fallback: bool,
    diverged: bool,
}

struct Sweep<'a> {
    cfg: &'a ExperimentConfig,
    graph: Option<(NetworkGraph, Vec<usize>)>,
}

/// Runs every rate point, decoder and enabled baseline of `cfg`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    run_sweep_in(cfg, None)
}

/// Like [`run_sweep`], resolving a topology path relative to `base`.
pub fn run_sweep_in(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<Vec<Row>> {
    cfg.validate()?;
    let graph = match (&cfg.scenario, &cfg.topology) {
        (Scenario::Distributed, Some(t)) => {
            let Topology { graph, failures } = t.load(base)?;
            if graph.encoder_count() != cfg.n {
                return Err(Error::InvalidParameter(format!(
                    "topology has {} encoders, config has n = {}",
                    graph.encoder_count(),
                    cfg.n
                )));
            }
            Some((graph, failures))
        }
        (Scenario::Distributed, None) => Some((NetworkGraph::single_hop(cfg.n), Vec::new())),
        _ => None,
    };
    let sweep = Sweep { cfg, graph };
    let ks: Vec<usize> = match cfg.scenario {
        Scenario::Mismatch => cfg.k_true_sweep.clone(),
        _ => vec![cfg.k_true()],
    };
    let mut rows = Vec::new();
    for &k_true in &ks {
        for (ri, &rate) in cfg.rates.iter().enumerate() {
            for &dec in &cfg.decoders {
                rows.push(sweep.squats_row(ri, rate, dec, k_true)?);
            }
            rows.extend(sweep.baseline_rows(ri, rate, k_true)?);
        }
    }
    let total = cfg.total_samples();
    for row in &rows {
        assert!(
            row.b <= bits_for_rate(row.rate, total),
            "{} at R = {} used {} bits, budget {}",
            row.decoder,
            row.rate,
            row.b,
            bits_for_rate(row.rate, total)
        );
    }
    Ok(rows)
}

fn nonzero_gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = rng.sample(StandardNormal);
        if v != 0.0 {
            return v;
        }
    }
}

fn resolve_budget(err: Error, bins: usize, qz: &ScalarQuantizer) -> Result<DecodeResult> {
    match err {
        Error::BudgetExceeded { partial, .. } => Ok(DecodeResult::from_support(
            partial.support,
            bins,
            qz,
            partial.outcome,
            partial.candidates_examined,
        )),
        e => Err(e),
    }
}

/// Decodes `reg`, turning a budget overrun into its partial result.
fn decode(
    dec: DecoderKind,
    reg: &Register,
    cb: &Codebook,
    qz: &ScalarQuantizer,
    opts: &MlOptions,
    coma_path: &[u64],
    seed: u64,
) -> Result<(DecodeResult, bool)> {
    match dec {
        DecoderKind::Ml => match decode_ml(reg, cb, qz, opts) {
            Ok(r) => Ok((r, false)),
            Err(e) => resolve_budget(e, cb.bins(), qz).map(|r| (r, true)),
        },
        DecoderKind::Coma => {
            let mut r = rng::stream(seed, coma_path);
            Ok((decode_coma(reg, cb, qz, &mut r)?, false))
        }
    }
}

fn support_of(x: &[f64]) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i] != 0.0).collect()
}

impl Sweep<'_> {
    fn scenario_label(&self, k_true: usize) -> String {
        match self.cfg.scenario {
            Scenario::Single => "single".into(),
            Scenario::Noisy => "noisy".into(),
            Scenario::Distributed => "distributed".into(),
            Scenario::Fragmented => "fragmented".into(),
            Scenario::Mismatch => format!("mismatch-k{k_true}"),
        }
    }

    fn exec(&self) -> Execution {
        self.cfg.execution
    }

    /// The test signal of `trial`, concatenated for ensembles.
    fn signal(&self, trial: usize, k_true: usize) -> Result<Vec<f64>> {
        self.signal_from(self.cfg.seed, trial, k_true)
    }

    /// Signals used only to tune baseline hyperparameters.
    fn heldout_signal(&self, trial: usize, k_true: usize) -> Result<Vec<f64>> {
        self.signal_from(rng::derive_seed(self.cfg.seed, &[HELDOUT]), trial, k_true)
    }

    fn signal_from(&self, seed: u64, trial: usize, k_true: usize) -> Result<Vec<f64>> {
        let cfg = self.cfg;
        let path = [SIGNAL, k_true as u64, trial as u64];
        match (cfg.scenario, cfg.placement) {
            (Scenario::Distributed, _) => {
                let ens = gen_joint_sparse(cfg.n, cfg.t, cfg.joint_model(), rng::derive_seed(seed, &path))?;
                Ok(ens.into_iter().flat_map(|s| s.into_values()).collect())
            }
            (_, SupportPlacement::Even) => {
                let mut r = rng::stream(seed, &path);
                let groups = cfg.fragments;
                let glen = cfg.t.div_ceil(groups);
                let mut s = vec![0.0; cfg.t];
                for g in 0..groups {
                    let start = g * glen;
                    let len = glen.min(cfg.t.saturating_sub(start));
                    let share = k_true / groups + usize::from(g < k_true % groups);
                    if share > len {
                        return Err(Error::Infeasible(format!("group {g} cannot hold {share} nonzeros")));
                    }
                    let mut idx = sample(&mut r, len, share).into_vec();
                    idx.sort_unstable();
                    for i in idx {
                        s[start + i] = nonzero_gaussian(&mut r);
                    }
                }
                Ok(s)
            }
            _ => {
                let mut r = rng::stream(seed, &path);
                Ok(GaussianSparse::new(cfg.t, k_true).sample(&mut r).into_values())
            }
        }
    }

    fn squats_row(&self, ri: usize, rate: f64, dec: DecoderKind, k_true: usize) -> Result<Row> {
        let cfg = self.cfg;
        let started = Instant::now();
        let total = cfg.total_samples();
        let b = bits_for_rate(rate, total);
        let level_rate = match (cfg.scenario, cfg.noise) {
            (Scenario::Noisy, Some(n)) => rate / noisy_length_factor(n.q, n.u)?,
            _ => rate,
        };
        let mut best: Option<(f64, usize, bool, Tally)> = None;
        for (ei, eps) in cfg.epsilon.values(cfg.epsilon_value).into_iter().enumerate() {
            let raw = level_budget(total, cfg.k, level_rate, eps);
            let l = raw.min(cfg.max_levels);
            let tally = self.squats_point(ri, ei, l, b, dec, k_true)?;
            let m = tally.estimate().mean;
            if best.as_ref().is_none_or(|(_, _, _, t)| m < t.estimate().mean) {
                best = Some((eps, l, raw > l, tally));
            }
        }
        let (eps, l, capped, tally) = best.expect("epsilon policy yields at least one value");
        let est = tally.estimate();
        let extra: Vec<String> = if capped {
            vec!["levels-capped".into()]
        } else {
            Vec::new()
        };
        let used = match cfg.scenario {
            Scenario::Fragmented => cfg.fragments * (b / cfg.fragments),
            _ => b,
        };
        Ok(Row {
            scenario: self.scenario_label(k_true),
            rate,
            decoder: dec.label().into(),
            epsilon: Some(eps),
            l,
            b: used,
            mse_mean: est.mean,
            mse_stderr: est.stderr,
            support_error_rate: tally.support_errors as f64 / cfg.trials as f64,
            wall_ms: self.elapsed(started),
            mse_total: est.mean * total as f64,
            flags: tally.flags(&extra),
        })
    }

    fn elapsed(&self, started: Instant) -> u64 {
        if self.cfg.timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        }
    }

    fn squats_point(&self, ri: usize, ei: usize, l: usize, b: usize, dec: DecoderKind, k_true: usize) -> Result<Tally> {
        let cfg = self.cfg;
        let qz = cfg.quantizer.build(l)?;
        let cb_seed = rng::derive_seed(cfg.seed, &[CODEBOOK, ri as u64, ei as u64]);
        let coma_path = |trial: usize| [COMA, ri as u64, ei as u64, trial as u64];
        let outs: Vec<Result<TrialOut>> = match cfg.scenario {
            Scenario::Fragmented => {
                let plan = FragmentPlan {
                    groups: cfg.fragments,
                    levels: l,
                    sparsity: cfg.k,
                    bits_per_group: b / cfg.fragments,
                    seed: cb_seed,
                    decoder: match dec {
                        DecoderKind::Ml => FragmentDecoder::Ml,
                        DecoderKind::Coma => FragmentDecoder::Coma,
                    },
                };
                if plan.bits_per_group == 0 {
                    return Err(Error::Infeasible(format!(
                        "{b} bits cannot be split over {} groups",
                        cfg.fragments
                    )));
                }
                let codec = FragmentCodec::new(plan, cfg.t, self.exec())?;
                let opts = cfg.search.options(cfg.k, None);
                self.exec().map(cfg.trials, |trial| {
                    let s = self.signal(trial, k_true)?;
                    let mut r = rng::stream(cfg.seed, &coma_path(trial));
                    let out = codec.run(&s, &qz, &opts, &mut r)?;
                    Ok(TrialOut {
                        mse: mse(&s, &out.result.signal),
                        support_error: out.result.support != true_support(&s, &qz),
                        budget: out.budget_exceeded > 0,
                        fallback: out.fallbacks > 0,
                        diverged: false,
                    })
                })
            }
            Scenario::Distributed => {
                let model = cfg.joint_model();
                let dcb = DistributedCodebook::generate(cfg.n, cfg.t, l, model.k(), b, cb_seed, self.exec())?;
                let (graph, failures) = self.graph.as_ref().expect("distributed scenario has a graph");
                let opts = cfg.search.options(model.k(), None);
                self.exec().map(cfg.trials, |trial| {
                    let flat = self.signal(trial, k_true)?;
                    let parts: Vec<&[f64]> = flat.chunks(cfg.t).collect();
                    let regs = encode_distributed(&parts, &dcb, &qz)?;
                    let y = graph.simulate(&regs, failures)?;
                    let (out, budget) = decode(dec, &y, dcb.base(), &qz, &opts, &coma_path(trial), cfg.seed)?;
                    Ok(self.score(&flat, &qz, &out, budget))
                })
            }
            _ => {
                let cb = Codebook::generate_with(CodebookParams::new(cfg.t, l, cfg.k, b, cb_seed), self.exec())?;
                let noise = if cfg.scenario == Scenario::Noisy {
                    cfg.noise
                } else {
                    None
                };
                let opts = cfg.search.options(cfg.k, noise);
                self.exec().map(cfg.trials, |trial| {
                    let s = self.signal(trial, k_true)?;
                    let reg = match noise {
                        Some(n) => {
                            let mut r = rng::stream(cfg.seed, &[NOISE, ri as u64, trial as u64]);
                            encode_noisy(&s, &cb, &qz, n, cfg.noise_injection, &mut r)?
                        }
                        None => encode(&s, &cb, &qz)?,
                    };
                    let (out, budget) = decode(dec, &reg, &cb, &qz, &opts, &coma_path(trial), cfg.seed)?;
                    Ok(self.score(&s, &qz, &out, budget))
                })
            }
        };
        let mut tally = Tally::default();
        for o in outs {
            tally.push(o?);
        }
        Ok(tally)
    }

    fn score(&self, s: &[f64], qz: &ScalarQuantizer, out: &DecodeResult, budget: bool) -> TrialOut {
        let truth: Vec<Slot> = true_support(s, qz);
        TrialOut {
            mse: mse(s, &out.signal),
            support_error: out.support != truth,
            budget,
            fallback: matches!(out.outcome, Outcome::Fallback { .. }),
            diverged: false,
        }
    }

    fn baseline_rows(&self, ri: usize, rate: f64, k_true: usize) -> Result<Vec<Row>> {
        let cfg = self.cfg;
        let mut rows = Vec::new();
        let total = cfg.total_samples();
        if cfg.baselines.direct && rate >= 1.0 {
            let started = Instant::now();
            let dq = DirectQuantizer::new(rate, Reproduction::GaussianCentroid)?;
            let outs: Vec<Result<TrialOut>> = self.exec().map(cfg.trials, |trial| {
                let s = self.signal(trial, k_true)?;
                let x = direct_quantize(&s, rate)?;
                Ok(TrialOut {
                    mse: mse(&s, &x),
                    support_error: support_of(&x) != support_of(&s),
                    ..TrialOut::default()
                })
            });
            let mut tally = Tally::default();
            for o in outs {
                tally.push(o?);
            }
            rows.push(self.baseline_row(
                k_true,
                rate,
                "direct",
                dq.cells().cells(),
                dq.bits_per_sample() * total,
                &tally,
                &[],
                started,
            ));
        }
        if cfg.baselines.qiht || cfg.baselines.fista {
            rows.extend(self.cs_rows(ri, rate, k_true)?);
        }
        Ok(rows)
    }

    #[allow(clippy::too_many_arguments)]
    fn baseline_row(
        &self,
        k_true: usize,
        rate: f64,
        name: &str,
        l: usize,
        b: usize,
        tally: &Tally,
        extra: &[String],
        started: Instant,
    ) -> Row {
        let est = tally.estimate();
        Row {
            scenario: self.scenario_label(k_true),
            rate,
            decoder: name.into(),
            epsilon: None,
            l,
            b,
            mse_mean: est.mean,
            mse_stderr: est.stderr,
            support_error_rate: tally.support_errors as f64 / self.cfg.trials as f64,
            wall_ms: self.elapsed(started),
            mse_total: est.mean * self.cfg.total_samples() as f64,
            flags: tally.flags(extra),
        }
    }

    /// Measurement counts to try: multiples of `k` that fit the budget, or
    /// one bit per measurement when none does.
    fn measurement_grid(&self, b: usize) -> Vec<usize> {
        let cfg = self.cfg;
        let n = if cfg.scenario == Scenario::Distributed {
            cfg.n
        } else {
            1
        };
        let k = cfg.k;
        let grid: Vec<usize> = cfg
            .cs
            .multipliers
            .iter()
            .map(|&c| c * k)
            .filter(|&m| m >= 1 && n * m <= b)
            .collect();
        if grid.is_empty() {
            vec![(b / n).max(1)]
        } else {
            grid
        }
    }

    fn cs_system(&self, ri: usize, m: usize, b: usize) -> Result<CompressQuantize> {
        let cfg = self.cfg;
        let scale = (cfg.k as f64).sqrt();
        let seed = rng::derive_seed(cfg.seed, &[SENSING, ri as u64, m as u64]);
        if cfg.scenario == Scenario::Distributed {
            CompressQuantize::block_diagonal(cfg.n, cfg.t, m, b, scale, seed)
        } else {
            CompressQuantize::new(cfg.t, m, b, scale, seed)
        }
    }

    fn cs_rows(&self, ri: usize, rate: f64, k_true: usize) -> Result<Vec<Row>> {
        let cfg = self.cfg;
        let b = bits_for_rate(rate, cfg.total_samples());
        let k = if cfg.scenario == Scenario::Distributed {
            cfg.joint_model().k()
        } else {
            cfg.k
        };
        let mut best_qiht: Option<(usize, CompressQuantize, Tally)> = None;
        let mut best_fista: Option<(usize, CompressQuantize, f64, Tally)> = None;
        let started = Instant::now();
        for m in self.measurement_grid(b) {
            let sys = match self.cs_system(ri, m, b) {
                Ok(s) => s,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => return Err(e),
            };
            if cfg.baselines.qiht {
                let opts = QihtOptions {
                    iters: cfg.cs.qiht_iters,
                    step: None,
                };
                let tally = self.cs_trials(cfg.trials, k_true, false, &sys, |cells| {
                    sys.recover_qiht(cells, k, &opts)
                })?;
                if best_qiht
                    .as_ref()
                    .is_none_or(|(_, _, t)| tally.estimate().mean < t.estimate().mean)
                {
                    best_qiht = Some((m, sys.clone(), tally));
                }
            }
            if cfg.baselines.fista {
                let mut pick: Option<(f64, f64)> = None;
                for &factor in &cfg.cs.lambda_factors {
                    let held = self.cs_trials(cfg.cs.lambda_trials.max(1), k_true, true, &sys, |cells| {
                        sys.recover_fista(cells, factor, cfg.cs.fista_iters)
                    })?;
                    let m = held.estimate().mean;
                    if pick.is_none_or(|(_, best)| m < best) {
                        pick = Some((factor, m));
                    }
                }
                let Some((factor, _)) = pick else {
                    return Err(Error::InvalidParameter("empty lambda grid".into()));
                };
                let tally = self.cs_trials(cfg.trials, k_true, false, &sys, |cells| {
                    sys.recover_fista(cells, factor, cfg.cs.fista_iters)
                })?;
                if best_fista
                    .as_ref()
                    .is_none_or(|(_, _, _, t)| tally.estimate().mean < t.estimate().mean)
                {
                    best_fista = Some((m, sys.clone(), factor, tally));
                }
            }
        }
        let mut rows = Vec::new();
        if let Some((m, sys, tally)) = best_qiht {
            rows.push(self.baseline_row(
                k_true,
                rate,
                "qiht",
                sys.quantizer().cells(),
                sys.bits_used(),
                &tally,
                &[format!("m={m}")],
                started,
            ));
        }
        if let Some((m, sys, factor, tally)) = best_fista {
            rows.push(self.baseline_row(
                k_true,
                rate,
                "fista",
                sys.quantizer().cells(),
                sys.bits_used(),
                &tally,
                &[format!("m={m}"), format!("lambda={factor}")],
                started,
            ));
        }
        Ok(rows)
    }

    /// Runs a recovery over `trials` main or held-out signals.
    fn cs_trials<F>(
        &self,
        trials: usize,
        k_true: usize,
        heldout: bool,
        sys: &CompressQuantize,
        recover: F,
    ) -> Result<Tally>
    where
        F: Fn(&[usize]) -> Result<Recovery> + Sync + Send,
    {
        let outs: Vec<Result<TrialOut>> = self.exec().map(trials, |trial| {
            let s = if heldout {
                self.heldout_signal(trial, k_true)?
            } else {
                self.signal(trial, k_true)?
            };
            let cells = sys.encode(&s)?;
            let rec = recover(&cells)?;
            Ok(TrialOut {
                mse: mse(&s, &rec.x),
                support_error: support_of(&rec.x) != support_of(&s),
                diverged: rec.diverged,
                ..TrialOut::default()
            })
        });
        let mut tally = Tally::default();
        for o in outs {
            tally.push(o?);
        }
        Ok(tally)
    }
}
