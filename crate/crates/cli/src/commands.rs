use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use squats::codebook::{
    bits_for_rate, read_codebook, sufficient_rate_distributed, sufficient_rate_ml, write_codebook, Codebook,
    CodebookHeader, CodebookParams, JointSparsityModel, Slot,
};
use squats::codec::{decode_coma, decode_ml, true_support, Outcome};
use squats::experiment::{
    run_sweep_in, write_csv, write_svg, DecoderKind, ExperimentConfig, OutputFormat, QuantizerSupport, SearchConfig,
    TopologyRef,
};
use squats::network::{encode_distributed, gen_joint_sparse, split_ensemble, DistributedCodebook, NetworkGraph};
use squats::{apply_noise, gen_signal, mse, rng, DecodeResult, NoiseModel, Register};

use crate::failure::Failure;
use crate::Common;

const DEFAULT_SEED: u64 = 1;

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn config_dir(c: &Common) -> PathBuf {
    c.config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn resolve(c: &Common, p: &str) -> PathBuf {
    config_dir(c).join(p)
}

fn out_file(c: &Common, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&c.out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", c.out.display())))?;
    Ok(c.out.join(name))
}

fn write_json(c: &Common, name: &str, value: &serde_json::Value) -> Result<PathBuf, Failure> {
    let path = out_file(c, name)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn format_of(c: &Common) -> Result<OutputFormat, Failure> {
    c.format
        .parse::<OutputFormat>()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn require_csv(c: &Common) -> Result<(), Failure> {
    match format_of(c)? {
        OutputFormat::Csv => Ok(()),
        OutputFormat::Svg => Err(Failure::Config("--format svg is only available for bench".into())),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookConfig {
    #[serde(rename = "T")]
    t: usize,
    l: usize,
    k: usize,
    /// Codeword length. When absent, derived from `rate` or from the
    /// sufficient ML rate at `epsilon`.
    b: Option<usize>,
    rate: Option<f64>,
    #[serde(default = "one")]
    epsilon: f64,
    seed: Option<u64>,
    #[serde(default)]
    reject_duplicates: bool,
}

fn one() -> f64 {
    1.0
}

pub fn gen_codebook(c: &Common) -> Result<(), Failure> {
    require_csv(c)?;
    let cfg: CodebookConfig = read_config(&c.config)?;
    let bits = match (cfg.b, cfg.rate) {
        (Some(b), _) => b,
        (None, Some(r)) => bits_for_rate(r, cfg.t),
        (None, None) => bits_for_rate(sufficient_rate_ml(cfg.t, cfg.k, cfg.l, cfg.epsilon)?, cfg.t),
    };
    let seed = c.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let params = CodebookParams::new(cfg.t, cfg.l, cfg.k, bits, seed).reject_duplicates(cfg.reject_duplicates);
    let cb = Codebook::generate(params)?;
    let path = out_file(c, "codebook.sqc")?;
    write_codebook(&cb, &path)?;
    let header = CodebookHeader::of(&cb);
    write_json(
        c,
        "codebook.json",
        &serde_json::to_value(header).map_err(|e| Failure::Runtime(e.to_string()))?,
    )?;
    println!(
        "{}: T={} l={} k={} b={} seed={seed}",
        path.display(),
        cfg.t,
        cfg.l,
        cfg.k,
        bits
    );
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SignalSource {
    Values(Vec<f64>),
    Random { k_true: usize },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodeConfig {
    codebook: String,
    signal: SignalSource,
    #[serde(default)]
    quantizer: QuantizerSupport,
    noise: Option<NoiseModel>,
    seed: Option<u64>,
}

pub fn encode(c: &Common) -> Result<(), Failure> {
    require_csv(c)?;
    let cfg: EncodeConfig = read_config(&c.config)?;
    let cb = read_codebook(&resolve(c, &cfg.codebook))?;
    let seed = c.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let signal = match cfg.signal {
        SignalSource::Values(v) => v,
        SignalSource::Random { k_true } => gen_signal(cb.bins(), k_true, rng::derive_seed(seed, &[1]))?.into_values(),
    };
    let qz = cfg.quantizer.build(cb.levels())?;
    let mut reg = squats::encode(&signal, &cb, &qz)?;
    if let Some(noise) = cfg.noise {
        reg = apply_noise(&reg, noise, &mut rng::stream(seed, &[2]));
    }
    let bytes = reg.to_bytes();
    let path = out_file(c, "register.bin")?;
    fs::write(&path, &bytes).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    write_json(
        c,
        "encode.json",
        &json!({
            "bits": reg.bits(),
            "register": hex(&bytes),
            "signal": signal,
            "support": true_support(&signal, &qz),
        }),
    )?;
    println!("{}: {} bits", path.display(), reg.bits());
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecodeConfig {
    codebook: String,
    register: String,
    #[serde(default)]
    decoder: DecoderKind,
    k: Option<usize>,
    #[serde(default)]
    quantizer: QuantizerSupport,
    noise: Option<NoiseModel>,
    #[serde(default)]
    search: SearchConfig,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct DecodeReport<'a> {
    signal: &'a [f64],
    support: &'a [Slot],
    outcome: Outcome,
    candidates_examined: u64,
    budget_exceeded: bool,
}

pub fn decode(c: &Common) -> Result<(), Failure> {
    require_csv(c)?;
    let cfg: DecodeConfig = read_config(&c.config)?;
    let cb = read_codebook(&resolve(c, &cfg.codebook))?;
    let reg_path = resolve(c, &cfg.register);
    let bytes = fs::read(&reg_path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", reg_path.display())))?;
    let reg = Register::from_bytes(&bytes, cb.bits())?;
    let qz = cfg.quantizer.build(cb.levels())?;
    let seed = c.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let k = cfg.k.unwrap_or(cb.sparsity());

    let (result, budget): (DecodeResult, Option<squats::Error>) = match cfg.decoder {
        DecoderKind::Coma => (decode_coma(&reg, &cb, &qz, &mut rng::stream(seed, &[4]))?, None),
        DecoderKind::Ml => match decode_ml(&reg, &cb, &qz, &cfg.search.options(k, cfg.noise)) {
            Ok(r) => (r, None),
            Err(squats::Error::BudgetExceeded { budget, partial }) => (
                *partial.clone(),
                Some(squats::Error::BudgetExceeded { budget, partial }),
            ),
            Err(e) => return Err(e.into()),
        },
    };
    let report = DecodeReport {
        signal: &result.signal,
        support: &result.support,
        outcome: result.outcome,
        candidates_examined: result.candidates_examined,
        budget_exceeded: budget.is_some(),
    };
    let path = write_json(
        c,
        "decoded.json",
        &serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.to_string()))?,
    )?;
    println!("{}: {} nonzeros", path.display(), result.support.len());
    match budget {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn bench(c: &Common) -> Result<(), Failure> {
    let format = format_of(c)?;
    let text = fs::read_to_string(&c.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", c.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let rows = run_sweep_in(&cfg, Some(&config_dir(c)))?;
    let path = match format {
        OutputFormat::Csv => {
            let p = out_file(c, "results.csv")?;
            write_csv(&rows, &p)?;
            p
        }
        OutputFormat::Svg => {
            let p = out_file(c, "results.svg")?;
            write_svg(&rows, &p)?;
            p
        }
    };
    println!(
        "{}: {} rows, {} threads",
        path.display(),
        rows.len(),
        rayon::current_num_threads()
    );
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetSimConfig {
    topology: Option<TopologyRef>,
    /// Encoder count when no topology is given (single hop).
    n: Option<usize>,
    #[serde(rename = "T")]
    t: usize,
    k: usize,
    #[serde(default = "four")]
    l: usize,
    b: Option<usize>,
    #[serde(default = "one")]
    epsilon: f64,
    #[serde(default = "ten")]
    trials: usize,
    #[serde(default)]
    quantizer: QuantizerSupport,
    #[serde(default)]
    search: SearchConfig,
    seed: Option<u64>,
}

fn four() -> usize {
    4
}

fn ten() -> usize {
    10
}

pub fn net_sim(c: &Common) -> Result<(), Failure> {
    require_csv(c)?;
    let cfg: NetSimConfig = read_config(&c.config)?;
    let (graph, failures) = match (&cfg.topology, cfg.n) {
        (Some(t), _) => {
            let topo = t.load(Some(&config_dir(c)))?;
            (topo.graph, topo.failures)
        }
        (None, Some(n)) => (NetworkGraph::single_hop(n), Vec::new()),
        (None, None) => return Err(Failure::Config("net-sim needs a topology or n".into())),
    };
    let n = graph.encoder_count();
    let model = JointSparsityModel::Overall { k: cfg.k };
    let bits = match cfg.b {
        Some(b) => b,
        None => bits_for_rate(
            sufficient_rate_distributed(n, cfg.t, model, cfg.l, cfg.epsilon, false)?,
            n * cfg.t,
        ),
    };
    let seed = c.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let dcb = DistributedCodebook::generate(
        n,
        cfg.t,
        cfg.l,
        cfg.k,
        bits,
        rng::derive_seed(seed, &[3]),
        Default::default(),
    )?;
    let qz = cfg.quantizer.build(cfg.l)?;
    let reach = graph.reachability(&failures)?;
    let opts = cfg.search.options(cfg.k, None);

    let path = out_file(c, "net_sim.csv")?;
    let mut out = String::from("trial,reachable,bit_exact,mse,mse_reachable\n");
    let mut exact_runs = 0;
    for trial in 0..cfg.trials {
        let ens = gen_joint_sparse(n, cfg.t, model, rng::derive_seed(seed, &[1, trial as u64]))?;
        let parts = encode_distributed(&ens, &dcb, &qz)?;
        let y = graph.simulate(&parts, &failures)?;
        let mut expect = Register::new(bits);
        for (m, part) in parts.iter().enumerate() {
            if reach[m] {
                expect.or_assign(part);
            }
        }
        let bit_exact = y == expect;
        exact_runs += usize::from(bit_exact);
        let est = match decode_ml(&y, dcb.base(), &qz, &opts) {
            Ok(r) => r,
            Err(squats::Error::BudgetExceeded { partial, .. }) => *partial,
            Err(e) => return Err(e.into()),
        };
        let per = split_ensemble(&est.signal, n);
        let total: f64 = (0..n).map(|m| mse(ens[m].values(), &per[m])).sum::<f64>() / n as f64;
        let live: Vec<usize> = (0..n).filter(|&m| reach[m]).collect();
        let live_mse = if live.is_empty() {
            0.0
        } else {
            live.iter().map(|&m| mse(ens[m].values(), &per[m])).sum::<f64>() / live.len() as f64
        };
        out.push_str(&format!("{trial},{},{bit_exact},{total:e},{live_mse:e}\n", live.len()));
    }
    fs::write(&path, out).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    println!(
        "{}: {} of {n} encoders reach the decoder, {exact_runs}/{} runs bit-exact, b={bits}",
        path.display(),
        reach.iter().filter(|&&r| r).count(),
        cfg.trials
    );
    Ok(())
}
