//! Monte Carlo experiments: rate sweeps of the codec and the baselines,
//! with CSV and SVG output.
//!
//! Every random draw is keyed by the configuration seed and the trial index,
//! so a configuration produces the same table regardless of thread count.
//! Per-sample MSE is reported in `mse_mean`; `mse_total` scales it by the
//! number of samples sharing one register (`T`, or `n·T` for ensembles).

mod config;
mod emit;
mod sweep;

pub use config::{
    BaselineToggles, CsSweep, DecoderKind, EpsilonPolicy, ExperimentConfig, QuantizerSupport, Scenario, SearchConfig,
    SupportPlacement, TopologyRef, AUTO_GRID,
};
pub use emit::{read_csv, svg_chart, to_csv, write_csv, write_svg, OutputFormat, CSV_HEADER};
pub use sweep::{run_sweep, run_sweep_in, Row};
