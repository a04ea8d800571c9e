//! Reference systems run at the same bit budget as the codec.

mod cs;
mod direct;

pub use cs::{
    fista_recover, qiht_recover, sensing_matrix, CompressQuantize, FistaOptions, QihtOptions, Recovery, Sensing,
};
pub use direct::{direct_quantize, DirectQuantizer};
