use crate::error::{Error, Result};
use crate::quantizer::{Reproduction, UniformQuantizer};

/// Per-sample uniform quantizer on `[-2, 2]` with `2^⌊R⌋` cells and no
/// reserved zero level.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectQuantizer {
    cells: UniformQuantizer,
}

impl DirectQuantizer {
    pub const MAX_RATE: f64 = 24.0;

    pub fn new(rate: f64, reproduction: Reproduction) -> Result<Self> {
        if rate.is_nan() || rate < 1.0 {
            return Err(Error::Infeasible(format!(
                "direct quantization needs at least one bit per sample (R = {rate})"
            )));
        }
        if rate >= Self::MAX_RATE + 1.0 {
            return Err(Error::InvalidParameter(format!(
                "direct quantization rate {rate} above {}",
                Self::MAX_RATE
            )));
        }
        let cells = 1usize << rate.floor() as u32;
        Ok(Self {
            cells: UniformQuantizer::new(cells, -2.0, 2.0, reproduction)?,
        })
    }

    pub fn bits_per_sample(&self) -> usize {
        self.cells.cells().trailing_zeros() as usize
    }

    pub fn cells(&self) -> &UniformQuantizer {
        &self.cells
    }

    pub fn reconstruct(&self, signal: &[f64]) -> Vec<f64> {
        signal.iter().map(|&x| self.cells.quantize(x).1).collect()
    }
}

/// Quantizes every sample independently, mapping each cell to its
/// standard-normal centroid.
pub fn direct_quantize(signal: &[f64], rate: f64) -> Result<Vec<f64>> {
    Ok(DirectQuantizer::new(rate, Reproduction::GaussianCentroid)?.reconstruct(signal))
}
