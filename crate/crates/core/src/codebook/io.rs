//! Binary codebook files and their JSON sidecar.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SQTS" | version u16 | T u32 | l u32 | k u32 | b u32 | seed u64 | T·l codewords
//! ```
//!
//! Codewords are bin-major, each `⌈b/8⌉` bytes with little-endian bit order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Codebook;
use crate::bits::{bytes_to_words, words_to_bytes};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SQTS";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 4 + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookHeader {
    pub magic: String,
    pub version: u16,
    #[serde(rename = "T")]
    pub bins: u32,
    pub l: u32,
    pub k: u32,
    pub b: u32,
    pub seed: u64,
}

impl CodebookHeader {
    pub fn of(cb: &Codebook) -> Self {
        Self {
            magic: String::from_utf8_lossy(MAGIC).into_owned(),
            version: FORMAT_VERSION,
            bins: cb.bins() as u32,
            l: cb.levels() as u32,
            k: cb.sparsity() as u32,
            b: cb.bits() as u32,
            seed: cb.seed(),
        }
    }
}

impl Codebook {
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.bits().div_ceil(8);
        let mut out = Vec::with_capacity(HEADER_LEN + self.stored() * nbytes);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for v in [self.bins(), self.levels(), self.sparsity(), self.bits()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.seed().to_le_bytes());
        for s in 0..self.stored() {
            out.extend_from_slice(&words_to_bytes(self.slot_words(s), self.bits()));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, not a codebook file".into()));
        }
        let version = u16::from_le_bytes(take(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported codebook version {version}")));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = u32::from_le_bytes(take(&mut r)?) as usize;
        }
        let [bins, levels, sparsity, bits] = dims;
        let seed = u64::from_le_bytes(take(&mut r)?);
        if bins == 0 || levels == 0 || sparsity == 0 || bits == 0 {
            return Err(Error::Format("codebook header has a zero dimension".into()));
        }
        let nbytes = bits.div_ceil(8);
        let expected = bins
            .checked_mul(levels)
            .and_then(|n| n.checked_mul(nbytes))
            .ok_or_else(|| Error::Format("codebook dimensions overflow".into()))?;
        if r.len() != expected {
            return Err(Error::Format(format!(
                "codebook body is {} bytes, header implies {expected}",
                r.len()
            )));
        }
        let mut words = Vec::with_capacity(bins * levels * bits.div_ceil(64));
        for chunk in r.chunks_exact(nbytes) {
            let w = bytes_to_words(chunk, bits);
            if bits % 8 != 0 {
                let last = chunk[nbytes - 1];
                if last >> (bits % 8) != 0 {
                    return Err(Error::Format("padding bits set in codeword".into()));
                }
            }
            words.extend(w);
        }
        Ok(Codebook::from_raw(bins, levels, sparsity, bits, seed, words))
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format("truncated codebook header".into()))
}

fn take<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

/// Writes `<path>` (binary) and `<path>.json` (header sidecar).
pub fn write_codebook(cb: &Codebook, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&cb.to_bytes()).map_err(|e| Error::io(path, e))?;
    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(&CodebookHeader::of(cb))?;
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

pub fn read_codebook(path: &Path) -> Result<Codebook> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Codebook::from_bytes(&bytes)
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}
