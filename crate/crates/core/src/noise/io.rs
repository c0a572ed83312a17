//! On-disk forms of a [`NoiseSampleSet`].
//!
//! Binary layout (all integers and reals little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SGNL"
//!      4     4  version (u32)
//!      8     8  coordinate count (u64)
//!     16     8  draw count (u64)
//!     24     8  batch size (u64)
//!     32     8  seed (u64)
//!     40   8*n  draws, row-major f64 (row = coordinate)
//! ```

use std::io::Write;

use super::NoiseSampleSet;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"SGNL";
pub const BINARY_VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

/// Contents of a decoded binary container.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBinary {
    pub version: u32,
    pub n_coords: usize,
    pub n_draws: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub draws: Vec<f64>,
}

pub fn encode_binary(set: &NoiseSampleSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * set.draws.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.n_coords() as u64).to_le_bytes());
    out.extend_from_slice(&(set.n_draws as u64).to_le_bytes());
    out.extend_from_slice(&(set.batch_size as u64).to_le_bytes());
    out.extend_from_slice(&set.seed.to_le_bytes());
    for x in &set.draws {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn read_u64(bytes: &[u8], at: usize) -> Result<u64> {
    bytes
        .get(at..at + 8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .ok_or(Error::Parse {
            offset: bytes.len(),
            reason: "truncated header".into(),
        })
}

pub fn decode_binary(bytes: &[u8]) -> Result<NoiseBinary> {
    if bytes.len() < 4 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            reason: "missing SGNL magic".into(),
        });
    }
    let version = bytes
        .get(4..8)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or(Error::Parse {
            offset: bytes.len(),
            reason: "truncated header".into(),
        })?;
    if version != BINARY_VERSION {
        return Err(Error::Parse {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let n_coords = read_u64(bytes, 8)? as usize;
    let n_draws = read_u64(bytes, 16)? as usize;
    let batch_size = read_u64(bytes, 24)? as usize;
    let seed = read_u64(bytes, 32)?;
    let count = n_coords.checked_mul(n_draws).ok_or(Error::Parse {
        offset: 8,
        reason: "coordinate x draw count overflows".into(),
    })?;
    let expected = count
        .checked_mul(8)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(Error::Parse {
            offset: 8,
            reason: "payload size overflows".into(),
        })?;
    if bytes.len() != expected {
        return Err(Error::Parse {
            offset: bytes.len().min(expected),
            reason: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let draws = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(NoiseBinary {
        version,
        n_coords,
        n_draws,
        batch_size,
        seed,
        draws,
    })
}

/// One row per coordinate: label, then every draw.
pub fn write_csv<W: Write>(set: &NoiseSampleSet, mut w: W) -> std::io::Result<()> {
    write!(w, "coordinate")?;
    for j in 0..set.n_draws {
        write!(w, ",d{j}")?;
    }
    writeln!(w)?;
    for (label, row) in set.rows() {
        write!(w, "{label}")?;
        for x in row {
            write!(w, ",{x:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
