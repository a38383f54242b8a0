//! The `BTPM` probability-map file format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "BTPM"
//! 4       2     version (u16 LE) = 1
//! 6       4     width (u32 LE)
//! 10      4     height (u32 LE)
//! 14      4*n   values, f32 LE, row-major, n = width * height
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::model::{MapError, ProbMap};

pub const MAGIC: &[u8; 4] = b"BTPM";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 14;

#[derive(Debug, thiserror::Error)]
pub enum ProbMapFileError {
    #[error("not a BTPM file")]
    BadMagic,
    #[error("unsupported BTPM version {0}")]
    UnsupportedVersion(u16),
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode(map: &ProbMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ProbMap, ProbMapFileError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ProbMapFileError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ProbMapFileError::BadDimensions("truncated header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(ProbMapFileError::UnsupportedVersion(version));
    }
    let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let n = width
        .checked_mul(height)
        .filter(|n| *n > 0)
        .ok_or_else(|| ProbMapFileError::BadDimensions(format!("{width}x{height}")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n * 4 {
        return Err(ProbMapFileError::BadDimensions(format!(
            "{width}x{height} needs {} payload bytes, found {}",
            n * 4,
            payload.len()
        )));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ProbMap::new(width, height, values).map_err(|e| match e {
        MapError::ValueOutOfRange { index, value } => {
            ProbMapFileError::ValueOutOfRange { index, value }
        }
        other => ProbMapFileError::BadDimensions(other.to_string()),
    })
}

pub fn write_probmap(path: &Path, map: &ProbMap) -> Result<(), ProbMapFileError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(map))?;
    Ok(())
}

pub fn read_probmap(path: &Path) -> Result<ProbMap, ProbMapFileError> {
    decode(&fs::read(path)?)
}
