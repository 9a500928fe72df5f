//! Raw volume dumps: an 8-byte magic, then width, height, hypotheses per
//! pixel and level as little-endian `u32`, then the values as little-endian
//! `f32` in pixel-major order.

use std::path::Path;

use crate::cost::{CostVolume, ProbabilityVolume};
use crate::error::{Error, Result};

pub const COST_MAGIC: &[u8; 8] = b"PMVSCOST";
pub const PROB_MAGIC: &[u8; 8] = b"PMVSPROB";

#[derive(Clone, Debug, PartialEq)]
pub struct VolumeDump {
    pub magic: [u8; 8],
    pub width: usize,
    pub height: usize,
    pub hypotheses: usize,
    pub level: usize,
    pub values: Vec<f32>,
}

impl VolumeDump {
    pub fn from_cost(cv: &CostVolume) -> Self {
        VolumeDump {
            magic: *COST_MAGIC,
            width: cv.width,
            height: cv.height,
            hypotheses: cv.hypotheses_per_pixel(),
            level: cv.level,
            values: cv.costs.iter().map(|&c| c as f32).collect(),
        }
    }

    pub fn from_probability(pv: &ProbabilityVolume) -> Self {
        VolumeDump {
            magic: *PROB_MAGIC,
            width: pv.width,
            height: pv.height,
            hypotheses: pv.hypotheses.count(),
            level: pv.level,
            values: pv.probs.iter().map(|&c| c as f32).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.values.len());
        out.extend_from_slice(&self.magic);
        for v in [self.width, self.height, self.hypotheses, self.level] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 24 {
            return Err(Error::parse(path, 1, 1, "volume header truncated"));
        }
        let mut magic = [0u8; 8];
        magic.copy_from_slice(&bytes[..8]);
        if &magic != COST_MAGIC && &magic != PROB_MAGIC {
            return Err(Error::parse(path, 1, 1, "bad volume magic"));
        }
        let field = |i: usize| {
            let o = 8 + 4 * i;
            u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        };
        let (width, height, hypotheses, level) = (field(0), field(1), field(2), field(3));
        let n = width * height * hypotheses;
        if bytes.len() != 24 + 4 * n {
            return Err(Error::parse(path, 1, 25, "volume payload size mismatch"));
        }
        let values = bytes[24..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(VolumeDump {
            magic,
            width,
            height,
            hypotheses,
            level,
            values,
        })
    }
}

pub fn write_volume(dump: &VolumeDump, path: &Path) -> Result<()> {
    std::fs::write(path, dump.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: &Path) -> Result<VolumeDump> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    VolumeDump::from_bytes(&bytes, path)
}
