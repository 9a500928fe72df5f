//! Single-channel portable float maps.
//!
//! Header `Pf`, then `width height`, then a scale whose sign gives the byte
//! order (negative for little-endian). Rows are stored bottom to top. Invalid
//! depth pixels are written as NaN.

use std::path::Path;

use crate::depth::DepthMap;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn from_values(width: usize, height: usize, values: &[f64]) -> Self {
        PfmImage {
            width,
            height,
            data: values.iter().map(|&v| v as f32).collect(),
        }
    }

    /// Depths with NaN where the map is invalid.
    pub fn from_depth(map: &DepthMap) -> Self {
        PfmImage {
            width: map.width,
            height: map.height,
            data: map
                .depth
                .iter()
                .zip(&map.valid)
                .map(|(&d, &v)| if v { d as f32 } else { f32::NAN })
                .collect(),
        }
    }

    pub fn from_confidence(map: &DepthMap) -> Self {
        Self::from_values(map.width, map.height, &map.confidence)
    }

    /// Depth map whose valid mask marks the finite, positive pixels.
    pub fn to_depth(&self, level: usize) -> DepthMap {
        let mut map = DepthMap::new(self.width, self.height, level);
        for (i, &v) in self.data.iter().enumerate() {
            if v.is_finite() && v > 0.0 {
                map.depth[i] = v as f64;
                map.valid[i] = true;
                map.confidence[i] = 1.0;
            }
        }
        map
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = format!("Pf\n{} {}\n-1.0\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + 4 * self.data.len());
        out.extend_from_slice(header.as_bytes());
        for row in (0..self.height).rev() {
            for v in &self.data[row * self.width..(row + 1) * self.width] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut pos = 0;
        let mut line_no = 0;
        let mut next_line = |what: &str| -> Result<(usize, String)> {
            let rest = &bytes[pos..];
            let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| {
                Error::parse(path, line_no + 1, 1, format!("missing {what} line"))
            })?;
            let line = std::str::from_utf8(&rest[..end])
                .map_err(|_| Error::parse(path, line_no + 1, 1, "header is not text"))?
                .trim()
                .to_string();
            pos += end + 1;
            line_no += 1;
            Ok((line_no, line))
        };

        let (_, magic) = next_line("magic")?;
        match magic.as_str() {
            "Pf" => {}
            "PF" => {
                return Err(Error::UnsupportedFormat {
                    path: path.to_path_buf(),
                    message: "three-channel PF maps are not supported".into(),
                })
            }
            other => return Err(Error::parse(path, 1, 1, format!("bad magic `{other}`"))),
        }
        let (n, dims) = next_line("dimension")?;
        let parsed: Vec<usize> = dims
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, n, 1, format!("bad dimensions `{dims}`")))?;
        let [width, height] = parsed[..] else {
            return Err(Error::parse(path, n, 1, format!("bad dimensions `{dims}`")));
        };
        let (n, scale) = next_line("scale")?;
        let scale: f64 = scale
            .parse()
            .map_err(|_| Error::parse(path, n, 1, format!("bad scale `{scale}`")))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::parse(path, n, 1, "scale must be non-zero"));
        }
        let little = scale < 0.0;

        let payload = &bytes[pos..];
        let expected = width * height * 4;
        if payload.len() != expected {
            return Err(Error::parse(
                path,
                n + 1,
                1,
                format!("payload is {} bytes, expected {expected}", payload.len()),
            ));
        }
        let mut data = vec![0f32; width * height];
        for (k, chunk) in payload.chunks_exact(4).enumerate() {
            let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            let (file_row, x) = (k / width, k % width);
            data[(height - 1 - file_row) * width + x] = v;
        }
        Ok(PfmImage {
            width,
            height,
            data,
        })
    }
}

pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    PfmImage::from_bytes(&bytes, path)
}

pub fn write_pfm(image: &PfmImage, path: &Path) -> Result<()> {
    std::fs::write(path, image.to_bytes()).map_err(|e| Error::io(path, e))
}
