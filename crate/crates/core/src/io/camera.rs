//! Camera text files.
//!
//! ```text
//! extrinsic
//! r11 r12 r13 t1
//! r21 r22 r23 t2
//! r31 r32 r33 t3
//! 0 0 0 1
//!
//! intrinsic
//! fx s cx
//! 0 fy cy
//! 0 0 1
//!
//! d_min interval [count [d_max]]
//! ```
//!
//! The extrinsic maps world to camera coordinates. A missing count means
//! 192 hypotheses and a missing `d_max` is `d_min + interval * count`.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{rotation_deviation, CameraView};

pub const DEFAULT_DEPTH_COUNT: f64 = 192.0;

/// Rotations further than this from orthonormal are rejected.
pub const ROTATION_REJECT: f64 = 1e-6;
/// Rotations further than this (but within [`ROTATION_REJECT`]) are
/// re-orthonormalised with a warning.
pub const ROTATION_REPAIR: f64 = 1e-9;

/// Parsed contents of a camera file. Image size is not part of the format.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraFile {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub k: Matrix3<f64>,
    pub depth_min: f64,
    pub depth_interval: f64,
    pub depth_count: f64,
    pub depth_max: f64,
}

impl CameraFile {
    /// Describes `cam` with the default hypothesis count.
    pub fn from_view(cam: &CameraView) -> Self {
        CameraFile {
            rotation: cam.rotation,
            translation: cam.translation,
            k: cam.k,
            depth_min: cam.depth_min,
            depth_interval: (cam.depth_max - cam.depth_min) / DEFAULT_DEPTH_COUNT,
            depth_count: DEFAULT_DEPTH_COUNT,
            depth_max: cam.depth_max,
        }
    }

    pub fn view(&self, width: usize, height: usize) -> Result<CameraView> {
        CameraView::new(
            self.k,
            self.rotation,
            self.translation,
            width,
            height,
            self.depth_min,
            self.depth_max,
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("extrinsic\n");
        for r in 0..3 {
            let _ = writeln!(
                s,
                "{} {} {} {}",
                self.rotation[(r, 0)],
                self.rotation[(r, 1)],
                self.rotation[(r, 2)],
                self.translation[r]
            );
        }
        s.push_str("0 0 0 1\n\nintrinsic\n");
        for r in 0..3 {
            let _ = writeln!(s, "{} {} {}", self.k[(r, 0)], self.k[(r, 1)], self.k[(r, 2)]);
        }
        let _ = writeln!(
            s,
            "\n{} {} {} {}",
            self.depth_min, self.depth_interval, self.depth_count, self.depth_max
        );
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<CameraFile> {
        let mut lines = Lines::new(text, path);

        lines.expect_keyword("extrinsic")?;
        let mut ext = [[0.0; 4]; 4];
        for row in ext.iter_mut() {
            let vals = lines.numbers("extrinsic", 4, 4)?;
            row.copy_from_slice(&vals);
        }
        lines.expect_keyword("intrinsic")?;
        let mut k = Matrix3::zeros();
        for r in 0..3 {
            let vals = lines.numbers("intrinsic", 3, 3)?;
            for c in 0..3 {
                k[(r, c)] = vals[c];
            }
        }
        let depth = lines.numbers("depth range", 2, 4)?;
        let depth_min = depth[0];
        let depth_interval = depth[1];
        let depth_count = depth.get(2).copied().unwrap_or(DEFAULT_DEPTH_COUNT);
        let depth_max = depth
            .get(3)
            .copied()
            .unwrap_or(depth_min + depth_interval * depth_count);

        let mut rotation = Matrix3::zeros();
        let mut translation = Vector3::zeros();
        for r in 0..3 {
            for c in 0..3 {
                rotation[(r, c)] = ext[r][c];
            }
            translation[r] = ext[r][3];
        }
        let deviation = rotation_deviation(&rotation);
        if deviation > ROTATION_REJECT {
            return Err(Error::NonOrthonormalRotation {
                path: path.to_path_buf(),
                deviation,
            });
        }
        if deviation > ROTATION_REPAIR {
            warn!(
                "{}: rotation deviates from orthonormal by {deviation:e}; re-orthonormalising",
                path.display()
            );
            rotation = gram_schmidt(&rotation);
        }
        Ok(CameraFile {
            rotation,
            translation,
            k,
            depth_min,
            depth_interval,
            depth_count,
            depth_max,
        })
    }
}

/// Orthonormalises the rows of `r` in order.
pub fn gram_schmidt(r: &Matrix3<f64>) -> Matrix3<f64> {
    let a = r.row(0).transpose();
    let b = r.row(1).transpose();
    let x = a.normalize();
    let y = (b - x * x.dot(&b)).normalize();
    let z = x.cross(&y);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        Lines {
            iter: text.lines().enumerate(),
            path,
            last_line: 0,
        }
    }

    /// Next non-blank line with its 1-based number.
    fn next_content(&mut self, section: &str) -> Result<(usize, &'a str)> {
        for (i, line) in self.iter.by_ref() {
            self.last_line = i + 1;
            if !line.trim().is_empty() {
                return Ok((i + 1, line));
            }
        }
        Err(Error::parse(
            self.path,
            self.last_line + 1,
            1,
            format!("unexpected end of file: missing {section} section"),
        ))
    }

    fn expect_keyword(&mut self, keyword: &str) -> Result<()> {
        let (n, line) = self.next_content(keyword)?;
        if line.trim() != keyword {
            let col = line.len() - line.trim_start().len() + 1;
            return Err(Error::parse(
                self.path,
                n,
                col,
                format!("expected `{keyword}`, found `{}`", line.trim()),
            ));
        }
        Ok(())
    }

    fn numbers(&mut self, section: &str, min: usize, max: usize) -> Result<Vec<f64>> {
        let (n, line) = self.next_content(section)?;
        let mut out = Vec::with_capacity(max);
        let base = line.as_ptr() as usize;
        for tok in line.split_whitespace() {
            let col = tok.as_ptr() as usize - base + 1;
            let v: f64 = tok.parse().map_err(|_| {
                Error::parse(self.path, n, col, format!("{section}: `{tok}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    path: self.path.to_path_buf(),
                    line: n,
                    value: v,
                });
            }
            out.push(v);
        }
        if out.len() < min || out.len() > max {
            let expected = if min == max {
                format!("{min}")
            } else {
                format!("{min} to {max}")
            };
            return Err(Error::parse(
                self.path,
                n,
                1,
                format!("{section}: expected {expected} values, found {}", out.len()),
            ));
        }
        Ok(out)
    }
}

pub fn load_camera(path: &Path) -> Result<CameraFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CameraFile::parse(&text, path)
}

pub fn save_camera(camera: &CameraFile, path: &Path) -> Result<()> {
    std::fs::write(path, camera.to_text()).map_err(|e| Error::io(path, e))
}
