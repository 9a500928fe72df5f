//! Depth maps, soft-argmax estimators, bicubic upsampling and the multi-level
//! L1 metric.

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{HypothesisSet, ProbabilityVolume};
use crate::error::{Error, Result};

/// Number of consecutive probabilities summed into the confidence.
pub const CONFIDENCE_WINDOW: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub level: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
    pub confidence: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, level: usize) -> Self {
        let n = width * height;
        DepthMap {
            width,
            height,
            level,
            depth: vec![0.0; n],
            valid: vec![false; n],
            confidence: vec![0.0; n],
        }
    }

    /// Fully valid map with unit confidence.
    pub fn from_depths(width: usize, height: usize, level: usize, depth: Vec<f64>) -> Self {
        assert_eq!(depth.len(), width * height);
        let valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        DepthMap {
            width,
            height,
            level,
            confidence: vec![1.0; depth.len()],
            depth,
            valid,
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Next pyramid level by keeping even rows and columns, matching the
    /// image pyramid's sampling grid.
    pub fn decimate(&self) -> DepthMap {
        let (w, h) = (self.width.div_ceil(2), self.height.div_ceil(2));
        let mut out = DepthMap::new(w, h, self.level + 1);
        for y in 0..h {
            for x in 0..w {
                let src = self.index(2 * x, 2 * y);
                let dst = out.index(x, y);
                out.depth[dst] = self.depth[src];
                out.valid[dst] = self.valid[src];
                out.confidence[dst] = self.confidence[src];
            }
        }
        out
    }

    /// `self` followed by `levels` decimations.
    pub fn pyramid(&self, levels: usize) -> Vec<DepthMap> {
        let mut out = vec![self.clone()];
        for _ in 0..levels {
            let next = out.last().expect("non-empty").decimate();
            out.push(next);
        }
        out
    }
}

/// Sum of `CONFIDENCE_WINDOW` consecutive probabilities starting one slot
/// before the argmax (shifted to stay in range).
pub fn window_confidence(probs: &[f64]) -> f64 {
    let m = probs.len();
    if m <= CONFIDENCE_WINDOW {
        return probs.iter().sum::<f64>().clamp(0.0, 1.0);
    }
    let best = probs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| {
            if p > acc.1 {
                (i, p)
            } else {
                acc
            }
        })
        .0;
    let start = best.saturating_sub(1).min(m - CONFIDENCE_WINDOW);
    probs[start..start + CONFIDENCE_WINDOW]
        .iter()
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Expected depth under an absolute-hypothesis probability volume.
pub fn soft_argmax_coarse(p: &ProbabilityVolume) -> Result<DepthMap> {
    let HypothesisSet::Absolute { depths } = &p.hypotheses else {
        return Err(Error::InvalidConfig(
            "coarse soft-argmax needs absolute hypotheses".into(),
        ));
    };
    let n = p.width * p.height;
    let mut out = DepthMap::new(p.width, p.height, p.level);
    out.depth
        .par_iter_mut()
        .zip(out.confidence.par_iter_mut())
        .zip(out.valid.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((d, c), v))| {
            let probs = p.pixel_probs(i);
            *d = probs.iter().zip(depths).map(|(p, d)| p * d).sum();
            *c = window_confidence(probs);
            *v = !p.low_confidence[i];
        });
    debug_assert_eq!(out.depth.len(), n);
    Ok(out)
}

/// Upsampled depth plus the expected residual, clamped to `depth_range`.
pub fn soft_argmax_residual(
    p: &ProbabilityVolume,
    upsampled: &DepthMap,
    depth_range: (f64, f64),
) -> Result<DepthMap> {
    if !matches!(p.hypotheses, HypothesisSet::Residual { .. }) {
        return Err(Error::InvalidConfig(
            "residual soft-argmax needs residual hypotheses".into(),
        ));
    }
    if (upsampled.width, upsampled.height) != (p.width, p.height) {
        return Err(Error::InvalidConfig(
            "probability volume and upsampled depth differ in size".into(),
        ));
    }
    let m = p.hypotheses.count();
    let (lo, hi) = depth_range;
    let mut out = DepthMap::new(p.width, p.height, p.level);
    out.depth
        .par_iter_mut()
        .zip(out.confidence.par_iter_mut())
        .zip(out.valid.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((d, c), v))| {
            let probs = p.pixel_probs(i);
            let residual: f64 = (0..m).map(|k| p.hypotheses.value(i, k) * probs[k]).sum();
            *d = (upsampled.depth[i] + residual).clamp(lo, hi);
            *c = window_confidence(probs);
            *v = upsampled.valid[i] && !p.low_confidence[i];
        });
    Ok(out)
}

#[inline]
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Catmull-Rom upsampling to `width x height`; fine pixel `x` samples the
/// coarse map at `x / 2`. A fine pixel is valid only if every tap with a
/// nonzero weight is valid. Confidence is upsampled bilinearly.
pub fn upsample_depth_to(d: &DepthMap, width: usize, height: usize) -> DepthMap {
    let level = d.level.saturating_sub(1);
    let mut out = DepthMap::new(width, height, level);
    let (cw, ch) = (d.width as isize, d.height as isize);
    let clamp = |v: isize, n: isize| v.clamp(0, n - 1) as usize;

    let rows: Vec<(Vec<f64>, Vec<bool>, Vec<f64>)> = (0..height)
        .into_par_iter()
        .map(|y| {
            let sy = y as f64 * 0.5;
            let y0 = sy.floor() as isize;
            let wy = catmull_rom(sy - y0 as f64);
            let mut depth = vec![0.0; width];
            let mut valid = vec![false; width];
            let mut conf = vec![0.0; width];
            for x in 0..width {
                let sx = x as f64 * 0.5;
                let x0 = sx.floor() as isize;
                let wx = catmull_rom(sx - x0 as f64);
                // offsets from the nearest tap keep constant regions exact
                let base = d.depth[clamp(y0, ch) * d.width + clamp(x0, cw)];
                let mut acc = 0.0;
                let mut ok = true;
                for (j, wyj) in wy.iter().enumerate() {
                    if *wyj == 0.0 {
                        continue;
                    }
                    let yy = clamp(y0 - 1 + j as isize, ch);
                    for (i, wxi) in wx.iter().enumerate() {
                        if *wxi == 0.0 {
                            continue;
                        }
                        let xx = clamp(x0 - 1 + i as isize, cw);
                        let idx = yy * d.width + xx;
                        ok &= d.valid[idx];
                        acc += wyj * wxi * (d.depth[idx] - base);
                    }
                }
                let acc = base + acc;
                valid[x] = ok && acc.is_finite() && acc > 0.0;
                depth[x] = acc;

                let bx0 = clamp(x0, cw);
                let bx1 = clamp(x0 + 1, cw);
                let by0 = clamp(y0, ch);
                let by1 = clamp(y0 + 1, ch);
                let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                let c = |xx: usize, yy: usize| d.confidence[yy * d.width + xx];
                conf[x] = (1.0 - fy) * ((1.0 - fx) * c(bx0, by0) + fx * c(bx1, by0))
                    + fy * ((1.0 - fx) * c(bx0, by1) + fx * c(bx1, by1));
            }
            (depth, valid, conf)
        })
        .collect();

    for (y, (depth, valid, conf)) in rows.into_iter().enumerate() {
        let r = y * width..(y + 1) * width;
        out.depth[r.clone()].copy_from_slice(&depth);
        out.valid[r.clone()].copy_from_slice(&valid);
        out.confidence[r].copy_from_slice(&conf);
    }
    out
}

/// [`upsample_depth_to`] at exactly twice the resolution.
pub fn upsample_depth(d: &DepthMap) -> DepthMap {
    upsample_depth_to(d, 2 * d.width, 2 * d.height)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L1Report {
    /// Mean absolute error over ground-truth-valid pixels, indexed by level.
    pub per_level: Vec<f64>,
    pub total: f64,
}

/// Mean absolute depth error per level over pixels with valid ground truth,
/// and its sum over levels.
pub fn l1_error(estimates: &[DepthMap], ground_truth: &[DepthMap]) -> Result<L1Report> {
    if estimates.len() != ground_truth.len() {
        return Err(Error::InvalidConfig(format!(
            "{} estimated levels but {} ground-truth levels",
            estimates.len(),
            ground_truth.len()
        )));
    }
    let mut per_level = Vec::with_capacity(estimates.len());
    for (l, (est, gt)) in estimates.iter().zip(ground_truth).enumerate() {
        if (est.width, est.height) != (gt.width, gt.height) {
            return Err(Error::InvalidConfig(format!(
                "level {l}: estimate is {}x{}, ground truth {}x{}",
                est.width, est.height, gt.width, gt.height
            )));
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..gt.depth.len() {
            if gt.valid[i] {
                sum += (gt.depth[i] - est.depth[i]).abs();
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::EmptyMask(l));
        }
        per_level.push(sum / n as f64);
    }
    let total = per_level.iter().sum();
    Ok(L1Report { per_level, total })
}
