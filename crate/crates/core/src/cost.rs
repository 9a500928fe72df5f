//! Variance cost volumes over depth hypotheses.
//!
//! The coarsest level sweeps uniformly spaced fronto-parallel planes across
//! the whole depth range, warping source features through plane homographies.
//! Finer levels evaluate a small set of per-pixel depth residuals around an
//! upsampled estimate by projecting each hypothesised 3-D point into the
//! source views. Both reduce the per-channel feature variance across views to
//! a scalar cost.
//!
//! Volumes are pixel-major: the `M` costs of one pixel are contiguous.

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::geometry::{
    apply_homography, backproject, depth_search_range, homography, project_in_image, CameraView,
    SweepPlane,
};

/// Cost of a hypothesis seen by fewer than two views.
pub const SENTINEL_COST: f64 = 1e9;

#[inline]
pub fn is_sentinel(cost: f64) -> bool {
    cost >= SENTINEL_COST
}

/// Depth hypotheses indexing the last axis of a volume.
#[derive(Clone, Debug, PartialEq)]
pub enum HypothesisSet {
    /// `depths[m] = d_min + m (d_max - d_min) / M`, shared by every pixel.
    Absolute { depths: Vec<f64> },
    /// Per-pixel residuals `m * interval[p]` around `base[p]` for
    /// `m in -M/2 .. M/2`.
    Residual {
        count: usize,
        base: Vec<f64>,
        interval: Vec<f64>,
    },
}

impl HypothesisSet {
    pub fn uniform(depth_min: f64, depth_max: f64, count: usize) -> Self {
        let step = (depth_max - depth_min) / count as f64;
        HypothesisSet::Absolute {
            depths: (0..count).map(|m| depth_min + m as f64 * step).collect(),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            HypothesisSet::Absolute { depths } => depths.len(),
            HypothesisSet::Residual { count, .. } => *count,
        }
    }

    /// Signed residual index of slot `m` in a residual set.
    #[inline]
    pub fn residual_index(count: usize, m: usize) -> i64 {
        m as i64 - (count / 2) as i64
    }

    /// Hypothesised depth of slot `m` at pixel index `pixel`.
    #[inline]
    pub fn depth(&self, pixel: usize, m: usize) -> f64 {
        match self {
            HypothesisSet::Absolute { depths } => depths[m],
            HypothesisSet::Residual {
                count,
                base,
                interval,
            } => base[pixel] + Self::residual_index(*count, m) as f64 * interval[pixel],
        }
    }

    /// Offset of slot `m` from the base depth (the depth itself for absolute
    /// sets).
    #[inline]
    pub fn value(&self, pixel: usize, m: usize) -> f64 {
        match self {
            HypothesisSet::Absolute { depths } => depths[m],
            HypothesisSet::Residual {
                count, interval, ..
            } => Self::residual_index(*count, m) as f64 * interval[pixel],
        }
    }
}

#[derive(Clone, Debug)]
pub struct CostVolume {
    pub width: usize,
    pub height: usize,
    pub level: usize,
    pub costs: Vec<f64>,
    pub valid_views: Vec<u8>,
    pub hypotheses: HypothesisSet,
}

impl CostVolume {
    pub fn hypotheses_per_pixel(&self) -> usize {
        self.hypotheses.count()
    }

    /// Number of cost cells allocated for this volume.
    pub fn cells(&self) -> usize {
        self.costs.len()
    }

    #[inline]
    pub fn pixel_costs(&self, x: usize, y: usize) -> &[f64] {
        let m = self.hypotheses.count();
        let i = (y * self.width + x) * m;
        &self.costs[i..i + m]
    }

    /// Index of the lowest cost per pixel (first on ties).
    pub fn argmin(&self) -> Vec<usize> {
        let m = self.hypotheses.count();
        self.costs
            .chunks_exact(m)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |best, (i, &v)| {
                        if v < best.1 {
                            (i, v)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}

/// Reference and source features at one pyramid level, with full-resolution
/// cameras.
#[derive(Clone, Copy, Debug)]
pub struct ViewSet<'a> {
    pub reference: &'a FeatureMap,
    pub sources: &'a [FeatureMap],
    pub reference_camera: &'a CameraView,
    pub source_cameras: &'a [CameraView],
}

impl ViewSet<'_> {
    fn check(&self, level: usize) -> Result<(usize, usize, usize)> {
        if self.sources.len() != self.source_cameras.len() {
            return Err(Error::InvalidConfig(format!(
                "{} source feature maps but {} source cameras",
                self.sources.len(),
                self.source_cameras.len()
            )));
        }
        let cam = self.reference_camera.at_level(level);
        let (w, h) = (self.reference.width(), self.reference.height());
        if (w, h) != (cam.width, cam.height) {
            return Err(Error::InvalidConfig(format!(
                "reference features are {w}x{h} but level {level} is {}x{}",
                cam.width, cam.height
            )));
        }
        let f = self.reference.channels();
        if self.sources.iter().any(|s| s.channels() != f) {
            return Err(Error::InvalidConfig("channel count differs across views".into()));
        }
        if self.sources.len() + 1 > u8::MAX as usize {
            return Err(Error::InvalidConfig("too many views".into()));
        }
        Ok((w, h, f))
    }
}

/// Feature variance across views, averaged over channels.
///
/// `features[0]` is the reference and must be present; `None` entries are
/// views whose sample fell outside the image. With fewer than two valid views
/// the sentinel cost is returned.
pub fn variance_cost(features: &[Option<&[f64]>]) -> (f64, usize) {
    let f = features
        .iter()
        .flatten()
        .map(|v| v.len())
        .next()
        .unwrap_or(0);
    let mut scratch = VarianceScratch::new(features.len(), f);
    for (i, feat) in features.iter().enumerate() {
        if let Some(v) = feat {
            scratch.buf[i * f..(i + 1) * f].copy_from_slice(v);
            scratch.valid[i] = true;
        }
    }
    scratch.cost()
}

struct VarianceScratch {
    channels: usize,
    buf: Vec<f64>,
    valid: Vec<bool>,
    mean: Vec<f64>,
}

impl VarianceScratch {
    fn new(views: usize, channels: usize) -> Self {
        VarianceScratch {
            channels,
            buf: vec![0.0; views * channels],
            valid: vec![false; views],
            mean: vec![0.0; channels],
        }
    }

    fn slot(&mut self, view: usize) -> &mut [f64] {
        let f = self.channels;
        &mut self.buf[view * f..(view + 1) * f]
    }

    fn cost(&mut self) -> (f64, usize) {
        let f = self.channels;
        let n = self.valid.iter().filter(|&&v| v).count();
        if n < 2 || f == 0 {
            return (SENTINEL_COST, n);
        }
        // mean taken relative to the first valid view, so identical views
        // give exactly zero
        let first = self.valid.iter().position(|&v| v).expect("n >= 2");
        self.mean.fill(0.0);
        for (view, _) in self.valid.iter().enumerate().filter(|(_, &v)| v) {
            for c in 0..f {
                self.mean[c] += self.buf[view * f + c] - self.buf[first * f + c];
            }
        }
        let inv_n = 1.0 / n as f64;
        for c in 0..f {
            self.mean[c] = self.buf[first * f + c] + self.mean[c] * inv_n;
        }
        let mut total = 0.0;
        for (view, _) in self.valid.iter().enumerate().filter(|(_, &v)| v) {
            for (m, x) in self.mean.iter().zip(&self.buf[view * f..(view + 1) * f]) {
                let d = x - m;
                total += d * d;
            }
        }
        (total * inv_n / f as f64, n)
    }
}

/// Uniform plane sweep over the reference depth range with `planes`
/// hypotheses, warping source features through plane homographies.
pub fn build_coarse_volume(views: &ViewSet, planes: usize, level: usize) -> Result<CostVolume> {
    if planes < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 depth planes, got {planes}"
        )));
    }
    let (w, h, f) = views.check(level)?;
    let cam = views.reference_camera;
    let hypotheses = HypothesisSet::uniform(cam.depth_min, cam.depth_max, planes);
    let HypothesisSet::Absolute { depths } = &hypotheses else {
        unreachable!()
    };

    // homographies[m * n_src + i]
    let mut homographies = Vec::with_capacity(planes * views.sources.len());
    for &d in depths {
        for src in views.source_cameras {
            homographies.push(homography(cam, src, &SweepPlane::fronto_parallel(d), level)?);
        }
    }

    let n_src = views.sources.len();
    let mut costs = vec![0.0; w * h * planes];
    let mut valid_views = vec![0u8; w * h * planes];
    costs
        .par_chunks_mut(w * planes)
        .zip(valid_views.par_chunks_mut(w * planes))
        .enumerate()
        .for_each(|(y, (cost_row, valid_row))| {
            let mut scratch = VarianceScratch::new(n_src + 1, f);
            for x in 0..w {
                let pixel = Vector2::new(x as f64, y as f64);
                for m in 0..planes {
                    scratch.slot(0).copy_from_slice(views.reference.pixel(x, y));
                    scratch.valid[0] = true;
                    for (i, fm) in views.sources.iter().enumerate() {
                        let hm = &homographies[m * n_src + i];
                        let ok = match apply_homography(hm, &pixel) {
                            Some((p, _)) => fm.sample_into(p.x, p.y, scratch.slot(i + 1)),
                            None => false,
                        };
                        scratch.valid[i + 1] = ok;
                    }
                    let (c, n) = scratch.cost();
                    cost_row[x * planes + m] = c;
                    valid_row[x * planes + m] = n as u8;
                }
            }
        });

    Ok(CostVolume {
        width: w,
        height: h,
        level,
        costs,
        valid_views,
        hypotheses,
    })
}

/// Parameters of a residual (partial) cost volume.
#[derive(Clone, Copy, Debug)]
pub struct RefineOptions {
    /// Residual hypotheses per pixel; even and at least 2.
    pub hypotheses: usize,
    /// Half-width in source pixels of the per-pixel search range.
    pub range_offset_px: f64,
    /// Search span used where the epipolar construction is degenerate.
    pub fallback_span: f64,
}

/// Partial cost volume over per-pixel depth residuals around `upsampled`.
///
/// The search span `s_p` of every pixel comes from the epipolar range in the
/// first source view, the hypothesis interval is `s_p / M`, and hypothesis
/// `m` sits at `D(p) + m * s_p / M` for `m in -M/2 .. M/2`.
pub fn build_partial_volume(
    views: &ViewSet,
    upsampled: &DepthMap,
    options: &RefineOptions,
    level: usize,
) -> Result<CostVolume> {
    let count = options.hypotheses;
    if count < 2 || !count.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "residual hypothesis count must be even and >= 2, got {count}"
        )));
    }
    if !(options.fallback_span > 0.0) {
        return Err(Error::InvalidConfig("fallback span must be positive".into()));
    }
    let (w, h, f) = views.check(level)?;
    if (upsampled.width, upsampled.height) != (w, h) {
        return Err(Error::InvalidConfig(format!(
            "upsampled depth is {}x{} but level {level} is {w}x{h}",
            upsampled.width, upsampled.height
        )));
    }
    if views.sources.is_empty() {
        return Err(Error::InvalidConfig("at least one source view is required".into()));
    }
    let reference = views.reference_camera.at_level(level);
    let sources: Vec<CameraView> = views
        .source_cameras
        .iter()
        .map(|c| c.at_level(level))
        .collect();

    let mut intervals = vec![0.0; w * h];
    intervals
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let i = y * w + x;
                let d = upsampled.depth[i];
                let span = if upsampled.valid[i] {
                    depth_search_range(
                        &reference,
                        &sources[0],
                        &Vector2::new(x as f64, y as f64),
                        d,
                        options.range_offset_px,
                    )
                    .ok()
                    .map(|(lo, hi)| hi - lo)
                    .filter(|s| *s > 0.0 && s.is_finite())
                    .unwrap_or(options.fallback_span)
                } else {
                    options.fallback_span
                };
                *out = span / count as f64;
            }
        });
    let hypotheses = HypothesisSet::Residual {
        count,
        base: upsampled.depth.clone(),
        interval: intervals,
    };

    let n_src = sources.len();
    let mut costs = vec![SENTINEL_COST; w * h * count];
    let mut valid_views = vec![0u8; w * h * count];
    costs
        .par_chunks_mut(w * count)
        .zip(valid_views.par_chunks_mut(w * count))
        .enumerate()
        .for_each(|(y, (cost_row, valid_row))| {
            let mut scratch = VarianceScratch::new(n_src + 1, f);
            for x in 0..w {
                let i = y * w + x;
                if !upsampled.valid[i] {
                    continue;
                }
                let pixel = Vector2::new(x as f64, y as f64);
                for m in 0..count {
                    let depth = hypotheses.depth(i, m);
                    let Ok(point) = backproject(&reference, &pixel, depth) else {
                        continue;
                    };
                    scratch.slot(0).copy_from_slice(views.reference.pixel(x, y));
                    scratch.valid[0] = true;
                    for (s, (fm, cam)) in views.sources.iter().zip(&sources).enumerate() {
                        let ok = match project_in_image(cam, &point, 0.0) {
                            Some(p) => fm.sample_into(p.pixel.x, p.pixel.y, scratch.slot(s + 1)),
                            None => false,
                        };
                        scratch.valid[s + 1] = ok;
                    }
                    let (c, n) = scratch.cost();
                    cost_row[x * count + m] = c;
                    valid_row[x * count + m] = n as u8;
                }
            }
        });

    Ok(CostVolume {
        width: w,
        height: h,
        level,
        costs,
        valid_views,
        hypotheses,
    })
}

/// Smooths costs: two 3x3 box passes within every hypothesis slice, then a
/// `[1/4, 1/2, 1/4]` pass along the hypothesis axis. Sentinel cells neither
/// change nor contribute.
pub fn aggregate(cv: &CostVolume) -> CostVolume {
    let once = box_pass(cv);
    let twice = box_pass(&once);
    hypothesis_pass(&twice)
}

fn box_pass(cv: &CostVolume) -> CostVolume {
    let (w, h, m) = (cv.width, cv.height, cv.hypotheses.count());
    let src = &cv.costs;
    let mut costs = vec![0.0; src.len()];
    costs
        .par_chunks_mut(w * m)
        .enumerate()
        .for_each(|(y, row)| {
            let y0 = y.saturating_sub(1);
            let y1 = (y + 1).min(h - 1);
            for x in 0..w {
                let x0 = x.saturating_sub(1);
                let x1 = (x + 1).min(w - 1);
                for k in 0..m {
                    let center = src[(y * w + x) * m + k];
                    if is_sentinel(center) {
                        row[x * m + k] = center;
                        continue;
                    }
                    let mut sum = 0.0;
                    let mut n = 0usize;
                    for yy in y0..=y1 {
                        for xx in x0..=x1 {
                            let v = src[(yy * w + xx) * m + k];
                            if !is_sentinel(v) {
                                sum += v;
                                n += 1;
                            }
                        }
                    }
                    row[x * m + k] = sum / n as f64;
                }
            }
        });
    CostVolume {
        costs,
        ..cv.clone()
    }
}

fn hypothesis_pass(cv: &CostVolume) -> CostVolume {
    let m = cv.hypotheses.count();
    let mut costs = cv.costs.clone();
    costs
        .par_chunks_mut(m)
        .zip(cv.costs.par_chunks(m))
        .for_each(|(out, src)| {
            for k in 0..m {
                let c = src[k];
                if is_sentinel(c) {
                    continue;
                }
                let prev = if k > 0 && !is_sentinel(src[k - 1]) {
                    src[k - 1]
                } else {
                    c
                };
                let next = if k + 1 < m && !is_sentinel(src[k + 1]) {
                    src[k + 1]
                } else {
                    c
                };
                out[k] = 0.25 * prev + 0.5 * c + 0.25 * next;
            }
        });
    CostVolume {
        costs,
        ..cv.clone()
    }
}

/// Per-pixel distribution over the hypotheses of a cost volume.
#[derive(Clone, Debug)]
pub struct ProbabilityVolume {
    pub width: usize,
    pub height: usize,
    pub level: usize,
    pub probs: Vec<f64>,
    pub hypotheses: HypothesisSet,
    /// Pixels where every hypothesis was a sentinel; their distribution is
    /// uniform.
    pub low_confidence: Vec<bool>,
}

impl ProbabilityVolume {
    #[inline]
    pub fn pixel_probs(&self, index: usize) -> &[f64] {
        let m = self.hypotheses.count();
        &self.probs[index * m..(index + 1) * m]
    }
}

/// Softmax of `-cost / temperature` along the hypothesis axis. Sentinel
/// cells get zero probability.
pub fn to_probability(cv: &CostVolume, temperature: f64) -> Result<ProbabilityVolume> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidTemperature(temperature));
    }
    let m = cv.hypotheses.count();
    let mut probs = vec![0.0; cv.costs.len()];
    let mut low_confidence = vec![false; cv.width * cv.height];
    probs
        .par_chunks_mut(m)
        .zip(cv.costs.par_chunks(m))
        .zip(low_confidence.par_iter_mut())
        .for_each(|((out, costs), low)| {
            let min = costs
                .iter()
                .copied()
                .filter(|c| !is_sentinel(*c))
                .fold(f64::INFINITY, f64::min);
            if !min.is_finite() {
                out.fill(1.0 / m as f64);
                *low = true;
                return;
            }
            let mut sum = 0.0;
            for (o, &c) in out.iter_mut().zip(costs) {
                *o = if is_sentinel(c) {
                    0.0
                } else {
                    (-(c - min) / temperature).exp()
                };
                sum += *o;
            }
            out.iter_mut().for_each(|o| *o /= sum);
        });
    Ok(ProbabilityVolume {
        width: cv.width,
        height: cv.height,
        level: cv.level,
        probs,
        hypotheses: cv.hypotheses.clone(),
        low_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn volume(w: usize, h: usize, m: usize, costs: Vec<f64>) -> CostVolume {
        CostVolume {
            width: w,
            height: h,
            level: 0,
            valid_views: vec![2; costs.len()],
            costs,
            hypotheses: HypothesisSet::uniform(1.0, 2.0, m),
        }
    }

    /// Mean then squared deviation, per channel, straight from the definition.
    fn two_pass_oracle(views: &[Vec<f64>]) -> f64 {
        let f = views[0].len();
        let n = views.len() as f64;
        let mut total = 0.0;
        for c in 0..f {
            let mean: f64 = views.iter().map(|v| v[c]).sum::<f64>() / n;
            let var: f64 = views.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / n;
            total += var;
        }
        total / f as f64
    }

    #[test]
    fn variance_examples() {
        let a = [0.3, -1.0, 2.0];
        let (c, n) = variance_cost(&[Some(&a), Some(&a), Some(&a)]);
        assert_eq!((c, n), (0.0, 3));

        let (c, n) = variance_cost(&[Some(&[0.0][..]), Some(&[2.0][..])]);
        assert_eq!((c, n), (1.0, 2));

        let (c, n) = variance_cost(&[Some(&[0.0][..]), None, None]);
        assert_eq!((c, n), (SENTINEL_COST, 1));
    }

    #[test]
    fn variance_matches_oracle_with_dropped_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(2..7);
            let f = rng.gen_range(1..9);
            let views: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..f).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect();
            let keep: Vec<bool> = (0..n).map(|i| i == 0 || rng.gen_bool(0.7)).collect();
            let input: Vec<Option<&[f64]>> = views
                .iter()
                .zip(&keep)
                .map(|(v, &k)| k.then_some(v.as_slice()))
                .collect();
            let kept: Vec<Vec<f64>> = views
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(v, _)| v.clone())
                .collect();
            let (c, count) = variance_cost(&input);
            assert_eq!(count, kept.len());
            if kept.len() >= 2 {
                assert!((c - two_pass_oracle(&kept)).abs() < 1e-12);
            } else {
                assert_eq!(c, SENTINEL_COST);
            }
        }
    }

    #[test]
    fn aggregate_constant_is_identity() {
        let cv = volume(6, 5, 4, vec![0.75; 6 * 5 * 4]);
        let agg = aggregate(&cv);
        assert!(agg.costs.iter().all(|&c| (c - 0.75).abs() < 1e-15));
    }

    #[test]
    fn aggregate_impulse_spreads_and_keeps_mass() {
        let (w, h, m) = (11, 11, 5);
        let mut costs = vec![0.0; w * h * m];
        costs[(5 * w + 5) * m + 2] = 1.0;
        let agg = aggregate(&volume(w, h, m, costs));
        let total: f64 = agg.costs.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for y in 0..h {
            for x in 0..w {
                let px: f64 = agg.pixel_costs(x, y).iter().sum();
                let inside = x.abs_diff(5) <= 2 && y.abs_diff(5) <= 2;
                assert_eq!(px > 0.0, inside, "pixel ({x}, {y})");
            }
        }
        // direct oracle: two 3x3 boxes make a 5x5 triangle kernel
        let tri = |d: usize| [3.0, 2.0, 1.0][d] / 9.0;
        let expected = tri(1) * tri(2) * 0.5;
        assert!((agg.pixel_costs(6, 7)[2] - expected).abs() < 1e-15);
    }

    #[test]
    fn aggregate_keeps_sentinels() {
        let mut costs = vec![0.5; 4 * 4 * 3];
        costs[(4 + 2) * 3 + 1] = SENTINEL_COST;
        let agg = aggregate(&volume(4, 4, 3, costs));
        assert_eq!(agg.pixel_costs(2, 1)[1], SENTINEL_COST);
        assert!((agg.pixel_costs(1, 1)[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn probability_examples() {
        let m = 4;
        let cv = volume(
            1,
            1,
            m,
            vec![SENTINEL_COST, 0.0, SENTINEL_COST, SENTINEL_COST],
        );
        let p = to_probability(&cv, 1.0).unwrap();
        assert_eq!(p.probs, vec![0.0, 1.0, 0.0, 0.0]);
        assert!(!p.low_confidence[0]);

        let p = to_probability(&volume(1, 1, m, vec![0.3; m]), 0.7).unwrap();
        assert!(p.probs.iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let p = to_probability(&volume(1, 1, m, vec![SENTINEL_COST; m]), 1.0).unwrap();
        assert!(p.low_confidence[0]);
        assert!(p.probs.iter().all(|&v| v == 0.25));

        let p = to_probability(&volume(1, 1, m, vec![0.4, 0.1, 0.2, 0.3]), 1e-4).unwrap();
        assert!((p.probs[1] - 1.0).abs() < 1e-6);

        assert!(matches!(
            to_probability(&volume(1, 1, m, vec![0.0; m]), 0.0),
            Err(Error::InvalidTemperature(_))
        ));
    }

    #[test]
    fn residual_hypotheses_are_half_open() {
        let set = HypothesisSet::Residual {
            count: 8,
            base: vec![10.0],
            interval: vec![0.5],
        };
        let depths: Vec<f64> = (0..8).map(|m| set.depth(0, m)).collect();
        assert_eq!(depths, vec![8.0, 8.5, 9.0, 9.5, 10.0, 10.5, 11.0, 11.5]);
    }

    #[test]
    fn uniform_hypotheses() {
        let HypothesisSet::Absolute { depths } = HypothesisSet::uniform(2.0, 4.0, 4) else {
            panic!()
        };
        assert_eq!(depths, vec![2.0, 2.5, 3.0, 3.5]);
    }
}
