//! Depth-map fusion and point-cloud scoring.
//!
//! A pixel survives filtering when its confidence is high enough and its
//! depth is geometrically consistent with enough other views: back-project,
//! project into the other view, read that view's depth, back-project again
//! and project home. The round trip must land within a pixel threshold and
//! reproduce the depth within a relative threshold.

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::geometry::{backproject, project, project_in_image, CameraView};
use crate::kdtree::KdTree;
use crate::raster::{BilinearTaps, ColorImage};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        PointCloud {
            points,
            colors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub conf_min: f64,
    pub reproj_px_max: f64,
    pub rel_depth_max: f64,
    pub min_consistent_views: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            conf_min: 0.8,
            reproj_px_max: 1.0,
            rel_depth_max: 0.01,
            min_consistent_views: 3,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.conf_min > 0.0 && self.reproj_px_max > 0.0 && self.rel_depth_max > 0.0) {
            return Err(Error::InvalidConfig("fusion thresholds must be positive".into()));
        }
        if self.min_consistent_views < 2 {
            return Err(Error::InvalidConfig(
                "min_consistent_views must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Result of checking one pixel against another view.
#[derive(Clone, Copy, Debug)]
struct Match {
    /// Depth of the round-tripped point in the home view.
    depth: f64,
    /// Pixel hit in the other view.
    pixel: Vector2<f64>,
}

fn bilinear_depth(map: &DepthMap, pixel: &Vector2<f64>) -> Option<f64> {
    let taps = BilinearTaps::new(pixel.x, pixel.y, map.width, map.height)?;
    if taps
        .index
        .iter()
        .zip(taps.weight)
        .any(|(&i, w)| w != 0.0 && !map.valid[i])
    {
        return None;
    }
    Some(taps.apply(|i| if map.valid[i] { map.depth[i] } else { 0.0 }))
}

fn check_pixel(
    home: (&DepthMap, &CameraView),
    pixel: &Vector2<f64>,
    depth: f64,
    other: (&DepthMap, &CameraView),
    cfg: &FusionConfig,
) -> Option<Match> {
    let (_, home_cam) = home;
    let (other_map, other_cam) = other;
    let point = backproject(home_cam, pixel, depth).ok()?;
    let there = project_in_image(other_cam, &point, 0.0)?;
    let other_depth = bilinear_depth(other_map, &there.pixel)?;
    let back_point = backproject(other_cam, &there.pixel, other_depth).ok()?;
    let back = project(home_cam, &back_point)?;
    let reproj = (back.pixel - pixel).norm();
    let rel = (back.lambda - depth).abs() / depth;
    (reproj < cfg.reproj_px_max && rel < cfg.rel_depth_max).then_some(Match {
        depth: back.lambda,
        pixel: there.pixel,
    })
}

fn level_cameras(depths: &[DepthMap], cams: &[CameraView]) -> Result<Vec<CameraView>> {
    if depths.len() != cams.len() {
        return Err(Error::InvalidConfig(format!(
            "{} depth maps but {} cameras",
            depths.len(),
            cams.len()
        )));
    }
    depths
        .iter()
        .zip(cams)
        .map(|(d, c)| {
            let c = c.at_level(d.level);
            if (c.width, c.height) != (d.width, d.height) {
                return Err(Error::InvalidConfig(format!(
                    "depth map is {}x{} but camera at level {} is {}x{}",
                    d.width, d.height, d.level, c.width, c.height
                )));
            }
            Ok(c)
        })
        .collect()
}

/// Invalidates pixels that fail the confidence gate or are consistent with
/// fewer than `min_consistent_views - 1` other views.
pub fn consistency_filter(
    depths: &[DepthMap],
    cams: &[CameraView],
    cfg: &FusionConfig,
) -> Result<Vec<DepthMap>> {
    cfg.validate()?;
    let cams = level_cameras(depths, cams)?;
    let needed = cfg.min_consistent_views - 1;
    Ok((0..depths.len())
        .into_par_iter()
        .map(|i| {
            let map = &depths[i];
            let mut out = map.clone();
            for y in 0..map.height {
                for x in 0..map.width {
                    let idx = map.index(x, y);
                    if !map.valid[idx] || map.confidence[idx] < cfg.conf_min {
                        out.valid[idx] = false;
                        continue;
                    }
                    let pixel = Vector2::new(x as f64, y as f64);
                    let consistent = (0..depths.len())
                        .filter(|&j| j != i)
                        .filter(|&j| {
                            check_pixel(
                                (map, &cams[i]),
                                &pixel,
                                map.depth[idx],
                                (&depths[j], &cams[j]),
                                cfg,
                            )
                            .is_some()
                        })
                        .count();
                    out.valid[idx] = consistent >= needed;
                }
            }
            out
        })
        .collect())
}

/// Fuses filtered depth maps into one cloud. Every surviving pixel not yet
/// claimed by an earlier view emits one point on its own visual ray at the
/// mean of its depth and the round-tripped depths of its consistent matches;
/// the matched pixels are then claimed.
pub fn fuse(
    filtered: &[DepthMap],
    cams: &[CameraView],
    cfg: &FusionConfig,
    colors: Option<&[ColorImage]>,
) -> Result<PointCloud> {
    let cams = level_cameras(filtered, cams)?;
    if let Some(c) = colors {
        if c.len() != filtered.len() {
            return Err(Error::InvalidConfig("one color image per view required".into()));
        }
    }
    let mut claimed: Vec<Vec<bool>> = filtered.iter().map(|m| vec![false; m.valid.len()]).collect();
    let mut points = Vec::new();
    let mut point_colors = Vec::new();

    for (i, map) in filtered.iter().enumerate() {
        for y in 0..map.height {
            for x in 0..map.width {
                let idx = map.index(x, y);
                if !map.valid[idx] || claimed[i][idx] {
                    continue;
                }
                let pixel = Vector2::new(x as f64, y as f64);
                let d = map.depth[idx];
                let mut sum = d;
                let mut n = 1usize;
                for (j, other) in filtered.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let Some(m) = check_pixel((map, &cams[i]), &pixel, d, (other, &cams[j]), cfg)
                    else {
                        continue;
                    };
                    sum += m.depth;
                    n += 1;
                    let (qx, qy) = (m.pixel.x.round() as usize, m.pixel.y.round() as usize);
                    if qx < other.width && qy < other.height {
                        claimed[j][other.index(qx, qy)] = true;
                    }
                }
                claimed[i][idx] = true;
                let p = backproject(&cams[i], &pixel, sum / n as f64)?;
                points.push([p.x, p.y, p.z]);
                if let Some(c) = colors {
                    let img = &c[i];
                    let (cx, cy) = (
                        x * img.width / map.width.max(1),
                        y * img.height / map.height.max(1),
                    );
                    point_colors.push(img.get(cx.min(img.width - 1), cy.min(img.height - 1)));
                }
            }
        }
    }
    Ok(PointCloud {
        points,
        colors: colors.map(|_| point_colors),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudMetrics {
    pub accuracy: f64,
    pub completeness: f64,
    pub overall: f64,
}

/// Distance from every query point to its nearest reference point.
pub fn nearest_distances(query: &[[f64; 3]], reference: &[[f64; 3]]) -> Vec<f64> {
    let tree = KdTree::new(reference);
    query
        .par_iter()
        .map(|q| tree.nearest(q).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
        .collect()
}

/// Mean of the distances not exceeding `cap`; infinite when none qualify.
pub fn capped_mean(distances: &[f64], cap: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &d in distances {
        if d <= cap {
            sum += d;
            n += 1;
        }
    }
    if n == 0 {
        f64::INFINITY
    } else {
        sum / n as f64
    }
}

/// Accuracy (estimate to ground truth), completeness (ground truth to
/// estimate) and their mean. Distances above `dist_cap` are outliers.
pub fn cloud_metrics(est: &PointCloud, gt: &PointCloud, dist_cap: f64) -> Result<CloudMetrics> {
    if est.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let accuracy = capped_mean(&nearest_distances(&est.points, &gt.points), dist_cap);
    let completeness = capped_mean(&nearest_distances(&gt.points, &est.points), dist_cap);
    Ok(CloudMetrics {
        accuracy,
        completeness,
        overall: 0.5 * (accuracy + completeness),
    })
}
