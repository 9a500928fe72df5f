//! Coarse-to-fine depth inference for one reference view.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{
    aggregate, build_coarse_volume, build_partial_volume, to_probability, CostVolume,
    HypothesisSet, ProbabilityVolume, RefineOptions, ViewSet,
};
use crate::depth::{soft_argmax_coarse, soft_argmax_residual, upsample_depth_to, DepthMap};
use crate::error::{Error, Result};
use crate::features::{extract_raw_features, FeatureMap, Standardization, DESCRIPTOR_PRESET};
use crate::geometry::{depth_interval_for_offset, level_extent, planes_for_interval, CameraView};
use crate::pyramid::{build_pyramid, ImagePyramid};
use crate::raster::Image;

/// Evaluation defaults: 96 planes at the coarsest level, 8 residual
/// hypotheses per refinement level, half-pixel sampling interval.
pub const DEFAULT_COARSE_PLANES: usize = 96;
pub const DEFAULT_REFINE_PLANES: usize = 8;
pub const DEFAULT_SAMPLE_OFFSET_PX: f64 = 0.5;
pub const DEFAULT_TEMPERATURE: f64 = 0.02;

/// Coarsest level size the auto level rule aims at.
const COARSE_TARGET: (f64, f64) = (80.0, 64.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Index of the coarsest level; `None` picks it from the image size.
    pub levels: Option<usize>,
    /// Plane count of the coarse sweep; `None` derives it from
    /// `sample_offset_px`.
    pub coarse_planes: Option<usize>,
    pub refine_planes: usize,
    /// Source-view pixel distance between neighbouring depth hypotheses.
    pub sample_offset_px: f64,
    /// Half-width in source pixels of the residual search; `None` means
    /// `refine_planes / 2 * sample_offset_px`.
    pub range_offset_px: Option<f64>,
    pub temperature: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            levels: None,
            coarse_planes: Some(DEFAULT_COARSE_PLANES),
            refine_planes: DEFAULT_REFINE_PLANES,
            sample_offset_px: DEFAULT_SAMPLE_OFFSET_PX,
            range_offset_px: None,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.refine_planes < 2 || !self.refine_planes.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "refine planes must be even and >= 2, got {}",
                self.refine_planes
            )));
        }
        if matches!(self.coarse_planes, Some(m) if m < 2) {
            return Err(Error::InvalidConfig("coarse planes must be >= 2".into()));
        }
        if !(self.sample_offset_px > 0.0) {
            return Err(Error::InvalidConfig("sample offset must be positive".into()));
        }
        if matches!(self.range_offset_px, Some(r) if !(r > 0.0)) {
            return Err(Error::InvalidConfig("range offset must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidTemperature(self.temperature));
        }
        Ok(())
    }

    pub fn effective_range_offset(&self) -> f64 {
        self.range_offset_px
            .unwrap_or(self.refine_planes as f64 / 2.0 * self.sample_offset_px)
    }

    pub fn top_level(&self, width: usize, height: usize) -> usize {
        self.levels.unwrap_or_else(|| auto_top_level(width, height))
    }
}

/// Coarsest level index for an image: the number of halvings that brings it
/// closest to 80x64 (in log scale), at least one.
/// `max(1, round(log2(min(W / 80, H / 64))))`.
pub fn auto_top_level(width: usize, height: usize) -> usize {
    let ratio = (width as f64 / COARSE_TARGET.0).min(height as f64 / COARSE_TARGET.1);
    (ratio.log2().round().max(1.0)) as usize
}

/// One calibrated grayscale image.
#[derive(Clone, Debug)]
pub struct View {
    pub image: Image,
    pub camera: CameraView,
}

/// Bookkeeping for one pyramid level of an inference run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    /// `"absolute"` for the full sweep, `"residual"` for refinement levels.
    pub hypothesis_kind: String,
    pub hypotheses_per_pixel: usize,
    /// Cost cells allocated for this level's volume (`width * height * M`).
    pub cost_cells: usize,
    /// Mean hypothesis spacing in scene units.
    pub mean_interval: f64,
}

#[derive(Clone, Debug)]
pub struct DepthInference {
    /// Estimated depth per level, index 0 being full resolution.
    pub levels: Vec<DepthMap>,
    /// Upsampled coarser estimate that seeded each refinement level;
    /// `None` at the coarsest level.
    pub upsampled: Vec<Option<DepthMap>>,
    pub reports: Vec<LevelReport>,
}

impl DepthInference {
    pub fn finest(&self) -> &DepthMap {
        &self.levels[0]
    }

    pub fn coarsest(&self) -> &DepthMap {
        self.levels.last().expect("at least one level")
    }
}

/// Features of every view at `level`, all standardized with the reference
/// view's statistics so corresponding points keep equal descriptors.
pub fn level_features(pyramids: &[ImagePyramid], level: usize) -> Vec<FeatureMap> {
    let mut raw: Vec<FeatureMap> = pyramids
        .par_iter()
        .map(|p| extract_raw_features(p.level(level)))
        .collect();
    let norm = Standardization::fit(&raw[0]);
    raw.par_iter_mut().for_each(|fm| norm.apply(fm));
    raw
}

/// Infers the reference depth map at every pyramid level: a full plane sweep
/// at the coarsest level, then residual refinement down to full resolution.
pub fn infer_depth(
    reference: &View,
    sources: &[View],
    config: &PipelineConfig,
) -> Result<DepthInference> {
    infer_depth_observed(reference, sources, config, |_, _| {})
}

/// [`infer_depth`], handing every level's aggregated cost volume and
/// probability volume to `observe`, coarsest first.
pub fn infer_depth_observed(
    reference: &View,
    sources: &[View],
    config: &PipelineConfig,
    mut observe: impl FnMut(&CostVolume, &ProbabilityVolume),
) -> Result<DepthInference> {
    config.validate()?;
    if sources.is_empty() {
        return Err(Error::InvalidConfig("at least one source view is required".into()));
    }
    let views: Vec<&View> = std::iter::once(reference).chain(sources).collect();
    for v in &views {
        if (v.image.width(), v.image.height()) != (v.camera.width, v.camera.height) {
            return Err(Error::InvalidConfig(format!(
                "image is {}x{} but camera expects {}x{}",
                v.image.width(),
                v.image.height(),
                v.camera.width,
                v.camera.height
            )));
        }
    }
    let (w, h) = (reference.camera.width, reference.camera.height);
    let top = config.top_level(w, h);
    let pyramids = views
        .par_iter()
        .map(|v| build_pyramid(&v.image, top))
        .collect::<Result<Vec<_>>>()?;
    let ref_cam = &reference.camera;
    let src_cams: Vec<CameraView> = sources.iter().map(|v| v.camera.clone()).collect();

    let mut levels: Vec<Option<DepthMap>> = vec![None; top + 1];
    let mut upsampled: Vec<Option<DepthMap>> = vec![None; top + 1];
    let mut reports = Vec::with_capacity(top + 1);

    // coarsest level: uniform sweep
    let features = level_features(&pyramids, top);
    let planes = match config.coarse_planes {
        Some(m) => m,
        None => {
            let interval =
                depth_interval_for_offset(ref_cam, &src_cams, top, config.sample_offset_px)?;
            planes_for_interval(ref_cam, interval)
        }
    };
    let set = ViewSet {
        reference: &features[0],
        sources: &features[1..],
        reference_camera: ref_cam,
        source_cameras: &src_cams,
    };
    let volume = aggregate(&build_coarse_volume(&set, planes, top)?);
    reports.push(report(&volume));
    let prob = to_probability(&volume, config.temperature)?;
    observe(&volume, &prob);
    let mut current = soft_argmax_coarse(&prob)?;
    debug!(
        "level {top}: {planes} planes, {} valid pixels",
        current.valid_count()
    );
    levels[top] = Some(current.clone());

    let range_offset = config.effective_range_offset();
    for level in (0..top).rev() {
        let features = level_features(&pyramids, level);
        let up = upsample_depth_to(&current, level_extent(w, level), level_extent(h, level));
        let step = depth_interval_for_offset(ref_cam, &src_cams, level, config.sample_offset_px)?;
        let options = RefineOptions {
            hypotheses: config.refine_planes,
            range_offset_px: range_offset,
            fallback_span: step * config.refine_planes as f64,
        };
        let set = ViewSet {
            reference: &features[0],
            sources: &features[1..],
            reference_camera: ref_cam,
            source_cameras: &src_cams,
        };
        let volume = aggregate(&build_partial_volume(&set, &up, &options, level)?);
        reports.push(report(&volume));
        let prob = to_probability(&volume, config.temperature)?;
        observe(&volume, &prob);
        current = soft_argmax_residual(&prob, &up, ref_cam.depth_range())?;
        debug!("level {level}: {} valid pixels", current.valid_count());
        levels[level] = Some(current.clone());
        upsampled[level] = Some(up);
    }

    reports.sort_by_key(|r| r.level);
    Ok(DepthInference {
        levels: levels.into_iter().map(|l| l.expect("every level filled")).collect(),
        upsampled,
        reports,
    })
}

fn report(volume: &CostVolume) -> LevelReport {
    let (kind, mean_interval) = match &volume.hypotheses {
        HypothesisSet::Absolute { depths } => (
            "absolute",
            (depths[depths.len() - 1] - depths[0]) / (depths.len() - 1) as f64,
        ),
        HypothesisSet::Residual { interval, .. } => (
            "residual",
            interval.iter().sum::<f64>() / interval.len() as f64,
        ),
    };
    LevelReport {
        level: volume.level,
        width: volume.width,
        height: volume.height,
        hypothesis_kind: kind.to_string(),
        hypotheses_per_pixel: volume.hypotheses_per_pixel(),
        cost_cells: volume.cells(),
        mean_interval,
    }
}

/// Metadata written next to the depth maps of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub reference: usize,
    pub sources: Vec<usize>,
    pub descriptor: String,
    pub temperature: f64,
    pub sample_offset_px: f64,
    pub range_offset_px: f64,
    pub levels: Vec<LevelReport>,
}

impl RunMetadata {
    pub fn new(
        reference: usize,
        sources: Vec<usize>,
        config: &PipelineConfig,
        inference: &DepthInference,
    ) -> Self {
        RunMetadata {
            reference,
            sources,
            descriptor: DESCRIPTOR_PRESET.to_string(),
            temperature: config.temperature,
            sample_offset_px: config.sample_offset_px,
            range_offset_px: config.effective_range_offset(),
            levels: inference.reports.clone(),
        }
    }
}
