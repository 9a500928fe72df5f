//! Pinhole camera model and the plane-sweep geometry built on it.
//!
//! Poses are world-to-camera: a world point `X` has camera coordinates
//! `R * X + t`. Pixel `(u, v)` addresses the center of its cell, and a pyramid
//! level `l` scales focal lengths, skew and principal point by `1 / 2^l`.
//!
//! Two routes map a reference pixel at a hypothesised depth into a source
//! view: the plane-induced [`homography`] and the explicit
//! [`backproject`]-then-[`project`] path. They agree to floating point
//! precision and the tests hold them to it.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Projections closer to the camera plane than this are rejected.
pub const EPS_DEPTH: f64 = 1e-9;

/// Minimum distance (pixels) between a projected point and the epipole for
/// the epipolar search range to be considered well conditioned.
pub const DEFAULT_EPIPOLE_MARGIN_PX: f64 = 2.0;

/// Side length of the reference pixel grid used to average depth intervals.
const INTERVAL_GRID: usize = 5;

/// Below this many pixels of epipolar motion per unit depth a view pair
/// carries no depth information.
const MIN_EPIPOLAR_RATE: f64 = 1e-12;

const ROTATION_TOLERANCE: f64 = 1e-9;

/// Calibrated view: intrinsics, world-to-camera pose, raster size and the
/// depth range of the scene as seen from this camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub k: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub width: usize,
    pub height: usize,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl CameraView {
    pub fn new(
        k: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
        depth_min: f64,
        depth_max: f64,
    ) -> Result<Self> {
        let cam = CameraView {
            k,
            rotation,
            translation,
            width,
            height,
            depth_min,
            depth_max,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.k.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidCamera("non-finite parameter".into()));
        }
        let k = &self.k;
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 || k[(2, 2)] != 1.0 {
            return Err(Error::InvalidCamera(
                "intrinsic matrix must be upper triangular with K[2][2] = 1".into(),
            ));
        }
        if k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 {
            return Err(Error::InvalidCamera("focal lengths must be positive".into()));
        }
        let deviation = rotation_deviation(&self.rotation);
        if deviation > ROTATION_TOLERANCE {
            return Err(Error::InvalidCamera(format!(
                "rotation is not orthonormal (deviation {deviation:e})"
            )));
        }
        if (self.rotation.determinant() - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidCamera("rotation determinant must be +1".into()));
        }
        if !(self.depth_min > 0.0 && self.depth_min < self.depth_max && self.depth_max.is_finite())
        {
            return Err(Error::InvalidCamera(format!(
                "depth range [{}, {}] must satisfy 0 < d_min < d_max",
                self.depth_min, self.depth_max
            )));
        }
        Ok(())
    }

    /// The same camera observed at pyramid level `level`.
    pub fn at_level(&self, level: usize) -> CameraView {
        CameraView {
            k: scale_intrinsics(&self.k, level),
            width: level_extent(self.width, level),
            height: level_extent(self.height, level),
            ..self.clone()
        }
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// World-frame direction of the visual ray through `pixel`, scaled so its
    /// camera-frame depth component is one.
    pub fn ray_direction(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        self.rotation.transpose() * self.normalized(pixel)
    }

    /// Camera-frame ray `K^-1 (u, v, 1)`; its third component is always one.
    pub fn normalized(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        let k = &self.k;
        let y = (pixel.y - k[(1, 2)]) / k[(1, 1)];
        let x = (pixel.x - k[(0, 2)] - k[(0, 1)] * y) / k[(0, 0)];
        Vector3::new(x, y, 1.0)
    }

    /// Whether `pixel` lies inside the raster, allowing `border` pixels of
    /// slack beyond the outermost pixel centers.
    pub fn contains(&self, pixel: &Vector2<f64>, border: f64) -> bool {
        pixel.x >= -border
            && pixel.y >= -border
            && pixel.x <= (self.width as f64 - 1.0) + border
            && pixel.y <= (self.height as f64 - 1.0) + border
    }

    pub fn depth_range(&self) -> (f64, f64) {
        (self.depth_min, self.depth_max)
    }
}

/// Size of a raster dimension after `level` halvings (rounding up).
pub fn level_extent(extent: usize, level: usize) -> usize {
    let mut e = extent;
    for _ in 0..level {
        e = e.div_ceil(2);
    }
    e
}

/// Frobenius norm of `R^T R - I`.
pub fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Scales focal lengths, skew and principal point by `1 / 2^level`.
pub fn scale_intrinsics(k: &Matrix3<f64>, level: usize) -> Matrix3<f64> {
    let s = 0.5f64.powi(level as i32);
    let mut out = *k;
    for c in 0..3 {
        out[(0, c)] *= s;
        out[(1, c)] *= s;
    }
    out
}

/// A plane `n^T X = depth` in reference camera coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPlane {
    pub depth: f64,
    pub normal: Vector3<f64>,
}

impl SweepPlane {
    /// Plane orthogonal to the reference principal axis.
    pub fn fronto_parallel(depth: f64) -> Self {
        SweepPlane {
            depth,
            normal: Vector3::z(),
        }
    }
}

/// Subpixel location of a point in some view together with its depth in that
/// view's camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    pub lambda: f64,
}

/// World point on the visual ray of `pixel` at camera-frame depth `depth`.
pub fn backproject(cam: &CameraView, pixel: &Vector2<f64>, depth: f64) -> Result<Vector3<f64>> {
    if !(depth > 0.0) {
        return Err(Error::DegenerateDepth(depth));
    }
    Ok(cam.rotation.transpose() * (cam.normalized(pixel) * depth - cam.translation))
}

/// Projects a world point; `None` when the point is not in front of the camera.
///
/// Image bounds are not checked here, see [`project_in_image`].
pub fn project(cam: &CameraView, point: &Vector3<f64>) -> Option<Projection> {
    let xc = cam.rotation * point + cam.translation;
    project_camera_frame(&cam.k, &xc)
}

/// [`project`] restricted to pixels within `border` of the raster.
pub fn project_in_image(cam: &CameraView, point: &Vector3<f64>, border: f64) -> Option<Projection> {
    project(cam, point).filter(|p| cam.contains(&p.pixel, border))
}

fn project_camera_frame(k: &Matrix3<f64>, xc: &Vector3<f64>) -> Option<Projection> {
    let lambda = xc.z;
    if !(lambda > EPS_DEPTH) || !lambda.is_finite() {
        return None;
    }
    let h = k * xc;
    Some(Projection {
        pixel: Vector2::new(h.x / h.z, h.y / h.z),
        lambda,
    })
}

/// Relative pose taking reference camera coordinates to source camera
/// coordinates: `x_src = R_rel * x_ref + t_rel`.
fn relative_pose(reference: &CameraView, source: &CameraView) -> (Matrix3<f64>, Vector3<f64>) {
    let r_rel = source.rotation * reference.rotation.transpose();
    let t_rel = source.translation - r_rel * reference.translation;
    (r_rel, t_rel)
}

/// Plane-induced homography mapping reference pixels (homogeneous) at pyramid
/// `level` to source pixels, defined up to scale.
///
/// For a plane `n^T x = d` in reference camera coordinates the induced map is
/// `K_src (R_rel + t_rel n^T / d) K_ref^-1` with both intrinsics scaled to
/// `level`. The third component of `H x` is the source depth divided by the
/// reference depth, so it is positive exactly when the point is in front of
/// the source camera.
pub fn homography(
    reference: &CameraView,
    source: &CameraView,
    plane: &SweepPlane,
    level: usize,
) -> Result<Matrix3<f64>> {
    if !(plane.depth > 0.0) {
        return Err(Error::DegenerateDepth(plane.depth));
    }
    let k_ref = scale_intrinsics(&reference.k, level);
    let k_src = scale_intrinsics(&source.k, level);
    let k_ref_inv = k_ref
        .try_inverse()
        .ok_or_else(|| Error::InvalidCamera("singular intrinsics".into()))?;
    let (r_rel, t_rel) = relative_pose(reference, source);
    Ok(k_src * (r_rel + t_rel * plane.normal.transpose() / plane.depth) * k_ref_inv)
}

/// Applies a homography to a pixel. Returns the dehomogenised pixel and the
/// homogeneous scale, or `None` when the scale is not positive.
pub fn apply_homography(h: &Matrix3<f64>, pixel: &Vector2<f64>) -> Option<(Vector2<f64>, f64)> {
    let p = h * Vector3::new(pixel.x, pixel.y, 1.0);
    if !(p.z > 0.0) {
        return None;
    }
    Some((Vector2::new(p.x / p.z, p.y / p.z), p.z))
}

/// The image of one reference visual ray in a source view.
///
/// The source point at reference depth `d` is `a * d + b` (in source pixel
/// homogeneous coordinates), so both the position and the motion along the
/// epipolar line are available in closed form.
#[derive(Clone, Copy, Debug)]
pub struct EpipolarRay {
    a: Vector3<f64>,
    b: Vector3<f64>,
}

impl EpipolarRay {
    /// Both cameras must already be at the same pyramid level.
    pub fn new(reference: &CameraView, source: &CameraView, pixel: &Vector2<f64>) -> Self {
        let (r_rel, t_rel) = relative_pose(reference, source);
        EpipolarRay {
            a: source.k * (r_rel * reference.normalized(pixel)),
            b: source.k * t_rel,
        }
    }

    pub fn at(&self, depth: f64) -> Option<Projection> {
        let h = self.a * depth + self.b;
        if !(h.z > EPS_DEPTH) {
            return None;
        }
        Some(Projection {
            pixel: Vector2::new(h.x / h.z, h.y / h.z),
            lambda: h.z,
        })
    }

    /// Unnormalised epipolar direction: the derivative of the source pixel
    /// with respect to reference depth equals `direction() / lambda^2`.
    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(
            self.a.x * self.b.z - self.b.x * self.a.z,
            self.a.y * self.b.z - self.b.y * self.a.z,
        )
    }

    /// Depth increment beyond `depth` that moves the source projection by
    /// exactly `offset_px` pixels, if the ray travels that far before
    /// reaching its vanishing point.
    pub fn depth_step(&self, depth: f64, offset_px: f64) -> Option<f64> {
        let lambda = self.at(depth)?.lambda;
        let g = self.direction().norm();
        if g / (lambda * lambda) < MIN_EPIPOLAR_RATE {
            return None;
        }
        let denom = g - offset_px * self.a.z * lambda;
        if !(denom > 0.0) {
            return None;
        }
        Some(offset_px * lambda * lambda / denom)
    }

    fn rate(&self, depth: f64) -> Option<f64> {
        let lambda = self.at(depth)?.lambda;
        Some(self.direction().norm() / (lambda * lambda))
    }
}

/// Mean depth step that moves source projections by `offset_px`, averaged
/// over a 5x5 grid of reference pixels at mid-range depth and over all
/// source views. Cameras are given at full resolution.
pub fn depth_interval_for_offset(
    reference: &CameraView,
    sources: &[CameraView],
    level: usize,
    offset_px: f64,
) -> Result<f64> {
    if sources.is_empty() {
        return Err(Error::InvalidConfig("at least one source view is required".into()));
    }
    if !(offset_px > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "pixel offset must be positive, got {offset_px}"
        )));
    }
    let reference = reference.at_level(level);
    let sources: Vec<CameraView> = sources.iter().map(|s| s.at_level(level)).collect();
    let mid = 0.5 * (reference.depth_min + reference.depth_max);

    let mut sum = 0.0;
    let mut count = 0usize;
    let mut informative = false;
    for j in 0..INTERVAL_GRID {
        for i in 0..INTERVAL_GRID {
            let pixel = grid_pixel(&reference, i, j);
            for source in &sources {
                let ray = EpipolarRay::new(&reference, source, &pixel);
                match ray.rate(mid) {
                    Some(rate) if rate >= MIN_EPIPOLAR_RATE => informative = true,
                    _ => continue,
                }
                if let Some(step) = ray.depth_step(mid, offset_px) {
                    sum += step;
                    count += 1;
                }
            }
        }
    }
    if !informative || count == 0 {
        return Err(Error::DegenerateGeometry(
            "no source view moves along the epipolar line (pure rotation or zero baseline)",
        ));
    }
    Ok(sum / count as f64)
}

fn grid_pixel(cam: &CameraView, i: usize, j: usize) -> Vector2<f64> {
    let n = (INTERVAL_GRID - 1) as f64;
    Vector2::new(
        (cam.width as f64 - 1.0) * i as f64 / n,
        (cam.height as f64 - 1.0) * j as f64 / n,
    )
}

/// Number of uniformly spaced planes needed to cover the reference depth
/// range with steps of `interval`.
pub fn planes_for_interval(reference: &CameraView, interval: f64) -> usize {
    ((reference.depth_max - reference.depth_min) / interval).ceil().max(2.0) as usize
}

/// Depth range along the visual ray of `pixel` whose projections stay within
/// `offset_px` of the current estimate's projection in `source`.
///
/// Both cameras must be at the same pyramid level as `pixel`. The result is
/// clamped to the reference depth range.
pub fn depth_search_range(
    reference: &CameraView,
    source: &CameraView,
    pixel: &Vector2<f64>,
    d_current: f64,
    offset_px: f64,
) -> Result<(f64, f64)> {
    depth_search_range_with_margin(
        reference,
        source,
        pixel,
        d_current,
        offset_px,
        DEFAULT_EPIPOLE_MARGIN_PX,
    )
}

pub fn depth_search_range_with_margin(
    reference: &CameraView,
    source: &CameraView,
    pixel: &Vector2<f64>,
    d_current: f64,
    offset_px: f64,
    epipole_margin_px: f64,
) -> Result<(f64, f64)> {
    if !(d_current > 0.0) {
        return Err(Error::DegenerateDepth(d_current));
    }
    let ref_center = reference.center();
    let src_center = source.center();
    let baseline = ref_center - src_center;
    if baseline.norm() <= 1e-12 * (1.0 + ref_center.norm()) {
        return Err(Error::DegenerateGeometry("pure rotation between views"));
    }

    let ray = EpipolarRay::new(reference, source, pixel);
    let current = ray
        .at(d_current)
        .ok_or(Error::DegenerateGeometry("current point is behind the source camera"))?;
    // homogeneous epipole; a reference center behind the source still has one
    let epipole = source.k * (source.rotation * ref_center + source.translation);
    if epipole.z.abs() > 1e-12 * epipole.norm() {
        let e = Vector2::new(epipole.x / epipole.z, epipole.y / epipole.z);
        if (current.pixel - e).norm() < epipole_margin_px {
            return Err(Error::DegenerateGeometry("pixel projects next to the epipole"));
        }
    }
    let direction = ray.direction();
    let g = direction.norm();
    if g / (current.lambda * current.lambda) < MIN_EPIPOLAR_RATE {
        return Err(Error::DegenerateGeometry("no epipolar motion"));
    }
    let step = direction / g;

    let ref_dir = reference.ray_direction(pixel);
    let far = ray_depth_through(
        &ref_center,
        &ref_dir,
        source,
        &(current.pixel + step * offset_px),
    )
    .unwrap_or(f64::INFINITY);
    let near = ray_depth_through(
        &ref_center,
        &ref_dir,
        source,
        &(current.pixel - step * offset_px),
    )
    .unwrap_or(0.0);

    let lo = near.min(far).clamp(reference.depth_min, reference.depth_max);
    let hi = near.max(far).clamp(reference.depth_min, reference.depth_max);
    Ok((lo, hi))
}

/// Depth along the reference ray `origin + s * dir` of its closest approach
/// to the source ray through `src_pixel`. `None` for parallel rays or when
/// the closest approach is behind either camera.
fn ray_depth_through(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    source: &CameraView,
    src_pixel: &Vector2<f64>,
) -> Option<f64> {
    let src_origin = source.center();
    let src_dir = source.ray_direction(src_pixel);
    let w0 = origin - src_origin;
    let a = dir.dot(dir);
    let b = dir.dot(&src_dir);
    let c = src_dir.dot(&src_dir);
    let d = dir.dot(&w0);
    let e = src_dir.dot(&w0);
    let denom = a * c - b * b;
    if denom <= 1e-14 * a * c {
        return None;
    }
    let s = (b * e - c * d) / denom;
    let t = (a * e - b * d) / denom;
    if !(s > 0.0) || !(t > 0.0) || !s.is_finite() {
        return None;
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k(f: f64, cx: f64, cy: f64) -> Matrix3<f64> {
        Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0)
    }

    fn rectified_pair(f: f64, baseline: f64) -> (CameraView, CameraView) {
        let reference = CameraView::new(
            k(f, 80.0, 64.0),
            Matrix3::identity(),
            Vector3::zeros(),
            160,
            128,
            1.0,
            100.0,
        )
        .unwrap();
        // source center at (baseline, 0, 0): t = -R C
        let source = CameraView {
            translation: Vector3::new(-baseline, 0.0, 0.0),
            ..reference.clone()
        };
        (reference, source)
    }

    #[test]
    fn scale_intrinsics_examples() {
        let base = k(100.0, 50.0, 40.0);
        assert_eq!(scale_intrinsics(&base, 0), base);
        assert_eq!(scale_intrinsics(&base, 1), k(50.0, 25.0, 20.0));
        assert_eq!(scale_intrinsics(&k(320.0, 80.0, 64.0), 2), k(80.0, 20.0, 16.0));
    }

    #[test]
    fn scale_intrinsics_composes() {
        let mut base = k(317.3, 80.1, 63.7);
        base[(0, 1)] = 0.7;
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(
                    scale_intrinsics(&base, a + b),
                    scale_intrinsics(&scale_intrinsics(&base, a), b)
                );
            }
        }
    }

    #[test]
    fn canonical_backprojection() {
        let cam = CameraView::new(
            Matrix3::identity(),
            Matrix3::identity(),
            Vector3::zeros(),
            8,
            8,
            0.5,
            10.0,
        )
        .unwrap();
        let p = backproject(&cam, &Vector2::new(0.0, 0.0), 1.0).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 1.0));
        let p = backproject(&cam, &Vector2::new(2.0, 3.0), 2.0).unwrap();
        assert_eq!(p, Vector3::new(4.0, 6.0, 2.0));
        let proj = project(&cam, &Vector3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!(proj.pixel, Vector2::new(0.0, 0.0));
        assert_eq!(proj.lambda, 5.0);
        assert!(project(&cam, &Vector3::new(0.0, 0.0, -1.0)).is_none());
        assert!(project(&cam, &Vector3::new(1.0, 0.0, 0.0)).is_none());
        assert!(matches!(
            backproject(&cam, &Vector2::new(1.0, 1.0), 0.0),
            Err(Error::DegenerateDepth(_))
        ));
    }

    #[test]
    fn homography_to_self_is_identity() {
        let (reference, _) = rectified_pair(100.0, 1.0);
        for d in [0.5, 3.0, 77.0] {
            let h = homography(&reference, &reference, &SweepPlane::fronto_parallel(d), 1).unwrap();
            let h = h / h[(2, 2)];
            assert!((h - Matrix3::identity()).norm() < 1e-12);
        }
        assert!(matches!(
            homography(&reference, &reference, &SweepPlane::fronto_parallel(0.0), 0),
            Err(Error::DegenerateDepth(_))
        ));
    }

    #[test]
    fn homography_rectified_disparity() {
        let (f, b, d) = (120.0, 0.3, 7.0);
        let (reference, source) = rectified_pair(f, b);
        let h = homography(&reference, &source, &SweepPlane::fronto_parallel(d), 0).unwrap();
        let x = Vector2::new(33.0, 17.0);
        let (p, _) = apply_homography(&h, &x).unwrap();
        assert_relative_eq!(p.x - x.x, -f * b / d, epsilon = 1e-12);
        assert_relative_eq!(p.y, x.y, epsilon = 1e-12);
    }

    #[test]
    fn interval_rectified_closed_form() {
        let (f, b) = (100.0, 0.5);
        let (reference, source) = rectified_pair(f, b);
        let d = 0.5 * (reference.depth_min + reference.depth_max);
        let expected = 0.5 * d * d / (f * b - 0.5 * d);
        let got = depth_interval_for_offset(&reference, &[source], 0, 0.5).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-9);
    }

    #[test]
    fn interval_degenerate_without_baseline() {
        let (reference, _) = rectified_pair(100.0, 0.5);
        assert!(matches!(
            depth_interval_for_offset(&reference, std::slice::from_ref(&reference), 0, 0.5),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn search_range_rectified_closed_form() {
        // f * b = 100, d = 10: disparity 10, +-2 px gives disparities 12 and 8
        let (reference, source) = rectified_pair(100.0, 1.0);
        let (lo, hi) =
            depth_search_range(&reference, &source, &Vector2::new(60.0, 40.0), 10.0, 2.0).unwrap();
        assert_relative_eq!(lo, 100.0 / 12.0, max_relative = 1e-9);
        assert_relative_eq!(hi, 12.5, max_relative = 1e-9);
    }

    #[test]
    fn search_range_collapses_at_zero_offset() {
        let (reference, source) = rectified_pair(100.0, 1.0);
        let (lo, hi) =
            depth_search_range(&reference, &source, &Vector2::new(60.0, 40.0), 10.0, 1e-12)
                .unwrap();
        assert!((lo - 10.0).abs() < 1e-9 && (hi - 10.0).abs() < 1e-9);
    }

    #[test]
    fn search_range_rejects_pure_rotation() {
        let (reference, _) = rectified_pair(100.0, 1.0);
        let rotated = CameraView {
            rotation: *nalgebra::Rotation3::from_euler_angles(0.0, 0.1, 0.0).matrix(),
            ..reference.clone()
        };
        assert!(matches!(
            depth_search_range(&reference, &rotated, &Vector2::new(60.0, 40.0), 10.0, 2.0),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn search_range_rejects_epipole() {
        // source straight ahead of the reference: epipole at the principal point
        let (reference, _) = rectified_pair(100.0, 1.0);
        let forward = CameraView {
            translation: Vector3::new(0.0, 0.0, -1.0),
            ..reference.clone()
        };
        assert!(matches!(
            depth_search_range(&reference, &forward, &Vector2::new(80.5, 64.0), 10.0, 2.0),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn camera_validation() {
        let bad_rot = CameraView::new(
            Matrix3::identity(),
            Matrix3::identity() * 1.1,
            Vector3::zeros(),
            4,
            4,
            1.0,
            2.0,
        );
        assert!(matches!(bad_rot, Err(Error::InvalidCamera(_))));
        let bad_range = CameraView::new(
            Matrix3::identity(),
            Matrix3::identity(),
            Vector3::zeros(),
            4,
            4,
            2.0,
            1.0,
        );
        assert!(matches!(bad_range, Err(Error::InvalidCamera(_))));
        let reflection = CameraView::new(
            Matrix3::identity(),
            Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)),
            Vector3::zeros(),
            4,
            4,
            1.0,
            2.0,
        );
        assert!(matches!(reflection, Err(Error::InvalidCamera(_))));
    }

    #[test]
    fn level_extent_rounds_up() {
        assert_eq!(level_extent(160, 1), 80);
        assert_eq!(level_extent(1600, 4), 100);
        assert_eq!(level_extent(1152, 4), 72);
        assert_eq!(level_extent(81, 1), 41);
    }
}
