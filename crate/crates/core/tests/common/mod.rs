#![allow(dead_code)]

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use pyramid_mvs::geometry::CameraView;
use pyramid_mvs::pipeline::View;
use pyramid_mvs::raster::Image;
use pyramid_mvs::synth::{Scene, SceneSpec};
use rand::Rng;

pub fn intrinsics(f: f64, cx: f64, cy: f64) -> Matrix3<f64> {
    Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0)
}

/// Reference at the origin looking down +z and a source translated by
/// `baseline` along its x axis; both share intrinsics.
pub fn rectified_pair(
    f: f64,
    baseline: f64,
    width: usize,
    height: usize,
    range: (f64, f64),
) -> (CameraView, CameraView) {
    let k = intrinsics(f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let reference = CameraView::new(
        k,
        Matrix3::identity(),
        Vector3::zeros(),
        width,
        height,
        range.0,
        range.1,
    )
    .unwrap();
    // center at (b, 0, 0): t = -R C
    let source = CameraView::new(
        k,
        Matrix3::identity(),
        Vector3::new(-baseline, 0.0, 0.0),
        width,
        height,
        range.0,
        range.1,
    )
    .unwrap();
    (reference, source)
}

pub fn random_rotation(rng: &mut impl Rng, max_angle: f64) -> Matrix3<f64> {
    let axis = Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis.normalize() };
    Rotation3::from_scaled_axis(axis * rng.gen_range(-max_angle..max_angle)).into_inner()
}

/// Random reference/source pair with a general reference pose, a source
/// rotated by up to ~15 degrees and displaced by up to one unit.
pub fn random_pair(rng: &mut impl Rng) -> (CameraView, CameraView) {
    let (w, h) = (rng.gen_range(64..1024usize), rng.gen_range(48..768usize));
    let f = rng.gen_range(80.0..1500.0);
    let k = intrinsics(
        f,
        w as f64 / 2.0 + rng.gen_range(-10.0..10.0),
        h as f64 / 2.0 + rng.gen_range(-10.0..10.0),
    );
    let r0 = random_rotation(rng, std::f64::consts::PI);
    let c0 = Vector3::new(
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-5.0..5.0),
    );
    let reference = CameraView::new(k, r0, -(r0 * c0), w, h, 2.0, 20.0).unwrap();
    let r1 = random_rotation(rng, 0.26) * r0;
    let dir = Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    let c1 = c0 + dir.normalize() * rng.gen_range(0.05..1.0);
    let k1 = intrinsics(
        f * rng.gen_range(0.8..1.25),
        w as f64 / 2.0,
        h as f64 / 2.0,
    );
    let source = CameraView::new(k1, r1, -(r1 * c1), w, h, 2.0, 20.0).unwrap();
    (reference, source)
}

pub fn random_pixel(rng: &mut impl Rng, cam: &CameraView) -> Vector2<f64> {
    Vector2::new(
        rng.gen_range(0.0..(cam.width - 1) as f64),
        rng.gen_range(0.0..(cam.height - 1) as f64),
    )
}

/// Renders every camera of a scene; returns views and ground-truth depths.
pub fn render_views(spec: &SceneSpec) -> (Scene, Vec<View>, Vec<pyramid_mvs::depth::DepthMap>) {
    let scene = Scene::build(spec).unwrap();
    let mut views = Vec::new();
    let mut gts = Vec::new();
    for cam in &scene.cameras {
        let (image, gt) = scene.render(cam).unwrap();
        views.push(View {
            image,
            camera: cam.clone(),
        });
        gts.push(gt);
    }
    (scene, views, gts)
}

pub fn add_noise(image: &Image, sigma: f64, rng: &mut impl Rng) -> Image {
    let normal = |rng: &mut dyn rand::RngCore| {
        let a: f64 = rng.gen::<f64>().max(1e-300);
        let b: f64 = rng.gen();
        (-2.0 * a.ln()).sqrt() * (std::f64::consts::TAU * b).cos()
    };
    let data = image.data().iter().map(|v| v + sigma * normal(rng)).collect();
    Image::new(image.width(), image.height(), data).unwrap()
}

/// Mean absolute error over pixels with valid ground truth inside `margin`.
pub fn interior_l1(
    est: &pyramid_mvs::depth::DepthMap,
    gt: &pyramid_mvs::depth::DepthMap,
    margin: usize,
) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for y in margin..gt.height - margin {
        for x in margin..gt.width - margin {
            let i = gt.index(x, y);
            if gt.valid[i] {
                sum += (est.depth[i] - gt.depth[i]).abs();
                n += 1;
            }
        }
    }
    sum / n as f64
}
