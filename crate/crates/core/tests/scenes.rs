mod common;

use nalgebra::{Vector2, Vector3};
use pyramid_mvs::depth::DepthMap;
use pyramid_mvs::fusion::{cloud_metrics, consistency_filter, fuse, FusionConfig, PointCloud};
use pyramid_mvs::geometry::{backproject, project, project_in_image, rotation_deviation};
use pyramid_mvs::synth::{look_at, make_camera_ring, Lens, Scene, SceneKind, SceneSpec};
use pyramid_mvs::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lens() -> Lens {
    Lens {
        width: 160,
        height: 128,
        focal: 200.0,
        depth_min: 2.0,
        depth_max: 20.0,
    }
}

#[test]
fn ring_geometry() {
    let target = Vector3::new(0.3, -0.2, 9.0);
    let cams = make_camera_ring(6, 1.5, &target, &lens()).unwrap();
    for cam in &cams {
        assert!(rotation_deviation(&cam.rotation) < 1e-12);
        assert!((cam.rotation.determinant() - 1.0).abs() < 1e-12);
        let p = project(cam, &target).unwrap();
        let principal = Vector2::new(cam.k[(0, 2)], cam.k[(1, 2)]);
        assert!((p.pixel - principal).norm() < 1e-6);
    }
    let pair = make_camera_ring(2, 1.5, &target, &lens()).unwrap();
    assert!(((pair[0].center() - pair[1].center()).norm() - 3.0).abs() < 1e-12);
    assert!(make_camera_ring(1, 1.0, &target, &lens()).is_err());
    assert!(make_camera_ring(3, 0.0, &target, &lens()).is_err());
}

#[test]
fn sphere_depth_matches_closed_form() {
    let spec = SceneSpec::sphere(2, 3);
    let scene = Scene::build(&spec).unwrap();
    let SceneKind::Sphere { center, radius } = spec.kind else {
        unreachable!()
    };
    let c = Vector3::from(center);
    // one camera on the sphere's axis, one from the ring
    let axial = look_at(&Vector3::new(0.0, 0.0, 0.0), &c, &lens()).unwrap();
    for cam in [&axial, &scene.cameras[1]] {
        let (_, depth) = scene.render(cam).unwrap();
        let o = cam.center();
        let mut hits = 0;
        for y in 0..cam.height {
            for x in 0..cam.width {
                let dir = cam.ray_direction(&Vector2::new(x as f64, y as f64));
                let u = dir.normalize();
                let t_ca = (c - o).dot(&u);
                let d2 = (c - o).norm_squared() - t_ca * t_ca;
                let i = depth.index(x, y);
                if d2 > radius * radius {
                    assert!(!depth.valid[i]);
                    continue;
                }
                let distance = t_ca - (radius * radius - d2).sqrt();
                let expected = distance / dir.norm();
                assert!(depth.valid[i]);
                assert!((depth.depth[i] - expected).abs() < 1e-9, "{} vs {expected}", depth.depth[i]);
                hits += 1;
            }
        }
        assert!(hits > 1000);
    }
}

#[test]
fn plane_depth_is_constant_for_reference() {
    let spec = SceneSpec::plane(0, 3);
    let scene = Scene::build(&spec).unwrap();
    let (_, depth) = scene.render(&scene.cameras[0]).unwrap();
    assert_eq!(depth.valid_count(), depth.depth.len());
    assert!(depth.depth.iter().all(|d| (d - 10.0).abs() < 1e-9));
}

#[test]
fn rendering_is_deterministic() {
    let spec = SceneSpec::heightfield(4, 3);
    let a = Scene::build(&spec).unwrap();
    let b = Scene::build(&spec).unwrap();
    let cam = &a.cameras[1];
    assert_eq!(a.render(cam).unwrap(), b.render(cam).unwrap());
    assert_eq!(a.render(cam).unwrap().0, a.render(&cam.clone()).unwrap().0);
}

#[test]
fn gt_depth_round_trips_exactly() {
    let (scene, _, gts) = common::render_views(&SceneSpec::heightfield(6, 3));
    for (cam, gt) in scene.cameras.iter().zip(&gts) {
        for y in (0..gt.height).step_by(7) {
            for x in (0..gt.width).step_by(7) {
                let i = gt.index(x, y);
                if !gt.valid[i] {
                    continue;
                }
                let pixel = Vector2::new(x as f64, y as f64);
                let p = project(cam, &backproject(cam, &pixel, gt.depth[i]).unwrap()).unwrap();
                assert!((p.pixel - pixel).norm() < 1e-9);
                assert!((p.lambda - gt.depth[i]).abs() < 1e-9 * gt.depth[i]);
            }
        }
    }
}

#[test]
fn views_are_photo_consistent() {
    // smooth single-octave texture: bilinear error stays below the tolerance
    let spec = SceneSpec {
        texture_frequency: 0.25,
        texture_octaves: 1,
        ..SceneSpec::heightfield(8, 5)
    };
    let (scene, views, gts) = common::render_views(&spec);
    let reference = &scene.cameras[0];
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for j in 1..views.len() {
        let cam = &scene.cameras[j];
        for y in 0..gts[0].height {
            for x in 0..gts[0].width {
                let i = gts[0].index(x, y);
                if !gts[0].valid[i] {
                    continue;
                }
                let point = backproject(reference, &Vector2::new(x as f64, y as f64), gts[0].depth[i]).unwrap();
                let Some(p) = project_in_image(cam, &point, 0.0) else {
                    continue;
                };
                // visible when the other view's surface is at this depth
                let (px, py) = (p.pixel.x.round() as usize, p.pixel.y.round() as usize);
                let k = gts[j].index(px, py);
                if !gts[j].valid[k] || (gts[j].depth[k] - p.lambda).abs() > 0.05 {
                    continue;
                }
                let a = views[0].image.get(x, y);
                let b = views[j].image.bilinear(p.pixel.x, p.pixel.y).unwrap();
                worst = worst.max((a - b).abs());
                checked += 1;
            }
        }
    }
    assert!(checked > 10_000);
    assert!(worst < 1e-3, "worst {worst}");
}

#[test]
fn missing_scene_reports_no_intersection() {
    let spec = SceneSpec::sphere(0, 3);
    let scene = Scene::build(&spec).unwrap();
    let away = look_at(&Vector3::new(0.0, 0.0, 0.0), &Vector3::new(0.0, 0.0, -10.0), &lens()).unwrap();
    assert!(matches!(scene.render(&away), Err(Error::NoIntersection)));
}

fn perfect_maps(spec: &SceneSpec) -> (Scene, Vec<DepthMap>) {
    let (scene, _, gts) = common::render_views(spec);
    (scene, gts)
}

#[test]
fn perfect_depths_survive_filtering() {
    let (scene, gts) = perfect_maps(&SceneSpec::sphere(1, 5));
    let cfg = FusionConfig::default();
    let filtered = consistency_filter(&gts, &scene.cameras, &cfg).unwrap();
    // pixels seen by at least min_consistent_views - 1 other views
    let (mut visible, mut kept) = (0usize, 0usize);
    for (i, (gt, cam)) in gts.iter().zip(&scene.cameras).enumerate() {
        for y in 0..gt.height {
            for x in 0..gt.width {
                let idx = gt.index(x, y);
                if !gt.valid[idx] {
                    continue;
                }
                let point = backproject(cam, &Vector2::new(x as f64, y as f64), gt.depth[idx]).unwrap();
                let seen = (0..gts.len())
                    .filter(|&j| j != i)
                    .filter(|&j| {
                        project_in_image(&scene.cameras[j], &point, 0.0).is_some_and(|p| {
                            let k = gts[j].index(p.pixel.x.round() as usize, p.pixel.y.round() as usize);
                            gts[j].valid[k] && (gts[j].depth[k] - p.lambda).abs() < 0.01 * p.lambda
                        })
                    })
                    .count();
                if seen + 1 >= cfg.min_consistent_views {
                    visible += 1;
                    kept += usize::from(filtered[i].valid[idx]);
                }
            }
        }
    }
    let share = kept as f64 / visible as f64;
    assert!(share >= 0.99, "{kept} of {visible}");
}

#[test]
fn disjoint_views_have_no_survivors() {
    let (scene, gts) = perfect_maps(&SceneSpec::plane(0, 3));
    // push the other cameras far away so nothing projects into them
    let mut cams = scene.cameras.clone();
    for cam in cams.iter_mut().skip(1) {
        cam.translation += Vector3::new(1000.0, 0.0, 0.0);
    }
    let filtered = consistency_filter(&gts, &cams, &FusionConfig::default()).unwrap();
    assert!(filtered.iter().all(|m| m.valid_count() == 0));
}

#[test]
fn perturbed_view_fails_depth_gate() {
    let (scene, mut gts) = perfect_maps(&SceneSpec::plane(3, 5));
    gts[2].depth.iter_mut().for_each(|d| *d *= 1.05);
    let filtered = consistency_filter(&gts, &scene.cameras, &FusionConfig::default()).unwrap();
    assert_eq!(filtered[2].valid_count(), 0);
    assert!(filtered[0].valid_count() > 0);
}

#[test]
fn filtering_is_monotone() {
    let (scene, mut gts) = perfect_maps(&SceneSpec::heightfield(2, 5));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in gts.iter_mut() {
        for (d, c) in m.depth.iter_mut().zip(m.confidence.iter_mut()) {
            *d *= 1.0 + rng.gen_range(-0.01..0.01);
            *c = rng.gen_range(0.5..1.0);
        }
    }
    let loose = FusionConfig {
        conf_min: 0.6,
        reproj_px_max: 2.0,
        rel_depth_max: 0.02,
        min_consistent_views: 2,
    };
    let base = consistency_filter(&gts, &scene.cameras, &loose).unwrap();
    let tighter = [
        FusionConfig { conf_min: 0.8, ..loose },
        FusionConfig { reproj_px_max: 0.5, ..loose },
        FusionConfig { rel_depth_max: 0.005, ..loose },
        FusionConfig { min_consistent_views: 4, ..loose },
    ];
    let mut removed = 0;
    for cfg in tighter {
        let t = consistency_filter(&gts, &scene.cameras, &cfg).unwrap();
        for (a, b) in base.iter().zip(&t) {
            for (va, vb) in a.valid.iter().zip(&b.valid) {
                assert!(!vb || *va, "{cfg:?} added a survivor");
                removed += usize::from(*va && !vb);
            }
        }
    }
    assert!(removed > 0);
}

#[test]
fn fused_points_reproject_to_their_pixels() {
    let (scene, gts) = perfect_maps(&SceneSpec::heightfield(5, 5));
    let cfg = FusionConfig::default();
    let filtered = consistency_filter(&gts, &scene.cameras, &cfg).unwrap();
    let cloud = fuse(&filtered, &scene.cameras, &cfg, None).unwrap();
    assert!(!cloud.is_empty());
    // points are emitted view by view in raster order of surviving,
    // unclaimed pixels; every one must lie on some surviving pixel's ray
    let mut worst: f64 = 0.0;
    for p in &cloud.points {
        let point = Vector3::from(*p);
        let best = scene
            .cameras
            .iter()
            .zip(&filtered)
            .filter_map(|(cam, m)| {
                let pr = project(cam, &point)?;
                let (x, y) = (pr.pixel.x.round(), pr.pixel.y.round());
                if x < 0.0 || y < 0.0 || x as usize >= m.width || y as usize >= m.height {
                    return None;
                }
                let idx = m.index(x as usize, y as usize);
                m.valid[idx].then(|| (pr.pixel - Vector2::new(x, y)).norm())
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    assert!(worst < 1e-6, "worst {worst}");
}

fn brute_nearest(query: &[[f64; 3]], reference: &[[f64; 3]]) -> Vec<f64> {
    query
        .iter()
        .map(|q| {
            reference
                .iter()
                .map(|r| (q[0] - r[0]).powi(2) + (q[1] - r[1]).powi(2) + (q[2] - r[2]).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

fn brute_mean(d: &[f64], cap: f64) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for &v in d {
        if v <= cap {
            s += v;
            n += 1;
        }
    }
    s / n as f64
}

fn random_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)])
            .collect(),
    )
}

#[test]
fn metrics_equal_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..3 {
        let a = random_cloud(&mut rng, 1000);
        let b = random_cloud(&mut rng, 1000);
        let cap = 0.8;
        let m = cloud_metrics(&a, &b, cap).unwrap();
        let acc = brute_mean(&brute_nearest(&a.points, &b.points), cap);
        let comp = brute_mean(&brute_nearest(&b.points, &a.points), cap);
        assert_eq!(m.accuracy, acc);
        assert_eq!(m.completeness, comp);
        assert_eq!(m.overall, 0.5 * (acc + comp));
        let swapped = cloud_metrics(&b, &a, cap).unwrap();
        assert_eq!(m.accuracy, swapped.completeness);
        assert_eq!(m.completeness, swapped.accuracy);
    }
}

#[test]
fn translated_cloud_scores_its_offset() {
    // dense grid on a plane, shifted along the normal by delta
    let mut points = Vec::new();
    for i in 0..120 {
        for j in 0..120 {
            points.push([i as f64 * 0.01, j as f64 * 0.01, 0.0]);
        }
    }
    let gt = PointCloud::new(points.clone());
    let delta = 0.05;
    let shifted = PointCloud::new(points.iter().map(|p| [p[0] + 0.002, p[1], p[2] + delta]).collect());
    let m = cloud_metrics(&shifted, &gt, 20.0).unwrap();
    assert!((m.accuracy - delta).abs() < 0.1 * delta, "{m:?}");
    assert!((m.completeness - delta).abs() < 0.1 * delta, "{m:?}");
}
