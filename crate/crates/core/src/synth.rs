//! Ray-cast synthetic scenes with analytically known depth.
//!
//! Surfaces carry a seeded fractal value-noise texture defined on world
//! coordinates, so every view of a surface point sees the same intensity.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::geometry::CameraView;
use crate::raster::Image;

const LATTICE: usize = 256;

/// Smooth 3-D value noise in `[0, 1]` over a seeded hashed lattice.
#[derive(Clone, Debug)]
pub struct ValueNoise {
    perm: Vec<u8>,
    values: Vec<f64>,
}

impl ValueNoise {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<u8> = (0..LATTICE).map(|i| i as u8).collect();
        for i in (1..LATTICE).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let values = (0..LATTICE).map(|_| rng.gen::<f64>()).collect();
        ValueNoise { perm, values }
    }

    #[inline]
    fn lattice(&self, x: i64, y: i64, z: i64) -> f64 {
        let p = |v: i64| self.perm[(v & 255) as usize] as i64;
        self.values[p(p(p(x) + y) + z) as usize]
    }

    pub fn sample(&self, p: &Vector3<f64>) -> f64 {
        let (fx, fy, fz) = (p.x.floor(), p.y.floor(), p.z.floor());
        let (x0, y0, z0) = (fx as i64, fy as i64, fz as i64);
        let (tx, ty, tz) = (fade(p.x - fx), fade(p.y - fy), fade(p.z - fz));
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let mut c = [0.0; 8];
        for (i, v) in c.iter_mut().enumerate() {
            let (dx, dy, dz) = ((i & 1) as i64, ((i >> 1) & 1) as i64, ((i >> 2) & 1) as i64);
            *v = self.lattice(x0 + dx, y0 + dy, z0 + dz);
        }
        let x00 = lerp(c[0], c[1], tx);
        let x10 = lerp(c[2], c[3], tx);
        let x01 = lerp(c[4], c[5], tx);
        let x11 = lerp(c[6], c[7], tx);
        lerp(lerp(x00, x10, ty), lerp(x01, x11, ty), tz)
    }
}

/// Quintic smoothstep: C2 continuous interpolation weights.
#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Fractal sum of value-noise octaves, normalised to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Texture {
    noise: ValueNoise,
    frequency: f64,
    octaves: usize,
}

impl Texture {
    pub fn new(seed: u64, frequency: f64, octaves: usize) -> Self {
        Texture {
            noise: ValueNoise::new(seed),
            frequency,
            octaves: octaves.max(1),
        }
    }

    pub fn sample(&self, p: &Vector3<f64>) -> f64 {
        let mut sum = 0.0;
        let mut norm = 0.0;
        let mut amp = 1.0;
        let mut freq = self.frequency;
        for o in 0..self.octaves {
            // per-octave offset decorrelates the lattices
            let shift = Vector3::repeat(17.31 * o as f64);
            sum += amp * self.noise.sample(&(p * freq + shift));
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        sum / norm
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SceneKind {
    /// Plane orthogonal to the first camera's principal axis at this depth.
    Plane { depth: f64 },
    Sphere { center: [f64; 3], radius: f64 },
    /// Surface `z = base + amplitude * (2 n(x, y) - 1)` for smooth noise `n`.
    Heightfield {
        seed: u64,
        amplitude: f64,
        base: f64,
        frequency: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub texture_seed: u64,
    pub texture_frequency: f64,
    pub texture_octaves: usize,
    pub cameras: usize,
    pub ring_radius: f64,
    pub target: [f64; 3],
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl SceneSpec {
    fn base(kind: SceneKind, seed: u64, cameras: usize) -> Self {
        SceneSpec {
            kind,
            texture_seed: seed,
            texture_frequency: 4.0,
            texture_octaves: 3,
            cameras,
            ring_radius: 1.0,
            target: [0.0, 0.0, 10.0],
            width: 160,
            height: 128,
            focal: 200.0,
            depth_min: 5.0,
            depth_max: 20.0,
        }
    }

    /// Textured plane at depth 10 seen from a ring of cameras 10 units away.
    pub fn plane(seed: u64, cameras: usize) -> Self {
        Self::base(SceneKind::Plane { depth: 10.0 }, seed, cameras)
    }

    /// Sphere of radius 6 filling the view of every camera; the cameras
    /// converge near its front surface.
    pub fn sphere(seed: u64, cameras: usize) -> Self {
        SceneSpec {
            target: [0.0, 0.0, 4.5],
            depth_min: 2.5,
            depth_max: 10.0,
            texture_frequency: 8.0,
            ..Self::base(
                SceneKind::Sphere {
                    center: [0.0, 0.0, 10.0],
                    radius: 6.0,
                },
                seed,
                cameras,
            )
        }
    }

    /// Rolling terrain around depth 10.
    pub fn heightfield(seed: u64, cameras: usize) -> Self {
        SceneSpec {
            depth_min: 6.0,
            depth_max: 16.0,
            ..Self::base(
                SceneKind::Heightfield {
                    seed: seed.wrapping_add(0x5eed),
                    amplitude: 1.0,
                    base: 10.0,
                    frequency: 0.35,
                },
                seed,
                cameras,
            )
        }
    }
}

/// Intrinsics and depth range shared by the cameras of a ring.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lens {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl Lens {
    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.focal,
            0.0,
            (self.width as f64 - 1.0) / 2.0,
            0.0,
            self.focal,
            (self.height as f64 - 1.0) / 2.0,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// Camera at `center` with its principal axis through `target`; image `y`
/// points along world `+y` as far as the viewing direction allows.
pub fn look_at(center: &Vector3<f64>, target: &Vector3<f64>, lens: &Lens) -> Result<CameraView> {
    let z = (target - center).normalize();
    let x = Vector3::y().cross(&z);
    if x.norm() < 1e-9 {
        return Err(Error::InvalidCamera("viewing direction parallel to up".into()));
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    CameraView::new(
        lens.intrinsics(),
        rotation,
        -(rotation * center),
        lens.width,
        lens.height,
        lens.depth_min,
        lens.depth_max,
    )
}

/// `count` cameras evenly spaced on a circle of `radius` around the world
/// origin in the `z = 0` plane, all looking at `target`.
pub fn make_camera_ring(
    count: usize,
    radius: f64,
    target: &Vector3<f64>,
    lens: &Lens,
) -> Result<Vec<CameraView>> {
    if count < 2 || !(radius > 0.0) {
        return Err(Error::InvalidConfig(
            "camera ring needs at least 2 cameras and a positive radius".into(),
        ));
    }
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / count as f64;
            let center = Vector3::new(radius * theta.cos(), radius * theta.sin(), 0.0);
            look_at(&center, target, lens)
        })
        .collect()
}

#[derive(Clone, Debug)]
enum Surface {
    Plane {
        point: Vector3<f64>,
        normal: Vector3<f64>,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    Heightfield {
        noise: ValueNoise,
        amplitude: f64,
        base: f64,
        frequency: f64,
    },
}

impl Surface {
    /// Smallest positive ray parameter of a hit.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match self {
            Surface::Plane { point, normal } => {
                let denom = normal.dot(dir);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = normal.dot(&(point - origin)) / denom;
                (t > 0.0).then_some(t)
            }
            Surface::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.dot(dir);
                let half_b = oc.dot(dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // stable pair of roots
                let q = -half_b - half_b.signum() * sq;
                let (r1, r2) = (q / a, c / q);
                let (near, far) = (r1.min(r2), r1.max(r2));
                if near > 0.0 {
                    Some(near)
                } else if far > 0.0 {
                    Some(far)
                } else {
                    None
                }
            }
            Surface::Heightfield { amplitude, base, .. } => {
                // march through the slab the surface lives in, then bisect
                if dir.z <= 0.0 {
                    return None;
                }
                let lo_z = base - amplitude - 1e-3;
                let hi_z = base + amplitude + 1e-3;
                let t0 = ((lo_z - origin.z) / dir.z).max(0.0);
                let t1 = (hi_z - origin.z) / dir.z;
                if t1 <= t0 {
                    return None;
                }
                let g = |t: f64| {
                    let p = origin + dir * t;
                    p.z - self.height(p.x, p.y)
                };
                let steps = 256;
                let dt = (t1 - t0) / steps as f64;
                let mut a = t0;
                let mut ga = g(a);
                for i in 1..=steps {
                    let b = t0 + dt * i as f64;
                    let gb = g(b);
                    if ga < 0.0 && gb >= 0.0 {
                        let (mut lo, mut hi) = (a, b);
                        for _ in 0..80 {
                            let mid = 0.5 * (lo + hi);
                            if g(mid) < 0.0 {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        return Some(0.5 * (lo + hi));
                    }
                    a = b;
                    ga = gb;
                }
                None
            }
        }
    }

    fn height(&self, x: f64, y: f64) -> f64 {
        match self {
            Surface::Heightfield {
                noise,
                amplitude,
                base,
                frequency,
            } => {
                let n = noise.sample(&Vector3::new(x * frequency, y * frequency, 0.5));
                base + amplitude * (2.0 * n - 1.0)
            }
            _ => unreachable!("height is only defined for heightfields"),
        }
    }
}

/// A built scene: surface, texture and camera ring.
#[derive(Clone, Debug)]
pub struct Scene {
    pub spec: SceneSpec,
    pub cameras: Vec<CameraView>,
    surface: Surface,
    texture: Texture,
}

impl Scene {
    pub fn build(spec: &SceneSpec) -> Result<Scene> {
        let lens = Lens {
            width: spec.width,
            height: spec.height,
            focal: spec.focal,
            depth_min: spec.depth_min,
            depth_max: spec.depth_max,
        };
        let target = Vector3::from(spec.target);
        let cameras = make_camera_ring(spec.cameras, spec.ring_radius, &target, &lens)?;
        let surface = match &spec.kind {
            SceneKind::Plane { depth } => {
                let reference = &cameras[0];
                let normal = reference.rotation.row(2).transpose();
                Surface::Plane {
                    point: reference.center() + normal * *depth,
                    normal,
                }
            }
            SceneKind::Sphere { center, radius } => Surface::Sphere {
                center: Vector3::from(*center),
                radius: *radius,
            },
            SceneKind::Heightfield {
                seed,
                amplitude,
                base,
                frequency,
            } => Surface::Heightfield {
                noise: ValueNoise::new(*seed),
                amplitude: *amplitude,
                base: *base,
                frequency: *frequency,
            },
        };
        Ok(Scene {
            spec: spec.clone(),
            cameras,
            surface,
            texture: Texture::new(spec.texture_seed, spec.texture_frequency, spec.texture_octaves),
        })
    }

    /// Texture intensity at a world point.
    pub fn texture_at(&self, p: &Vector3<f64>) -> f64 {
        self.texture.sample(p)
    }

    /// Ray-casts every pixel center of `cam`. Misses are black and invalid.
    pub fn render(&self, cam: &CameraView) -> Result<(Image, DepthMap)> {
        let (w, h) = (cam.width, cam.height);
        let origin = cam.center();
        let rows: Vec<Vec<Option<(f64, f64)>>> = (0..h)
            .into_par_iter()
            .map(|y| {
                (0..w)
                    .map(|x| {
                        let dir = cam.ray_direction(&Vector2::new(x as f64, y as f64));
                        // dir has unit camera-frame depth, so t is the depth
                        self.surface.intersect(&origin, &dir).map(|t| {
                            let p = origin + dir * t;
                            (self.texture.sample(&p), t)
                        })
                    })
                    .collect()
            })
            .collect();

        let mut intensity = Vec::with_capacity(w * h);
        let mut gt = DepthMap::new(w, h, 0);
        for (i, hit) in rows.into_iter().flatten().enumerate() {
            match hit {
                Some((v, d)) => {
                    intensity.push(v);
                    gt.depth[i] = d;
                    gt.valid[i] = true;
                    gt.confidence[i] = 1.0;
                }
                None => intensity.push(0.0),
            }
        }
        if gt.valid_count() == 0 {
            return Err(Error::NoIntersection);
        }
        Ok((Image::new(w, h, intensity)?, gt))
    }
}
