//! Dataset directories.
//!
//! ```text
//! root/
//!   images/00000000.png     any 8- or 16-bit gray or RGB raster
//!   cams/00000000_cam.txt
//!   pair.txt                optional ranked source lists
//!   depths/00000000.pfm     optional ground truth
//! ```
//!
//! `pair.txt` holds the view count, then per view a line with its id and a
//! line `k id0 score0 id1 score1 ...` ranking its sources.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use nalgebra::Vector3;
use rayon::prelude::*;

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::fusion::PointCloud;
use crate::geometry::{backproject, CameraView};
use crate::io::camera::{load_camera, save_camera, CameraFile};
use crate::io::pfm::{read_pfm, write_pfm, PfmImage};
use crate::io::ply::write_ply;
use crate::pipeline::View;
use crate::raster::{ColorImage, Image};
use crate::synth::Scene;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetView {
    pub id: usize,
    pub image: PathBuf,
    pub camera: PathBuf,
    pub depth: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    /// Views sorted by id.
    pub views: Vec<DatasetView>,
    /// Ranked source ids per reference id.
    pub pairs: Option<BTreeMap<usize, Vec<usize>>>,
}

pub fn image_name(id: usize) -> String {
    format!("{id:08}.png")
}

pub fn camera_name(id: usize) -> String {
    format!("{id:08}_cam.txt")
}

pub fn depth_name(id: usize) -> String {
    format!("{id:08}.pfm")
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Dataset> {
        let image_dir = root.join("images");
        let entries = std::fs::read_dir(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
        let mut found = BTreeMap::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&image_dir, e))?.path();
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase());
            if !matches!(ext.as_deref(), Some(e) if IMAGE_EXTENSIONS.contains(&e)) {
                continue;
            }
            let Some(id) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<usize>().ok())
            else {
                continue;
            };
            if found.insert(id, path.clone()).is_some() {
                return Err(Error::Dataset(format!("two images share id {id}")));
            }
        }
        if found.is_empty() {
            return Err(Error::Dataset(format!(
                "no images found in {}",
                image_dir.display()
            )));
        }
        let mut views = Vec::with_capacity(found.len());
        for (id, image) in found {
            let camera = root.join("cams").join(camera_name(id));
            if !camera.is_file() {
                return Err(Error::Dataset(format!(
                    "view {id}: missing camera file {}",
                    camera.display()
                )));
            }
            let depth = root.join("depths").join(depth_name(id));
            views.push(DatasetView {
                id,
                image,
                camera,
                depth: depth.is_file().then_some(depth),
            });
        }
        let pair_path = root.join("pair.txt");
        let pairs = if pair_path.is_file() {
            let text = std::fs::read_to_string(&pair_path).map_err(|e| Error::io(&pair_path, e))?;
            let pairs = parse_pairs(&text, &pair_path)?;
            for (r, srcs) in &pairs {
                for id in std::iter::once(r).chain(srcs) {
                    if views.binary_search_by_key(id, |v| v.id).is_err() {
                        return Err(Error::Dataset(format!(
                            "pair list references unknown view {id}"
                        )));
                    }
                }
            }
            Some(pairs)
        } else {
            None
        };
        Ok(Dataset {
            root: root.to_path_buf(),
            views,
            pairs,
        })
    }

    pub fn ids(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.id).collect()
    }

    pub fn view(&self, id: usize) -> Result<&DatasetView> {
        self.views
            .binary_search_by_key(&id, |v| v.id)
            .map(|i| &self.views[i])
            .map_err(|_| Error::Dataset(format!("no view with id {id}")))
    }

    pub fn camera(&self, id: usize) -> Result<CameraView> {
        let v = self.view(id)?;
        let (w, h) = image::image_dimensions(&v.image).map_err(|e| Error::Image {
            path: v.image.clone(),
            source: e,
        })?;
        load_camera(&v.camera)?.view(w as usize, h as usize)
    }

    pub fn cameras(&self) -> Result<Vec<CameraView>> {
        self.views.par_iter().map(|v| self.camera(v.id)).collect()
    }

    pub fn load_view(&self, id: usize) -> Result<View> {
        let v = self.view(id)?;
        let image = load_gray_image(&v.image)?;
        let camera = load_camera(&v.camera)?.view(image.width(), image.height())?;
        Ok(View { image, camera })
    }

    pub fn ground_truth(&self, id: usize) -> Result<Option<DepthMap>> {
        match &self.view(id)?.depth {
            Some(p) => Ok(Some(read_pfm(p)?.to_depth(0))),
            None => Ok(None),
        }
    }

    /// Up to `count` source ids for `reference`: the pair list ranking when
    /// present, otherwise the views with the nearest optical centers.
    pub fn select_sources(&self, reference: usize, count: usize) -> Result<Vec<usize>> {
        self.view(reference)?;
        if let Some(pairs) = &self.pairs {
            if let Some(ranked) = pairs.get(&reference) {
                return Ok(ranked
                    .iter()
                    .copied()
                    .filter(|&id| id != reference)
                    .take(count)
                    .collect());
            }
        }
        let cams = self.cameras()?;
        let ids = self.ids();
        let here = cams[ids.iter().position(|&i| i == reference).unwrap()].center();
        let mut others: Vec<(f64, usize)> = ids
            .iter()
            .zip(&cams)
            .filter(|(&id, _)| id != reference)
            .map(|(&id, c)| ((c.center() - here).norm(), id))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(others.into_iter().take(count).map(|(_, id)| id).collect())
    }
}

pub fn parse_pairs(text: &str, path: &Path) -> Result<BTreeMap<usize, Vec<usize>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let bad = |n: usize, msg: String| Error::parse(path, n + 1, 1, msg);
    let (n0, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, 1, "empty pair list"))?;
    let count: usize = first
        .trim()
        .parse()
        .map_err(|_| bad(n0, format!("bad view count `{}`", first.trim())))?;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, text.lines().count() + 1, 1, "missing reference id"))?;
        let r: usize = line
            .trim()
            .parse()
            .map_err(|_| bad(n, format!("bad reference id `{}`", line.trim())))?;
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, text.lines().count() + 1, 1, "missing source list"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let k: usize = toks
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(n, "bad source count".into()))?;
        if toks.len() < 1 + 2 * k {
            return Err(bad(n, format!("expected {k} id/score pairs")));
        }
        let srcs = (0..k)
            .map(|i| {
                toks[1 + 2 * i]
                    .parse()
                    .map_err(|_| bad(n, format!("bad source id `{}`", toks[1 + 2 * i])))
            })
            .collect::<Result<Vec<usize>>>()?;
        out.insert(r, srcs);
    }
    Ok(out)
}

pub fn pairs_text(pairs: &BTreeMap<usize, Vec<(usize, f64)>>) -> String {
    let mut s = format!("{}\n", pairs.len());
    for (r, srcs) in pairs {
        s.push_str(&format!("{r}\n{}", srcs.len()));
        for (id, score) in srcs {
            s.push_str(&format!(" {id} {score}"));
        }
        s.push('\n');
    }
    s
}

fn decode(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Luma in `[0, 1]` with Rec. 601 weights at 16-bit precision.
pub fn load_gray_image(path: &Path) -> Result<Image> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => {
            g.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect()
        }
        other => other
            .into_rgb32f()
            .pixels()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect(),
    };
    Image::new(w, h, data)
}

pub fn load_color_image(path: &Path) -> Result<ColorImage> {
    let img = decode(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| p.0).collect();
    Ok(ColorImage {
        width: w,
        height: h,
        data,
    })
}

/// Writes `image` as a 16-bit gray PNG.
pub fn save_gray_image(image: &Image, path: &Path) -> Result<()> {
    let raw: Vec<u16> = image
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
        image.width() as u32,
        image.height() as u32,
        raw,
    )
    .expect("buffer matches dimensions");
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Renders every camera of `scene` and writes a dataset: images, cameras,
/// ground-truth depths, a pair list ranked by center distance, the scene
/// description and a ground-truth cloud back-projected from every view.
pub fn write_scene(scene: &Scene, root: &Path) -> Result<()> {
    for sub in ["images", "cams", "depths"] {
        create_dir(&root.join(sub))?;
    }
    let rendered = scene
        .cameras
        .par_iter()
        .map(|cam| scene.render(cam))
        .collect::<Result<Vec<_>>>()?;
    let mut gt_points = Vec::new();
    for (id, ((image, depth), cam)) in rendered.iter().zip(&scene.cameras).enumerate() {
        save_gray_image(image, &root.join("images").join(image_name(id)))?;
        save_camera(
            &CameraFile::from_view(cam),
            &root.join("cams").join(camera_name(id)),
        )?;
        write_pfm(
            &PfmImage::from_depth(depth),
            &root.join("depths").join(depth_name(id)),
        )?;
        gt_points.extend(cloud_from_depth(depth, cam)?);
    }

    let mut pairs = BTreeMap::new();
    for (r, cam) in scene.cameras.iter().enumerate() {
        let mut srcs: Vec<(usize, f64)> = scene
            .cameras
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != r)
            .map(|(s, c)| (s, (c.center() - cam.center()).norm()))
            .collect();
        srcs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        // higher score ranks first
        pairs.insert(r, srcs.into_iter().map(|(s, d)| (s, 1.0 / (1.0 + d))).collect());
    }
    let pair_path = root.join("pair.txt");
    std::fs::write(&pair_path, pairs_text(&pairs)).map_err(|e| Error::io(&pair_path, e))?;

    let spec_path = root.join("scene.json");
    let json = serde_json::to_string_pretty(&scene.spec)?;
    std::fs::write(&spec_path, json + "\n").map_err(|e| Error::io(&spec_path, e))?;
    write_ply(&PointCloud::new(gt_points), &root.join("gt.ply"))
}

/// World points of every valid pixel of a depth map.
pub fn cloud_from_depth(depth: &DepthMap, cam: &CameraView) -> Result<Vec<[f64; 3]>> {
    let cam = cam.at_level(depth.level);
    let mut out = Vec::new();
    for y in 0..depth.height {
        for x in 0..depth.width {
            let i = depth.index(x, y);
            if depth.valid[i] {
                let p: Vector3<f64> =
                    backproject(&cam, &nalgebra::Vector2::new(x as f64, y as f64), depth.depth[i])?;
                out.push([p.x, p.y, p.z]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_list() {
        let text = "2\n0\n2 1 9.5 2 3.0\n1\n1 0 9.5\n";
        let pairs = parse_pairs(text, Path::new("pair.txt")).unwrap();
        assert_eq!(pairs[&0], vec![1, 2]);
        assert_eq!(pairs[&1], vec![0]);
        assert!(parse_pairs("2\n0\n1 1 2\n", Path::new("p")).is_err());
        let back = pairs_text(&BTreeMap::from([(0, vec![(1, 9.5), (2, 3.0)])]));
        assert_eq!(back, "1\n0\n2 1 9.5 2 3\n");
    }
}
