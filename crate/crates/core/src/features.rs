//! Fixed 16-channel dense descriptor.
//!
//! Channel layout:
//!
//! | channels | content                                                     |
//! |----------|-------------------------------------------------------------|
//! | 0        | intensity                                                   |
//! | 1, 2     | central differences along x and y                           |
//! | 3..6     | difference of Gaussians at sigma pairs (0.8, 1.6), (1.6, 3.2), (3.2, 6.4) |
//! | 6..14    | soft census: `tanh` of signed differences to 8 neighbors at radius 2 |
//! | 14       | 3x3 local standard deviation                                |
//! | 15       | 4-neighbor Laplacian, truncated                             |
//!
//! Every channel is standardized to zero mean and unit variance so the
//! variance cost weighs channels comparably.

use nalgebra::Vector2;

use crate::pyramid::separable_filter;
use crate::raster::{BilinearTaps, Image};

pub const FEATURE_CHANNELS: usize = 16;

/// Name recorded in run metadata for this channel mix.
pub const DESCRIPTOR_PRESET: &str = "classic16";

const DOG_SIGMAS: [(f64, f64); 3] = [(0.8, 1.6), (1.6, 3.2), (3.2, 6.4)];
const CENSUS_RADIUS: isize = 2;
const CENSUS_SCALE: f64 = 0.05;
const LAPLACIAN_CLIP: f64 = 0.25;
const MIN_VARIANCE: f64 = 1e-12;

const CENSUS_OFFSETS: [(isize, isize); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Pixel-major feature raster: the `channels` values of a pixel are
/// contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    /// Interleaves equally sized channel rasters.
    pub fn from_channels(channels: &[Image]) -> Self {
        let (width, height) = (channels[0].width(), channels[0].height());
        let f = channels.len();
        let mut data = vec![0.0; width * height * f];
        for (c, ch) in channels.iter().enumerate() {
            assert_eq!((ch.width(), ch.height()), (width, height));
            for (i, v) in ch.data().iter().enumerate() {
                data[i * f + c] = *v;
            }
        }
        FeatureMap {
            width,
            height,
            channels: f,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn channel(&self, c: usize) -> Image {
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px[c])
            .collect();
        Image::new(self.width, self.height, data).expect("consistent size")
    }

    /// Bilinear sample written into `out`; returns `false` (and zeroes `out`)
    /// outside `[0, W-1] x [0, H-1]`.
    #[inline]
    pub fn sample_into(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        let Some(taps) = BilinearTaps::new(x, y, self.width, self.height) else {
            out.fill(0.0);
            return false;
        };
        let f = self.channels;
        out.fill(0.0);
        for (idx, w) in taps.index.iter().zip(taps.weight) {
            let px = &self.data[idx * f..idx * f + f];
            for (o, v) in out.iter_mut().zip(px) {
                *o += w * v;
            }
        }
        true
    }
}

/// Bilinearly interpolated feature vector at a subpixel location, or `None`
/// when the location is outside the map.
pub fn sample_feature(fm: &FeatureMap, pixel: &Vector2<f64>) -> Option<Vec<f64>> {
    let mut out = vec![0.0; fm.channels];
    fm.sample_into(pixel.x, pixel.y, &mut out).then_some(out)
}

/// Per-channel affine normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Standardization {
    /// Mean and standard deviation of every channel over the whole map.
    /// Channels with variance below 1e-12 are mapped to zero.
    pub fn fit(fm: &FeatureMap) -> Self {
        let f = fm.channels;
        let n = (fm.width * fm.height) as f64;
        let mut mean = vec![0.0; f];
        for px in fm.data.chunks_exact(f) {
            for (m, v) in mean.iter_mut().zip(px) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; f];
        for px in fm.data.chunks_exact(f) {
            for c in 0..f {
                let d = px[c] - mean[c];
                var[c] += d * d;
            }
        }
        let inv_std = var
            .iter()
            .map(|v| {
                let v = v / n;
                if v < MIN_VARIANCE {
                    0.0
                } else {
                    1.0 / v.sqrt()
                }
            })
            .collect();
        Standardization { mean, inv_std }
    }

    pub fn apply(&self, fm: &mut FeatureMap) {
        let f = fm.channels;
        for px in fm.data.chunks_exact_mut(f) {
            for c in 0..f {
                px[c] = (px[c] - self.mean[c]) * self.inv_std[c];
            }
        }
    }
}

/// Descriptor channels before standardization.
pub fn extract_raw_features(image: &Image) -> FeatureMap {
    let (w, h) = (image.width(), image.height());
    let mut channels = Vec::with_capacity(FEATURE_CHANNELS);
    channels.push(image.clone());

    channels.push(Image::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        0.5 * (image.get_clamped(x + 1, y) - image.get_clamped(x - 1, y))
    }));
    channels.push(Image::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        0.5 * (image.get_clamped(x, y + 1) - image.get_clamped(x, y - 1))
    }));

    for (s1, s2) in DOG_SIGMAS {
        let a = separable_filter(image, &gaussian_kernel(s1));
        let b = separable_filter(image, &gaussian_kernel(s2));
        let dog = a.data().iter().zip(b.data()).map(|(a, b)| a - b).collect();
        channels.push(Image::new(w, h, dog).expect("same size"));
    }

    for (dx, dy) in CENSUS_OFFSETS {
        channels.push(Image::from_fn(w, h, |x, y| {
            let (x, y) = (x as isize, y as isize);
            let center = image.get(x as usize, y as usize);
            let neighbor = image.get_clamped(x + dx * CENSUS_RADIUS, y + dy * CENSUS_RADIUS);
            ((neighbor - center) / CENSUS_SCALE).tanh()
        }));
    }

    channels.push(Image::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let mut window = [0.0; 9];
        let mut i = 0;
        for oy in -1..=1 {
            for ox in -1..=1 {
                window[i] = image.get_clamped(x + ox, y + oy);
                i += 1;
            }
        }
        let mean = window.iter().sum::<f64>() / 9.0;
        (window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 9.0).sqrt()
    }));

    channels.push(Image::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let c = image.get(x as usize, y as usize);
        let lap = (image.get_clamped(x + 1, y) - c)
            + (image.get_clamped(x - 1, y) - c)
            + (image.get_clamped(x, y + 1) - c)
            + (image.get_clamped(x, y - 1) - c);
        lap.clamp(-LAPLACIAN_CLIP, LAPLACIAN_CLIP)
    }));

    debug_assert_eq!(channels.len(), FEATURE_CHANNELS);
    FeatureMap::from_channels(&channels)
}

/// Descriptor standardized on its own statistics.
pub fn extract_features(image: &Image) -> FeatureMap {
    let mut fm = extract_raw_features(image);
    Standardization::fit(&fm).apply(&mut fm);
    fm
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}
