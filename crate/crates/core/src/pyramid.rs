//! Binomial image pyramids.

use crate::error::{Error, Result};
use crate::raster::Image;

/// No pyramid level may be narrower or shorter than this.
pub const MIN_LEVEL_EXTENT: usize = 8;

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Levels `0..=top`, level 0 being the input image.
#[derive(Clone, Debug)]
pub struct ImagePyramid {
    levels: Vec<Image>,
}

impl ImagePyramid {
    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &Image {
        &self.levels[l]
    }

    /// Index of the coarsest level.
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Builds an `(top + 1)`-level pyramid by 5-tap binomial smoothing followed by
/// keeping every even row and column.
pub fn build_pyramid(image: &Image, top: usize) -> Result<ImagePyramid> {
    let (mut w, mut h) = (image.width(), image.height());
    for _ in 0..=top {
        if w < MIN_LEVEL_EXTENT || h < MIN_LEVEL_EXTENT {
            return Err(Error::TooSmall {
                width: image.width(),
                height: image.height(),
                levels: top + 1,
            });
        }
        w = w.div_ceil(2);
        h = h.div_ceil(2);
    }

    let mut levels = Vec::with_capacity(top + 1);
    levels.push(image.clone());
    for _ in 0..top {
        let next = downsample(levels.last().expect("level 0 present"));
        levels.push(next);
    }
    Ok(ImagePyramid { levels })
}

/// One pyramid step: binomial blur then 2x decimation.
pub fn downsample(image: &Image) -> Image {
    let (w, h) = (image.width(), image.height());
    let blurred = separable_filter(image, &BINOMIAL);
    Image::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| blurred.get(2 * x, 2 * y))
}

/// Applies a symmetric odd-length kernel along rows then columns, replicating
/// edge pixels.
pub(crate) fn separable_filter(image: &Image, kernel: &[f64]) -> Image {
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (image.width(), image.height());
    let horizontal = Image::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * image.get_clamped(x as isize + i as isize - r, y as isize))
            .sum()
    });
    Image::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * horizontal.get_clamped(x as isize, y as isize + i as isize - r))
            .sum()
    })
}
