//! File formats and dataset layout.
//!
//! - camera text files (`extrinsic` / `intrinsic` / depth line)
//! - single-channel PFM rasters for depth and confidence maps
//! - PLY point clouds
//! - dataset directories with images, cameras, pair lists and ground truth
//! - raw volume dumps for offline inspection

pub mod camera;
pub mod dataset;
pub mod pfm;
pub mod ply;
pub mod volume;

pub use camera::{load_camera, save_camera, CameraFile};
pub use dataset::{load_color_image, load_gray_image, write_scene, Dataset};
pub use pfm::{read_pfm, write_pfm, PfmImage};
pub use ply::{read_ply, write_ply};
