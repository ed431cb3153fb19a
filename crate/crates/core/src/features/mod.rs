//! Handcrafted image features.

mod color;
mod file;
mod glcm;
mod pqft;
mod resample;

pub use color::{hsv_stats, rgb_to_hsv};
pub use file::{load_external_vectors, write_feature_file, FeatureSet};
pub use glcm::{cooccurrence, glcm, glcm_from_levels, quantize_gray, GlcmConfig, GlcmStats, DEFAULT_OFFSETS};
pub use pqft::{grid_sample, pqft_saliency, pqft_saliency_planes, PqftConfig, SaliencyMap};
pub use resample::{gaussian_blur, resample};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HSV_DIM: usize = 6;
pub const GLCM_DIM: usize = 3;
pub const SALIENCY_GRID_DIM: usize = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("degenerate texture: correlation undefined (contrast {contrast}, homogeneity {homogeneity})")]
    DegenerateTexture { contrast: f64, homogeneity: f64 },
    #[error("no pixel pairs for any GLCM offset")]
    NoPairs,
    #[error("GLCM needs at least 2 gray levels, got {0}")]
    TooFewLevels(usize),
    #[error("grid {grid} does not divide map size {size}")]
    GridMismatch { grid: usize, size: usize },
    #[error("line {line} (`{image_id}`): expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        image_id: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown image_id `{image_id}`")]
    UnknownImage { line: usize, image_id: String },
    #[error("line {line} (`{image_id}`): non-finite value")]
    NonFinite { line: usize, image_id: String },
    #[error("line {line}: duplicate image_id `{image_id}`")]
    DuplicateImage { line: usize, image_id: String },
    #[error("feature file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for FeatureError {
    fn from(e: std::io::Error) -> Self {
        FeatureError::Io(e.to_string())
    }
}

/// A named fixed-length feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub name: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        FeatureVector {
            name: name.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Floating-point RGB image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbPlanes {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl RgbPlanes {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size");
        RgbPlanes { width, height, pixels }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RgbPlanes {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|p| p.map(|c| c * factor)).collect(),
        }
    }

    pub fn mirrored_horizontally(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks(self.width) {
            pixels.extend(row.iter().rev());
        }
        RgbPlanes { pixels, ..*self }
    }
}

impl From<&RgbImage> for RgbPlanes {
    fn from(img: &RgbImage) -> Self {
        RgbPlanes {
            width: img.width() as usize,
            height: img.height() as usize,
            pixels: img.pixels().map(|p| p.0.map(f64::from)).collect(),
        }
    }
}
