use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// `(row, column)` displacements: right, down, down-right, down-left.
pub const DEFAULT_OFFSETS: [(i32, i32); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlcmConfig {
    pub levels: usize,
    pub offsets: Vec<(i32, i32)>,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        GlcmConfig {
            levels: 8,
            offsets: DEFAULT_OFFSETS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlcmStats {
    pub contrast: f64,
    pub homogeneity: f64,
    pub correlation: f64,
}

impl GlcmStats {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.contrast, self.homogeneity, self.correlation]
    }
}

/// Luma (0.299, 0.587, 0.114) quantized to `levels` bins spanning the
/// image's own min-max range. A constant image maps entirely to level 0.
pub fn quantize_gray(image: &RgbImage, levels: usize) -> Vec<usize> {
    let luma: Vec<f64> = image
        .pixels()
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect();
    let (lo, hi) = luma
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![0; luma.len()];
    }
    luma.iter()
        .map(|&v| (((v - lo) / (hi - lo) * levels as f64) as usize).min(levels - 1))
        .collect()
}

/// Symmetric co-occurrence counts (`levels x levels`, row-major) for one offset.
pub fn cooccurrence(
    quantized: &[usize],
    width: usize,
    height: usize,
    levels: usize,
    offset: (i32, i32),
) -> Vec<u64> {
    let mut counts = vec![0u64; levels * levels];
    let (dr, dc) = (offset.0 as isize, offset.1 as isize);
    for r in 0..height as isize {
        let r2 = r + dr;
        if r2 < 0 || r2 >= height as isize {
            continue;
        }
        for c in 0..width as isize {
            let c2 = c + dc;
            if c2 < 0 || c2 >= width as isize {
                continue;
            }
            let a = quantized[(r * width as isize + c) as usize];
            let b = quantized[(r2 * width as isize + c2) as usize];
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
        }
    }
    counts
}

struct OffsetStats {
    contrast: f64,
    homogeneity: f64,
    correlation: Option<f64>,
}

fn offset_stats(counts: &[u64], levels: usize) -> Option<OffsetStats> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let t = total as f64;
    let mut contrast_num = 0u64;
    let mut homogeneity = 0.0;
    let mut mu = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            let c = counts[i * levels + j];
            if c == 0 {
                continue;
            }
            let d = i.abs_diff(j);
            contrast_num += c * (d * d) as u64;
            homogeneity += c as f64 / (1.0 + d as f64);
            mu += (i as u64 * c) as f64;
        }
    }
    mu /= t;
    // the matrix is symmetric, so both marginals share mean and variance
    let (mut var, mut cov) = (0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            let p = counts[i * levels + j] as f64 / t;
            var += (i as f64 - mu).powi(2) * p;
            cov += (i as f64 - mu) * (j as f64 - mu) * p;
        }
    }
    Some(OffsetStats {
        contrast: contrast_num as f64 / t,
        homogeneity: homogeneity / t,
        correlation: (var > 0.0).then(|| (cov / var).clamp(-1.0, 1.0)),
    })
}

/// GLCM statistics of an already quantized image, averaged over the offsets
/// that produce at least one pixel pair.
pub fn glcm_from_levels(
    quantized: &[usize],
    width: usize,
    height: usize,
    levels: usize,
    offsets: &[(i32, i32)],
) -> Result<GlcmStats, FeatureError> {
    if levels < 2 {
        return Err(FeatureError::TooFewLevels(levels));
    }
    let per_offset: Vec<OffsetStats> = offsets
        .iter()
        .filter_map(|&o| offset_stats(&cooccurrence(quantized, width, height, levels, o), levels))
        .collect();
    if per_offset.is_empty() {
        return Err(FeatureError::NoPairs);
    }
    let k = per_offset.len() as f64;
    let contrast = per_offset.iter().map(|s| s.contrast).sum::<f64>() / k;
    let homogeneity = per_offset.iter().map(|s| s.homogeneity).sum::<f64>() / k;
    let correlation: Option<Vec<f64>> = per_offset.iter().map(|s| s.correlation).collect();
    match correlation {
        Some(c) => Ok(GlcmStats {
            contrast,
            homogeneity,
            correlation: c.iter().sum::<f64>() / k,
        }),
        None => Err(FeatureError::DegenerateTexture {
            contrast,
            homogeneity,
        }),
    }
}

pub fn glcm(image: &RgbImage, config: &GlcmConfig) -> Result<GlcmStats, FeatureError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(FeatureError::EmptyImage);
    }
    if config.levels < 2 {
        return Err(FeatureError::TooFewLevels(config.levels));
    }
    let q = quantize_gray(image, config.levels);
    glcm_from_levels(
        &q,
        image.width() as usize,
        image.height() as usize,
        config.levels,
        &config.offsets,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn constant_image_is_degenerate() {
        let img = RgbImage::from_pixel(5, 5, Rgb([90, 20, 200]));
        assert_eq!(
            glcm(&img, &GlcmConfig::default()),
            Err(FeatureError::DegenerateTexture {
                contrast: 0.0,
                homogeneity: 1.0
            })
        );
    }

    #[test]
    fn checkerboard_two_levels() {
        let mut img = RgbImage::new(2, 2);
        img.put_pixel(0, 0, Rgb([255, 255, 255]));
        img.put_pixel(1, 1, Rgb([255, 255, 255]));
        let cfg = GlcmConfig {
            levels: 2,
            offsets: vec![(0, 1)],
        };
        let s = glcm(&img, &cfg).unwrap();
        assert_eq!(s.contrast, 1.0);
        assert_eq!(s.homogeneity, 0.5);
        assert_eq!(s.correlation, -1.0);
    }

    #[test]
    fn counts_are_symmetric() {
        let q = vec![0, 1, 2, 2, 1, 0, 3, 3, 0];
        let c = cooccurrence(&q, 3, 3, 4, (1, -1));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c[i * 4 + j], c[j * 4 + i]);
            }
        }
        // 2x2 interior pairs, counted both ways
        assert_eq!(c.iter().sum::<u64>(), 8);
    }

    #[test]
    fn quantization_spans_range() {
        let mut img = RgbImage::new(3, 1);
        img.put_pixel(1, 0, Rgb([128, 128, 128]));
        img.put_pixel(2, 0, Rgb([255, 255, 255]));
        assert_eq!(quantize_gray(&img, 8), vec![0, 4, 7]);
    }

    #[test]
    fn single_row_uses_horizontal_offset_only() {
        let mut img = RgbImage::new(4, 1);
        img.put_pixel(1, 0, Rgb([255, 255, 255]));
        img.put_pixel(3, 0, Rgb([255, 255, 255]));
        let s = glcm(&img, &GlcmConfig { levels: 2, ..GlcmConfig::default() }).unwrap();
        assert_eq!(s.contrast, 1.0);
        assert_eq!(s.correlation, -1.0);
    }

    #[test]
    fn rejects_one_level() {
        let img = RgbImage::new(2, 2);
        let cfg = GlcmConfig {
            levels: 1,
            ..GlcmConfig::default()
        };
        assert_eq!(glcm(&img, &cfg), Err(FeatureError::TooFewLevels(1)));
    }
}
