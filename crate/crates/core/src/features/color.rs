use image::RgbImage;

use super::{FeatureError, FeatureVector};

/// Hexcone HSV with every channel in [0, 1]; hue is 0 for achromatic pixels.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(|c| f64::from(c) / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    [h / 6.0, s, max]
}

/// `(mean_H, mean_S, mean_V, var_H, var_S, var_V)` with population variance.
pub fn hsv_stats(image: &RgbImage) -> Result<FeatureVector, FeatureError> {
    let n = (image.width() as usize) * (image.height() as usize);
    if n == 0 {
        return Err(FeatureError::EmptyImage);
    }
    let hsv: Vec<[f64; 3]> = image.pixels().map(|p| rgb_to_hsv(p.0)).collect();
    let mut mean = [0.0; 3];
    for px in &hsv {
        for c in 0..3 {
            mean[c] += px[c];
        }
    }
    mean = mean.map(|m| m / n as f64);
    let mut var = [0.0; 3];
    for px in &hsv {
        for c in 0..3 {
            var[c] += (px[c] - mean[c]).powi(2);
        }
    }
    var = var.map(|v| v / n as f64);
    Ok(FeatureVector::new(
        "hsv",
        vec![mean[0], mean[1], mean[2], var[0], var[1], var[2]],
    ))
}
