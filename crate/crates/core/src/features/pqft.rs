use std::io::Write;
use std::path::Path;

use image::RgbImage;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::resample::{gaussian_blur, resample};
use super::{FeatureError, FeatureVector, RgbPlanes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PqftConfig {
    pub working_size: usize,
    pub sigma: f64,
    pub output_size: usize,
    /// Spectrum coefficients whose magnitude is at most this fraction of the
    /// largest magnitude are treated as zero in the phase-only step.
    pub zero_tolerance: f64,
}

impl Default for PqftConfig {
    fn default() -> Self {
        PqftConfig {
            working_size: 64,
            sigma: 8.0,
            output_size: 256,
            zero_tolerance: 1e-10,
        }
    }
}

/// Square saliency map, row-major, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub size: usize,
    pub data: Vec<f64>,
}

impl SaliencyMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Binary 8-bit PGM (P5).
    pub fn write_pgm(&self, path: &Path) -> std::io::Result<()> {
        let mut out = Vec::with_capacity(self.data.len() + 32);
        write!(out, "P5\n{} {}\n255\n", self.size, self.size)?;
        out.extend(
            self.data
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        std::fs::write(path, out)
    }
}

struct Fft2 {
    n: usize,
    forward: std::sync::Arc<dyn Fft<f64>>,
    inverse: std::sync::Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let fft = if inverse { &self.inverse } else { &self.forward };
        for row in data.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            fft.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
        if inverse {
            let scale = 1.0 / (n * n) as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

fn normalize_max(data: &mut [f64]) {
    let max = data.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        data.iter_mut().for_each(|v| *v /= max);
    }
}

pub fn pqft_saliency(image: &RgbImage, config: &PqftConfig) -> Result<SaliencyMap, FeatureError> {
    pqft_saliency_planes(&RgbPlanes::from(image), config)
}

/// Phase spectrum of the quaternion Fourier transform.
///
/// The quaternion image `M + RG i + BY j + I k` is split symplectically into
/// `f1 = M + RG i` and `f2 = BY + I i`; each gets an ordinary complex 2-D FFT.
pub fn pqft_saliency_planes(image: &RgbPlanes, config: &PqftConfig) -> Result<SaliencyMap, FeatureError> {
    if image.width == 0 || image.height == 0 {
        return Err(FeatureError::EmptyImage);
    }
    let n = config.working_size;
    let channel = |c: usize| -> Vec<f64> {
        let plane: Vec<f64> = image.pixels.iter().map(|p| p[c]).collect();
        resample(&plane, image.width, image.height, n, n)
    };
    let (r, g, b) = (channel(0), channel(1), channel(2));

    let mut f1 = vec![Complex64::new(0.0, 0.0); n * n];
    let mut f2 = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n * n {
        let (r, g, b) = (r[k], g[k], b[k]);
        let rr = r - (g + b) / 2.0;
        let gg = g - (r + b) / 2.0;
        let bb = b - (r + g) / 2.0;
        let yy = (r + g) / 2.0 - (r - g).abs() / 2.0 - b;
        let intensity = (r + g + b) / 3.0;
        let motion = 0.0;
        f1[k] = Complex64::new(motion, rr - gg);
        f2[k] = Complex64::new(bb - yy, intensity);
    }

    let fft = Fft2::new(n);
    fft.run(&mut f1, false);
    fft.run(&mut f2, false);

    let mags: Vec<f64> = f1
        .iter()
        .zip(&f2)
        .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt())
        .collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let floor = peak * config.zero_tolerance;
    for ((a, b), &m) in f1.iter_mut().zip(f2.iter_mut()).zip(&mags) {
        if m <= floor || m == 0.0 {
            *a = Complex64::new(0.0, 0.0);
            *b = Complex64::new(0.0, 0.0);
        } else {
            *a /= m;
            *b /= m;
        }
    }

    fft.run(&mut f1, true);
    fft.run(&mut f2, true);
    let energy: Vec<f64> = f1
        .iter()
        .zip(&f2)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
        .collect();

    let mut smooth = gaussian_blur(&energy, n, n, config.sigma);
    normalize_max(&mut smooth);
    let size = config.output_size;
    let mut data = resample(&smooth, n, n, size, size);
    // bilinear sampling between pixel centres can miss the peak
    normalize_max(&mut data);
    Ok(SaliencyMap { size, data })
}

/// Mean pooling over a `grid x grid` lattice of equal square cells, row-major.
pub fn grid_sample(map: &SaliencyMap, grid: usize) -> Result<FeatureVector, FeatureError> {
    if grid == 0 || map.size % grid != 0 {
        return Err(FeatureError::GridMismatch {
            grid,
            size: map.size,
        });
    }
    let cell = map.size / grid;
    let mut values = Vec::with_capacity(grid * grid);
    for gr in 0..grid {
        for gc in 0..grid {
            let mut acc = 0.0;
            for r in gr * cell..(gr + 1) * cell {
                for v in &map.data[r * map.size + gc * cell..r * map.size + (gc + 1) * cell] {
                    acc += v;
                }
            }
            values.push(acc / (cell * cell) as f64);
        }
    }
    Ok(FeatureVector::new("saliency_grid", values))
}
