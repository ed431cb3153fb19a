mod common;

use image::{Rgb, RgbImage};
use rand::Rng;
use scenemem_core::features::{
    cooccurrence, glcm, grid_sample, hsv_stats, pqft_saliency, pqft_saliency_planes, quantize_gray, FeatureError,
    GlcmConfig, PqftConfig, RgbPlanes, SaliencyMap, DEFAULT_OFFSETS,
};
use scenemem_core::seed;

fn random_image(rng: &mut impl Rng, w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| Rgb([rng.random(), rng.random(), rng.random()]))
}

fn random_planes(rng: &mut impl Rng, w: usize, h: usize) -> RgbPlanes {
    RgbPlanes::new(w, h, (0..w * h).map(|_| [rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0]).collect())
}

#[test]
fn glcm_matches_pair_enumeration() {
    let mut rng = seed::rng(31);
    let cfg = GlcmConfig::default();
    for k in 0..100 {
        let img = random_image(&mut rng, 16, 16);
        let oracle = common::glcm_oracle(&img, 8, &DEFAULT_OFFSETS);
        let q = quantize_gray(&img, 8);
        for (o, offset) in DEFAULT_OFFSETS.iter().enumerate() {
            let c = cooccurrence(&q, 16, 16, 8, *offset);
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(c[i * 8 + j], oracle.counts[o][i][j], "image {k} offset {offset:?}");
                }
            }
        }
        let s = glcm(&img, &cfg).unwrap();
        assert!((s.contrast - oracle.contrast).abs() <= 1e-12, "image {k}");
        assert!((s.homogeneity - oracle.homogeneity).abs() <= 1e-12, "image {k}");
        assert!((s.correlation - oracle.correlation.unwrap()).abs() <= 1e-12, "image {k}");
        assert!(s.contrast >= 0.0 && s.homogeneity > 0.0 && s.homogeneity <= 1.0);
        assert!((-1.0..=1.0).contains(&s.correlation));
    }
}

#[test]
fn glcm_oracle_agrees_on_sparse_levels() {
    // two-tone images exercise empty rows of the matrix
    let mut rng = seed::rng(32);
    for _ in 0..20 {
        let img = RgbImage::from_fn(9, 7, |_, _| if rng.random_bool(0.3) { Rgb([250, 250, 250]) } else { Rgb([10, 10, 10]) });
        let oracle = common::glcm_oracle(&img, 8, &DEFAULT_OFFSETS);
        match glcm(&img, &GlcmConfig::default()) {
            Ok(s) => assert!((s.correlation - oracle.correlation.unwrap()).abs() <= 1e-12),
            Err(FeatureError::DegenerateTexture { .. }) => assert!(oracle.correlation.is_none()),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn constant_image_is_degenerate() {
    let img = RgbImage::from_pixel(16, 16, Rgb([77, 77, 77]));
    assert_eq!(
        glcm(&img, &GlcmConfig::default()),
        Err(FeatureError::DegenerateTexture { contrast: 0.0, homogeneity: 1.0 })
    );
}

fn mirror(map: &SaliencyMap) -> Vec<f64> {
    let n = map.size;
    (0..n * n).map(|k| map.data[(k / n) * n + (n - 1 - k % n)]).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn pqft_commutes_with_mirroring() {
    let mut rng = seed::rng(40);
    let cfg = PqftConfig::default();
    for (w, h) in [(64, 64), (97, 53), (200, 150)] {
        let img = random_planes(&mut rng, w, h);
        let a = pqft_saliency_planes(&img, &cfg).unwrap();
        let b = pqft_saliency_planes(&img.mirrored_horizontally(), &cfg).unwrap();
        let d = max_diff(&mirror(&a), &b.data);
        assert!(d <= 1e-6, "{w}x{h}: {d}");
    }
}

#[test]
fn pqft_ignores_global_intensity_scale() {
    let mut rng = seed::rng(41);
    let cfg = PqftConfig::default();
    let img = random_planes(&mut rng, 120, 90);
    let base = pqft_saliency_planes(&img, &cfg).unwrap();
    for factor in [0.5, 2.0] {
        let scaled = pqft_saliency_planes(&img.scaled(factor), &cfg).unwrap();
        let d = max_diff(&base.data, &scaled.data);
        assert!(d <= 1e-6, "factor {factor}: {d}");
    }
}

#[test]
fn pqft_map_invariants() {
    let mut rng = seed::rng(42);
    let img = random_image(&mut rng, 80, 60);
    let map = pqft_saliency(&img, &PqftConfig::default()).unwrap();
    assert_eq!(map.size, 256);
    assert_eq!(map.max(), 1.0);
    assert!(map.data.iter().all(|v| (0.0..=1.0).contains(v)));
    let uniform = pqft_saliency(&RgbImage::from_pixel(33, 21, Rgb([10, 200, 90])), &PqftConfig::default()).unwrap();
    let first = uniform.data[0];
    assert!(uniform.data.iter().all(|&v| (v - first).abs() <= 1e-9));
}

#[test]
fn grid_pooling_matches_double_loop() {
    let mut rng = seed::rng(43);
    let data: Vec<f64> = (0..256 * 256).map(|_| rng.random::<f64>()).collect();
    let map = SaliencyMap { size: 256, data };
    let v = grid_sample(&map, 32).unwrap();
    assert_eq!(v.values, common::pool_oracle(&map.data, 256, 32));
    let mean_v = v.values.iter().sum::<f64>() / 1024.0;
    assert!((mean_v - map.mean()).abs() <= 1e-12);
}

#[test]
fn hsv_two_point_variance() {
    let mut img = RgbImage::new(2, 1);
    img.put_pixel(1, 0, Rgb([255, 255, 255]));
    let f = hsv_stats(&img).unwrap();
    assert_eq!(f.dim(), 6);
    assert_eq!((f.values[2], f.values[5]), (0.5, 0.25));
}
