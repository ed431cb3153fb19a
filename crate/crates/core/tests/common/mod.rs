//! Independent reference implementations the library is checked against.
//! They favour the most literal reading of each definition over speed.
#![allow(dead_code)]

use image::RgbImage;

/// Spearman correlation straight from the definition: each rank is one plus
/// the number of strictly smaller values plus half the other ties.
pub fn srcc_oracle(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|x| {
                let below = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub struct GlcmOracle {
    pub counts: Vec<Vec<Vec<u64>>>,
    pub contrast: f64,
    pub homogeneity: f64,
    pub correlation: Option<f64>,
}

/// Quantizes with its own luma and min-max, lists every ordered pixel pair
/// per offset (each pair both ways) and averages the statistics computed
/// directly over the pair lists.
pub fn glcm_oracle(img: &RgbImage, levels: usize, offsets: &[(i32, i32)]) -> GlcmOracle {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let luma = |x: i64, y: i64| {
        let p = img.get_pixel(x as u32, y as u32);
        0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
    };
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for y in 0..h {
        for x in 0..w {
            lo = lo.min(luma(x, y));
            hi = hi.max(luma(x, y));
        }
    }
    let level = |x: i64, y: i64| -> usize {
        if hi == lo {
            0
        } else {
            let q = ((luma(x, y) - lo) / (hi - lo) * levels as f64).floor() as usize;
            q.min(levels - 1)
        }
    };
    let mut counts = Vec::new();
    let (mut con, mut hom, mut cor) = (0.0, 0.0, Some(0.0));
    let mut used = 0.0;
    for &(dr, dc) in offsets {
        let mut pairs = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let (y2, x2) = (y + dr as i64, x + dc as i64);
                if (0..h).contains(&y2) && (0..w).contains(&x2) {
                    let (a, b) = (level(x, y), level(x2, y2));
                    pairs.push((a, b));
                    pairs.push((b, a));
                }
            }
        }
        let mut m = vec![vec![0u64; levels]; levels];
        for &(a, b) in &pairs {
            m[a][b] += 1;
        }
        counts.push(m);
        if pairs.is_empty() {
            continue;
        }
        used += 1.0;
        let n = pairs.len() as f64;
        con += pairs.iter().map(|&(a, b)| (a as f64 - b as f64).powi(2)).sum::<f64>() / n;
        hom += pairs.iter().map(|&(a, b)| 1.0 / (1.0 + (a as f64 - b as f64).abs())).sum::<f64>() / n;
        let mu_i = pairs.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let mu_j = pairs.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let si = (pairs.iter().map(|p| (p.0 as f64 - mu_i).powi(2)).sum::<f64>() / n).sqrt();
        let sj = (pairs.iter().map(|p| (p.1 as f64 - mu_j).powi(2)).sum::<f64>() / n).sqrt();
        let cov = pairs.iter().map(|p| (p.0 as f64 - mu_i) * (p.1 as f64 - mu_j)).sum::<f64>() / n;
        cor = match cor {
            Some(c) if si > 0.0 && sj > 0.0 => Some(c + cov / (si * sj)),
            _ => None,
        };
    }
    GlcmOracle {
        counts,
        contrast: con / used,
        homogeneity: hom / used,
        correlation: cor.map(|c| c / used),
    }
}

/// Mean pooling with an explicit double loop per cell.
pub fn pool_oracle(data: &[f64], size: usize, grid: usize) -> Vec<f64> {
    let cell = size / grid;
    let mut out = vec![0.0; grid * grid];
    for gy in 0..grid {
        for gx in 0..grid {
            let mut s = 0.0;
            for y in 0..cell {
                for x in 0..cell {
                    s += data[(gy * cell + y) * size + gx * cell + x];
                }
            }
            out[gy * grid + gx] = s / (cell * cell) as f64;
        }
    }
    out
}

/// Symmetric eigenvalues by cyclic Jacobi rotation.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// All `n!` orderings of `0..n`, lexicographic.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in all_permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Ordinary least squares of `y` on `(1, x)` via the closed form.
pub fn ols_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let beta = sxy / sxx;
    (my - beta * mx, beta)
}
