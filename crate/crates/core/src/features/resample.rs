/// Per-output-index `(source index, weight)` lists along one axis.
///
/// Shrinking averages the covered source cells by overlap length; enlarging
/// interpolates linearly between pixel centers. Both are mirror symmetric.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            if dst < src {
                let a = i as f64 * scale;
                let b = (i + 1) as f64 * scale;
                let mut w = Vec::new();
                let mut k = a.floor() as usize;
                while (k as f64) < b && k < src {
                    let overlap = b.min(k as f64 + 1.0) - a.max(k as f64);
                    if overlap > 0.0 {
                        w.push((k, overlap / scale));
                    }
                    k += 1;
                }
                w
            } else {
                let x = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let x0 = x.floor() as usize;
                let x1 = (x0 + 1).min(src - 1);
                let t = x - x0 as f64;
                if x1 == x0 || t == 0.0 {
                    vec![(x0, 1.0)]
                } else {
                    vec![(x0, 1.0 - t), (x1, t)]
                }
            }
        })
        .collect()
}

/// Resamples a row-major scalar plane to `dst_w x dst_h`.
pub fn resample(plane: &[f64], width: usize, height: usize, dst_w: usize, dst_h: usize) -> Vec<f64> {
    assert_eq!(plane.len(), width * height);
    let wx = axis_weights(width, dst_w);
    let wy = axis_weights(height, dst_h);
    let mut rows = vec![0.0; dst_w * height];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for (x, ws) in wx.iter().enumerate() {
            rows[y * dst_w + x] = ws.iter().map(|&(k, w)| w * src[k]).sum();
        }
    }
    let mut out = vec![0.0; dst_w * dst_h];
    for (y, ws) in wy.iter().enumerate() {
        for x in 0..dst_w {
            out[y * dst_w + x] = ws.iter().map(|&(k, w)| w * rows[k * dst_w + x]).sum();
        }
    }
    out
}

/// Separable Gaussian blur over `ceil(3 sigma)` pixels; windows cut by the
/// border are renormalized.
pub fn gaussian_blur(plane: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return plane.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let pass = |get: &dyn Fn(usize) -> f64, len: usize, i: usize| -> f64 {
        let (mut acc, mut norm) = (0.0, 0.0);
        for (k, &w) in kernel.iter().enumerate() {
            let j = i as isize + k as isize - radius;
            if j >= 0 && (j as usize) < len {
                acc += w * get(j as usize);
                norm += w;
            }
        }
        acc / norm
    };
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = pass(&|j| row[j], width, x);
        }
    }
    let mut out = vec![0.0; plane.len()];
    for x in 0..width {
        for y in 0..height {
            out[y * width + x] = pass(&|j| tmp[j * width + x], height, y);
        }
    }
    out
}
