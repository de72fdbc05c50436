//! SSIM / D-SSIM with the 3DGS conventions: 11x11 Gaussian window with
//! sigma 1.5, C1 = 0.01^2, C2 = 0.03^2 in normalized units.

use polar_core::image::{BinaryImage, FloatImage};

use crate::CorrectError;

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Mirror (reflect-101) index into [0, n).
fn mirror(i: i64, n: usize) -> usize {
    let n = n as i64;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
        if n == 1 {
            return 0;
        }
    }
}

/// Separable Gaussian blur of one channel with mirrored boundaries.
fn blur(channel: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_kernel();
    let half = SSIM_WINDOW as i64 / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let sx = mirror(x as i64 + i as i64 - half, w);
                acc += kv * channel[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let sy = mirror(y as i64 + i as i64 - half, h);
                acc += kv * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Per-pixel SSIM map of one channel pair.
fn ssim_map_channel(a: &[f64], b: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mu_a = blur(a, w, h);
    let mu_b = blur(b, w, h);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_aa = blur(&aa, w, h);
    let mu_bb = blur(&bb, w, h);
    let mu_ab = blur(&ab, w, h);
    (0..w * h)
        .map(|i| {
            let va = mu_aa[i] - mu_a[i] * mu_a[i];
            let vb = mu_bb[i] - mu_b[i] * mu_b[i];
            let cov = mu_ab[i] - mu_a[i] * mu_b[i];
            let num = (2.0 * mu_a[i] * mu_b[i] + C1) * (2.0 * cov + C2);
            let den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1) * (va + vb + C2);
            num / den
        })
        .collect()
}

fn extract_channel(img: &FloatImage, c: usize) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = img.get(x, y, c);
        }
    }
    out
}

/// D-SSIM = (1 - SSIM) / 2 averaged over all pixels and channels.
pub fn dssim(a: &FloatImage, b: &FloatImage) -> Result<f64, CorrectError> {
    if !a.same_shape(b) {
        return Err(CorrectError::Dimension("dssim inputs must match".into()));
    }
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(CorrectError::Dimension(format!(
            "image {}x{} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window",
            a.width(),
            a.height()
        )));
    }
    let (w, h) = (a.width(), a.height());
    let mut total = 0.0;
    for c in 0..a.channels() {
        let map = ssim_map_channel(&extract_channel(a, c), &extract_channel(b, c), w, h);
        total += map.iter().sum::<f64>() / map.len() as f64;
    }
    let mssim = total / a.channels() as f64;
    Ok((1.0 - mssim) / 2.0)
}

/// D-SSIM restricted to a mask: evaluated on the mask's bounding box (mirrored
/// boundaries) and averaged over the masked pixels only. Returns 0 for an
/// empty mask.
pub fn dssim_masked(a: &FloatImage, b: &FloatImage, mask: &BinaryImage) -> Result<f64, CorrectError> {
    if !a.same_shape(b) || a.width() != mask.width() || a.height() != mask.height() {
        return Err(CorrectError::Dimension("dssim inputs must match".into()));
    }
    let Some((x0, y0, x1, y1)) = bbox(mask) else {
        return Ok(0.0);
    };
    // Grow the box to at least the window size when possible.
    let (w, h) = (a.width(), a.height());
    let (bx0, bx1) = grow_span(x0, x1, w, SSIM_WINDOW);
    let (by0, by1) = grow_span(y0, y1, h, SSIM_WINDOW);
    let bw = bx1 - bx0 + 1;
    let bh = by1 - by0 + 1;
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..a.channels() {
        let crop_a = crop_channel(a, c, bx0, by0, bw, bh);
        let crop_b = crop_channel(b, c, bx0, by0, bw, bh);
        let map = ssim_map_channel(&crop_a, &crop_b, bw, bh);
        for y in 0..bh {
            for x in 0..bw {
                if mask.get(x + bx0, y + by0) {
                    total += map[y * bw + x];
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok((1.0 - total / count as f64) / 2.0)
}

fn bbox(mask: &BinaryImage) -> Option<(usize, usize, usize, usize)> {
    let (w, h) = (mask.width(), mask.height());
    let mut b: Option<(usize, usize, usize, usize)> = None;
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                b = Some(match b {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    b
}

fn grow_span(lo: usize, hi: usize, n: usize, min_len: usize) -> (usize, usize) {
    let len = hi - lo + 1;
    if len >= min_len || n < min_len {
        return (lo, hi.min(n - 1));
    }
    let need = min_len - len;
    let grow_lo = (need / 2).min(lo);
    let lo2 = lo - grow_lo;
    let hi2 = (hi + (need - grow_lo)).min(n - 1);
    let lo2 = lo2.saturating_sub(min_len.saturating_sub(hi2 - lo2 + 1));
    (lo2, hi2)
}

fn crop_channel(img: &FloatImage, c: usize, x0: usize, y0: usize, w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = img.get(x + x0, y + y0, c);
        }
    }
    out
}
