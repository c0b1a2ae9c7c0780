//! ROI cropping and image quality metrics.

use crate::grid::{Image, ImageGrid};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// PSNR written to reports in place of `+∞`.
pub const PSNR_CAP: f64 = 999.0;

/// ROI pixels in row-major order.
pub fn crop_roi(x: &Image, grid: &ImageGrid) -> Vec<f64> {
    x.as_slice().iter().zip(grid.roi_mask()).filter(|(_, &m)| m).map(|(&v, _)| v).collect()
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "metric inputs differ in length");
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn mae(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "metric inputs differ in length");
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `10 log10(peak² / MSE)`, `+∞` for identical inputs.
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> f64 {
    let m = mse(a, b);
    if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / m).log10()
    }
}

/// PSNR over the ROI with unit peak.
pub fn psnr_roi(x: &Image, reference: &Image, grid: &ImageGrid) -> f64 {
    psnr(&crop_roi(x, grid), &crop_roi(reference, grid), 1.0)
}

pub fn capped(v: f64) -> f64 {
    v.min(PSNR_CAP)
}

fn gaussian_kernel() -> Vec<f64> {
    let h = (SSIM_WINDOW / 2) as f64;
    let k: Vec<f64> = (0..SSIM_WINDOW).map(|i| (-(i as f64 - h).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Reflect index `i` into `0..n` (`-1 → 0`, `n → n - 1`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable Gaussian blur with mirrored borders.
fn blur(x: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; h * w];
    for row in 0..h {
        for c in 0..w {
            tmp[row * w + c] = k.iter().enumerate().map(|(i, kv)| kv * x[row * w + reflect(c as i64 + i as i64 - r, w)]).sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for row in 0..h {
        for c in 0..w {
            out[row * w + c] = k.iter().enumerate().map(|(i, kv)| kv * tmp[reflect(row as i64 + i as i64 - r, h) * w + c]).sum();
        }
    }
    out
}

/// Bounding square of the ROI: `(r0, c0, size)`.
fn roi_box(grid: &ImageGrid) -> (usize, usize, usize) {
    let n = grid.width();
    let (mut r0, mut r1, mut c0, mut c1) = (n, 0, n, 0);
    for (p, &m) in grid.roi_mask().iter().enumerate() {
        if m {
            let (r, c) = (p / n, p % n);
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
    }
    if r0 > r1 {
        return (0, 0, 0);
    }
    let size = (r1 - r0).max(c1 - c0) + 1;
    (r0, c0, size)
}

/// Box contents with every non-ROI pixel replaced by its mirror image
/// through the ROI circle, taken at the nearest ROI pixel.
fn mirrored_box(x: &Image, grid: &ImageGrid, bx: (usize, usize, usize)) -> (Vec<f64>, Vec<bool>) {
    let n = grid.width();
    let (r0, c0, size) = bx;
    let center = (n as f64 - 1.0) / 2.0;
    let radius = grid.roi_diameter() / 2.0;
    let mask = grid.roi_mask();
    let mut vals = vec![0.0; size * size];
    let mut inside = vec![false; size * size];
    for i in 0..size {
        for j in 0..size {
            let (r, c) = ((r0 + i).min(n - 1), (c0 + j).min(n - 1));
            let p = r * n + c;
            if mask[p] && r == r0 + i && c == c0 + j {
                vals[i * size + j] = x.as_slice()[p];
                inside[i * size + j] = true;
                continue;
            }
            let (dy, dx) = (r as f64 - center, c as f64 - center);
            let d = dx.hypot(dy);
            let mut t = if d > 0.0 { ((2.0 * radius - d) / d).max(0.0) } else { 0.0 };
            // Walk inward until the reflected position lands in the ROI.
            let v = loop {
                let rr = (center + t * dy).round().clamp(0.0, n as f64 - 1.0) as usize;
                let cc = (center + t * dx).round().clamp(0.0, n as f64 - 1.0) as usize;
                if mask[rr * n + cc] || t <= 0.0 {
                    break x.as_slice()[rr * n + cc];
                }
                t = (t - 0.5 / d.max(1.0)).max(0.0);
            };
            vals[i * size + j] = v;
        }
    }
    (vals, inside)
}

/// Gaussian-window SSIM averaged over ROI pixels.
pub fn ssim_roi(a: &Image, b: &Image, grid: &ImageGrid, peak: f64) -> f64 {
    let bx = roi_box(grid);
    let size = bx.2;
    if size == 0 {
        return 1.0;
    }
    let (xa, inside) = mirrored_box(a, grid, bx);
    let (xb, _) = mirrored_box(b, grid, bx);
    ssim_map_mean(&xa, &xb, size, size, &inside, peak)
}

fn ssim_map_mean(xa: &[f64], xb: &[f64], h: usize, w: usize, select: &[bool], peak: f64) -> f64 {
    let k = gaussian_kernel();
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let mu_a = blur(xa, h, w, &k);
    let mu_b = blur(xb, h, w, &k);
    let sq = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(p, q)| p * q).collect() };
    let e_aa = blur(&sq(xa, xa), h, w, &k);
    let e_bb = blur(&sq(xb, xb), h, w, &k);
    let e_ab = blur(&sq(xa, xb), h, w, &k);
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in 0..h * w {
        if !select[p] {
            continue;
        }
        let (ma, mb) = (mu_a[p], mu_b[p]);
        let va = e_aa[p] - ma * ma;
        let vb = e_bb[p] - mb * mb;
        let cov = e_ab[p] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        count += 1;
    }
    if count == 0 { 1.0 } else { sum / count as f64 }
}
