//! Discrete spatial-domain ramp filter applied per projection angle.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::projector::Sinogram;
use crate::error::{Error, Result};

/// Convolution with `Δ·h(n)` where `h(0) = 1/(4Δ²)`, `h(n) = 0` for even
/// `n ≠ 0` and `h(n) = -1/(π² n² Δ²)` for odd `n`. Applied through a
/// zero-padded FFT of length `next_pow2(2B)`, which makes the linear
/// convolution exact on the `B` detector bins.
#[derive(Clone)]
pub struct RampFilter {
    n_bins: usize,
    bin_size: f64,
    fft_len: usize,
    transfer: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RampFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RampFilter")
            .field("n_bins", &self.n_bins)
            .field("bin_size", &self.bin_size)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

/// Filter coefficient for bin offset `n`, including the `Δ` quadrature
/// factor.
pub fn ramp_coefficient(n: i64, bin_size: f64) -> f64 {
    if n == 0 {
        1.0 / (4.0 * bin_size)
    } else if n % 2 == 0 {
        0.0
    } else {
        -1.0 / (PI * PI * (n * n) as f64 * bin_size)
    }
}

impl RampFilter {
    pub fn new(n_bins: usize, bin_size: f64) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidGeometry(format!("ramp filter needs at least 2 bins, got {n_bins}")));
        }
        let fft_len = (2 * n_bins).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let half = (fft_len / 2) as i64;
        let mut kernel: Vec<Complex<f64>> = (0..fft_len as i64)
            .map(|i| {
                let n = if i < half { i } else { i - fft_len as i64 };
                Complex::new(ramp_coefficient(n, bin_size), 0.0)
            })
            .collect();
        forward.process(&mut kernel);
        let transfer = kernel.iter().map(|c| c.re).collect();
        Ok(Self { n_bins, bin_size, fft_len, transfer, forward, inverse })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_size(&self) -> f64 {
        self.bin_size
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    /// Real DFT of the circulant kernel at the padded length.
    pub fn transfer_function(&self) -> &[f64] {
        &self.transfer
    }

    fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (b, &v) in buf.iter_mut().zip(row) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, &h) in buf.iter_mut().zip(&self.transfer) {
            *b *= h;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }

    /// `F s`, block-diagonal over angles.
    pub fn apply(&self, s: &Sinogram) -> Result<Sinogram> {
        if s.n_bins() != self.n_bins {
            return Err(Error::Shape(format!("ramp filter built for {} bins, sinogram has {}", self.n_bins, s.n_bins())));
        }
        let mut out = Sinogram::zeros(s.n_angles(), s.n_bins());
        out.data
            .par_chunks_mut(self.n_bins)
            .zip(s.data.par_chunks(self.n_bins))
            .for_each(|(o, i)| self.apply_row(i, o));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn impulse_gives_shifted_kernel() {
        let f = RampFilter::new(21, 0.5).unwrap();
        let mut s = Sinogram::zeros(1, 21);
        s.as_mut_slice()[8] = 1.0;
        let out = f.apply(&s).unwrap();
        for (b, v) in out.as_slice().iter().enumerate() {
            let want = ramp_coefficient(b as i64 - 8, 0.5);
            assert!((v - want).abs() < 1e-14, "bin {b}: {v} vs {want}");
        }
    }

    #[test]
    fn transfer_function_is_positive() {
        for bins in [2, 3, 17, 40, 64, 300] {
            let f = RampFilter::new(bins, 1.0).unwrap();
            // Independent DFT by direct summation of the circulant kernel.
            let p = f.fft_len();
            for k in 0..p {
                let mut acc = 0.0;
                for i in 0..p as i64 {
                    let n = if i < p as i64 / 2 { i } else { i - p as i64 };
                    acc += ramp_coefficient(n, 1.0) * (2.0 * PI * (k as f64) * (i as f64) / p as f64).cos();
                }
                assert!(acc > 0.0, "bins={bins} k={k}: {acc}");
                assert!((acc - f.transfer_function()[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn filter_is_symmetric() {
        let f = RampFilter::new(30, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = Sinogram::from_vec(5, 30, (0..150).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let b = Sinogram::from_vec(5, 30, (0..150).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let lhs = f.apply(&a).unwrap().dot(&b);
            let rhs = a.dot(&f.apply(&b).unwrap());
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }
}
