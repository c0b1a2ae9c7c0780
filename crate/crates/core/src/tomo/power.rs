//! Largest eigenvalue of a symmetric positive semidefinite operator by power
//! iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub value: f64,
    /// Relative change of the estimate over the last iteration.
    pub achieved_tol: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimate `|||A|||` for an operator given as `apply(x, out)` on vectors of
/// length `dim`. Stops when the Rayleigh quotient changes by less than `tol`
/// (relative) or after `max_iters` iterations.
pub fn spectral_norm(
    dim: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    max_iters: usize,
    tol: f64,
) -> SpectralEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..dim).map(|_| 1.0 + 0.5 * rng.random_range(-1.0..1.0)).collect();
    let mut av = vec![0.0; dim];
    normalize(&mut v);
    let mut value = 0.0;
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        apply(&v, &mut av);
        let next: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        let norm = av.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SpectralEstimate { value: 0.0, achieved_tol: 0.0, iterations: it, converged: true };
        }
        change = if next != 0.0 { ((next - value) / next).abs() } else { f64::INFINITY };
        value = next;
        for (x, y) in v.iter_mut().zip(&av) {
            *x = y / norm;
        }
        if change < tol {
            return SpectralEstimate { value, achieved_tol: change, iterations: it, converged: true };
        }
    }
    SpectralEstimate { value, achieved_tol: change, iterations: max_iters, converged: false }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
}
