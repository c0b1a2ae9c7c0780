//! Parallel-beam tomography: projector `H`, its transpose, the ramp filter
//! `F` and filtered backprojection.

mod power;
mod projector;
mod ramp;

pub use power::{spectral_norm, SpectralEstimate};
pub use projector::{Geometry, Sinogram, DEFAULT_SUBRAYS};
pub use ramp::{ramp_coefficient, RampFilter};

use std::f64::consts::PI;

use crate::error::Result;
use crate::grid::Image;

/// Filtered backprojection `c · Hᵀ F s` with `c = π Δ / (S p²)` so that a
/// full-view, non-truncated acquisition reconstructs normalized intensities.
/// Each detector row is extended by `B/2` copies of its edge values before
/// filtering to damp truncation bias.
pub fn fbp(geom: &Geometry, s: &Sinogram) -> Result<Image> {
    geom.check(s)?;
    let nb = geom.n_bins();
    let pad = nb / 2;
    let ext_len = nb + 2 * pad;
    let filter = RampFilter::new(ext_len, geom.bin_size())?;
    let mut ext = Sinogram::zeros(s.n_angles(), ext_len);
    for a in 0..s.n_angles() {
        let row = s.row(a);
        let dst = &mut ext.as_mut_slice()[a * ext_len..(a + 1) * ext_len];
        for (i, d) in dst.iter_mut().enumerate() {
            *d = row[i.saturating_sub(pad).min(nb - 1)];
        }
    }
    let filtered_ext = filter.apply(&ext)?;
    let mut filtered = geom.zeros();
    for a in 0..s.n_angles() {
        let src = &filtered_ext.as_slice()[a * ext_len + pad..a * ext_len + pad + nb];
        filtered.as_mut_slice()[a * nb..(a + 1) * nb].copy_from_slice(src);
    }
    let ps = geom.grid().pixel_size();
    let scale = PI * geom.bin_size() / (geom.n_angles() as f64 * ps * ps);
    let mut img = geom.backproject(&filtered)?;
    img.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
    Ok(img)
}
