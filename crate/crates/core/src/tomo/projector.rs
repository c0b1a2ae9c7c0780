//! Ray-driven parallel-beam projector with linear interpolation between
//! pixel centers, and its exact transpose.

use rayon::prelude::*;

use crate::error::{ensure_len, Error, Result};
use crate::grid::{Image, ImageGrid};

/// Default number of sub-rays integrated per detector bin.
pub const DEFAULT_SUBRAYS: usize = 4;

/// Angles are grouped in fixed chunks for the backprojection reduction so the
/// result does not depend on the number of worker threads.
const BACKPROJECT_CHUNK: usize = 8;

/// Parallel-beam acquisition over 180 degrees with a detector centered on
/// the rotation axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    grid: ImageGrid,
    n_bins: usize,
    bin_size: f64,
    n_angles: usize,
    subrays: usize,
    trig: Vec<(f64, f64)>,
}

impl Geometry {
    pub fn new(grid: ImageGrid, n_bins: usize, bin_size: f64, n_angles: usize) -> Result<Self> {
        Self::with_subrays(grid, n_bins, bin_size, n_angles, DEFAULT_SUBRAYS)
    }

    pub fn with_subrays(grid: ImageGrid, n_bins: usize, bin_size: f64, n_angles: usize, subrays: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidGeometry(format!("need at least 2 detector bins, got {n_bins}")));
        }
        if n_angles == 0 {
            return Err(Error::InvalidGeometry("need at least one projection angle".into()));
        }
        if !(bin_size > 0.0 && bin_size.is_finite()) {
            return Err(Error::InvalidGeometry(format!("bin size must be positive, got {bin_size}")));
        }
        if subrays == 0 {
            return Err(Error::InvalidGeometry("subrays must be at least 1".into()));
        }
        let trig = (0..n_angles)
            .map(|s| {
                let theta = s as f64 * std::f64::consts::PI / n_angles as f64;
                (theta.cos(), theta.sin())
            })
            .collect();
        Ok(Self { grid, n_bins, bin_size, n_angles, subrays, trig })
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_size(&self) -> f64 {
        self.bin_size
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn subrays(&self) -> usize {
        self.subrays
    }

    /// Number of measurements `T = B * S`.
    pub fn sinogram_len(&self) -> usize {
        self.n_bins * self.n_angles
    }

    pub fn angle(&self, s: usize) -> f64 {
        s as f64 * std::f64::consts::PI / self.n_angles as f64
    }

    /// Signed detector coordinate (mm) of the center of bin `b`.
    pub fn bin_center(&self, b: usize) -> f64 {
        (b as f64 - (self.n_bins as f64 - 1.0) / 2.0) * self.bin_size
    }

    pub fn zeros(&self) -> Sinogram {
        Sinogram::zeros(self.n_angles, self.n_bins)
    }

    /// Visit every `(pixel, weight)` contribution of detector bin `b` at
    /// angle `s`. Sub-rays are traversed in a fixed order.
    #[inline]
    fn trace_bin(&self, s: usize, b: usize, mut f: impl FnMut(usize, f64)) {
        let n = self.grid.width();
        let ps = self.grid.pixel_size();
        let half = (n as f64 - 1.0) / 2.0;
        let (cos, sin) = self.trig[s];
        let m = self.subrays;
        let u0 = self.bin_center(b);
        // Ray: p(t) = u (cos, sin) + t (-sin, cos). Along the dominant axis
        // the fractional index of the crossing is affine in the row/column.
        let nf = n as f64;
        if cos.abs() >= sin.abs() {
            let w = ps / cos.abs() / m as f64;
            let slope = sin / cos;
            for k in 0..m {
                let u = u0 + ((k as f64 + 0.5) / m as f64 - 0.5) * self.bin_size;
                let f0 = u / (cos * ps) - half * slope + half;
                for r in 0..n {
                    let fc = f0 + r as f64 * slope;
                    if fc <= -1.0 || fc >= nf {
                        continue;
                    }
                    // fc > -1, so truncation after the shift is a floor.
                    let c0 = (fc + 1.0) as i64 - 1;
                    let frac = fc - c0 as f64;
                    if c0 >= 0 {
                        f(r * n + c0 as usize, w * (1.0 - frac));
                    }
                    if ((c0 + 1) as usize) < n {
                        f(r * n + (c0 + 1) as usize, w * frac);
                    }
                }
            }
        } else {
            let w = ps / sin.abs() / m as f64;
            let slope = cos / sin;
            for k in 0..m {
                let u = u0 + ((k as f64 + 0.5) / m as f64 - 0.5) * self.bin_size;
                let f0 = half - u / (sin * ps) - half * slope;
                for c in 0..n {
                    let fr = f0 + c as f64 * slope;
                    if fr <= -1.0 || fr >= nf {
                        continue;
                    }
                    let r0 = (fr + 1.0) as i64 - 1;
                    let frac = fr - r0 as f64;
                    if r0 >= 0 {
                        f(r0 as usize * n + c, w * (1.0 - frac));
                    }
                    if ((r0 + 1) as usize) < n {
                        f((r0 + 1) as usize * n + c, w * frac);
                    }
                }
            }
        }
    }

    fn project_raw(&self, x: &[f64]) -> Sinogram {
        let mut out = self.zeros();
        let nb = self.n_bins;
        out.data.par_chunks_mut(nb).enumerate().for_each(|(s, row)| {
            for (b, v) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                self.trace_bin(s, b, |p, w| acc += w * x[p]);
                *v = acc;
            }
        });
        out
    }

    /// Forward projection `H x`: pixels outside the support `G` are ignored.
    pub fn project(&self, x: &Image) -> Result<Sinogram> {
        self.grid.check(x)?;
        let masked: Vec<f64> = x
            .as_slice()
            .iter()
            .zip(self.grid.grid_mask())
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect();
        Ok(self.project_raw(&masked))
    }

    /// Projection of the whole lattice, used to simulate measurements of
    /// the full object.
    pub fn project_unmasked(&self, x: &Image) -> Result<Sinogram> {
        self.grid.check(x)?;
        Ok(self.project_raw(x.as_slice()))
    }

    /// Exact transpose of [`Geometry::project`].
    pub fn backproject(&self, s: &Sinogram) -> Result<Image> {
        self.check(s)?;
        let n = self.grid.width();
        let nb = self.n_bins;
        let chunks: Vec<Vec<f64>> = (0..self.n_angles)
            .collect::<Vec<_>>()
            .par_chunks(BACKPROJECT_CHUNK)
            .map(|angles| {
                let mut part = vec![0.0; n * n];
                for &a in angles {
                    for b in 0..nb {
                        let v = s.data[a * nb + b];
                        if v != 0.0 {
                            self.trace_bin(a, b, |p, w| part[p] += w * v);
                        }
                    }
                }
                part
            })
            .collect();
        let mut out = vec![0.0; n * n];
        for part in &chunks {
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
        for (o, &m) in out.iter_mut().zip(self.grid.grid_mask()) {
            if !m {
                *o = 0.0;
            }
        }
        Image::from_vec(n, out)
    }

    pub fn check(&self, s: &Sinogram) -> Result<()> {
        if s.n_angles != self.n_angles || s.n_bins != self.n_bins {
            return Err(Error::Shape(format!(
                "sinogram is {}x{}, geometry expects {}x{}",
                s.n_angles, s.n_bins, self.n_angles, self.n_bins
            )));
        }
        Ok(())
    }

    /// Whether the central line of bin `b` at angle `s` passes within
    /// `radius` pixels of the point `(x, y)` given in pixel units from the
    /// lattice center (y up).
    pub fn ray_hits_disk(&self, s: usize, b: usize, x: f64, y: f64, radius: f64) -> bool {
        let (cos, sin) = self.trig[s];
        let ps = self.grid.pixel_size();
        let u_point = (x * cos + y * sin) * ps;
        (self.bin_center(b) - u_point).abs() <= radius * ps
    }
}

/// Line-integral data: `n_angles` rows of `n_bins` detector values.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    n_angles: usize,
    n_bins: usize,
    pub(crate) data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(n_angles: usize, n_bins: usize) -> Self {
        Self { n_angles, n_bins, data: vec![0.0; n_angles * n_bins] }
    }

    pub fn from_vec(n_angles: usize, n_bins: usize, data: Vec<f64>) -> Result<Self> {
        ensure_len("sinogram", data.len(), n_angles * n_bins)?;
        Ok(Self { n_angles, n_bins, data })
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_bins..(s + 1) * self.n_bins]
    }

    pub fn dot(&self, other: &Sinogram) -> f64 {
        crate::grid::dot(&self.data, &other.data)
    }

    pub fn same_shape(&self, other: &Sinogram) -> Result<()> {
        if self.n_angles != other.n_angles || self.n_bins != other.n_bins {
            return Err(Error::Shape(format!(
                "sinograms differ: {}x{} vs {}x{}",
                self.n_angles, self.n_bins, other.n_angles, other.n_bins
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Sinogram) -> Result<Sinogram> {
        self.same_shape(other)?;
        Ok(Sinogram {
            n_angles: self.n_angles,
            n_bins: self.n_bins,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Sinogram {
        Sinogram { n_angles: self.n_angles, n_bins: self.n_bins, data: self.data.iter().map(|v| v * s).collect() }
    }
}
