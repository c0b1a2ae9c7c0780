//! Ellipse phantoms with metal wires and truncated Poisson projection data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Image, ImageGrid};
use crate::tomo::{Geometry, Sinogram};

/// Intensity mapped to 1.0.
pub const HU_SCALE: f64 = 5000.0;
pub const WATER_HU: f64 = 1000.0;
pub const MU_WATER: f64 = 0.017;
pub const DEFAULT_I0: f64 = 1e4;
pub const WIRE_HU_RANGE: (f64, f64) = (3000.0, 5000.0);

/// Ellipse in pixel units relative to the lattice center, `y` pointing up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub axes: [f64; 2],
    /// Counter-clockwise, degrees.
    #[serde(default)]
    pub rotation: f64,
    pub hu: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.to_radians().sin_cos();
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.axes[0]).powi(2) + (v / self.axes[1]).powi(2) <= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    InsideGrid,
    OutsideGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wire {
    pub center: [f64; 2],
    pub radius: f64,
    pub hu: f64,
    pub placement: Placement,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    #[serde(default)]
    pub ellipses: Vec<Ellipse>,
    #[serde(default)]
    pub wires: Vec<Wire>,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        for e in &self.ellipses {
            if !(e.hu.is_finite() && e.axes.iter().all(|a| *a > 0.0)) {
                return Err(Error::Config("ellipse needs finite HU and positive axes".into()));
            }
        }
        for w in &self.wires {
            if !(WIRE_HU_RANGE.0..=WIRE_HU_RANGE.1).contains(&w.hu) {
                return Err(Error::Config(format!(
                    "wire HU {} outside [{}, {}]",
                    w.hu, WIRE_HU_RANGE.0, WIRE_HU_RANGE.1
                )));
            }
            if !(w.radius > 0.0) {
                return Err(Error::Config("wire radius must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Rasterize by pixel-center test in painter's order (ellipses, then
/// wires), normalized by [`HU_SCALE`].
pub fn render_phantom(spec: &PhantomSpec, width: usize) -> Result<Image> {
    spec.validate()?;
    let half = (width as f64 - 1.0) / 2.0;
    let mut img = Image::zeros(width);
    for r in 0..width {
        let y = half - r as f64;
        for c in 0..width {
            let x = c as f64 - half;
            let mut hu = 0.0;
            for e in &spec.ellipses {
                if e.contains(x, y) {
                    hu = e.hu;
                }
            }
            for w in &spec.wires {
                if (x - w.center[0]).hypot(y - w.center[1]) <= w.radius {
                    hu = w.hu;
                }
            }
            img.set(r, c, hu / HU_SCALE);
        }
    }
    Ok(img)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Poisson,
    Noiseless,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default = "default_i0")]
    pub i0: f64,
    /// Attenuation per HU and mm.
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: NoiseMode,
}

fn default_i0() -> f64 {
    DEFAULT_I0
}

fn default_mu() -> f64 {
    MU_WATER / WATER_HU
}

fn default_mode() -> NoiseMode {
    NoiseMode::Poisson
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { i0: DEFAULT_I0, mu: default_mu(), seed: 0, mode: NoiseMode::Poisson }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.i0 > 0.0 && self.i0.is_finite() && self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config("noise needs positive i0 and mu".into()));
        }
        Ok(())
    }
}

/// Measurements of the whole (unmasked) object. Line integrals are taken
/// in HU·mm, converted to counts `N ~ Poisson(I0 exp(-μ p))` (at least one
/// photon) and returned as `ln(I0 / N) / (μ · 5000)`, the normalized line
/// integral. Noiseless mode returns `p / 5000`. Ray `t` draws from a ChaCha
/// stream keyed by `(seed, t)`.
pub fn simulate_projections(x: &Image, geom: &Geometry, noise: &NoiseSpec) -> Result<Sinogram> {
    noise.validate()?;
    let mut s = geom.project_unmasked(x)?;
    if noise.mode == NoiseMode::Noiseless {
        return Ok(s);
    }
    let nb = geom.n_bins();
    let scale = noise.mu * HU_SCALE;
    let i0 = noise.i0;
    let seed = noise.seed;
    s.as_mut_slice().par_chunks_mut(nb).enumerate().for_each(|(a, row)| {
        for (b, v) in row.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((a * nb + b) as u64);
            let lambda = i0 * (-scale * *v).exp();
            let counts = if lambda > 0.0 {
                Poisson::new(lambda).map(|d| d.sample(&mut rng)).unwrap_or(0.0)
            } else {
                0.0
            };
            *v = (i0 / counts.max(1.0)).ln() / scale;
        }
    });
    Ok(s)
}

/// Body-like phantom used by the desk-scale experiments: a water ellipse
/// wider than the support, a few soft-tissue and bone structures, and
/// optionally a metal wire outside the support.
pub fn desk_phantom(width: usize, grid: &ImageGrid, with_wire: bool) -> PhantomSpec {
    let s = width as f64 / 64.0;
    let mut spec = PhantomSpec {
        ellipses: vec![
            Ellipse { center: [0.0, 0.0], axes: [29.0 * s, 24.0 * s], rotation: 0.0, hu: 1000.0 },
            Ellipse { center: [-6.0 * s, 4.0 * s], axes: [6.0 * s, 4.0 * s], rotation: 30.0, hu: 1300.0 },
            Ellipse { center: [7.0 * s, -3.0 * s], axes: [3.5 * s, 5.0 * s], rotation: -20.0, hu: 800.0 },
            Ellipse { center: [2.0 * s, 9.0 * s], axes: [2.5 * s, 2.5 * s], rotation: 0.0, hu: 2000.0 },
            Ellipse { center: [-3.0 * s, -9.0 * s], axes: [4.0 * s, 1.8 * s], rotation: 10.0, hu: 1150.0 },
            Ellipse { center: [20.0 * s, 6.0 * s], axes: [3.0 * s, 6.0 * s], rotation: 0.0, hu: 1700.0 },
        ],
        wires: Vec::new(),
    };
    if with_wire {
        let radius = 3.0 * s;
        let r = grid.grid_diameter() / 2.0 + radius + s;
        spec.wires.push(Wire {
            center: [r * 0.9, -r * (1.0f64 - 0.81).sqrt()],
            radius,
            hu: 5000.0,
            placement: Placement::OutsideGrid,
        });
    }
    spec
}

#[derive(Clone, Debug)]
pub struct DatasetItem {
    pub id: usize,
    pub spec: PhantomSpec,
    pub phantom: Image,
    pub sinogram: Sinogram,
    pub seed: u64,
}

/// Random phantom: a body ellipse with inner structures and 0–3 wires,
/// each placed outside the support with probability 0.3.
pub fn random_phantom(width: usize, grid: &ImageGrid, rng: &mut ChaCha8Rng) -> PhantomSpec {
    let half = width as f64 / 2.0;
    let support = grid.grid_diameter() / 2.0;
    let ax = rng.random_range(0.7..0.92) * half;
    let ay = rng.random_range(0.55..0.8) * half;
    let mut ellipses = vec![Ellipse {
        center: [0.0, 0.0],
        axes: [ax, ay],
        rotation: rng.random_range(-15.0..15.0),
        hu: rng.random_range(900.0..1100.0),
    }];
    for _ in 0..rng.random_range(2..6usize) {
        let rad = rng.random_range(0.0..0.6) * support;
        let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        ellipses.push(Ellipse {
            center: [rad * ang.cos(), rad * ang.sin()],
            axes: [rng.random_range(0.05..0.2) * half, rng.random_range(0.05..0.2) * half],
            rotation: rng.random_range(0.0..180.0),
            hu: rng.random_range(700.0..2200.0),
        });
    }
    let mut wires = Vec::new();
    for _ in 0..rng.random_range(0..4usize) {
        let outside = rng.random_bool(0.3);
        let radius = rng.random_range(1.0..2.0) * width as f64 / 64.0;
        let (lo, hi) = if outside {
            (support + radius + 0.5, (ax.min(ay) - radius).max(support + radius + 1.0))
        } else {
            (0.0, (support - radius - 0.5).max(0.1))
        };
        let rad = rng.random_range(lo..=hi.max(lo));
        let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        wires.push(Wire {
            center: [rad * ang.cos(), rad * ang.sin()],
            radius,
            hu: rng.random_range(WIRE_HU_RANGE.0..=WIRE_HU_RANGE.1),
            placement: if outside { Placement::OutsideGrid } else { Placement::InsideGrid },
        });
    }
    PhantomSpec { ellipses, wires }
}

/// `n` phantoms with their simulated sinograms. Item `i` uses phantom seed
/// `seed + i` and noise seed derived from it.
pub fn make_dataset(n: usize, seed: u64, geom: &Geometry, noise: &NoiseSpec) -> Result<Vec<DatasetItem>> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let width = geom.grid().width();
    (0..n)
        .map(|i| {
            let item_seed = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
            let spec = random_phantom(width, geom.grid(), &mut rng);
            let phantom = render_phantom(&spec, width)?;
            let ns = NoiseSpec { seed: item_seed ^ 0x9e37_79b9_7f4a_7c15, ..noise.clone() };
            let sinogram = simulate_projections(&phantom, geom, &ns)?;
            Ok(DatasetItem { id: i, spec, phantom, sinogram, seed: item_seed })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> Geometry {
        Geometry::new(ImageGrid::new(32, 24.0, 16.0, 1.0).unwrap(), 20, 1.0, 15).unwrap()
    }

    #[test]
    fn empty_spec_is_zero() {
        assert_eq!(render_phantom(&PhantomSpec::default(), 16).unwrap(), Image::zeros(16));
    }

    #[test]
    fn water_disc_value() {
        let spec = PhantomSpec {
            ellipses: vec![Ellipse { center: [0.0, 0.0], axes: [5.0, 5.0], rotation: 0.0, hu: WATER_HU }],
            wires: vec![],
        };
        let img = render_phantom(&spec, 20).unwrap();
        assert!((img.get(10, 10) - 0.2).abs() < 1e-15);
        assert_eq!(img.get(0, 0), 0.0);
    }

    #[test]
    fn painter_order() {
        let a = Ellipse { center: [0.0, 0.0], axes: [4.0, 4.0], rotation: 0.0, hu: 1000.0 };
        let b = Ellipse { center: [3.0, 0.0], axes: [3.0, 2.0], rotation: 0.0, hu: 2000.0 };
        let img = render_phantom(&PhantomSpec { ellipses: vec![a.clone(), b.clone()], wires: vec![] }, 16).unwrap();
        let half = 7.5;
        for r in 0..16 {
            for c in 0..16 {
                let (x, y) = (c as f64 - half, half - r as f64);
                let want = if b.contains(x, y) {
                    0.4
                } else if a.contains(x, y) {
                    0.2
                } else {
                    0.0
                };
                assert_eq!(img.get(r, c), want);
            }
        }
    }

    #[test]
    fn wire_range_is_enforced() {
        let spec = PhantomSpec {
            ellipses: vec![],
            wires: vec![Wire { center: [0.0, 0.0], radius: 1.0, hu: 6000.0, placement: Placement::InsideGrid }],
        };
        assert!(render_phantom(&spec, 8).is_err());
    }

    #[test]
    fn noiseless_matches_projection() {
        let g = geom();
        let spec = desk_phantom(32, g.grid(), true);
        let img = render_phantom(&spec, 32).unwrap();
        let y = simulate_projections(&img, &g, &NoiseSpec { mode: NoiseMode::Noiseless, ..Default::default() }).unwrap();
        assert_eq!(y, g.project_unmasked(&img).unwrap());
        let zero = simulate_projections(&Image::zeros(32), &g, &NoiseSpec { mode: NoiseMode::Noiseless, ..Default::default() }).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poisson_is_reproducible() {
        let g = geom();
        let img = render_phantom(&desk_phantom(32, g.grid(), false), 32).unwrap();
        let n = NoiseSpec { seed: 77, ..Default::default() };
        let a = simulate_projections(&img, &g, &n).unwrap();
        let b = simulate_projections(&img, &g, &n).unwrap();
        assert_eq!(a, b);
        let c = simulate_projections(&img, &g, &NoiseSpec { seed: 78, ..Default::default() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dataset_values_are_normalized() {
        let g = geom();
        let items = make_dataset(5, 3, &g, &NoiseSpec::default()).unwrap();
        assert_eq!(items.len(), 5);
        for it in &items {
            assert!(it.phantom.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert!(make_dataset(0, 3, &g, &NoiseSpec::default()).is_err());
    }
}
