//! Semi-local TV cost and its group prox, the quadratic ROI mask `M` and the
//! nonnegativity projection.

use crate::error::{ensure_len, Error, Result};
use crate::grid::{DifferencePair, Image, ImageGrid, Stencil};

/// STV weights `α_{j,ℓ}`, stored densely per operator.
#[derive(Clone, Debug, PartialEq)]
pub struct StvParams {
    alpha: Vec<Vec<f64>>,
}

impl StvParams {
    pub fn new(alpha: Vec<Vec<f64>>) -> Result<Self> {
        let len = alpha.first().map(Vec::len).unwrap_or(0);
        for (j, field) in alpha.iter().enumerate() {
            ensure_len(&format!("alpha field {j}"), field.len(), len)?;
            if field.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
                return Err(Error::InvalidParam(format!("alpha field {j} has negative or non-finite entries")));
            }
        }
        Ok(Self { alpha })
    }

    pub fn constant(n_ops: usize, n_pixels: usize, value: f64) -> Result<Self> {
        Self::new(vec![vec![value; n_pixels]; n_ops])
    }

    pub fn per_operator(values: &[f64], n_pixels: usize) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v; n_pixels]).collect())
    }

    pub fn n_ops(&self) -> usize {
        self.alpha.len()
    }

    pub fn field(&self, j: usize) -> &[f64] {
        &self.alpha[j]
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.alpha.iter().map(|f| f.iter().map(|a| a * s).collect()).collect())
    }

    pub(crate) fn check(&self, stencil: &Stencil, n_pixels: usize) -> Result<()> {
        if self.alpha.len() != stencil.len() {
            return Err(Error::Shape(format!(
                "{} alpha fields for a stencil of {} operators",
                self.alpha.len(),
                stencil.len()
            )));
        }
        if let Some(f) = self.alpha.first() {
            ensure_len("alpha field", f.len(), n_pixels)?;
        }
        Ok(())
    }
}

/// `r_j(z) = Σ_ℓ α_{j,ℓ} ‖z_ℓ‖₂`.
pub fn rj_value(z: &DifferencePair, alpha: &[f64]) -> f64 {
    alpha.iter().enumerate().map(|(l, &a)| if a == 0.0 { 0.0 } else { a * z.magnitude(l) }).sum()
}

/// `Σ_j r_j(L_j x)`.
pub fn stv_value(x: &Image, stencil: &Stencil, params: &StvParams) -> Result<f64> {
    params.check(stencil, x.len())?;
    Ok(stencil
        .ops()
        .iter()
        .enumerate()
        .map(|(j, op)| rj_value(&op.apply(x), params.field(j)))
        .sum())
}

/// Group soft-threshold: `max{0, 1 - γ α_ℓ / ‖z_ℓ‖₂} z_ℓ`, zero where the
/// norm vanishes.
pub fn prox_rj(z: &DifferencePair, gamma: f64, alpha: &[f64]) -> Result<DifferencePair> {
    ensure_len("prox_rj alpha", alpha.len(), z.len())?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParam(format!("prox step must be positive, got {gamma}")));
    }
    let mut out = DifferencePair::zeros(z.len());
    for (l, &a) in alpha.iter().enumerate() {
        (out.first[l], out.second[l]) = prox_rj_pixel(z.first[l], z.second[l], gamma * a);
    }
    Ok(out)
}

/// Shrinkage of one 2-vector by `t ≥ 0`.
#[inline]
pub(crate) fn prox_rj_pixel(u: f64, v: f64, t: f64) -> (f64, f64) {
    let norm = u.hypot(v);
    let shrink = if norm > 0.0 { (1.0 - t / norm).max(0.0) } else { 0.0 };
    (shrink * u, shrink * v)
}

/// Diagonal quadratic weight: 1 inside the ROI, `ξ > 1` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskParams {
    xi: f64,
    diag: Vec<f64>,
}

impl MaskParams {
    pub fn new(grid: &ImageGrid, xi: f64) -> Result<Self> {
        if !(xi > 1.0 && xi.is_finite()) {
            return Err(Error::Config(format!("mask weight xi must exceed 1, got {xi}")));
        }
        let diag = grid.roi_mask().iter().map(|&m| if m { 1.0 } else { xi }).collect();
        Ok(Self { xi, diag })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn apply_inv(&self, v: &Image) -> Image {
        let data = v.as_slice().iter().zip(&self.diag).map(|(a, m)| a / m).collect();
        Image::from_vec(v.width(), data).expect("mask length matches grid")
    }

    pub fn apply(&self, v: &Image) -> Image {
        let data = v.as_slice().iter().zip(&self.diag).map(|(a, m)| a * m).collect();
        Image::from_vec(v.width(), data).expect("mask length matches grid")
    }

    /// `½ xᵀ M x`.
    pub fn half_norm_sq(&self, x: &Image) -> f64 {
        0.5 * x.as_slice().iter().zip(&self.diag).map(|(a, m)| m * a * a).sum::<f64>()
    }
}

pub fn project_nonneg(w: &Image) -> Image {
    let data = w.as_slice().iter().map(|&v| v.max(0.0)).collect();
    Image::from_vec(w.width(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DiffOperator, Offset};
    use crate::reference::golden_section;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_image(n: usize, rng: &mut ChaCha8Rng) -> Image {
        Image::from_vec(n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn constant_image_has_zero_stv() {
        let s = Stencil::semilocal();
        let p = StvParams::constant(6, 100, 0.7).unwrap();
        assert_eq!(stv_value(&Image::filled(10, 2.0), &s, &p).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_is_isotropic_tv() {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let x = rand_image(n, &mut rng);
        let lambda = 0.3;
        let p = StvParams::constant(1, n * n, lambda).unwrap();
        let got = stv_value(&x, &Stencil::isotropic_tv(), &p).unwrap();
        let mut tv = 0.0;
        for r in 0..n {
            for c in 0..n {
                let dx = x.get(r, c) - x.get(r, c.saturating_sub(1));
                let dy = x.get(r, c) - x.get(r.saturating_sub(1), c);
                tv += (dx * dx + dy * dy).sqrt();
            }
        }
        assert!((got - lambda * tv).abs() < 1e-12);
    }

    #[test]
    fn impulse_stv_by_enumeration() {
        let n = 7;
        let mut x = Image::zeros(n);
        x.set(3, 3, 1.0);
        let op = DiffOperator::symmetric(Offset::new(0, 1)).unwrap();
        let s = Stencil::new(vec![op]).unwrap();
        let p = StvParams::constant(1, n * n, 1.0).unwrap();
        // At the impulse both differences are 1; its left and right
        // neighbors each see one difference of -1.
        let want = 2f64.sqrt() + 1.0 + 1.0;
        assert!((stv_value(&x, &s, &p).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn stv_is_homogeneous_and_convex() {
        let n = 10;
        let s = Stencil::semilocal();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let alpha: Vec<Vec<f64>> = (0..6).map(|_| (0..n * n).map(|_| rng.random_range(0.0..2.0)).collect()).collect();
        let p = StvParams::new(alpha).unwrap();
        for _ in 0..20 {
            let a = rand_image(n, &mut rng);
            let b = rand_image(n, &mut rng);
            let t: f64 = rng.random_range(0.0..5.0);
            let va = stv_value(&a, &s, &p).unwrap();
            assert!((stv_value(&a.scaled(t), &s, &p).unwrap() - t * va).abs() < 1e-10 * va.max(1.0));
            let mid = Image::from_vec(n, a.as_slice().iter().zip(b.as_slice()).map(|(u, v)| 0.5 * (u + v)).collect()).unwrap();
            let vb = stv_value(&b, &s, &p).unwrap();
            assert!(stv_value(&mid, &s, &p).unwrap() <= 0.5 * (va + vb) + 1e-12);
        }
    }

    #[test]
    fn prox_thresholds_and_identity() {
        let z = DifferencePair { first: vec![0.3, 3.0, 0.0], second: vec![0.4, 4.0, 0.0] };
        let out = prox_rj(&z, 2.0, &[0.25, 0.25, 1.0]).unwrap();
        assert_eq!(out.first[0], 0.0);
        assert_eq!(out.second[0], 0.0);
        assert!((out.first[1] - 3.0 * 0.9).abs() < 1e-15);
        assert_eq!(out.first[2], 0.0);
        let id = prox_rj(&z, 2.0, &[0.0; 3]).unwrap();
        assert_eq!(id.first[..2], z.first[..2]);
        assert_eq!(id.second[..2], z.second[..2]);
    }

    #[test]
    fn prox_matches_nested_golden_section() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let len = 40;
        let z = DifferencePair {
            first: (0..len).map(|_| rng.random_range(-3.0..3.0)).collect(),
            second: (0..len).map(|_| rng.random_range(-3.0..3.0)).collect(),
        };
        let alpha: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..2.0)).collect();
        let gamma = 0.8;
        let out = prox_rj(&z, gamma, &alpha).unwrap();
        for l in 0..len {
            let (a, b) = (z.first[l], z.second[l]);
            let obj = |u: f64, v: f64| 0.5 * ((u - a).powi(2) + (v - b).powi(2)) + gamma * alpha[l] * u.hypot(v);
            let inner = |u: f64| {
                let v = golden_section(|v| obj(u, v), -10.0, 10.0, 1e-13);
                obj(u, v)
            };
            let u = golden_section(inner, -10.0, 10.0, 1e-13);
            let v = golden_section(|v| obj(u, v), -10.0, 10.0, 1e-13);
            let (pu, pv) = (out.first[l], out.second[l]);
            assert!(obj(pu, pv) <= obj(u, v) + 1e-13 * obj(u, v).abs().max(1.0), "pixel {l}");
            assert!((u - pu).abs() < 1e-6 && (v - pv).abs() < 1e-6, "pixel {l}");
        }
    }

    #[test]
    fn prox_is_nonexpansive_per_pixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let len = 500;
        let mk = |rng: &mut ChaCha8Rng| DifferencePair {
            first: (0..len).map(|_| rng.random_range(-2.0..2.0)).collect(),
            second: (0..len).map(|_| rng.random_range(-2.0..2.0)).collect(),
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let alpha: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.5)).collect();
        let pa = prox_rj(&a, 1.1, &alpha).unwrap();
        let pb = prox_rj(&b, 1.1, &alpha).unwrap();
        for l in 0..len {
            let d_out = (pa.first[l] - pb.first[l]).hypot(pa.second[l] - pb.second[l]);
            let d_in = (a.first[l] - b.first[l]).hypot(a.second[l] - b.second[l]);
            assert!(d_out <= d_in + 1e-14);
        }
    }

    #[test]
    fn mask_and_projection() {
        let grid = ImageGrid::new(16, 14.0, 8.0, 1.0).unwrap();
        assert!(matches!(MaskParams::new(&grid, 1.0), Err(Error::Config(_))));
        let m = MaskParams::new(&grid, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let v = rand_image(16, &mut rng);
        let back = m.apply(&m.apply_inv(&v));
        for (a, b) in back.as_slice().iter().zip(v.as_slice()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        let pos = Image::filled(4, 0.5);
        assert_eq!(project_nonneg(&pos), pos);
        assert_eq!(project_nonneg(&Image::filled(4, -1.0)), Image::zeros(4));
    }
}
