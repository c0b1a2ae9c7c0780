//! Square pixel lattice, disk-shaped support/ROI masks and the semi-local
//! difference operators used by the STV regularizer.
//!
//! Pixel `(r, c)` is stored at index `r * n + c`. Its center sits at
//! `x = (c - (n-1)/2) * pixel_size`, `y = ((n-1)/2 - r) * pixel_size`, so rows
//! grow downwards and the lattice center is the rotation axis.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// Pixel lattice with the reconstruction support `G` and the ROI, both
/// centered disks.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    n: usize,
    pixel_size: f64,
    grid_diameter: f64,
    roi_diameter: f64,
    grid_mask: Vec<bool>,
    roi_mask: Vec<bool>,
}

/// Boolean mask of the pixels whose centers lie inside the centered disk of
/// the given diameter (in pixels).
pub fn disk_mask(n: usize, diameter: f64) -> Vec<bool> {
    let half = (n as f64 - 1.0) / 2.0;
    let r2 = (diameter / 2.0).powi(2);
    let mut mask = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let dy = r as f64 - half;
            let dx = c as f64 - half;
            mask.push(dx * dx + dy * dy <= r2);
        }
    }
    mask
}

impl ImageGrid {
    pub fn new(width: usize, grid_diameter: f64, roi_diameter: f64, pixel_size: f64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidGeometry("width must be positive".into()));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::InvalidGeometry(format!("pixel size must be positive, got {pixel_size}")));
        }
        if !(roi_diameter > 0.0 && roi_diameter <= grid_diameter && grid_diameter <= width as f64) {
            return Err(Error::InvalidGeometry(format!(
                "need 0 < roi_diameter <= grid_diameter <= width, got roi={roi_diameter} grid={grid_diameter} width={width}"
            )));
        }
        Ok(Self {
            n: width,
            pixel_size,
            grid_diameter,
            roi_diameter,
            grid_mask: disk_mask(width, grid_diameter),
            roi_mask: disk_mask(width, roi_diameter),
        })
    }

    /// Lattice whose support and ROI both cover the full inscribed disk.
    pub fn full(width: usize, pixel_size: f64) -> Result<Self> {
        Self::new(width, width as f64, width as f64, pixel_size)
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn grid_diameter(&self) -> f64 {
        self.grid_diameter
    }

    pub fn roi_diameter(&self) -> f64 {
        self.roi_diameter
    }

    pub fn grid_mask(&self) -> &[bool] {
        &self.grid_mask
    }

    pub fn roi_mask(&self) -> &[bool] {
        &self.roi_mask
    }

    pub fn zeros(&self) -> Image {
        Image::zeros(self.n)
    }

    /// Zero every pixel outside the support `G`.
    pub fn restrict(&self, img: &mut Image) {
        for (v, &m) in img.data.iter_mut().zip(&self.grid_mask) {
            if !m {
                *v = 0.0;
            }
        }
    }

    pub fn check(&self, img: &Image) -> Result<()> {
        if img.n != self.n {
            return Err(Error::Shape(format!("image is {}x{}, grid is {}x{}", img.n, img.n, self.n, self.n)));
        }
        Ok(())
    }
}

/// Square image of normalized intensities (1.0 corresponds to 5000 HU).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    n: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self { n, data: vec![value; n * n] }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        ensure_len("image", data.len(), n * n)?;
        Ok(Self { n, data })
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
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

    pub fn dot(&self, other: &Image) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Image {
        Image { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integer pixel displacement `(rows, cols)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Offset {
    pub dr: i32,
    pub dc: i32,
}

impl Offset {
    pub const fn new(dr: i32, dc: i32) -> Self {
        Self { dr, dc }
    }

    pub fn neg(self) -> Self {
        Self { dr: -self.dr, dc: -self.dc }
    }

    pub fn is_zero(self) -> bool {
        self.dr == 0 && self.dc == 0
    }
}

#[inline]
fn clamp_index(i: i64, n: usize) -> usize {
    i.clamp(0, n as i64 - 1) as usize
}

/// `(S_o x)[p] = x[clamp(p - o)]`: translation by `o` with replicated borders.
fn shift_gather(x: &[f64], n: usize, o: Offset, out: &mut [f64]) {
    for r in 0..n {
        let sr = clamp_index(r as i64 - o.dr as i64, n);
        for c in 0..n {
            let sc = clamp_index(c as i64 - o.dc as i64, n);
            out[r * n + c] = x[sr * n + sc];
        }
    }
}

/// `out += S_o^T z`.
fn shift_scatter_add(z: &[f64], n: usize, o: Offset, scale: f64, out: &mut [f64]) {
    for r in 0..n {
        let sr = clamp_index(r as i64 - o.dr as i64, n);
        for c in 0..n {
            let sc = clamp_index(c as i64 - o.dc as i64, n);
            out[sr * n + sc] += scale * z[r * n + c];
        }
    }
}

/// Output of a difference operator: two images of neighbor differences.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferencePair {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl DifferencePair {
    pub fn zeros(len: usize) -> Self {
        Self { first: vec![0.0; len], second: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn dot(&self, other: &DifferencePair) -> f64 {
        dot(&self.first, &other.first) + dot(&self.second, &other.second)
    }

    /// Pixelwise Euclidean norm of the two components.
    pub fn magnitude(&self, l: usize) -> f64 {
        self.first[l].hypot(self.second[l])
    }
}

/// One STV block `L_j`: the pair of neighbor differences
/// `(x - S_a x, x - S_b x)` for offsets `a` and `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffOperator {
    pub first: Offset,
    pub second: Offset,
}

impl DiffOperator {
    pub fn new(first: Offset, second: Offset) -> Result<Self> {
        if first.is_zero() || second.is_zero() {
            return Err(Error::Config("difference offsets must be nonzero".into()));
        }
        Ok(Self { first, second })
    }

    /// Forward/backward pair along one direction: `(x - S_o x, x - S_{-o} x)`.
    pub fn symmetric(o: Offset) -> Result<Self> {
        Self::new(o, o.neg())
    }

    pub fn apply(&self, x: &Image) -> DifferencePair {
        let n = x.width();
        let mut out = DifferencePair::zeros(x.len());
        self.apply_into(x.as_slice(), n, &mut out);
        out
    }

    pub(crate) fn apply_into(&self, x: &[f64], n: usize, out: &mut DifferencePair) {
        shift_gather(x, n, self.first, &mut out.first);
        shift_gather(x, n, self.second, &mut out.second);
        for ((a, b), &v) in out.first.iter_mut().zip(out.second.iter_mut()).zip(x) {
            *a = v - *a;
            *b = v - *b;
        }
    }

    /// Exact transpose `L_j^T z`.
    pub fn adjoint(&self, z: &DifferencePair, n: usize) -> Image {
        let mut out = Image::zeros(n);
        self.adjoint_add(z, n, 1.0, out.as_mut_slice());
        out
    }

    /// `out += scale * L_j^T z`.
    pub(crate) fn adjoint_add(&self, z: &DifferencePair, n: usize, scale: f64, out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(&z.first).zip(&z.second) {
            *o += scale * (a + b);
        }
        shift_scatter_add(&z.first, n, self.first, -scale, out);
        shift_scatter_add(&z.second, n, self.second, -scale, out);
    }
}

/// The ordered family `(L_1, ..., L_J)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    ops: Vec<DiffOperator>,
}

impl Stencil {
    pub fn new(ops: Vec<DiffOperator>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Config("stencil needs at least one difference operator".into()));
        }
        Ok(Self { ops })
    }

    /// Six perpendicular neighbor pairs covering the twelve nearest and
    /// next-nearest neighbors. The first pair alone is isotropic TV.
    pub fn semilocal() -> Self {
        let p = |a: (i32, i32), b: (i32, i32)| DiffOperator {
            first: Offset::new(a.0, a.1),
            second: Offset::new(b.0, b.1),
        };
        Self {
            ops: vec![
                p((0, 1), (1, 0)),
                p((0, -1), (-1, 0)),
                p((1, 1), (1, -1)),
                p((-1, -1), (-1, 1)),
                p((0, 2), (2, 0)),
                p((0, -2), (-2, 0)),
            ],
        }
    }

    /// Isotropic TV with backward differences.
    pub fn isotropic_tv() -> Self {
        Self { ops: vec![DiffOperator { first: Offset::new(0, 1), second: Offset::new(1, 0) }] }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[DiffOperator] {
        &self.ops
    }

    pub fn get(&self, j: usize) -> &DiffOperator {
        &self.ops[j]
    }
}

impl Default for Stencil {
    fn default() -> Self {
        Self::semilocal()
    }
}

/// One coefficient of a surrogate adjoint kernel. `component` selects the
/// difference image (0 or 1), `offset` the tap position relative to the
/// output pixel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTap {
    pub component: usize,
    pub offset: Offset,
    pub weight: f64,
}

/// Replacement `L~_j` for `L_j^T` with the same sparsity support. On the
/// interior it computes
/// `a0 z1[p] + a1 z1[p + a] + b0 z2[p] + b1 z2[p + b]`; borders follow the
/// same replicate rule as the exact transpose, which is recovered for
/// coefficients `(1, -1, 1, -1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointSurrogate {
    pub op: DiffOperator,
    pub coeffs: [f64; 4],
}

impl AdjointSurrogate {
    pub fn matched(op: DiffOperator) -> Self {
        Self { op, coeffs: [1.0, -1.0, 1.0, -1.0] }
    }

    pub fn new(op: DiffOperator, coeffs: [f64; 4]) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("surrogate coefficients must be finite".into()));
        }
        Ok(Self { op, coeffs })
    }

    /// Build from explicit taps, rejecting any tap outside the support of
    /// `L_j^T`.
    pub fn from_taps(op: DiffOperator, taps: &[SurrogateTap]) -> Result<Self> {
        let mut coeffs = [0.0; 4];
        for tap in taps {
            let neighbor = match tap.component {
                0 => op.first,
                1 => op.second,
                k => return Err(Error::Config(format!("surrogate tap component {k} out of range (0 or 1)"))),
            };
            let slot = if tap.offset.is_zero() {
                2 * tap.component
            } else if tap.offset == neighbor {
                2 * tap.component + 1
            } else {
                return Err(Error::Config(format!(
                    "surrogate tap at ({}, {}) on component {} is outside the support of the adjoint",
                    tap.offset.dr, tap.offset.dc, tap.component
                )));
            };
            coeffs[slot] += tap.weight;
        }
        Self::new(op, coeffs)
    }

    pub fn apply(&self, z: &DifferencePair, n: usize) -> Image {
        let mut out = Image::zeros(n);
        self.apply_add(z, n, 1.0, out.as_mut_slice());
        out
    }

    /// `out += scale * L~_j z`.
    pub(crate) fn apply_add(&self, z: &DifferencePair, n: usize, scale: f64, out: &mut [f64]) {
        let [a0, a1, b0, b1] = self.coeffs;
        for ((o, a), b) in out.iter_mut().zip(&z.first).zip(&z.second) {
            *o += scale * (a0 * a + b0 * b);
        }
        shift_scatter_add(&z.first, n, self.op.first, scale * a1, out);
        shift_scatter_add(&z.second, n, self.op.second, scale * b1, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(n: usize, rng: &mut ChaCha8Rng) -> Image {
        Image::from_vec(n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_pair(len: usize, rng: &mut ChaCha8Rng) -> DifferencePair {
        DifferencePair {
            first: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            second: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    /// Dense `2L x L` matrix of an operator, assembled column by column
    /// from the definition of a replicate-boundary shift.
    fn dense_l(op: &DiffOperator, n: usize) -> Vec<Vec<f64>> {
        let l = n * n;
        let mut m = vec![vec![0.0; l]; 2 * l];
        for (block, o) in [op.first, op.second].into_iter().enumerate() {
            for r in 0..n as i64 {
                for c in 0..n as i64 {
                    let row = block * l + (r as usize) * n + c as usize;
                    let sr = (r - o.dr as i64).clamp(0, n as i64 - 1) as usize;
                    let sc = (c - o.dc as i64).clamp(0, n as i64 - 1) as usize;
                    m[row][(r as usize) * n + c as usize] += 1.0;
                    m[row][sr * n + sc] -= 1.0;
                }
            }
        }
        m
    }

    #[test]
    fn make_grid_rejects_bad_dimensions() {
        assert!(ImageGrid::new(64, 48.0, 50.0, 1.0).is_err());
        assert!(ImageGrid::new(64, 70.0, 32.0, 1.0).is_err());
        assert!(ImageGrid::new(64, 48.0, 0.0, 1.0).is_err());
        assert!(ImageGrid::new(64, 48.0, 32.0, -1.0).is_err());
    }

    #[test]
    fn equal_diameters_give_equal_masks() {
        let g = ImageGrid::new(40, 30.0, 30.0, 1.0).unwrap();
        assert_eq!(g.grid_mask(), g.roi_mask());
    }

    #[test]
    fn mask_counts_match_enumeration() {
        let g = ImageGrid::new(64, 48.0, 32.0, 1.0).unwrap();
        let mut grid_count = 0;
        let mut roi_count = 0;
        for r in 0..64 {
            for c in 0..64 {
                let dx = c as f64 - 31.5;
                let dy = r as f64 - 31.5;
                if dx * dx + dy * dy <= 24.0 * 24.0 {
                    grid_count += 1;
                }
                if dx * dx + dy * dy <= 16.0 * 16.0 {
                    roi_count += 1;
                }
            }
        }
        assert_eq!(g.grid_mask().iter().filter(|&&m| m).count(), grid_count);
        assert_eq!(g.roi_mask().iter().filter(|&&m| m).count(), roi_count);
        assert!(g.roi_mask().iter().zip(g.grid_mask()).all(|(&r, &gm)| !r || gm));
    }

    #[test]
    fn full_size_roi_area_close_to_disk_area() {
        let g = ImageGrid::new(512, 400.0, 300.0, 1.0).unwrap();
        let count = g.roi_mask().iter().filter(|&&m| m).count() as f64;
        let area = std::f64::consts::PI * 150.0 * 150.0;
        assert!((count - area).abs() / area < 2e-3, "{count} vs {area}");
    }

    #[test]
    fn constants_have_zero_differences() {
        let x = Image::filled(9, 3.25);
        for op in Stencil::semilocal().ops() {
            let d = op.apply(&x);
            assert!(d.first.iter().chain(&d.second).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn impulse_response_of_first_operator() {
        let n = 7;
        let mut x = Image::zeros(n);
        x.set(3, 3, 1.0);
        let op = Stencil::semilocal().ops()[0];
        let d = op.apply(&x);
        assert_eq!(d.first[3 * n + 3], 1.0);
        assert_eq!(d.first[3 * n + 4], -1.0);
        let nonzero = d.first.iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn apply_matches_dense_assembly() {
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for op in Stencil::semilocal().ops() {
            let x = random_image(n, &mut rng);
            let m = dense_l(op, n);
            let d = op.apply(&x);
            let got: Vec<f64> = d.first.iter().chain(&d.second).copied().collect();
            for (row, g) in m.iter().zip(&got) {
                let want: f64 = row.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
                assert!((want - g).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        let n = 11;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stencil = Stencil::semilocal();
        for _ in 0..100 {
            for op in stencil.ops() {
                let x = random_image(n, &mut rng);
                let z = random_pair(n * n, &mut rng);
                let lhs = op.apply(&x).dot(&z);
                let rhs = x.dot(&op.adjoint(&z, n));
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn matched_surrogate_equals_adjoint() {
        let n = 9;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for op in Stencil::semilocal().ops() {
            let z = random_pair(n * n, &mut rng);
            let a = op.adjoint(&z, n);
            let s = AdjointSurrogate::matched(*op).apply(&z, n);
            assert_eq!(a, s);
        }
    }

    #[test]
    fn random_surrogate_matches_dense_kernel() {
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for op in Stencil::semilocal().ops() {
            let coeffs = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ];
            let sur = AdjointSurrogate::new(*op, coeffs).unwrap();
            let z = random_pair(n * n, &mut rng);
            // Dense surrogate: same sparsity as L^T, entries rescaled per tap.
            let l = n * n;
            let mut dense = vec![vec![0.0; 2 * l]; l];
            for (block, o) in [op.first, op.second].into_iter().enumerate() {
                for r in 0..n as i64 {
                    for c in 0..n as i64 {
                        let p = (r as usize) * n + c as usize;
                        let sr = (r - o.dr as i64).clamp(0, n as i64 - 1) as usize;
                        let sc = (c - o.dc as i64).clamp(0, n as i64 - 1) as usize;
                        dense[p][block * l + p] += coeffs[2 * block];
                        dense[sr * n + sc][block * l + p] += coeffs[2 * block + 1];
                    }
                }
            }
            let zz: Vec<f64> = z.first.iter().chain(&z.second).copied().collect();
            let got = sur.apply(&z, n);
            for (row, g) in dense.iter().zip(got.as_slice()) {
                let want: f64 = row.iter().zip(&zz).map(|(a, b)| a * b).sum();
                assert!((want - g).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn surrogate_taps_outside_support_are_rejected() {
        let op = Stencil::semilocal().ops()[0];
        let ok = [
            SurrogateTap { component: 0, offset: Offset::new(0, 0), weight: 1.0 },
            SurrogateTap { component: 0, offset: op.first, weight: -1.0 },
            SurrogateTap { component: 1, offset: op.second, weight: -0.5 },
        ];
        let s = AdjointSurrogate::from_taps(op, &ok).unwrap();
        assert_eq!(s.coeffs, [1.0, -1.0, 0.0, -0.5]);
        let bad = [SurrogateTap { component: 1, offset: Offset::new(2, 2), weight: 1.0 }];
        assert!(matches!(AdjointSurrogate::from_taps(op, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn default_stencil_has_six_distinct_operators() {
        let s = Stencil::semilocal();
        assert_eq!(s.len(), 6);
        for i in 0..6 {
            for j in i + 1..6 {
                assert_ne!(s.ops()[i], s.ops()[j]);
            }
        }
    }
}
