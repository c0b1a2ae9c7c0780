use proptest::prelude::*;

use roict::datafit::{cauchy_value, majorant_value, majorant_weight, prox_h0, CauchyParams, MajorantAnchor};
use roict::grid::{DifferencePair, Image, ImageGrid, Stencil};
use roict::io::{decode_matrix, encode_matrix};
use roict::metrics::{crop_roi, psnr, ssim_roi};
use roict::regularizer::{project_nonneg, prox_rj};
use roict::tomo::{Geometry, RampFilter, Sinogram};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn geometry(n: usize, angles: usize, subrays: usize) -> Geometry {
    let d = n as f64 * 0.75;
    let grid = ImageGrid::new(n, d, d * 0.6, 1.0).unwrap();
    Geometry::with_subrays(grid, n * 5 / 8 + 1, 1.0, angles, subrays).unwrap()
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn projector_adjoint_identity(n in 6usize..14, angles in 1usize..9, subrays in 1usize..4, seed in any::<u64>()) {
        let g = geometry(n, angles, subrays);
        let mut state = seed | 1;
        let mut next = || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; (state % 2001) as f64 / 1000.0 - 1.0 };
        let x = Image::from_vec(n, (0..n * n).map(|_| next()).collect()).unwrap();
        let s = Sinogram::from_vec(angles, g.n_bins(), (0..g.sinogram_len()).map(|_| next()).collect()).unwrap();
        let lhs = dot(g.project(&x).unwrap().as_slice(), s.as_slice());
        let rhs = dot(x.as_slice(), g.backproject(&s).unwrap().as_slice());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn difference_adjoint_identity(x in values(64), p1 in values(64), p2 in values(64)) {
        let img = Image::from_vec(8, x).unwrap();
        let p = DifferencePair { first: p1, second: p2 };
        for op in Stencil::semilocal().ops() {
            let lhs = op.apply(&img).dot(&p);
            let rhs = img.dot(&op.adjoint(&p, 8));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        }
    }

    #[test]
    fn ramp_filter_is_symmetric_and_psd(n_bins in 2usize..24, a in values(24), b in values(24)) {
        let f = RampFilter::new(n_bins, 1.0).unwrap();
        let sa = Sinogram::from_vec(1, n_bins, a[..n_bins].to_vec()).unwrap();
        let sb = Sinogram::from_vec(1, n_bins, b[..n_bins].to_vec()).unwrap();
        let fa = f.apply(&sa).unwrap();
        let fb = f.apply(&sb).unwrap();
        let lhs = dot(fa.as_slice(), sb.as_slice());
        let rhs = dot(sa.as_slice(), fb.as_slice());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        prop_assert!(dot(fa.as_slice(), sa.as_slice()) >= -1e-12);
    }

    #[test]
    fn majorant_touches_and_dominates(z in -5.0f64..5.0, anchor in -5.0f64..5.0, beta in 0.1f64..100.0, kappa in 0.01f64..2.0) {
        let p = CauchyParams::new(beta, kappa).unwrap();
        let f = cauchy_value(z, &p);
        prop_assert!(majorant_value(z, anchor, &p) >= f - 1e-12 * f.abs().max(1.0));
        let fa = cauchy_value(anchor, &p);
        prop_assert!((majorant_value(anchor, anchor, &p) - fa).abs() <= 1e-12 * fa.abs().max(1.0));
        let w = majorant_weight(anchor, kappa);
        prop_assert!(w > 0.0 && w <= 1.0);
    }

    #[test]
    fn data_prox_is_nonexpansive(a in values(16), b in values(16), r in values(16), fy in values(16), scale in 0.01f64..10.0) {
        let anchor = MajorantAnchor::new(r, CauchyParams::new(5.0, 0.3).unwrap());
        let pa = prox_h0(&a, &anchor, scale, &fy).unwrap();
        let pb = prox_h0(&b, &anchor, scale, &fy).unwrap();
        let d_in: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let d_out: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum();
        prop_assert!(d_out <= d_in + 1e-15);
        let fixed = prox_h0(&fy, &anchor, scale, &fy).unwrap();
        prop_assert_eq!(fixed, fy);
    }

    #[test]
    fn group_shrinkage_shrinks_and_is_nonexpansive(a1 in values(9), a2 in values(9), b1 in values(9), b2 in values(9), gamma in 0.01f64..3.0, alpha in 0.0f64..1.0) {
        let a = DifferencePair { first: a1, second: a2 };
        let b = DifferencePair { first: b1, second: b2 };
        let al = vec![alpha; 9];
        let pa = prox_rj(&a, gamma, &al).unwrap();
        let pb = prox_rj(&b, gamma, &al).unwrap();
        for l in 0..9 {
            prop_assert!(pa.magnitude(l) <= a.magnitude(l) + 1e-15);
            prop_assert!(pa.magnitude(l) >= a.magnitude(l) - gamma * alpha - 1e-12);
        }
        let mut d_in = 0.0;
        let mut d_out = 0.0;
        for l in 0..9 {
            d_in += (a.first[l] - b.first[l]).powi(2) + (a.second[l] - b.second[l]).powi(2);
            d_out += (pa.first[l] - pb.first[l]).powi(2) + (pa.second[l] - pb.second[l]).powi(2);
        }
        prop_assert!(d_out <= d_in + 1e-12);
    }

    #[test]
    fn nonneg_projection_is_idempotent(x in values(25)) {
        let img = Image::from_vec(5, x).unwrap();
        let p = project_nonneg(&img);
        prop_assert!(p.as_slice().iter().all(|v| *v >= 0.0));
        prop_assert_eq!(project_nonneg(&p), p);
    }

    #[test]
    fn matrix_encoding_roundtrips_bit_exactly(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
        let data: Vec<f64> = (0..rows * cols).map(|i| f64::from_bits(seed.rotate_left(i as u32) ^ 0x3ff0_0000_0000_0000)).collect();
        let bytes = encode_matrix(rows, cols, &data).unwrap();
        let (r, c, back) = decode_matrix(&bytes).unwrap();
        prop_assert_eq!((r, c), (rows, cols));
        prop_assert!(back.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut corrupt = bytes.clone();
        if rows * cols > 0 {
            let k = bytes.len() - 5;
            corrupt[k] ^= 1;
            prop_assert!(decode_matrix(&corrupt).is_err());
        }
    }

    #[test]
    fn roi_metrics_of_identical_images(x in prop::collection::vec(0.0f64..1.0, 144)) {
        let grid = ImageGrid::new(12, 10.0, 6.0, 1.0).unwrap();
        let img = Image::from_vec(12, x).unwrap();
        prop_assert!((ssim_roi(&img, &img, &grid, 1.0) - 1.0).abs() < 1e-12);
        let c = crop_roi(&img, &grid);
        prop_assert_eq!(c.len(), grid.roi_mask().iter().filter(|m| **m).count());
        prop_assert!(psnr(&c, &c, 1.0).is_infinite());
    }
}
