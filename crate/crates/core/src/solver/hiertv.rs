//! Hierarchical TV baseline: forward-backward on
//! `½ ‖Hx - y‖²_F + λ_k TV(x)` with a decreasing `λ_k`, starting from FBP.

use serde::Serialize;

use super::objective::Problem;
use crate::error::{Error, Result};
use crate::grid::{DiffOperator, DifferencePair, Image, Stencil};
use crate::tomo::{fbp, spectral_norm, SpectralEstimate};

/// Dual step of the TV prox iterations, below `1 / |||∇∇ᵀ||| = 1/8`.
pub const TV_DUAL_STEP: f64 = 0.124;

/// `λ_max, ..., 0` in `k` linearly spaced values.
pub fn linear_lambdas(lambda_max: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => (0..k).map(|i| lambda_max * (k - 1 - i) as f64 / (k - 1) as f64).collect(),
    }
}

/// `|||Hᵀ F H|||`.
pub fn data_gradient_norm(problem: &Problem) -> SpectralEstimate {
    let ops = problem.ops();
    let n = problem.grid().width();
    spectral_norm(
        problem.grid().len(),
        |v, out| {
            let x = Image::from_vec(n, v.to_vec()).expect("grid size");
            let s = ops.geometry().project(&x).expect("grid size");
            out.copy_from_slice(ops.filtered_backprojection(&s).expect("geometry size").as_slice());
        },
        super::steps::POWER_MAX_ITERS,
        super::steps::POWER_TOL,
    )
}

/// `argmin_x ½‖x - u‖² + t TV(x)` by projected gradient on the dual,
/// warm-started from `p`.
pub fn tv_prox(u: &Image, t: f64, p: &mut DifferencePair, iters: usize) -> Image {
    let op = Stencil::isotropic_tv().ops()[0];
    let n = u.width();
    let primal = |op: &DiffOperator, p: &DifferencePair| {
        let mut x = u.clone();
        op.adjoint_add(p, n, -1.0, x.as_mut_slice());
        x
    };
    if t <= 0.0 {
        p.first.iter_mut().chain(p.second.iter_mut()).for_each(|v| *v = 0.0);
        return u.clone();
    }
    let mut g = DifferencePair::zeros(u.len());
    for _ in 0..iters {
        let x = primal(&op, p);
        op.apply_into(x.as_slice(), n, &mut g);
        for l in 0..u.len() {
            let a = p.first[l] + TV_DUAL_STEP * g.first[l];
            let b = p.second[l] + TV_DUAL_STEP * g.second[l];
            let scale = (a.hypot(b) / t).max(1.0);
            p.first[l] = a / scale;
            p.second[l] = b / scale;
        }
    }
    primal(&op, p)
}

#[derive(Clone, Debug, Serialize)]
pub struct HierTvOutput {
    #[serde(skip)]
    pub x: Image,
    pub step: f64,
    pub norm: SpectralEstimate,
}

/// One forward-backward step per entry of `lambdas`, with `inner` dual
/// iterations for each TV prox. The result is restricted to the support.
pub fn hierarchical_tv_solve(problem: &Problem, lambdas: &[f64], inner: usize) -> Result<HierTvOutput> {
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Config("lambda schedule must be nonincreasing".into()));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Config("lambda values must be nonnegative".into()));
    }
    let norm = data_gradient_norm(problem);
    if !(norm.value > 0.0) {
        return Err(Error::InvalidGeometry("projector has no support".into()));
    }
    let step = 1.0 / norm.value;
    let geom = problem.ops().geometry();
    let mut x = fbp(geom, problem.y())?;
    let mut p = DifferencePair::zeros(x.len());
    for &lambda in lambdas {
        let r = problem.residual(&x)?;
        let grad = geom.backproject(&r)?;
        let u = Image::from_vec(x.width(), x.as_slice().iter().zip(grad.as_slice()).map(|(a, g)| a - step * g).collect())?;
        x = tv_prox(&u, step * lambda, &mut p, inner);
    }
    problem.grid().restrict(&mut x);
    Ok(HierTvOutput { x, step, norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizer::{stv_value, StvParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lambda_schedule() {
        assert_eq!(linear_lambdas(100.0, 5), vec![100.0, 75.0, 50.0, 25.0, 0.0]);
        assert_eq!(linear_lambdas(3.0, 1), vec![3.0]);
    }

    #[test]
    fn tv_prox_reduces_prox_objective() {
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let u = Image::from_vec(n, (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let t = 0.2;
        let tv = StvParams::constant(1, n * n, t).unwrap();
        let obj = |x: &Image| {
            0.5 * x.as_slice().iter().zip(u.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                + stv_value(x, &Stencil::isotropic_tv(), &tv).unwrap()
        };
        let mut p = DifferencePair::zeros(n * n);
        let x = tv_prox(&u, t, &mut p, 300);
        let fx = obj(&x);
        assert!(fx < obj(&u));
        for _ in 0..50 {
            let pert = Image::from_vec(n, x.as_slice().iter().map(|v| v + rng.random_range(-1e-3..1e-3)).collect()).unwrap();
            assert!(obj(&pert) >= fx - 1e-6);
        }
    }

    #[test]
    fn zero_weight_is_identity() {
        let u = Image::filled(6, 0.3);
        let mut p = DifferencePair::zeros(36);
        assert_eq!(tv_prox(&u, 0.0, &mut p, 10), u);
    }
}
