//! Slow independent implementations used to cross-check the fast paths:
//! scalar minimization, dense operator assembly, dense eigenvalues and an
//! accelerated primal-dual solver for the reweighted surrogate.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::datafit::MajorantAnchor;
use crate::error::Result;
use crate::grid::{DiffOperator, DifferencePair, Image};
use crate::solver::{CostParams, Problem};
use crate::tomo::spectral_norm;

/// Minimizer of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of a smooth unimodal `f` on `[lo, hi]` to near machine precision:
/// golden section to locate it, then bisection on the sign of a central
/// difference. Endpoints are returned when the slope does not change sign.
pub fn minimize_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let u = golden_section(&f, lo, hi, 1e-9 * (hi - lo).max(1.0));
    let slope = |t: f64| {
        let h = 1e-5 * t.abs().max(1.0);
        f((t + h).min(hi)) - f((t - h).max(lo))
    };
    let mut w = 1e-4 * u.abs().max(1.0);
    let (mut a, mut b);
    loop {
        a = (u - w).max(lo);
        b = (u + w).min(hi);
        let (sa, sb) = (slope(a), slope(b));
        if a == lo && sa >= 0.0 {
            return lo;
        }
        if b == hi && sb <= 0.0 {
            return hi;
        }
        if sa < 0.0 && sb > 0.0 {
            break;
        }
        w *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if slope(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Minimizer over the plane of `f`, searched in polar coordinates
/// `(r cos θ, r sin θ)` with `0 ≤ r ≤ r_max`: a coarse scan over θ, then
/// refinement of θ and of the radius for each θ. `f` must be unimodal along
/// every ray and in θ near its minimum.
pub fn minimize_polar(f: impl Fn(f64, f64) -> f64, r_max: f64) -> (f64, f64) {
    let best_r = |th: f64| minimize_scalar(|r| f(r * th.cos(), r * th.sin()), 0.0, r_max);
    let value = |th: f64| {
        let r = best_r(th);
        f(r * th.cos(), r * th.sin())
    };
    let n = 64;
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let th0 = (0..n)
        .map(|k| k as f64 * step)
        .min_by(|a, b| value(*a).total_cmp(&value(*b)))
        .unwrap();
    let th = minimize_scalar(value, th0 - step, th0 + step);
    let r = best_r(th);
    (r * th.cos(), r * th.sin())
}

/// Dense matrix of a linear map given by its action on vectors.
pub fn dense_from_fn(n_in: usize, n_out: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n_out, n_in);
    let mut e = vec![0.0; n_in];
    for i in 0..n_in {
        e[i] = 1.0;
        let col = apply(&e);
        assert_eq!(col.len(), n_out);
        for (r, v) in col.into_iter().enumerate() {
            m[(r, i)] = v;
        }
        e[i] = 0.0;
    }
    m
}

/// Dense `(x - S_a x, x - S_b x)` stacked as a `2L × L` matrix, built from
/// index arithmetic with replicated borders.
pub fn dense_difference(op: &DiffOperator, n: usize) -> DMatrix<f64> {
    let len = n * n;
    let mut m = DMatrix::zeros(2 * len, len);
    let clamp = |v: i64| v.clamp(0, n as i64 - 1) as usize;
    for (block, o) in [op.first, op.second].into_iter().enumerate() {
        for r in 0..n {
            for c in 0..n {
                let row = block * len + r * n + c;
                let src = clamp(r as i64 - o.dr as i64) * n + clamp(c as i64 - o.dc as i64);
                m[(row, r * n + c)] += 1.0;
                m[(row, src)] -= 1.0;
            }
        }
    }
    m
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Dense `F H` (masked projector followed by the ramp filter).
pub fn dense_filtered_projector(problem: &Problem) -> DMatrix<f64> {
    let n = problem.grid().width();
    let t = problem.ops().geometry().sinogram_len();
    dense_from_fn(problem.grid().len(), t, |v| {
        problem.ops().filtered_projection(&Image::from_vec(n, v.to_vec()).unwrap()).unwrap().into_vec()
    })
}

/// Minimizer of `Q(·, x̄)` by the accelerated primal-dual method for a
/// 1-strongly convex primal term: `x ↦ ½ xᵀ M x + ι_{≥0}` handled by its
/// prox, the data term and every regularization block through conjugate
/// proxes. Uses the matched operators only.
pub fn primal_dual_minimize(problem: &Problem, params: &CostParams, anchor: &MajorantAnchor, iters: usize) -> Result<Image> {
    let ops = problem.ops();
    let stencil = ops.stencil();
    let n = problem.grid().width();
    let len = problem.grid().len();
    let fy = problem.fy().as_slice();
    let beta_w: Vec<f64> = anchor.weights.iter().map(|w| anchor.params.beta * w).collect();
    let m = params.mask.diag();

    // |||K|||² for K = [F H; L_1; ...; L_J].
    let knorm2 = spectral_norm(
        len,
        |v, out| {
            let x = Image::from_vec(n, v.to_vec()).unwrap();
            let s = ops.filtered_projection(&x).unwrap();
            out.copy_from_slice(ops.filtered_backprojection(&s).unwrap().as_slice());
            for op in stencil.ops() {
                op.adjoint_add(&op.apply(&x), n, 1.0, out);
            }
        },
        5000,
        1e-10,
    )
    .value
        * 1.01;

    let mut tau = 1.0 / knorm2.sqrt();
    let mut sigma = 1.0 / knorm2.sqrt();
    let mut x = Image::zeros(n);
    let mut xbar = x.clone();
    let mut q0 = vec![0.0; fy.len()];
    let mut qj: Vec<DifferencePair> = vec![DifferencePair::zeros(len); stencil.len()];
    for _ in 0..iters {
        // q0 ← prox_{σ h0*}(q0 + σ F H x̄) with h0(v) = Σ ½ β ω (v - Fy)².
        let kx = ops.filtered_projection(&xbar)?;
        for t in 0..q0.len() {
            let p = q0[t] + sigma * kx.as_slice()[t];
            q0[t] = (p - sigma * fy[t]) / (1.0 + sigma / beta_w[t]);
        }
        // q_j ← projection of q_j + σ L_j x̄ onto the pixelwise α balls.
        for (j, op) in stencil.ops().iter().enumerate() {
            let lx = op.apply(&xbar);
            let alpha = params.stv.field(j);
            let q = &mut qj[j];
            for k in 0..len {
                let a = q.first[k] + sigma * lx.first[k];
                let b = q.second[k] + sigma * lx.second[k];
                let norm = a.hypot(b);
                if alpha[k] > 0.0 {
                    let s = (norm / alpha[k]).max(1.0);
                    q.first[k] = a / s;
                    q.second[k] = b / s;
                } else {
                    q.first[k] = 0.0;
                    q.second[k] = 0.0;
                }
            }
        }
        // x ← prox_{τ f}(x - τ Kᵀ q).
        let q0s = crate::tomo::Sinogram::from_vec(kx.n_angles(), kx.n_bins(), q0.clone())?;
        let mut kt = ops.filtered_backprojection(&q0s)?;
        for (op, q) in stencil.ops().iter().zip(&qj) {
            op.adjoint_add(q, n, 1.0, kt.as_mut_slice());
        }
        let x_old = x.clone();
        for i in 0..len {
            let v = (x.as_slice()[i] - tau * kt.as_slice()[i]) / (1.0 + tau * m[i]);
            x.as_mut_slice()[i] = v.max(0.0);
        }
        let theta = 1.0 / (1.0 + 2.0 * tau).sqrt();
        tau *= theta;
        sigma /= theta;
        for i in 0..len {
            xbar.as_mut_slice()[i] = x.as_slice()[i] + theta * (x.as_slice()[i] - x_old.as_slice()[i]);
        }
    }
    Ok(x)
}
