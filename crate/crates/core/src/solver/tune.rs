//! Derivative-free fitting of unrolled-network parameters to one training
//! pair by minimizing the ROI mean squared error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::objective::Problem;
use super::unrolled::{unrolled_forward, Architecture, LayerParams, UnrolledParams};
use crate::error::Result;
use crate::grid::Image;
use crate::metrics::{crop_roi, mse};

/// Initial coordinate step in log space.
pub const INITIAL_STEP: f64 = 0.5;
/// Coordinate descent stops refining below this step.
pub const MIN_STEP: f64 = 0.02;

#[derive(Clone, Debug, Serialize)]
pub struct TuneOutput {
    pub params: UnrolledParams,
    pub initial_mse: f64,
    pub final_mse: f64,
    pub evaluations: usize,
    /// Best MSE after each evaluation.
    pub history: Vec<f64>,
}

/// Log-multipliers: five global factors (β, κ, α, ν_D, ν_R) followed by
/// per-group factors for κ and for α.
fn apply(base: &UnrolledParams, theta: &[f64]) -> UnrolledParams {
    let k = base.groups.len();
    let mut out = base.clone();
    for (g, layers) in out.groups.iter_mut().enumerate() {
        let kappa_g = theta[5 + g];
        let alpha_g = theta[5 + k + g];
        for layer in layers.iter_mut() {
            match layer {
                LayerParams::D(d) => {
                    d.beta *= theta[0].exp();
                    d.kappa *= (theta[1] + kappa_g).exp();
                    d.nu *= theta[3].exp();
                }
                LayerParams::R(r) => {
                    let a = (theta[2] + alpha_g).exp();
                    r.alpha.iter_mut().for_each(|v| *v *= a);
                    let s = theta[4].exp();
                    r.nu.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
    }
    out
}

struct Evaluator<'a> {
    problem: &'a Problem,
    base: &'a UnrolledParams,
    arch: Architecture,
    target: Vec<f64>,
    budget: usize,
    used: usize,
    best: f64,
    best_theta: Vec<f64>,
    history: Vec<f64>,
}

impl Evaluator<'_> {
    fn exhausted(&self) -> bool {
        self.used >= self.budget
    }

    /// MSE at `theta`, or `None` once the budget is spent.
    fn eval(&mut self, theta: &[f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        self.used += 1;
        let params = apply(self.base, theta);
        let value = match unrolled_forward(self.problem, &params, self.arch, false) {
            Ok(out) => {
                let v = mse(&crop_roi(&out.x, self.problem.grid()), &self.target);
                if v.is_finite() { v } else { f64::INFINITY }
            }
            Err(_) => f64::INFINITY,
        };
        if value < self.best {
            self.best = value;
            self.best_theta = theta.to_vec();
        }
        self.history.push(self.best);
        Some(value)
    }
}

/// Coordinate descent over log-parameters followed by a Nelder–Mead polish
/// of the global factors. Only improvements are accepted, so the returned
/// MSE never exceeds the initial one. `budget` counts forward passes,
/// including the initial evaluation.
pub fn tune_params(
    problem: &Problem,
    arch: Architecture,
    init: &UnrolledParams,
    reference: &Image,
    budget: usize,
    seed: u64,
) -> Result<TuneOutput> {
    problem.grid().check(reference)?;
    let dim = 5 + 2 * init.groups.len();
    let target = crop_roi(reference, problem.grid());
    let mut ev = Evaluator {
        problem,
        base: init,
        arch,
        target,
        budget,
        used: 0,
        best: f64::INFINITY,
        best_theta: vec![0.0; dim],
        history: Vec::new(),
    };
    let Some(initial_mse) = ev.eval(&vec![0.0; dim]) else {
        return Ok(TuneOutput { params: init.clone(), initial_mse: f64::NAN, final_mse: f64::NAN, evaluations: 0, history: Vec::new() });
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dim).collect();
    let mut step = INITIAL_STEP;
    let cd_budget = budget - budget / 4;
    'outer: while step >= MIN_STEP {
        order.shuffle(&mut rng);
        let mut improved = false;
        for &c in &order {
            for dir in [1.0, -1.0] {
                if ev.used >= cd_budget {
                    break 'outer;
                }
                let mut t = ev.best_theta.clone();
                t[c] += dir * step;
                let before = ev.best;
                if ev.eval(&t).is_some_and(|v| v < before) {
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    nelder_mead_polish(&mut ev, 5, step.max(MIN_STEP));

    Ok(TuneOutput {
        params: apply(init, &ev.best_theta),
        initial_mse,
        final_mse: ev.best,
        evaluations: ev.used,
        history: ev.history,
    })
}

/// Nelder–Mead on the first `k` coordinates around the incumbent.
fn nelder_mead_polish(ev: &mut Evaluator<'_>, k: usize, scale: f64) {
    let base = ev.best_theta.clone();
    let embed = |p: &[f64]| {
        let mut t = base.clone();
        t[..k].copy_from_slice(p);
        t
    };
    let start: Vec<f64> = base[..k].to_vec();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.clone(), ev.best)];
    for i in 0..k {
        let mut p = start.clone();
        p[i] += scale;
        let Some(v) = ev.eval(&embed(&p)) else { return };
        simplex.push((p, v));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[k].clone();
        let centroid: Vec<f64> =
            (0..k).map(|i| simplex[..k].iter().map(|(p, _)| p[i]).sum::<f64>() / k as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let r = along(1.0);
        let Some(fr) = ev.eval(&embed(&r)) else { return };
        if fr < simplex[0].1 {
            let e = along(2.0);
            let Some(fe) = ev.eval(&embed(&e)) else { return };
            simplex[k] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (r, fr);
        } else {
            let c = along(-0.5);
            let Some(fc) = ev.eval(&embed(&c)) else { return };
            if fc < worst.1 {
                simplex[k] = (c, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = best.iter().zip(&item.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let Some(v) = ev.eval(&embed(&p)) else { return };
                    *item = (p, v);
                }
            }
        }
    }
}
