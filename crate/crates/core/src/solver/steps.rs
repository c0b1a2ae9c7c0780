//! Step sizes of the dual iterations and their admissibility checks.

use serde::{Deserialize, Serialize};

use super::dbfb::Schedule;
use super::objective::Problem;
use crate::error::{Error, Result};
use crate::regularizer::MaskParams;
use crate::tomo::{spectral_norm, SpectralEstimate};

pub const POWER_MAX_ITERS: usize = 3000;
pub const POWER_TOL: f64 = 1e-9;
/// Safety factor applied on top of power-iteration estimates.
pub const AUTO_MARGIN: f64 = 1.05;
pub const DEFAULT_EPSILON: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    /// Data block constant: `ν_D = γ / σ`.
    pub sigma: f64,
    /// Per regularization block: `ν_j = γ / τ_j`.
    pub tau: Vec<f64>,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEstimates {
    /// `|||F H M⁻¹ Hᵀ F|||`.
    pub data: SpectralEstimate,
    /// `|||L_j M⁻¹ L_jᵀ|||`.
    pub reg: Vec<SpectralEstimate>,
}

fn sqrt_inv(mask: &MaskParams) -> Vec<f64> {
    mask.diag().iter().map(|m| 1.0 / m.sqrt()).collect()
}

/// `|||F H M⁻¹ Hᵀ F|||` computed as `|||M^{-½} Hᵀ F² H M^{-½}|||`.
pub fn data_norm(problem: &Problem, mask: &MaskParams) -> SpectralEstimate {
    let s = sqrt_inv(mask);
    let ops = problem.ops();
    let n = problem.grid().width();
    spectral_norm(
        problem.grid().len(),
        |v, out| {
            let x = crate::grid::Image::from_vec(n, v.iter().zip(&s).map(|(a, b)| a * b).collect()).expect("grid size");
            let fhx = ops.filtered_projection(&x).expect("grid size");
            let back = ops.filtered_backprojection(&fhx).expect("geometry size");
            for ((o, b), c) in out.iter_mut().zip(back.as_slice()).zip(&s) {
                *o = b * c;
            }
        },
        POWER_MAX_ITERS,
        POWER_TOL,
    )
}

/// `|||L_j M⁻¹ L_jᵀ|||` computed as `|||M^{-½} L_jᵀ L_j M^{-½}|||`.
pub fn reg_norm(problem: &Problem, mask: &MaskParams, j: usize) -> SpectralEstimate {
    let s = sqrt_inv(mask);
    let op = problem.ops().stencil().get(j);
    let n = problem.grid().width();
    let len = problem.grid().len();
    let mut lx = crate::grid::DifferencePair::zeros(len);
    spectral_norm(
        len,
        |v, out| {
            let x: Vec<f64> = v.iter().zip(&s).map(|(a, b)| a * b).collect();
            out.iter_mut().for_each(|o| *o = 0.0);
            op.apply_into(&x, n, &mut lx);
            op.adjoint_add(&lx, n, 1.0, out);
            for (o, c) in out.iter_mut().zip(&s) {
                *o *= c;
            }
        },
        POWER_MAX_ITERS,
        POWER_TOL,
    )
}

pub fn estimate_norms(problem: &Problem, mask: &MaskParams) -> NormEstimates {
    let jn = problem.ops().stencil().len();
    NormEstimates { data: data_norm(problem, mask), reg: (0..jn).map(|j| reg_norm(problem, mask, j)).collect() }
}

/// Steps from power-iteration estimates. Each `τ_j` follows its own block
/// norm; the regularization step sweeps the blocks one after another.
pub fn auto_steps(problem: &Problem, mask: &MaskParams, gamma: f64) -> Result<(StepSizes, NormEstimates)> {
    let est = estimate_norms(problem, mask);
    let steps = StepSizes {
        sigma: AUTO_MARGIN * est.data.value,
        tau: est.reg.iter().map(|e| AUTO_MARGIN * e.value).collect(),
        gamma,
    };
    if !(steps.sigma > 0.0) || steps.tau.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::StepSize("operator norm estimate vanished".into()));
    }
    Ok((steps, est))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Condition {
    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), pass: value >= bound, value, bound }
    }

    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), pass: value <= bound, value, bound }
    }

    /// Signed distance to the bound, positive when satisfied.
    pub fn margin(&self) -> f64 {
        if self.pass {
            (self.value - self.bound).abs()
        } else {
            -(self.value - self.bound).abs()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub conditions: Vec<Condition>,
    pub estimates: NormEstimates,
}

impl StepReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.pass)
    }

    pub fn failure_summary(&self) -> String {
        let parts: Vec<String> =
            self.failures().map(|c| format!("{} (value {:.6e}, bound {:.6e})", c.name, c.value, c.bound)).collect();
        if parts.is_empty() {
            "all step conditions hold".into()
        } else {
            format!("step conditions violated: {}", parts.join("; "))
        }
    }
}

/// Check `σ`, every `τ_j`, the relaxation
/// range `[ε, 2 - ε]` and that every `window` consecutive steps contain both
/// kinds.
pub fn validate_steps(
    problem: &Problem,
    mask: &MaskParams,
    steps: &StepSizes,
    schedule: &Schedule,
    window: usize,
) -> Result<StepReport> {
    validate_steps_with(problem, mask, steps, schedule, window, DEFAULT_EPSILON)
}

pub fn validate_steps_with(
    problem: &Problem,
    mask: &MaskParams,
    steps: &StepSizes,
    schedule: &Schedule,
    window: usize,
    eps: f64,
) -> Result<StepReport> {
    let jn = problem.ops().stencil().len();
    if steps.tau.len() != jn {
        return Err(Error::Shape(format!("{} tau values for {} regularization blocks", steps.tau.len(), jn)));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParam(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let est = estimate_norms(problem, mask);
    let mut conditions = vec![Condition::at_least("sigma", steps.sigma, est.data.value)];
    for (j, (t, e)) in steps.tau.iter().zip(&est.reg).enumerate() {
        conditions.push(Condition::at_least(format!("tau[{j}]"), *t, e.value));
    }
    conditions.push(Condition::at_least("gamma lower", steps.gamma, eps));
    conditions.push(Condition::at_most("gamma upper", steps.gamma, 2.0 - eps));
    conditions.push(Condition {
        name: format!("schedule window {window}"),
        pass: schedule.satisfies_window(window),
        value: window as f64,
        bound: schedule.len() as f64,
    });
    Ok(StepReport { conditions, estimates: est })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ImageGrid, Stencil};
    use crate::solver::objective::Operators;
    use crate::tomo::Geometry;

    fn problem() -> Problem {
        let grid = ImageGrid::new(10, 9.0, 6.0, 1.0).unwrap();
        let geom = Geometry::new(grid, 8, 1.0, 7).unwrap();
        let y = geom.zeros();
        Problem::new(Operators::new(geom, Stencil::semilocal()).unwrap(), y).unwrap()
    }

    #[test]
    fn auto_steps_pass_and_understeps_fail() {
        let p = problem();
        let mask = MaskParams::new(p.grid(), 2.0).unwrap();
        let sched: Schedule = "DR".parse().unwrap();
        let (steps, _) = auto_steps(&p, &mask, 1.0).unwrap();
        let rep = validate_steps(&p, &mask, &steps, &sched, 2).unwrap();
        assert!(rep.all_pass(), "{}", rep.failure_summary());

        let mut bad = steps.clone();
        bad.tau[3] = 0.5 * rep.estimates.reg[3].value;
        let rep = validate_steps(&p, &mask, &bad, &sched, 2).unwrap();
        let names: Vec<_> = rep.failures().map(|c| c.name.clone()).collect();
        assert!(names.contains(&"tau[3]".to_string()), "{names:?}");

        let mut bad = steps.clone();
        bad.gamma = 2.5;
        let rep = validate_steps(&p, &mask, &bad, &sched, 2).unwrap();
        assert!(rep.failures().any(|c| c.name == "gamma upper"));
    }

    #[test]
    fn sigma_just_above_estimate_passes() {
        let p = problem();
        let mask = MaskParams::new(p.grid(), 2.0).unwrap();
        let (mut steps, est) = auto_steps(&p, &mask, 1.0).unwrap();
        steps.sigma = 1.01 * est.data.value;
        let rep = validate_steps(&p, &mask, &steps, &"DR".parse().unwrap(), 2).unwrap();
        assert!(rep.conditions[0].pass && rep.conditions[0].margin() > 0.0);
    }

    #[test]
    fn per_block_bounds_suffice() {
        let p = problem();
        let mask = MaskParams::new(p.grid(), 2.0).unwrap();
        let (mut steps, est) = auto_steps(&p, &mask, 1.0).unwrap();
        steps.tau = est.reg.iter().map(|e| 1.01 * e.value).collect();
        let rep = validate_steps(&p, &mask, &steps, &"DR".parse().unwrap(), 2).unwrap();
        assert!(rep.all_pass(), "{}", rep.failure_summary());
    }

    #[test]
    fn difference_norm_is_bounded() {
        let p = problem();
        let mask = MaskParams::new(p.grid(), 1.5).unwrap();
        for e in estimate_norms(&p, &mask).reg {
            assert!(e.value <= 8.0 + 1e-9);
        }
    }
}
