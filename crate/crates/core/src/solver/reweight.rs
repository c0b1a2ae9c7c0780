//! Majorize-minimize outer loop: re-anchor the Cauchy majorant at the
//! current image and run the dual solver on the new surrogate, carrying the
//! dual variables over.

use super::dbfb::{run_dbfb, DataAdjoint, DualState, Schedule, SolveOptions, TraceRow};
use super::objective::{objective_value, CostParams, Problem};
use super::steps::{validate_steps, StepSizes};
use crate::error::{Error, Result};
use crate::grid::Image;

/// Inner schedule and iteration count of one outer step.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerPlan {
    pub schedule: Schedule,
    pub n_iters: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ReweightOptions<'a> {
    pub trace: bool,
    pub record_iterates: bool,
    pub override_steps: bool,
    pub reference: Option<&'a Image>,
    /// Dual state to start from. Defaults to [`DualState::initial`] with
    /// `init_scale`.
    pub state: Option<DualState>,
    pub init_scale: f64,
}

#[derive(Clone, Debug)]
pub struct ReweightOutput {
    pub x: Image,
    pub state: DualState,
    /// `x_0, x_1, ..., x_K`.
    pub outer_iterates: Vec<Image>,
    /// `F(x_k)` for every outer iterate.
    pub objective: Vec<f64>,
    /// Majorant weights of the last anchor.
    pub last_weights: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub iterates: Vec<Image>,
}

/// Run `plans.len()` outer steps starting from `x0`.
pub fn reweighted_solve(
    problem: &Problem,
    params: &CostParams,
    steps: &StepSizes,
    plans: &[InnerPlan],
    x0: &Image,
    opts: ReweightOptions<'_>,
) -> Result<ReweightOutput> {
    if plans.is_empty() {
        return Err(Error::Config("reweighting needs at least one outer step".into()));
    }
    problem.grid().check(x0)?;
    if !opts.override_steps {
        for plan in plans {
            let report = validate_steps(problem, &params.mask, steps, &plan.schedule, plan.schedule.len())?;
            if !report.all_pass() {
                return Err(Error::StepSize(report.failure_summary()));
            }
        }
    }
    let mut state = match opts.state {
        Some(s) => s,
        None => DualState::initial(problem, &params.mask, DataAdjoint::Matched, None, opts.init_scale)?,
    };
    let mut x = x0.clone();
    let mut outer_iterates = vec![x.clone()];
    let mut objective = vec![objective_value(problem, params, &x)?];
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut last_weights = Vec::new();
    let mut offset = 0;
    for plan in plans {
        let anchor = problem.anchor(&x, params.cauchy)?;
        let inner = SolveOptions {
            n_iters: plan.n_iters,
            trace: opts.trace,
            record_iterates: opts.record_iterates,
            override_steps: true,
            reference: opts.reference,
        };
        // Each outer step restarts its schedule at the first entry.
        state.steps_taken = 0;
        let out = run_dbfb(problem, params, &anchor, steps, &plan.schedule, &inner, state, offset)?;
        offset += plan.n_iters;
        state = out.state;
        x = out.x;
        trace.extend(out.trace);
        iterates.extend(out.iterates);
        objective.push(objective_value(problem, params, &x)?);
        outer_iterates.push(x.clone());
        last_weights = anchor.weights;
    }
    Ok(ReweightOutput { x, state, outer_iterates, objective, last_weights, trace, iterates })
}
