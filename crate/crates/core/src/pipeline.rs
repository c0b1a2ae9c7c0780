//! Configuration-driven reconstruction shared by the command line, the
//! bench harness and the C interface.

use serde::Serialize;

use crate::config::{Method, RunConfig, SolverConfig, StepsConfig};
use crate::error::{Error, Result};
use crate::grid::{AdjointSurrogate, Image};
use crate::regularizer::{project_nonneg, MaskParams, StvParams};
use crate::solver::{
    auto_steps, hierarchical_tv_solve, linear_lambdas, reweighted_solve, unrolled_forward, validate_steps,
    Architecture, CostParams, DataLayerParams, InnerPlan, Operators, Problem, RegLayerParams, ReweightOptions,
    Schedule, StepReport, StepSizes, TraceRow, UnrolledParams,
};
use crate::datafit::CauchyParams;
use crate::tomo::{fbp, Geometry, Sinogram};

/// `π Δ / (S p²)`: maps `Hᵀ F y` to normalized intensities.
pub fn fbp_scale(geom: &Geometry) -> f64 {
    let ps = geom.grid().pixel_size();
    std::f64::consts::PI * geom.bin_size() / (geom.n_angles() as f64 * ps * ps)
}

pub fn build_problem(cfg: &RunConfig, y: Sinogram) -> Result<Problem> {
    let geom = cfg.geometry.geometry()?;
    geom.check(&y)?;
    Problem::new(Operators::new(geom, cfg.stencil()?)?, y)
}

pub fn cost_params(problem: &Problem, solver: &SolverConfig) -> Result<CostParams> {
    let jn = problem.ops().stencil().len();
    let grid = problem.grid();
    Ok(CostParams {
        cauchy: CauchyParams::new(solver.beta, solver.kappa)?,
        stv: StvParams::per_operator(&solver.alpha.expand(jn, "solver.alpha")?, grid.len())?,
        mask: MaskParams::new(grid, solver.xi)?,
    })
}

/// Explicit steps from the config, or power-iteration steps for `"auto"`.
pub fn step_sizes(problem: &Problem, mask: &MaskParams, solver: &SolverConfig) -> Result<StepSizes> {
    let jn = problem.ops().stencil().len();
    match &solver.steps {
        StepsConfig::Auto(_) => Ok(auto_steps(problem, mask, solver.gamma)?.0),
        StepsConfig::Explicit { sigma, tau } => {
            Ok(StepSizes { sigma: *sigma, tau: tau.expand(jn, "solver.steps.tau")?, gamma: solver.gamma })
        }
    }
}

/// Constant-parameter network matching a plain solver run with the given
/// steps. A3 layers get exact adjoint coefficients.
pub fn constant_unrolled_params(
    problem: &Problem,
    solver: &SolverConfig,
    steps: &StepSizes,
    arch: Architecture,
) -> Result<UnrolledParams> {
    let jn = problem.ops().stencil().len();
    let surrogates = (arch == Architecture::A3).then(|| {
        problem.ops().stencil().ops().iter().map(|op| AdjointSurrogate::matched(*op).coeffs).collect::<Vec<_>>()
    });
    let data = DataLayerParams { nu: steps.gamma / steps.sigma, beta: solver.beta, kappa: solver.kappa, xi: solver.xi };
    let reg = RegLayerParams {
        nu: steps.tau.iter().map(|t| steps.gamma / t).collect(),
        alpha: solver.alpha.expand(jn, "solver.alpha")?,
        xi: solver.xi,
        surrogates,
    };
    let scale = solver.init_scale.unwrap_or_else(|| fbp_scale(problem.ops().geometry()));
    Ok(UnrolledParams::constant(&solver.groups, data, reg, solver.xi, scale))
}

#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    #[serde(skip)]
    pub x: Image,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub architecture: Option<Architecture>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<StepSizes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_report: Option<StepReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions<'a> {
    pub override_steps: bool,
    pub trace: bool,
    pub reference: Option<&'a Image>,
    /// Per-layer parameters replacing the constant network.
    pub unrolled: Option<UnrolledParams>,
}

/// Reweighted solver start: the nonnegative part of FBP.
pub fn initial_image(problem: &Problem) -> Result<Image> {
    Ok(project_nonneg(&fbp(problem.ops().geometry(), problem.y())?))
}

/// Run `method`; the returned image is zero outside the support.
pub fn reconstruct(cfg: &RunConfig, problem: &Problem, method: Method, opts: RunOptions<'_>) -> Result<Reconstruction> {
    let solver = &cfg.solver;
    let mut rec = Reconstruction {
        x: problem.grid().zeros(),
        trace: Vec::new(),
        method,
        architecture: None,
        steps: None,
        step_report: None,
        layers: None,
    };
    match method {
        Method::Fbp => rec.x = fbp(problem.ops().geometry(), problem.y())?,
        Method::TvHier => {
            rec.x = hierarchical_tv_solve(problem, &linear_lambdas(solver.lambda_max, solver.tv_outer), solver.tv_inner)?.x
        }
        Method::Rdbfb => {
            let params = cost_params(problem, solver)?;
            let steps = step_sizes(problem, &params.mask, solver)?;
            let report = validate_steps(problem, &params.mask, &steps, &solver.schedule, solver.schedule.len())?;
            if !report.all_pass() && !opts.override_steps {
                return Err(Error::StepSize(report.failure_summary()));
            }
            let plans = vec![InnerPlan { schedule: solver.schedule.clone(), n_iters: solver.inner }; solver.outer.max(1)];
            let x0 = initial_image(problem)?;
            let out = reweighted_solve(
                problem,
                &params,
                &steps,
                &plans,
                &x0,
                ReweightOptions {
                    trace: opts.trace,
                    override_steps: true,
                    reference: opts.reference,
                    init_scale: solver.init_scale.unwrap_or(0.0),
                    ..Default::default()
                },
            )?;
            rec.x = out.x;
            rec.trace = out.trace;
            rec.steps = Some(steps);
            rec.step_report = Some(report);
        }
        Method::Unrolled => {
            let arch = solver.architecture;
            let params = match opts.unrolled {
                Some(p) => p,
                None => {
                    let mask = MaskParams::new(problem.grid(), solver.xi)?;
                    let steps = step_sizes(problem, &mask, solver)?;
                    let sched: Schedule = Schedule::group(1);
                    let report = validate_steps(problem, &mask, &steps, &sched, sched.len())?;
                    if !report.all_pass() && !opts.override_steps {
                        return Err(Error::StepSize(report.failure_summary()));
                    }
                    let p = constant_unrolled_params(problem, solver, &steps, arch)?;
                    rec.steps = Some(steps);
                    rec.step_report = Some(report);
                    p
                }
            };
            rec.layers = Some(params.n_layers());
            rec.architecture = Some(arch);
            rec.x = unrolled_forward(problem, &params, arch, false)?.x;
        }
    }
    problem.grid().restrict(&mut rec.x);
    Ok(rec)
}
