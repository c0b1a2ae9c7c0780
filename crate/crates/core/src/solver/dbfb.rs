//! Dual block forward-backward iterations on `Q(·, x̄)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::objective::{objective_value, surrogate_value, CostParams, Problem};
use super::steps::{validate_steps, StepSizes};
use crate::datafit::{prox_h0, MajorantAnchor};
use crate::error::{ensure_len, Error, Result};
use crate::grid::{AdjointSurrogate, DifferencePair, Image};
use crate::metrics::psnr_roi;
use crate::regularizer::{prox_rj_pixel, project_nonneg, MaskParams, StvParams};
use crate::tomo::Sinogram;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    /// Data block.
    D,
    /// All regularization blocks at once.
    R,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::D => "D",
            StepKind::R => "R",
        })
    }
}

/// Cyclic D/R pattern.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Schedule {
    steps: Vec<StepKind>,
}

impl Schedule {
    pub fn new(steps: Vec<StepKind>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Config("schedule must not be empty".into()));
        }
        Ok(Self { steps })
    }

    /// One data step followed by `n_reg` regularization steps.
    pub fn group(n_reg: usize) -> Self {
        let mut steps = vec![StepKind::D];
        steps.extend(std::iter::repeat_n(StepKind::R, n_reg));
        Self { steps }
    }

    pub fn steps(&self) -> &[StepKind] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn at(&self, n: usize) -> StepKind {
        self.steps[n % self.steps.len()]
    }

    /// Every `window` consecutive steps of the repeated pattern contain at
    /// least one D and one R.
    pub fn satisfies_window(&self, window: usize) -> bool {
        let len = self.steps.len();
        if window == 0 {
            return false;
        }
        (0..len).all(|start| {
            let mut d = false;
            let mut r = false;
            for k in 0..window {
                match self.at(start + k) {
                    StepKind::D => d = true,
                    StepKind::R => r = true,
                }
            }
            d && r
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let steps = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c.to_ascii_uppercase() {
                'D' => Ok(StepKind::D),
                'R' => Ok(StepKind::R),
                other => Err(Error::Config(format!("schedule may only contain D and R, found {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(steps)
    }
}

impl TryFrom<String> for Schedule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Schedule> for String {
    fn from(s: Schedule) -> String {
        s.steps.iter().map(|k| k.to_string()).collect()
    }
}

/// Operator used in place of `Fᵀ` when mapping data-dual increments back
/// to image space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataAdjoint {
    #[default]
    Matched,
    Identity,
}

/// Dual variables and the image-space accumulator
/// `w = -M⁻¹ (Hᵀ F̃ z⁰ + Σ_j L̃_j z^j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub z0: Sinogram,
    pub zj: Vec<DifferencePair>,
    pub w: Image,
    /// Steps taken so far; selects the position in a cyclic schedule.
    pub steps_taken: usize,
}

impl DualState {
    pub fn zeros(problem: &Problem) -> Self {
        let n = problem.grid().len();
        Self {
            z0: problem.ops().geometry().zeros(),
            zj: vec![DifferencePair::zeros(n); problem.ops().stencil().len()],
            w: problem.grid().zeros(),
            steps_taken: 0,
        }
    }

    /// `z⁰ = -c F y`, `z^j = 0` and the matching `w`.
    pub fn initial(
        problem: &Problem,
        mask: &MaskParams,
        data_adj: DataAdjoint,
        surrogates: Option<&[AdjointSurrogate]>,
        scale: f64,
    ) -> Result<Self> {
        let mut s = Self::zeros(problem);
        s.z0 = problem.fy().scaled(-scale);
        s.w = s.recompute_w(problem, mask, data_adj, surrogates)?;
        Ok(s)
    }

    /// `-M⁻¹ (Hᵀ F̃ z⁰ + Σ_j L̃_j z^j)` from the current duals.
    pub fn recompute_w(
        &self,
        problem: &Problem,
        mask: &MaskParams,
        data_adj: DataAdjoint,
        surrogates: Option<&[AdjointSurrogate]>,
    ) -> Result<Image> {
        let mut acc = data_backprojection(problem, &self.z0, data_adj)?;
        reg_adjoint_add(problem, &self.zj, surrogates, 1.0, acc.as_mut_slice())?;
        Ok(mask.apply_inv(&acc).scaled(-1.0))
    }

    pub fn primal(&self) -> Image {
        project_nonneg(&self.w)
    }
}

fn data_backprojection(problem: &Problem, z: &Sinogram, adj: DataAdjoint) -> Result<Image> {
    let geom = problem.ops().geometry();
    match adj {
        DataAdjoint::Matched => problem.ops().filtered_backprojection(z),
        DataAdjoint::Identity => geom.backproject(z),
    }
}

fn reg_adjoint_add(
    problem: &Problem,
    z: &[DifferencePair],
    surrogates: Option<&[AdjointSurrogate]>,
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    let stencil = problem.ops().stencil();
    let n = problem.grid().width();
    ensure_len("dual blocks", z.len(), stencil.len())?;
    match surrogates {
        None => {
            for (op, zj) in stencil.ops().iter().zip(z) {
                op.adjoint_add(zj, n, scale, out);
            }
        }
        Some(sur) => {
            ensure_len("adjoint surrogates", sur.len(), stencil.len())?;
            for (s, zj) in sur.iter().zip(z) {
                s.apply_add(zj, n, scale, out);
            }
        }
    }
    Ok(())
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("dual step must be positive, got {nu}")))
    }
}

/// Data step: `z̃ = z⁰ + ν F H x`, `z⁰ ← z̃ - ν prox_{h₀/ν}(z̃/ν)`,
/// `w ← w - M⁻¹ Hᵀ F̃ Δz⁰`.
pub fn step_data(
    problem: &Problem,
    state: &mut DualState,
    anchor: &MajorantAnchor,
    nu: f64,
    mask: &MaskParams,
    adj: DataAdjoint,
) -> Result<()> {
    check_nu(nu)?;
    let x = state.primal();
    let fhx = problem.ops().filtered_projection(&x)?;
    let zt: Vec<f64> = state.z0.as_slice().iter().zip(fhx.as_slice()).map(|(z, v)| z + nu * v).collect();
    let scaled: Vec<f64> = zt.iter().map(|v| v / nu).collect();
    let p = prox_h0(&scaled, anchor, 1.0 / nu, problem.fy().as_slice())?;
    let mut delta = problem.ops().geometry().zeros();
    for (((d, z), &t), &pv) in delta.as_mut_slice().iter_mut().zip(state.z0.as_mut_slice()).zip(&zt).zip(&p) {
        let next = t - nu * pv;
        *d = next - *z;
        *z = next;
    }
    let back = mask.apply_inv(&data_backprojection(problem, &delta, adj)?);
    for (w, b) in state.w.as_mut_slice().iter_mut().zip(back.as_slice()) {
        *w -= b;
    }
    state.steps_taken += 1;
    Ok(())
}

/// Regularization step on all blocks:
/// `z^j ← s̃ - ν_j prox_{r_j/ν_j}(s̃/ν_j)` with `s̃ = z^j + ν_j L_j x`,
/// then `w ← w - M⁻¹ Σ_j L̃_j Δz^j`.
pub fn step_reg(
    problem: &Problem,
    state: &mut DualState,
    nu: &[f64],
    stv: &StvParams,
    mask: &MaskParams,
    surrogates: Option<&[AdjointSurrogate]>,
) -> Result<()> {
    let stencil = problem.ops().stencil();
    ensure_len("regularization steps", nu.len(), stencil.len())?;
    stv.check(stencil, problem.grid().len())?;
    for &v in nu {
        check_nu(v)?;
    }
    if let Some(sur) = surrogates {
        ensure_len("adjoint surrogates", sur.len(), stencil.len())?;
    }
    let n = problem.grid().width();
    let len = problem.grid().len();
    let mut lx = DifferencePair::zeros(len);
    let mut d = DifferencePair::zeros(len);
    let mut acc = vec![0.0; len];
    for (j, op) in stencil.ops().iter().enumerate() {
        let x = state.primal();
        op.apply_into(x.as_slice(), n, &mut lx);
        let zj = &mut state.zj[j];
        let nj = nu[j];
        let alpha = stv.field(j);
        for l in 0..len {
            let a = zj.first[l] + nj * lx.first[l];
            let b = zj.second[l] + nj * lx.second[l];
            // s̃ - ν prox_{r/ν}(s̃/ν): projection of s̃ onto the α ball.
            let p = prox_rj_pixel(a / nj, b / nj, alpha[l] / nj);
            let (na, nb) = (a - nj * p.0, b - nj * p.1);
            d.first[l] = na - zj.first[l];
            d.second[l] = nb - zj.second[l];
            zj.first[l] = na;
            zj.second[l] = nb;
        }
        acc.iter_mut().for_each(|v| *v = 0.0);
        match surrogates {
            None => op.adjoint_add(&d, n, 1.0, &mut acc),
            Some(sur) => sur[j].apply_add(&d, n, 1.0, &mut acc),
        }
        for ((w, a), m) in state.w.as_mut_slice().iter_mut().zip(&acc).zip(mask.diag()) {
            *w -= a / m;
        }
    }
    state.steps_taken += 1;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub step: StepKind,
    pub q: f64,
    pub f: f64,
    pub psnr: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions<'a> {
    pub n_iters: usize,
    /// Evaluate `Q` and `F` after every step.
    pub trace: bool,
    /// Keep a copy of `x_n` after every step.
    pub record_iterates: bool,
    /// Skip step-size validation.
    pub override_steps: bool,
    /// Reference image for the PSNR column of the trace.
    pub reference: Option<&'a Image>,
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub x: Image,
    pub state: DualState,
    pub trace: Vec<TraceRow>,
    pub iterates: Vec<Image>,
}

/// Minimize `Q(·, x̄)` with matched adjoints. Starts from
/// [`DualState::initial`] with unit scale unless a state is supplied.
pub fn dbfb_solve(
    problem: &Problem,
    params: &CostParams,
    x_bar: &Image,
    steps: &StepSizes,
    schedule: &Schedule,
    opts: &SolveOptions<'_>,
    state: Option<DualState>,
) -> Result<SolveOutput> {
    if !opts.override_steps {
        let report = validate_steps(problem, &params.mask, steps, schedule, schedule.len())?;
        if !report.all_pass() {
            return Err(Error::StepSize(report.failure_summary()));
        }
    }
    let anchor = problem.anchor(x_bar, params.cauchy)?;
    let state = match state {
        Some(s) => s,
        None => DualState::initial(problem, &params.mask, DataAdjoint::Matched, None, 1.0)?,
    };
    run_dbfb(problem, params, &anchor, steps, schedule, opts, state, 0)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_dbfb(
    problem: &Problem,
    params: &CostParams,
    anchor: &MajorantAnchor,
    steps: &StepSizes,
    schedule: &Schedule,
    opts: &SolveOptions<'_>,
    mut state: DualState,
    iter_offset: usize,
) -> Result<SolveOutput> {
    let nu_d = steps.gamma / steps.sigma;
    let nu_r: Vec<f64> = steps.tau.iter().map(|t| steps.gamma / t).collect();
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    for it in 0..opts.n_iters {
        let kind = schedule.at(state.steps_taken);
        match kind {
            StepKind::D => step_data(problem, &mut state, anchor, nu_d, &params.mask, DataAdjoint::Matched)?,
            StepKind::R => step_reg(problem, &mut state, &nu_r, &params.stv, &params.mask, None)?,
        }
        if opts.trace || opts.record_iterates {
            let x = state.primal();
            if opts.trace {
                trace.push(TraceRow {
                    iter: iter_offset + it + 1,
                    step: kind,
                    q: surrogate_value(problem, params, &x, anchor)?,
                    f: objective_value(problem, params, &x)?,
                    psnr: opts.reference.map(|r| psnr_roi(&x, r, problem.grid())),
                });
            }
            if opts.record_iterates {
                iterates.push(x);
            }
        }
    }
    Ok(SolveOutput { x: state.primal(), state, trace, iterates })
}
