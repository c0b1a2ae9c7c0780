//! Linear operators bundled with the measurements, and evaluation of the
//! cost `F` and of its reweighted surrogate `Q`.

use crate::datafit::{g_value, CauchyParams, MajorantAnchor};
use crate::error::{Error, Result};
use crate::grid::{Image, ImageGrid, Stencil};
use crate::regularizer::{stv_value, MaskParams, StvParams};
use crate::tomo::{Geometry, RampFilter, Sinogram};

/// Pixels below this value make the cost infinite.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Projector, ramp filter and difference stencil.
#[derive(Clone, Debug)]
pub struct Operators {
    geom: Geometry,
    filter: Option<RampFilter>,
    stencil: Stencil,
}

impl Operators {
    pub fn new(geom: Geometry, stencil: Stencil) -> Result<Self> {
        let filter = RampFilter::new(geom.n_bins(), geom.bin_size())?;
        Ok(Self { geom, filter: Some(filter), stencil })
    }

    /// Same operators with `F` replaced by the identity.
    pub fn without_filter(geom: Geometry, stencil: Stencil) -> Self {
        Self { geom, filter: None, stencil }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn grid(&self) -> &ImageGrid {
        self.geom.grid()
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn has_filter(&self) -> bool {
        self.filter.is_some()
    }

    pub fn filter(&self, s: &Sinogram) -> Result<Sinogram> {
        match &self.filter {
            Some(f) => f.apply(s),
            None => {
                self.geom.check(s)?;
                Ok(s.clone())
            }
        }
    }

    /// `F H x`.
    pub fn filtered_projection(&self, x: &Image) -> Result<Sinogram> {
        self.filter(&self.geom.project(x)?)
    }

    /// `Hᵀ F s`.
    pub fn filtered_backprojection(&self, s: &Sinogram) -> Result<Image> {
        self.geom.backproject(&self.filter(s)?)
    }
}

/// Operators together with the measured sinogram `y` and its filtered
/// version `F y`.
#[derive(Clone, Debug)]
pub struct Problem {
    ops: Operators,
    y: Sinogram,
    fy: Sinogram,
}

impl Problem {
    pub fn new(ops: Operators, y: Sinogram) -> Result<Self> {
        let fy = ops.filter(&y)?;
        Ok(Self { ops, y, fy })
    }

    pub fn ops(&self) -> &Operators {
        &self.ops
    }

    pub fn grid(&self) -> &ImageGrid {
        self.ops.grid()
    }

    pub fn y(&self) -> &Sinogram {
        &self.y
    }

    pub fn fy(&self) -> &Sinogram {
        &self.fy
    }

    /// Filtered residual `F(H x - y)`.
    pub fn residual(&self, x: &Image) -> Result<Sinogram> {
        self.ops.filtered_projection(x)?.sub(&self.fy)
    }

    /// Majorant anchored at `x̄`.
    pub fn anchor(&self, x_bar: &Image, cauchy: CauchyParams) -> Result<MajorantAnchor> {
        Ok(MajorantAnchor::new(self.residual(x_bar)?.into_vec(), cauchy))
    }
}

/// Cost parameters `(β, κ)`, `α` and `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostParams {
    pub cauchy: CauchyParams,
    pub stv: StvParams,
    pub mask: MaskParams,
}

impl CostParams {
    pub fn new(cauchy: CauchyParams, stv: StvParams, mask: MaskParams) -> Self {
        Self { cauchy, stv, mask }
    }

    /// Spatially constant `α_j` for every block of the stencil.
    pub fn uniform(grid: &ImageGrid, stencil: &Stencil, beta: f64, kappa: f64, alpha: f64, xi: f64) -> Result<Self> {
        Ok(Self {
            cauchy: CauchyParams::new(beta, kappa)?,
            stv: StvParams::constant(stencil.len(), grid.len(), alpha)?,
            mask: MaskParams::new(grid, xi)?,
        })
    }
}

fn is_feasible(x: &Image) -> bool {
    x.as_slice().iter().all(|&v| v >= -FEASIBILITY_TOL)
}

fn penalty_terms(problem: &Problem, params: &CostParams, x: &Image) -> Result<f64> {
    problem.grid().check(x)?;
    let stv = stv_value(x, problem.ops.stencil(), &params.stv)?;
    if params.mask.diag().len() != x.len() {
        return Err(Error::Shape("mask does not match image".into()));
    }
    Ok(stv + params.mask.half_norm_sq(x))
}

/// `F(x) = g(F(Hx - y)) + Σ_j r_j(L_j x) + ½ xᵀ M x`, or `+∞` when `x` has
/// a negative pixel.
pub fn objective_value(problem: &Problem, params: &CostParams, x: &Image) -> Result<f64> {
    let rest = penalty_terms(problem, params, x)?;
    if !is_feasible(x) {
        return Ok(f64::INFINITY);
    }
    Ok(g_value(problem.residual(x)?.as_slice(), &params.cauchy) + rest)
}

/// `Q(x, x̄)`: the cost with `g` replaced by its tangent majorant at the
/// residual of `x̄` held in `anchor`.
pub fn surrogate_value(problem: &Problem, params: &CostParams, x: &Image, anchor: &MajorantAnchor) -> Result<f64> {
    let rest = penalty_terms(problem, params, x)?;
    if !is_feasible(x) {
        return Ok(f64::INFINITY);
    }
    let r = problem.residual(x)?;
    if anchor.residual.len() != r.len() {
        return Err(Error::Shape("anchor does not match sinogram".into()));
    }
    Ok(anchor.value(r.as_slice()) + rest)
}

/// Convenience form of [`surrogate_value`] that builds the anchor from `x̄`.
pub fn surrogate_at(problem: &Problem, params: &CostParams, x: &Image, x_bar: &Image) -> Result<f64> {
    let anchor = problem.anchor(x_bar, params.cauchy)?;
    surrogate_value(problem, params, x, &anchor)
}
