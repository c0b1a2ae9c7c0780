//! Fixed-depth forward pass: groups of data and regularization layers with
//! their own parameters and adjoint choices.

use serde::{Deserialize, Serialize};

use super::dbfb::{step_data, step_reg, DataAdjoint, DualState, StepKind};
use super::objective::Problem;
use crate::datafit::CauchyParams;
use crate::error::{Error, Result};
use crate::grid::{AdjointSurrogate, Image};
use crate::regularizer::{MaskParams, StvParams};

/// Group sizes of the default 28-layer network.
pub const DEFAULT_GROUP_SIZES: [usize; 6] = [6, 5, 5, 4, 4, 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Matched `Fᵀ` and `L_jᵀ`.
    A1,
    /// `F̃ = Id`, matched `L_jᵀ`.
    A2,
    /// `F̃ = Id`, configured `L̃_j`.
    A3,
}

impl Architecture {
    pub fn data_adjoint(self) -> DataAdjoint {
        match self {
            Architecture::A1 => DataAdjoint::Matched,
            Architecture::A2 | Architecture::A3 => DataAdjoint::Identity,
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(Self::A1),
            "A2" => Ok(Self::A2),
            "A3" => Ok(Self::A3),
            _ => Err(Error::Config(format!("unknown architecture {s:?} (expected A1, A2 or A3)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataLayerParams {
    pub nu: f64,
    pub beta: f64,
    pub kappa: f64,
    pub xi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegLayerParams {
    /// One step per block.
    pub nu: Vec<f64>,
    /// Spatially constant weight per block.
    pub alpha: Vec<f64>,
    pub xi: f64,
    /// Surrogate adjoint coefficients `[a0, a1, b0, b1]` per block, used
    /// by A3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogates: Option<Vec<[f64; 4]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerParams {
    D(DataLayerParams),
    R(RegLayerParams),
}

impl LayerParams {
    pub fn kind(&self) -> StepKind {
        match self {
            LayerParams::D(_) => StepKind::D,
            LayerParams::R(_) => StepKind::R,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnrolledParams {
    /// `ξ` of the mask used to build the initial `w`.
    pub init_xi: f64,
    /// Initial data dual is `-init_scale · F y`.
    pub init_scale: f64,
    pub groups: Vec<Vec<LayerParams>>,
}

impl UnrolledParams {
    /// Every group is one data layer followed by `size - 1` regularization
    /// layers, all with the same parameters.
    pub fn constant(
        sizes: &[usize],
        data: DataLayerParams,
        reg: RegLayerParams,
        init_xi: f64,
        init_scale: f64,
    ) -> Self {
        let groups = sizes
            .iter()
            .map(|&n| {
                let mut g = Vec::with_capacity(n);
                if n > 0 {
                    g.push(LayerParams::D(data.clone()));
                }
                g.extend((1..n).map(|_| LayerParams::R(reg.clone())));
                g
            })
            .collect();
        Self { init_xi, init_scale, groups }
    }

    pub fn n_layers(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug)]
pub struct UnrolledOutput {
    pub x: Image,
    pub state: DualState,
    /// `x` after every layer, when requested.
    pub iterates: Vec<Image>,
}

fn surrogates_for(
    arch: Architecture,
    layer: &RegLayerParams,
    problem: &Problem,
    at: (usize, usize),
) -> Result<Option<Vec<AdjointSurrogate>>> {
    if arch != Architecture::A3 {
        return Ok(None);
    }
    let stencil = problem.ops().stencil();
    let coeffs = layer.surrogates.as_ref().ok_or_else(|| {
        Error::Config(format!("layer {} of group {} has no surrogate adjoints", at.1, at.0))
    })?;
    if coeffs.len() != stencil.len() {
        return Err(Error::Config(format!(
            "layer {} of group {}: {} surrogate kernels for {} blocks",
            at.1,
            at.0,
            coeffs.len(),
            stencil.len()
        )));
    }
    let sur = stencil.ops().iter().zip(coeffs).map(|(op, c)| AdjointSurrogate::new(*op, *c)).collect::<Result<Vec<_>>>()?;
    Ok(Some(sur))
}

/// Run the network on the measurements held by `problem`.
pub fn unrolled_forward(
    problem: &Problem,
    params: &UnrolledParams,
    arch: Architecture,
    record_iterates: bool,
) -> Result<UnrolledOutput> {
    let grid = problem.grid();
    let jn = problem.ops().stencil().len();
    let adj = arch.data_adjoint();
    let first_surrogates = params
        .groups
        .iter()
        .enumerate()
        .flat_map(|(g, layers)| layers.iter().enumerate().map(move |(l, p)| (g, l, p)))
        .find_map(|(g, l, p)| match p {
            LayerParams::R(r) => Some(surrogates_for(arch, r, problem, (g, l))),
            LayerParams::D(_) => None,
        })
        .transpose()?
        .flatten();
    let init_mask = MaskParams::new(grid, params.init_xi)?;
    let mut state = DualState::initial(problem, &init_mask, adj, first_surrogates.as_deref(), params.init_scale)?;
    let mut iterates = Vec::new();
    for (g, layers) in params.groups.iter().enumerate() {
        let x_k = state.primal();
        let residual = problem.residual(&x_k)?.into_vec();
        for (l, layer) in layers.iter().enumerate() {
            match layer {
                LayerParams::D(d) => {
                    let cauchy = CauchyParams::new(d.beta, d.kappa)?;
                    let anchor = crate::datafit::MajorantAnchor::new(residual.clone(), cauchy);
                    let mask = MaskParams::new(grid, d.xi)?;
                    step_data(problem, &mut state, &anchor, d.nu, &mask, adj)?;
                }
                LayerParams::R(r) => {
                    if r.nu.len() != jn || r.alpha.len() != jn {
                        return Err(Error::Config(format!(
                            "layer {l} of group {g}: expected {jn} step and weight values, got {} and {}",
                            r.nu.len(),
                            r.alpha.len()
                        )));
                    }
                    let stv = StvParams::per_operator(&r.alpha, grid.len())?;
                    let mask = MaskParams::new(grid, r.xi)?;
                    let sur = surrogates_for(arch, r, problem, (g, l))?;
                    step_reg(problem, &mut state, &r.nu, &stv, &mask, sur.as_deref())?;
                }
            }
            if record_iterates {
                iterates.push(state.primal());
            }
        }
    }
    Ok(UnrolledOutput { x: state.primal(), state, iterates })
}
