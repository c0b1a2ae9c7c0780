//! Reconstruction algorithms built on the data and regularization blocks.

mod dbfb;
mod hiertv;
mod objective;
mod reweight;
mod steps;
mod tune;
mod unrolled;

pub use dbfb::{
    dbfb_solve, step_data, step_reg, DataAdjoint, DualState, Schedule, SolveOptions, SolveOutput, StepKind, TraceRow,
};
pub use hiertv::{data_gradient_norm, hierarchical_tv_solve, linear_lambdas, tv_prox, HierTvOutput, TV_DUAL_STEP};
pub use objective::{
    objective_value, surrogate_at, surrogate_value, CostParams, Operators, Problem, FEASIBILITY_TOL,
};
pub use reweight::{reweighted_solve, InnerPlan, ReweightOptions, ReweightOutput};
pub use steps::{
    auto_steps, data_norm, estimate_norms, reg_norm, validate_steps, validate_steps_with, Condition, NormEstimates,
    StepReport, StepSizes, AUTO_MARGIN, DEFAULT_EPSILON,
};
pub use tune::{tune_params, TuneOutput};
pub use unrolled::{
    unrolled_forward, Architecture, DataLayerParams, LayerParams, RegLayerParams, UnrolledOutput, UnrolledParams,
    DEFAULT_GROUP_SIZES,
};
