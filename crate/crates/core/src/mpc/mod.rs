//! Integral-action linear MPC in input increments, condensed to a dense QP
//! in `ΔU_k = (Δu_0, .., Δu_{N-1})`.

mod model;
mod observer;
mod plan;

pub use model::{augment, discretize_zoh, CtModel, DiscreteModel, DtAugModel};
pub use observer::{observer_step, ObserverGain};
pub use plan::{
    build_constraints, build_cost, build_prediction, constraint_rows, receding_horizon_step,
    ConstraintStack, CostMatrices, Limits, MpcPlan, StepOutcome, Weights,
};
