//! Targeting policies, welfare-weighted policy values, the alpha search and the
//! confounding sweep.

mod alpha;
mod experiment;
mod policy;

pub use alpha::{alpha_cap, alpha_threshold, threshold_for_assignments, AlphaContext, AlphaGrid};
pub use experiment::{
    alpha_table, sweep, Arrangement, Cell, EvalContext, ExperimentResult, NashFloor, Pipeline, PipelineConfig,
    Policies, SweepConfig, TeMode,
};
pub use policy::{
    assign_top, budget_count, policy_value, random_assignment, welfare_weights, Assignment, PolicyKind, Welfare,
};
