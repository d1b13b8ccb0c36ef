//! Critical branching random walk machinery: offspring laws, tree samplers,
//! hitting/escape estimators, and the branching derivative-formula sweep.

pub mod estimators;
pub mod offspring;
pub mod sampler;

pub use estimators::{
    coupled_union_deficit, derivative_sweep_branching, estimate_bcap, estimate_hitting_ratio,
    estimate_two_sided_hit, law_histogram, mc_occupation, mc_past_green, BranchSweep, LawKind, McEstimate,
    RadiiParams,
};
pub use offspring::{builtin_offspring, OffspringDistribution};
pub use sampler::{sample_past_range, sample_tree_range, RangeSample, TreeKind};
