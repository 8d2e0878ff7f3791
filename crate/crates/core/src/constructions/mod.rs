//! Sum-GNN gadgets approximating Mean and Max, and the compiler turning a
//! Mean-GNN or Max-GNN into a Sum-GNN within a prescribed additive error.

mod emulation;
mod gadgets;
mod verify;

pub use emulation::{compile_to_sum, eps_hat, growth_bound, CompileOptions, EmulationReport};
pub use gadgets::{
    build_indicator, build_max_approx, build_max_approx_q, build_mean_approx, build_mean_approx_q,
    resolution_for, IndicatorSpec,
};
pub use verify::{verify_emulation, verify_growth, verify_sandwich, EmulationCheck, GrowthReport, SandwichReport, SANDWICH_TOL};
