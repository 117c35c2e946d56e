//! Isolating-block construction from the `g⁺`/`g⁻` functionals.

pub mod construct;
pub mod functionals;
pub mod grid;

pub use construct::{
    build_block, choose_epsilon, classify_boundary_point, grid_values, monotonicity_along, probe, verify_block,
    BlockParams, BlockResult, BoundaryLabel, BoundarySample, ClassifiedPoint, EpsilonChoice, GridValues,
    InteriorSample, ProbeEvent, ProbeOutcome, VerificationReport, VerifyOptions,
};
pub use functionals::{
    alpha, estimate_g_minus, estimate_g_pair, estimate_g_plus, exit_time, BlockFunctionals, ExitTime, GEstimate,
};
pub use grid::{SampleGrid, SublevelRegion};
