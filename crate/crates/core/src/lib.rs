//! Isolating blocks for multivalued semiflows generated by differential
//! inclusions, with a discretized Heaviside reaction–diffusion application.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod block;
pub mod error;
pub mod inclusion;
pub mod par;
pub mod rd;
pub mod region;
pub mod semiflow;
pub mod state;
pub mod suite;
pub mod trajectory;
pub mod zoo;

pub use error::{Error, Result};
pub use par::Exec;
pub use region::{CloudLabel, PointCloudSet, Region, RegionShape, RegionSpec};
pub use semiflow::Generator;
pub use state::{distance, StateVec};
pub use trajectory::{Bundle, Trajectory};
