//! Access, conversion and MAC counting for a mapped layer, with an exact
//! loop-nest interpreter to check the closed forms against.

mod analysis;
mod counts;
mod factors;
mod oracle;

pub use analysis::analyze;
pub use counts::{AccessCounts, EdgeCounts, TensorCounts};
pub use factors::{reuse_factors, EdgeReuse, ReuseFactor};
pub use oracle::{oracle_capacity, simulate, OracleError, DEFAULT_ORACLE_CAP};
