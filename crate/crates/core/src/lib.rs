//! Analytical energy, throughput and area model for photonic and analog
//! compute-in-memory DNN accelerators.
//!
//! A layer is mapped onto a storage/compute hierarchy; the model counts
//! every storage access, domain conversion and MAC the mapping implies and
//! rolls those counts up with per-action component energies.

pub mod evaluator;
pub mod experiments;
pub mod library;
pub mod mapper;
pub mod reuse;
pub mod spec;

pub use evaluator::{evaluate, EvaluationResult};
pub use mapper::{search, SearchConfig};
pub use reuse::{analyze, reuse_factors, simulate, AccessCounts, ReuseFactor};
pub use spec::{Architecture, Dim, Layer, Library, Mapping, PadMode, Tensor, Workload};
