//! Domain types for components, architectures, workloads and mappings.

pub mod architecture;
pub mod component;
pub mod document;
pub mod domain;
pub mod error;
pub mod mapping;
pub mod workload;

pub use architecture::{Architecture, ConverterSite, Crossing, Level, StaticElement, SweepAxis};
pub use component::{ComponentClass, ComponentError, ComponentSpec, Library};
pub use document::{load_spec, load_specs, mapping_to_json, parse_mapping, parse_spec, Spec, SpecDocument, SPEC_VERSION};
pub use domain::{ActionKind, Dim, DimMap, Domain, Tensor, TensorMap, TensorSet};
pub use error::SpecError;
pub use mapping::{LevelMapping, Mapping, MappingError, PadMode, Schedule};
pub use workload::{Bits, Layer, LayerKind, Workload};

/// Check `m` against the layer and architecture.
pub fn validate_mapping(m: &Mapping, w: &Layer, a: &Architecture, mode: PadMode) -> Result<(), MappingError> {
    m.validate(w, a, mode)
}
