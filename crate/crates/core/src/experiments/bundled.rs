//! Specs and references shipped with the crate.

use crate::library::ReferenceBreakdown;
use crate::spec::{parse_spec, Architecture, Library, SpecError, Workload};

pub const ALBIREO_SPEC: &str = include_str!("../../data/albireo.spec");
pub const VGG16_SPEC: &str = include_str!("../../data/vgg16.spec");
pub const ALEXNET_SPEC: &str = include_str!("../../data/alexnet.spec");
pub const ALBIREO_REFERENCE: &str = include_str!("../../data/albireo_reference.breakdown");

/// The bundled Albireo-style architecture resolved against `lib`.
pub fn albireo(lib: &Library) -> Result<Architecture, SpecError> {
    Ok(parse_spec(ALBIREO_SPEC, lib)?.architecture()?.clone())
}

/// A bundled workload by name (`vgg16` or `alexnet`).
pub fn workload(name: &str) -> Result<Workload, SpecError> {
    let text = match name {
        "vgg16" => VGG16_SPEC,
        "alexnet" => ALEXNET_SPEC,
        other => {
            return Err(SpecError::UnknownComponent { path: "workload".into(), name: other.to_string() });
        }
    };
    Ok(parse_spec(text, &Library::default())?.workload()?.clone())
}

pub fn reference_breakdown() -> ReferenceBreakdown {
    serde_json::from_str(ALBIREO_REFERENCE).expect("bundled reference parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{builtin_library, ProfileName};

    #[test]
    fn bundled_specs_resolve() {
        let lib = builtin_library(ProfileName::Conservative);
        let a = albireo(&lib).unwrap();
        assert_eq!(a.crossings().len(), 4);
        assert_eq!(workload("vgg16").unwrap().layers.len(), 16);
        assert_eq!(workload("alexnet").unwrap().layers.len(), 8);
        let r = reference_breakdown();
        assert!((r.fractions.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
