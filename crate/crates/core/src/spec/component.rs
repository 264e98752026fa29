//! Leaf hardware primitives and the name-keyed library that holds them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::domain::{ActionKind, Domain};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentClass {
    Storage,
    Compute,
    Converter,
    Network,
    Source,
}

/// A leaf hardware primitive: energy per action in pJ, static power in mW,
/// area in um^2 per instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub class: ComponentClass,
    pub domain_in: Domain,
    pub domain_out: Domain,
    #[serde(default)]
    pub energy_per_action: BTreeMap<ActionKind, f64>,
    #[serde(default)]
    pub static_power_mw: f64,
    #[serde(default)]
    pub area_um2: f64,
    /// Storage capacity in bits per instance (storage only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_bits: Option<u64>,
    /// Bits moved by one read/write/update action.
    #[serde(default = "default_width")]
    pub width_bits: u32,
    /// Actions per cycle per instance.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    /// Where the default figures come from.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub provenance: String,
}

fn default_width() -> u32 {
    8
}

fn default_bandwidth() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ComponentError {
    #[error("{0}: negative or non-finite quantity `{1}`")]
    Negative(String, &'static str),
    #[error("{0}: converter must change domain")]
    ConverterSameDomain(String),
    #[error("{0}: only converters may change domain")]
    DomainChange(String),
    #[error("{0}: storage requires a positive capacity")]
    CapacityNonPositive(String),
    #[error("{0}: `convert` energy on a non-converter")]
    ConvertOnNonConverter(String),
}

impl ComponentSpec {
    pub fn energy(&self, action: ActionKind) -> f64 {
        self.energy_per_action.get(&action).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), ComponentError> {
        let bad = |q: f64| !q.is_finite() || q < 0.0;
        if self.energy_per_action.values().any(|e| bad(*e)) {
            return Err(ComponentError::Negative(self.name.clone(), "energy_per_action"));
        }
        if bad(self.static_power_mw) {
            return Err(ComponentError::Negative(self.name.clone(), "static_power_mw"));
        }
        if bad(self.area_um2) {
            return Err(ComponentError::Negative(self.name.clone(), "area_um2"));
        }
        if bad(self.bandwidth) || self.bandwidth == 0.0 {
            return Err(ComponentError::Negative(self.name.clone(), "bandwidth"));
        }
        if self.width_bits == 0 {
            return Err(ComponentError::Negative(self.name.clone(), "width_bits"));
        }
        match self.class {
            ComponentClass::Converter if self.domain_in == self.domain_out => {
                return Err(ComponentError::ConverterSameDomain(self.name.clone()))
            }
            ComponentClass::Converter => {}
            _ if self.domain_in != self.domain_out => {
                return Err(ComponentError::DomainChange(self.name.clone()))
            }
            _ => {}
        }
        if self.class != ComponentClass::Converter && self.energy(ActionKind::Convert) > 0.0 {
            return Err(ComponentError::ConvertOnNonConverter(self.name.clone()));
        }
        if self.class == ComponentClass::Storage && self.capacity_bits.unwrap_or(0) == 0 {
            return Err(ComponentError::CapacityNonPositive(self.name.clone()));
        }
        Ok(())
    }

    /// Multiply every energy and the static power by `factor`.
    pub fn scaled(&self, factor: f64) -> ComponentSpec {
        let mut c = self.clone();
        for e in c.energy_per_action.values_mut() {
            *e *= factor;
        }
        c.static_power_mw *= factor;
        c
    }
}

/// Components keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Library {
    components: BTreeMap<String, ComponentSpec>,
}

impl Library {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, spec: ComponentSpec) -> Option<ComponentSpec> {
        self.components.insert(spec.name.clone(), spec)
    }

    pub fn get(&self, name: &str) -> Option<&ComponentSpec> {
        self.components.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ComponentSpec> {
        self.components.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.components.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComponentSpec> {
        self.components.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.components.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Entries of `other` replace same-named entries of `self`.
    pub fn overlay(&mut self, other: &Library) {
        for c in other.iter() {
            self.insert(c.clone());
        }
    }

    /// Multiply every component's energies by `factor`.
    pub fn scaled(&self, factor: f64) -> Library {
        Library {
            components: self
                .components
                .iter()
                .map(|(k, v)| (k.clone(), v.scaled(factor)))
                .collect(),
        }
    }
}

impl FromIterator<ComponentSpec> for Library {
    fn from_iter<I: IntoIterator<Item = ComponentSpec>>(iter: I) -> Self {
        let mut lib = Library::new();
        for c in iter {
            lib.insert(c);
        }
        lib
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sram() -> ComponentSpec {
        ComponentSpec {
            name: "sram".into(),
            class: ComponentClass::Storage,
            domain_in: Domain::DE,
            domain_out: Domain::DE,
            energy_per_action: [(ActionKind::Read, 1.0)].into_iter().collect(),
            static_power_mw: 0.0,
            area_um2: 10.0,
            capacity_bits: Some(1024),
            width_bits: 8,
            bandwidth: 1.0,
            provenance: String::new(),
        }
    }

    #[test]
    fn storage_needs_capacity() {
        let mut c = sram();
        assert!(c.validate().is_ok());
        c.capacity_bits = Some(0);
        assert_eq!(c.validate(), Err(ComponentError::CapacityNonPositive("sram".into())));
    }

    #[test]
    fn converter_domains() {
        let mut c = sram();
        c.class = ComponentClass::Converter;
        assert!(matches!(c.validate(), Err(ComponentError::ConverterSameDomain(_))));
        c.domain_out = Domain::AE;
        assert!(c.validate().is_ok());
        c.class = ComponentClass::Compute;
        assert!(matches!(c.validate(), Err(ComponentError::DomainChange(_))));
    }

    #[test]
    fn negative_energy_rejected() {
        let mut c = sram();
        c.energy_per_action.insert(ActionKind::Write, -1.0);
        assert!(matches!(c.validate(), Err(ComponentError::Negative(_, "energy_per_action"))));
    }

    #[test]
    fn convert_only_on_converters() {
        let mut c = sram();
        c.energy_per_action.insert(ActionKind::Convert, 1.0);
        assert!(matches!(c.validate(), Err(ComponentError::ConvertOnNonConverter(_))));
    }
}
