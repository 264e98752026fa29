//! Rooted storage/compute hierarchy with spatial fanouts and explicit
//! domain-crossing converters.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::component::{ComponentClass, ComponentError, Library};
use super::domain::{Dim, Domain, Tensor, TensorSet};
use super::error::SpecError;

/// Fanout parameters of the Albireo-style template that the reuse sweep varies.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Optical components sharing one analog-electrical weight.
    AoPerAeWeight,
    /// Optical components reusing one modulated input.
    AoInputFanout,
    /// Analog-electrical components reusing (accumulating) one output.
    AeOutputFanout,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 3] =
        [SweepAxis::AoPerAeWeight, SweepAxis::AoInputFanout, SweepAxis::AeOutputFanout];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::AoPerAeWeight => "ao_per_ae_weight",
            SweepAxis::AoInputFanout => "ao_input_fanout",
            SweepAxis::AeOutputFanout => "ae_output_fanout",
        }
    }

    /// The tensor whose conversions this axis is meant to reduce.
    pub fn target(self) -> Tensor {
        match self {
            SweepAxis::AoPerAeWeight => Tensor::Weights,
            SweepAxis::AoInputFanout => Tensor::Inputs,
            SweepAxis::AeOutputFanout => Tensor::Outputs,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown sweep axis `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub name: String,
    pub component: String,
    /// Spatial copies relative to the parent level.
    #[serde(default = "one")]
    pub fanout: u64,
    /// Storage: tensors kept here. Compute: operands held in a register
    /// across consecutive MACs. Network: must be empty.
    #[serde(default)]
    pub keeps: TensorSet,
    /// Dimensions that may be split across this level's copies; `None` allows all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_dims: Option<Vec<Dim>>,
    /// Identical child tiles are served by one parent access.
    #[serde(default)]
    pub may_multicast: bool,
    /// Partial outputs of sibling copies are summed before leaving.
    #[serde(default)]
    pub may_reduce: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<SweepAxis>,

    // Cached from the component at resolution time.
    #[serde(skip)]
    pub class: Option<ComponentClass>,
    #[serde(skip)]
    pub domain: Option<Domain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_bits: Option<u64>,
}

fn one() -> u64 {
    1
}

impl Level {
    pub fn class(&self) -> ComponentClass {
        self.class.expect("level used before resolution")
    }

    pub fn domain(&self) -> Domain {
        self.domain.expect("level used before resolution")
    }

    pub fn is_storage(&self) -> bool {
        self.class() == ComponentClass::Storage
    }

    pub fn allows_spatial(&self, dim: Dim) -> bool {
        self.fanout > 1 && self.spatial_dims.as_ref().is_none_or(|ds| ds.contains(&dim))
    }
}

/// A converter placed on the edge between level `after` and the next inner level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConverterSite {
    pub name: String,
    /// Name of the outer level of the edge.
    pub after: String,
    pub component: String,
    pub tensors: TensorSet,
    /// Defaults to the number of instances of the outer level: a value is
    /// converted once and then multicast to the inner copies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<u64>,
    #[serde(skip)]
    pub edge: usize,
}

/// An element that only contributes static power and area (e.g. an off-chip laser).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticElement {
    pub name: String,
    pub component: String,
    #[serde(default = "one")]
    pub instances: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub name: String,
    pub clock_hz: f64,
    pub levels: Vec<Level>,
    #[serde(default)]
    pub converters: Vec<ConverterSite>,
    #[serde(default, rename = "static")]
    pub statics: Vec<StaticElement>,
}

/// A distinct domain crossing: edge index plus direction.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Crossing {
    pub edge: usize,
    pub from: Domain,
    pub to: Domain,
}

impl Architecture {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn compute_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Instances of level `l` in the whole system.
    pub fn instances(&self, l: usize) -> u64 {
        self.levels[..=l].iter().map(|lv| lv.fanout).product()
    }

    pub fn peak_macs_per_cycle(&self) -> u64 {
        self.instances(self.compute_level())
    }

    pub fn level_index(&self, name: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.name == name)
    }

    pub fn converter_instances(&self, site: &ConverterSite) -> u64 {
        site.instances.unwrap_or_else(|| self.instances(site.edge))
    }

    /// Converters on `edge` handling `tensor`.
    pub fn converters_for(&self, edge: usize, tensor: Tensor) -> impl Iterator<Item = &ConverterSite> {
        self.converters
            .iter()
            .filter(move |c| c.edge == edge && c.tensors.contains(tensor))
    }

    /// Direction a tensor's values take across an edge.
    pub fn flow(&self, edge: usize, tensor: Tensor) -> (Domain, Domain) {
        let outer = self.levels[edge].domain();
        let inner = self.levels[edge + 1].domain();
        match tensor {
            Tensor::Outputs => (inner, outer),
            _ => (outer, inner),
        }
    }

    /// Distinct (edge, direction) domain crossings.
    pub fn crossings(&self) -> Vec<Crossing> {
        let mut out: Vec<Crossing> = Vec::new();
        for e in 0..self.levels.len().saturating_sub(1) {
            for t in Tensor::ALL {
                let (from, to) = self.flow(e, t);
                if from != to {
                    let c = Crossing { edge: e, from, to };
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Set the fanout of the level tagged with `axis` to `base * factor`.
    pub fn with_axis_scaled(&self, axis: SweepAxis, factor: u64) -> Option<Architecture> {
        let idx = self.levels.iter().position(|l| l.sweep_axis == Some(axis))?;
        let mut a = self.clone();
        a.levels[idx].fanout *= factor;
        Some(a)
    }

    pub fn axis_level(&self, axis: SweepAxis) -> Option<usize> {
        self.levels.iter().position(|l| l.sweep_axis == Some(axis))
    }

    /// Resolve component references against `lib` and check every structural
    /// invariant. Paths in errors are rooted at `root`.
    pub fn resolve(&mut self, lib: &Library, root: &str) -> Result<(), SpecError> {
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(SpecError::BadBound {
                path: format!("{root}.clock_hz"),
                detail: "clock must be positive".into(),
            });
        }
        if self.levels.len() < 2 {
            return Err(SpecError::InvalidStructure {
                path: format!("{root}.levels"),
                detail: "need at least a backing store and a compute level".into(),
            });
        }
        let last = self.levels.len() - 1;
        for (i, level) in self.levels.iter_mut().enumerate() {
            let path = format!("{root}.levels[{i}]");
            let comp = lib.get(&level.component).ok_or_else(|| SpecError::UnknownComponent {
                path: format!("{path}.component"),
                name: level.component.clone(),
            })?;
            comp.validate().map_err(|e| component_error(&format!("{path}.component"), e))?;
            if level.fanout == 0 {
                return Err(SpecError::BadBound {
                    path: format!("{path}.fanout"),
                    detail: "fanout must be at least 1".into(),
                });
            }
            level.class = Some(comp.class);
            level.domain = Some(comp.domain_in);
            match comp.class {
                ComponentClass::Storage => {
                    let cap = level.capacity_bits.or(comp.capacity_bits).unwrap_or(0);
                    if cap == 0 {
                        return Err(SpecError::CapacityNonPositive { path: format!("{path}.capacity_bits") });
                    }
                    level.capacity_bits = Some(cap);
                }
                ComponentClass::Network => {
                    if !level.keeps.is_empty() {
                        return Err(SpecError::InvalidStructure {
                            path: format!("{path}.keeps"),
                            detail: "network levels cannot keep tensors".into(),
                        });
                    }
                }
                ComponentClass::Compute if i == last => {}
                _ => {
                    return Err(SpecError::InvalidStructure {
                        path: format!("{path}.component"),
                        detail: format!("{:?} component `{}` cannot be a hierarchy level here", comp.class, comp.name),
                    })
                }
            }
        }
        if !self.levels[0].is_storage() || self.levels[0].keeps != TensorSet::ALL {
            return Err(SpecError::InvalidStructure {
                path: format!("{root}.levels[0]"),
                detail: "outermost level must be storage keeping every tensor".into(),
            });
        }
        if self.levels[last].class() != ComponentClass::Compute {
            return Err(SpecError::InvalidStructure {
                path: format!("{root}.levels[{last}]"),
                detail: "innermost level must be compute".into(),
            });
        }
        let mut names: Vec<&str> = self.levels.iter().map(|l| l.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(SpecError::InvalidStructure {
                path: format!("{root}.levels"),
                detail: "level names must be unique".into(),
            });
        }

        for i in 0..self.converters.len() {
            let path = format!("{root}.converters[{i}]");
            let after = self.converters[i].after.clone();
            let edge = self
                .level_index(&after)
                .filter(|e| *e < last)
                .ok_or_else(|| SpecError::InvalidStructure {
                    path: format!("{path}.after"),
                    detail: format!("`{after}` is not a level with an inner neighbour"),
                })?;
            self.converters[i].edge = edge;
            let site = &self.converters[i];
            let comp = lib.get(&site.component).ok_or_else(|| SpecError::UnknownComponent {
                path: format!("{path}.component"),
                name: site.component.clone(),
            })?;
            comp.validate().map_err(|e| component_error(&format!("{path}.component"), e))?;
            if comp.class != ComponentClass::Converter {
                return Err(SpecError::ConverterMismatch {
                    path: format!("{path}.component"),
                    detail: format!("`{}` is not a converter", comp.name),
                });
            }
            if site.instances == Some(0) {
                return Err(SpecError::BadBound { path: format!("{path}.instances"), detail: "must be at least 1".into() });
            }
            for t in site.tensors.iter() {
                let (from, to) = self.flow(edge, t);
                if (comp.domain_in, comp.domain_out) != (from, to) {
                    return Err(SpecError::ConverterMismatch {
                        path: format!("{path}.tensors"),
                        detail: format!(
                            "{t} flows {from}->{to} but `{}` converts {}->{}",
                            comp.name, comp.domain_in, comp.domain_out
                        ),
                    });
                }
            }
        }
        for e in 0..last {
            for t in Tensor::ALL {
                let (from, to) = self.flow(e, t);
                if from != to && self.converters_for(e, t).next().is_none() {
                    return Err(SpecError::MissingConverter {
                        path: format!("{root}.levels[{}]", e + 1),
                        tensor: t,
                    });
                }
            }
        }

        for (i, s) in self.statics.iter().enumerate() {
            let path = format!("{root}.static[{i}]");
            let comp = lib.get(&s.component).ok_or_else(|| SpecError::UnknownComponent {
                path: format!("{path}.component"),
                name: s.component.clone(),
            })?;
            comp.validate().map_err(|e| component_error(&format!("{path}.component"), e))?;
        }
        Ok(())
    }
}

fn component_error(path: &str, e: ComponentError) -> SpecError {
    match e {
        ComponentError::CapacityNonPositive(_) => SpecError::CapacityNonPositive { path: path.to_string() },
        other => SpecError::InvalidComponent { path: path.to_string(), detail: other.to_string() },
    }
}
