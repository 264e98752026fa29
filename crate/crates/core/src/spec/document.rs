//! Reading `.spec` documents (JSON object trees with a `spec_version`
//! field and an optional `include` list) into resolved, validated values.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::architecture::Architecture;
use super::component::{ComponentSpec, Library};
use super::error::SpecError;
use super::mapping::Mapping;
use super::workload::Workload;

pub const SPEC_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub spec_version: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub include: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<Architecture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<Workload>,
}

/// A resolved specification: the effective component library plus whatever
/// architecture and workload the document (and its includes) defined.
#[derive(Clone, Debug, PartialEq)]
pub struct Spec {
    pub library: Library,
    pub architecture: Option<Architecture>,
    pub workload: Option<Workload>,
}

fn json_error<E: std::fmt::Display>(err: serde_path_to_error::Error<E>) -> SpecError {
    let path = err.path().to_string();
    SpecError::MalformedDocument {
        path: if path == "." { "$".into() } else { path },
        detail: err.inner().to_string(),
    }
}

impl SpecDocument {
    pub fn parse(text: &str) -> Result<SpecDocument, SpecError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: SpecDocument = serde_path_to_error::deserialize(de).map_err(json_error)?;
        if doc.spec_version != SPEC_VERSION {
            return Err(SpecError::MalformedDocument {
                path: "spec_version".into(),
                detail: format!("unsupported version {} (expected {SPEC_VERSION})", doc.spec_version),
            });
        }
        Ok(doc)
    }

    /// Merge `other` on top of `self`: components override by name, the
    /// architecture and workload are replaced when present.
    fn merge(&mut self, other: SpecDocument) {
        for c in other.components {
            self.components.retain(|x| x.name != c.name);
            self.components.push(c);
        }
        if other.architecture.is_some() {
            self.architecture = other.architecture;
        }
        if other.workload.is_some() {
            self.workload = other.workload;
        }
    }
}

/// Parse a self-contained document. Includes are resolved relative to the
/// current directory.
pub fn parse_spec(text: &str, base: &Library) -> Result<Spec, SpecError> {
    let doc = SpecDocument::parse(text)?;
    let merged = expand_includes(doc, Path::new("."), &mut BTreeSet::new())?;
    resolve(merged, base)
}

/// Read a document from disk, following its `include` list.
pub fn load_spec(path: &Path, base: &Library) -> Result<Spec, SpecError> {
    let doc = read_document(path)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut seen = BTreeSet::new();
    seen.insert(path.to_path_buf());
    let merged = expand_includes(doc, &dir, &mut seen)?;
    resolve(merged, base)
}

/// Parse several documents in order, later ones overriding earlier ones.
pub fn load_specs(paths: &[PathBuf], base: &Library) -> Result<Spec, SpecError> {
    let mut acc = SpecDocument { spec_version: SPEC_VERSION, ..Default::default() };
    for p in paths {
        let doc = read_document(p)?;
        let dir = p.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut seen = BTreeSet::new();
        seen.insert(p.clone());
        acc.merge(expand_includes(doc, &dir, &mut seen)?);
    }
    resolve(acc, base)
}

fn read_document(path: &Path) -> Result<SpecDocument, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::MalformedDocument {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    SpecDocument::parse(&text).map_err(|e| match e {
        SpecError::MalformedDocument { path: p, detail } => {
            SpecError::MalformedDocument { path: format!("{}:{p}", path.display()), detail }
        }
        other => other,
    })
}

fn expand_includes(
    mut doc: SpecDocument,
    dir: &Path,
    seen: &mut BTreeSet<PathBuf>,
) -> Result<SpecDocument, SpecError> {
    let includes = std::mem::take(&mut doc.include);
    let mut acc = SpecDocument { spec_version: SPEC_VERSION, ..Default::default() };
    for (i, inc) in includes.iter().enumerate() {
        let p = dir.join(inc);
        if !seen.insert(p.clone()) {
            return Err(SpecError::MalformedDocument {
                path: format!("include[{i}]"),
                detail: format!("include cycle through `{inc}`"),
            });
        }
        let sub = read_document(&p).map_err(|e| match e {
            SpecError::MalformedDocument { detail, .. } if !p.exists() => {
                SpecError::MalformedDocument { path: format!("include[{i}]"), detail }
            }
            other => other,
        })?;
        let sub_dir = p.parent().unwrap_or(Path::new(".")).to_path_buf();
        acc.merge(expand_includes(sub, &sub_dir, seen)?);
    }
    acc.merge(doc);
    Ok(acc)
}

fn resolve(doc: SpecDocument, base: &Library) -> Result<Spec, SpecError> {
    let mut library = base.clone();
    for (i, c) in doc.components.iter().enumerate() {
        c.validate().map_err(|e| match e {
            super::component::ComponentError::CapacityNonPositive(_) => {
                SpecError::CapacityNonPositive { path: format!("components[{i}].capacity_bits") }
            }
            other => SpecError::InvalidComponent { path: format!("components[{i}]"), detail: other.to_string() },
        })?;
        library.insert(c.clone());
    }
    let architecture = match doc.architecture {
        Some(mut a) => {
            a.resolve(&library, "architecture")?;
            Some(a)
        }
        None => None,
    };
    if let Some(w) = &doc.workload {
        w.validate("workload")?;
    }
    Ok(Spec { library, architecture, workload: doc.workload })
}

impl Spec {
    pub fn architecture(&self) -> Result<&Architecture, SpecError> {
        self.architecture.as_ref().ok_or_else(|| SpecError::InvalidStructure {
            path: "architecture".into(),
            detail: "document defines no architecture".into(),
        })
    }

    pub fn workload(&self) -> Result<&Workload, SpecError> {
        self.workload.as_ref().ok_or_else(|| SpecError::InvalidStructure {
            path: "workload".into(),
            detail: "document defines no workload".into(),
        })
    }

    /// Self-contained canonical document: every component the architecture
    /// references is inlined, sorted by name.
    pub fn canonical_document(&self) -> SpecDocument {
        let mut names: BTreeSet<&str> = BTreeSet::new();
        if let Some(a) = &self.architecture {
            names.extend(a.levels.iter().map(|l| l.component.as_str()));
            names.extend(a.converters.iter().map(|c| c.component.as_str()));
            names.extend(a.statics.iter().map(|c| c.component.as_str()));
        }
        let components = if names.is_empty() {
            self.library.iter().cloned().collect()
        } else {
            names.into_iter().filter_map(|n| self.library.get(n).cloned()).collect()
        };
        SpecDocument {
            spec_version: SPEC_VERSION,
            include: Vec::new(),
            components,
            architecture: self.architecture.clone(),
            workload: self.workload.clone(),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.canonical_document()).expect("spec serializes")
    }
}

/// Parse a `.mapping` document.
pub fn parse_mapping(text: &str) -> Result<Mapping, SpecError> {
    #[derive(Deserialize)]
    struct Doc {
        spec_version: u32,
        mapping: Mapping,
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Doc = serde_path_to_error::deserialize(de).map_err(json_error)?;
    if doc.spec_version != SPEC_VERSION {
        return Err(SpecError::MalformedDocument { path: "spec_version".into(), detail: "unsupported version".into() });
    }
    Ok(doc.mapping)
}

pub fn mapping_to_json(m: &Mapping) -> String {
    serde_json::to_string_pretty(&serde_json::json!({ "spec_version": SPEC_VERSION, "mapping": m }))
        .expect("mapping serializes")
}
