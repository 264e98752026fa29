use super::domain::Tensor;

/// Problems found while reading or resolving a specification document. Every
/// variant carries the document path of the offending entry.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("{path}: edge between domains has no converter for {tensor}")]
    MissingConverter { path: String, tensor: Tensor },
    #[error("{path}: unknown component `{name}`")]
    UnknownComponent { path: String, name: String },
    #[error("{path}: bad bound: {detail}")]
    BadBound { path: String, detail: String },
    #[error("{path}: storage capacity must be positive")]
    CapacityNonPositive { path: String },
    #[error("{path}: malformed document: {detail}")]
    MalformedDocument { path: String, detail: String },
    #[error("{path}: invalid component: {detail}")]
    InvalidComponent { path: String, detail: String },
    #[error("{path}: converter mismatch: {detail}")]
    ConverterMismatch { path: String, detail: String },
    #[error("{path}: invalid structure: {detail}")]
    InvalidStructure { path: String, detail: String },
}

impl SpecError {
    pub fn path(&self) -> &str {
        match self {
            SpecError::MissingConverter { path, .. }
            | SpecError::UnknownComponent { path, .. }
            | SpecError::BadBound { path, .. }
            | SpecError::CapacityNonPositive { path }
            | SpecError::MalformedDocument { path, .. }
            | SpecError::InvalidComponent { path, .. }
            | SpecError::ConverterMismatch { path, .. }
            | SpecError::InvalidStructure { path, .. } => path,
        }
    }
}
