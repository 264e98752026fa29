//! Mapping-space search.

pub mod factor;
pub mod search;

pub use factor::{enumerate_factorizations, enumerate_padded};
pub use search::{search, space_size, Objective, SearchConfig, SearchError, SearchResult, Strategy};
