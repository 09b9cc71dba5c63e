//! Usage-change detection between two corpora.
//!
//! Words are scored by how many of their `k` nearest neighbors two
//! independently trained embedding spaces share; the alignment-based cosine
//! baseline, stability metrics and gold-ranking evaluation are included.

pub mod corpus;
mod error;
pub mod linalg;
pub mod sgns;
pub mod space;
pub mod detect;
pub mod align;
pub mod metrics;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
