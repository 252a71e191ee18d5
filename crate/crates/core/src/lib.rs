//! Classification of food-safety regulatory provisions against a fixed
//! two-level concept taxonomy, plus the statistics used to evaluate
//! classifiers over repeated runs.

pub mod backend;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalstat;
pub mod keywords;
pub mod pipeline;
pub mod segmenter;
pub mod taxonomy;

pub use error::{Error, Result};
pub use segmenter::{Jurisdiction, Provision, SourceDocument};
pub use taxonomy::{Concept, LabelSet};
