pub mod cli;
pub mod community;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod lexicon;
pub mod metrics;
pub mod par;
pub mod synth;

pub use error::{Error, Result};
