//! Graph label propagation and its multitask variants for protein function
//! prediction with Gene Ontology terms.

pub mod baselines;
pub mod config;
pub mod cv;
pub mod error;
pub mod graph;
pub mod labels;
pub mod metrics;
pub mod multitask;
pub mod ontology;
pub mod pipeline;
pub mod propagation;
pub mod relatedness;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
