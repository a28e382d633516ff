//! Multi-hop prompting pipelines for article bias, ideological narrative and
//! persuasion-technique classification, with the corpus tooling, label
//! taxonomies and evaluation/agreement metrics needed to benchmark them.

pub mod backend;
pub mod baseline;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod fanta;
pub mod labels;
pub mod pipeline;
pub mod prompt;
pub mod taxonomy;
pub mod tptc;
