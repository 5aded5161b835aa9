//! Static analysis toolkit for Windows PE files: Ember-style feature
//! extraction, grayscale imaging, gradient-boosted trees, a dense neural
//! network, and a two-stage malware/ransomware detection pipeline with an
//! evaluation harness.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod matrix;
pub mod mlp;
pub mod pe;
pub mod pipeline;
