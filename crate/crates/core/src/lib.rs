//! Gradient-guided conflict-driven model sampling for SAT and answer set
//! programs.

pub mod frontend;
pub mod model;
pub mod transform;
pub mod engine;
pub mod diffbranch;
pub mod infer;
pub mod stability;
pub mod oracle;
pub mod sampler;
pub mod benchgen;
pub mod reify;
