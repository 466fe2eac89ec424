//! Engagement prediction for video lectures.
//!
//! The pipeline goes corpus -> features -> labels -> models -> evaluation,
//! with model-agnostic Shapley attributions for explanation and a synthetic
//! corpus generator for ground-truth-known testing.

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod explain;
pub mod features;
pub mod labels;
pub mod models;
pub mod synth;
