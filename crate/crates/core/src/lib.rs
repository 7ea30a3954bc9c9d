//! Negative-bubble rebound diagnosis.
//!
//! Sliding windows of a daily log-price series are calibrated with the
//! log-periodic power law; the resulting fits are aggregated by a
//! pattern-recognition stack into a daily rebound alarm index, which is then
//! scored with error diagrams, Bayesian rebound probabilities and a
//! threshold trading strategy tested against constrained random strategies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod lppl;
pub mod optimizer;
pub mod pattern;
pub mod pipeline;
pub mod rebound;
pub mod trading;
