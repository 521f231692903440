//! Two-pass, confidence-gated grounding of traffic-accident videos with a
//! vision-language model, plus the benchmark metric, bootstrap statistics,
//! offline diagnostics and a scriptable mock model server.
//!
//! The crate is organized along the data flow:
//! [`sampler`] plans and extracts frames, [`gateway`] talks to the model,
//! [`parser`] reads its answers, [`gates`] merges the two passes,
//! [`pipeline`] runs all of it per video and per batch, and
//! [`evaluator`] / [`diagnostics`] score the results.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod evaluator;
pub mod gates;
pub mod gateway;
pub mod mock_vlm;
pub mod parser;
pub mod pipeline;
pub mod sampler;
pub mod synthetic;
pub mod video;
