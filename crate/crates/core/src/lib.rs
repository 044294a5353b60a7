//! Per-example model selection for ensembles of detectors.
//!
//! A selector network looks at an input, predicts which base detector will
//! do best on it, and only that detector's output is used. The crate covers
//! the whole loop: polygon IoU and F-score evaluation, building the
//! multi-label selector dataset, training the selector, the NMS and oracle
//! baselines, and a synthetic benchmark of complementary detectors.

pub mod cli;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod formats;
pub mod fusion;
pub mod geometry;
pub mod labeling;
pub mod scoring;
pub mod selector;
pub mod synthbench;

pub use error::{Error, GeometryError, Result};
