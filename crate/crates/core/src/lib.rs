//! Graph-enhanced neural click modeling.
//!
//! The crate covers the full pipeline: session-log ingestion
//! ([`session_log`]), query/document homogeneous graphs ([`graph`]), a small
//! reverse-mode autodiff engine ([`autodiff`]), the graph-attention click
//! model ([`model`]), classic probabilistic baselines ([`baselines`]),
//! metrics ([`eval`]) and the experiment harness ([`harness`]).

pub mod autodiff;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod graph;
pub mod harness;
pub mod model;
pub mod rng;
pub mod session_log;

pub use error::{Error, Result};
