//! Structure learning of undirected graphical models for count data.
//!
//! The learner runs an order-independent PC skeleton search in which every
//! conditional-independence decision is a Wald test on a node-conditional
//! (truncated) Poisson GLM. Around it sit the simulation model used for
//! benchmarking, edge-recovery metrics, a Monte Carlo harness and a
//! preprocessing pipeline for raw sequencing counts.

pub mod bench;
pub mod count_model;
pub mod error;
pub mod graph;
pub mod local_glm;
pub mod matrix;
pub mod metrics;
pub mod normal;
pub mod preprocess;
pub mod rng;
pub mod sim;
pub mod skeleton;
pub mod wald;

pub use count_model::CountFamily;
pub use error::{Error, Result};
pub use graph::UndirectedGraph;
pub use local_glm::{fit, DesignView, FitOptions, NodeFit};
pub use matrix::CountMatrix;
pub use metrics::{aggregate, confusion, BenchSummary, Confusion};
pub use skeleton::{learn_skeleton, Execution, SkeletonOptions, SkeletonResult};
pub use wald::{Alpha, TestOutcome};
