//! Desk-scale neural-network training built around a feature-refiner head,
//! gradient gating and online joint knowledge distillation, with an
//! active-learning experiment harness.
//!
//! The training-time network carries two heads on a shared backbone: the
//! original linear classifier (kept at inference) and a refiner head — a
//! dimension-reducing linear layer feeding a layer-norm-wrapped symmetric
//! two-layer MLP. A gradient gate makes the original head's loss invisible
//! to the backbone, so the backbone is shaped entirely by the refiner head
//! while the original head adapts to it. At test time the refiner head is
//! dropped: the deployed architecture and parameter count are exactly the
//! baseline's.
//!
//! Every major capability has a runnable example:
//!
//! ```text
//! cargo run --release --example gradient_gate       # gate forward/backward contract
//! cargo run --release --example gradcheck           # finite-difference layer suite
//! cargo run --release --example refiner_params      # parameter accounting (42058 etc.)
//! cargo run --release --example dual_head_training  # OJKD on synthetic blobs
//! cargo run --release --example low_data_protocol   # incremental labeled pools
//! cargo run --release --example active_learning     # entropy vs core-set vs random
//! cargo run --release --example ablation_sweep      # head-variant build-up
//! cargo run --release --example dataset_io          # dataset formats + augmentation
//! ```
//!
//! The `frnet` binary wraps the same machinery as subcommands
//! (`train`, `al`, `ablate`, `report`, `gradcheck`, `paramcount`).

pub mod active;
pub mod autodiff;
pub mod backbone;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod hash;
pub mod model;
pub mod nn;
pub mod optim;
pub mod refiner;
pub mod report;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
