//! Neuroevolution of recurrent network controllers for open-loop trajectory
//! following.
//!
//! The engine grows NEAT-style genomes from a minimal common ancestor and
//! keeps complexity growing over generations through four mechanisms that can
//! be toggled independently:
//!
//! - **gene freezing** — mutations are confined to the newest genes of each
//!   group (neurons / connections), with a bridge window that still lets new
//!   structure attach to moderately old neurons,
//! - **temporal scaffolding** — one-hot time-period inputs (ids >= 1000) that
//!   are released in batches of five as individuals survive longer,
//! - **homogeneous sine outputs** — network outputs pass through `sin(pi x)`
//!   so a single extra contribution can always reach any target value,
//! - **new-pathway mutations** — input-free neurons wired straight to an
//!   output as neutral seeds for future modules.
//!
//! Tasks are 2D/3D trajectory-following problems where the agent gets no
//! positional feedback and dies as soon as it drifts more than 1.0 from the
//! moving target point.
//!
//! Everything is deterministic given the experiment seed: trajectory
//! generation, mutation, selection and logging all draw from labeled RNG
//! streams derived from the master seed.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod genome;
pub mod network;
pub mod report;
pub mod rng;
pub mod selection;
pub mod task;
pub mod variation;

pub use config::{ExperimentConfig, FeatureFlags, SelectionScheme};
pub use error::CoreError;
pub use genome::{ConnectionGene, Genome, InnovationCounter, NeuronGene, Source, Target};
pub use network::{OutputFn, Phenotype};
pub use task::{TaskKind, TrajectorySpec};
