//! Experiment harness for average-reward Q-learning.
//!
//! Model files, instance generators, CSV run records, repeated-seed
//! experiments, the agent-count sweep and the property suite. The algorithms
//! themselves live in [`avgq_core`].

pub mod error;
pub mod exec;
pub mod experiment;
pub mod generate;
pub mod io;
pub mod records;
pub mod stats;
pub mod sweep;
pub mod verify;

pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, write_outputs, Experiment, ExperimentConfig, MdpSource, Metadata};
pub use generate::{generate_mdp, GeneratorKind, GeneratorSpec};
pub use sweep::{sweep_speedup, write_summary, SweepSummary};
pub use verify::{verify_suite, PropertyReport, VerifyOptions};
