//! Ant colony optimization for the single-machine total weighted tardiness
//! problem: classic ACO, population-based ACO (PACO) and PACO with a
//! weighted population update (WPACO), together with a benchmark instance
//! generator and an experiment harness.

pub mod construction;
pub mod error;
pub mod experiments;
pub mod instance_io;
pub mod model;
pub mod pheromone;
pub mod seeding;
pub mod solver;

pub use construction::{ConstructionPolicy, Heuristic, Rule};
pub use error::{Error, Result};
pub use instance_io::{EvaluationSet, GeneratorConfig, ReferenceTable};
pub use model::{evaluate, Evaluation, Instance, Job, Schedule};
pub use pheromone::{EvictionRule, PheromoneParams};
pub use solver::{run, Algorithm, RunResult, RunTrace, SolverConfig};
