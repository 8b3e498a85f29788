//! Dynamic multi-agent path finding on grids.
//!
//! When new agents join a team whose paths are already fixed, the
//! [`resolver`] repairs the team plan by replanning the smallest subset of
//! conflicting agents it can find, and only replans everyone as a last
//! resort. The [`solver`] answers the bounded-makespan planning questions
//! the resolver asks; [`verify`] holds independent brute-force oracles used
//! to test it.

pub mod baseline;
pub mod bench;
pub mod error;
pub mod plans;
pub mod resolver;
pub mod scenario_io;
pub mod solver;
pub mod verify;
pub mod world;

pub use error::{Error, Result};
pub use plans::{AgentId, AgentTask, Conflict, ConflictConfig, ConflictKind, Path, Plans, Solution};
pub use world::{GridMap, Position};
