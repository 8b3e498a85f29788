use thiserror::Error;

use crate::plans::AgentId;
use crate::world::Position;

/// Errors raised by the library. Infeasibility is never an error: solvers
/// report it as `None` and the resolver as [`crate::resolver::Outcome::Unsolvable`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("position {0} is outside the grid")]
    OutOfBounds(Position),
    #[error("position {0} is blocked")]
    Blocked(Position),
    #[error("opposite corners are not mutually reachable; an explicit makespan is required")]
    NoAutoMakespan,
    #[error("duplicate agent id {0}")]
    DuplicateAgent(AgentId),
    #[error("agent {0} appears both as a planned task and as a fixed path")]
    OverlappingAgent(AgentId),
    #[error("path of agent {agent} ends at t={end}, expected t={expected}")]
    PathLength { agent: AgentId, end: u32, expected: u32 },
    #[error("agent {agent} joins at t={join} which is after the makespan {makespan}")]
    JoinAfterMakespan { agent: AgentId, join: u32, makespan: u32 },
    #[error("the tasks admit no joint plan even with every fixed agent removed")]
    IntrinsicallyInfeasible,
    #[error("oracle state space {needed} exceeds the budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("time limit reached")]
    TimeLimit,
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid team state: {0}")]
    InvalidState(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
