//! Seeded, deterministic simulator of social-norm emergence in networked
//! agent populations.
//!
//! A population of agents plays a two-player stage game against random
//! neighbors each round. Agents are partitioned into supervised clusters:
//! subordinates report their interaction experience upward, supervisors
//! aggregate those reports into optimistic value estimates and hand back
//! instructions (hard rules and soft suggestions) that steer both action
//! choice and exploration. The crate provides the stage games, network
//! generators and centrality metrics, grouping mechanisms, the two-level
//! learning rules, the round engine, trace statistics, and a preset-driven
//! experiment harness.
//!
//! Everything is a pure function of its configuration (including the seed):
//! re-running any simulation or experiment reproduces results bit-exactly.

pub mod engine;
pub mod experiments;
pub mod games;
pub mod grouping;
pub mod learners;
pub mod metrics;
pub mod topology;

pub use engine::{detect_convergence, AgentKind, FixedSchedule, InsertionTime, Level, RoundRecord, SimConfig, World};
pub use games::{Game, GameKind, JointAction, PayoffEntry, Role};
pub use grouping::{Grouping, GroupingKind};
pub use learners::{InstructionSet, LearnerParams, SubordinateState, SupervisorState};
pub use metrics::{Aggregate, ComparisonTable, RunSummary};
pub use topology::{CentralityMetric, CentralityScores, Graph, TopologyKind};
