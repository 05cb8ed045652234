//! Byzantine-tolerant reliable broadcast on time-varying graphs.
//!
//! The crate models a dynamic network as a [`TimeVaryingGraph`]: a fixed
//! node set whose channels appear and disappear over discrete time, each
//! appearance carrying a transit latency. On top of that model it provides:
//!
//! * [`klo`]: static and temporal minimum k-level orderings, the
//!   combinatorial structures that decide whether certified propagation can
//!   reach every node;
//! * [`adversary`]: f-locally bounded Byzantine placements and behaviors;
//! * [`sim`]: a deterministic synchronous simulator of dynamic certified
//!   propagation;
//! * [`oracle`]: termination verdicts and broadcast-latency bounds under
//!   full, partial and size-only knowledge of the graph.
//!
//! ```
//! use dcpa::{fixtures, compute_tmklo, AcceptanceParams, LevelOrdering};
//!
//! let g = fixtures::worked_example();
//! let params = AcceptanceParams::new(2, fixtures::P_S, 0).unwrap();
//! let ordering = compute_tmklo(&g, &params).unwrap();
//! assert!(ordering.covers_all());
//! assert_eq!(ordering.last_level_time(), 4);
//! ```

pub mod adversary;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod klo;
pub mod oracle;
pub mod sim;
pub mod tvg;

pub use adversary::{
    enumerate_placements, maximal_placements, uniform_behaviors, validate_placement, BehaviorPolicy, Behaviors,
    Placement,
};
pub use error::{Error, Result};
pub use generate::{generate, random_static_graph, GeneratorSpec, LatencyRange};
pub use klo::{
    acceptance, compute_mklo, compute_tmklo, covers_all, AcceptanceOracle, AcceptanceParams, LevelOrdering,
    StaticLevelOrdering, TemporalLevelOrdering,
};
pub use oracle::{
    bl_bound_tber, bl_bounds_fko, conscious_termination_fko, conscious_termination_pko_er, BoundMethod, LatencyBounds,
    OracleView, TberParams, TerminationVerdict, VerdictStatus, Witness, WitnessOrdering, DEFAULT_STRICT_MAX_N,
};
pub use sim::{
    broadcast_latency, run, run_unreliable, BroadcastScenario, ChannelFaults, Delivery, LogRecord, MessageEnvelope,
    Outcome, Payload, ProcessState, SimTrace,
};
pub use tvg::{ClassKind, EdgeSchedule, GraphClass, Interval, NodeId, StaticGraph, Time, TimeVaryingGraph, TvgBuilder};

// Code blocks in the guide are compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tvg.md")]
    mod tvg {}
    #[doc = include_str!("../../../book/src/orderings.md")]
    mod orderings {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
