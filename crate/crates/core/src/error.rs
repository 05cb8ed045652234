use thiserror::Error;

use crate::tvg::{NodeId, Time};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(NodeId, NodeId),

    #[error("edge ({u}, {v}) is declared more than once")]
    DuplicateEdge { u: NodeId, v: NodeId },

    #[error("edge ({u}, {v}): interval [{start}, {end}] has start after end")]
    InvertedInterval {
        u: NodeId,
        v: NodeId,
        start: Time,
        end: Time,
    },

    #[error("edge ({u}, {v}): intervals overlap or are out of order near t={at}")]
    OverlappingIntervals { u: NodeId, v: NodeId, at: Time },

    #[error("edge ({u}, {v}): latency must be at least 1")]
    ZeroLatency { u: NodeId, v: NodeId },

    #[error("edge ({u}, {v}): interval end {end} exceeds horizon {horizon}")]
    BeyondHorizon {
        u: NodeId,
        v: NodeId,
        end: Time,
        horizon: Time,
    },

    #[error("time {t} is beyond horizon {horizon}")]
    OutOfRange { t: Time, horizon: Time },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("refusing to enumerate placements on {n} nodes (limit {max_n})")]
    TooLarge { n: usize, max_n: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
