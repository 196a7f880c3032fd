//! Deadlock analysis for store-and-forward packet switching networks.
//!
//! A network is a set of nodes joined by directed single-slot channels.
//! Terminal nodes inject and consume messages; every node forwards them
//! along a deterministic routing function. The library builds the reachable
//! state graph of such a network, decides three notions of deadlock over it
//! (global, local, weak) with replayable witness traces, and can emit an
//! SMV model plus CTL formulas for cross-checking with an external symbolic
//! model checker.

pub mod corpus;
pub mod deadlock;
pub mod explore;
pub mod network;
pub mod report;
pub mod semantics;
pub mod smv;

pub use deadlock::{
    check_equiexistence, check_inclusions, detect_global, detect_local, detect_weak,
    weak_from_local, DeadlockStatus, DeadlockVerdict, InclusionCheck, Notion,
};
pub use explore::{explore, explore_until, Budget, ExploreOptions, StateGraph, StateIdx, Trace};
pub use network::{Channel, ChannelId, Message, NetworkSpec, NodeId, RoutableSets};
pub use semantics::{NetState, StepKind, TransitionStep};
