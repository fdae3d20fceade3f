//! Load-balancing verdicts and saturated PI dynamics for flow networks with
//! interval edge constraints.
//!
//! The crate decides whether a constrained network admits an interior point
//! circulation (a spanning tree of edges whose flow can sit strictly inside
//! its interval), builds counterexamples when it does not, and simulates the
//! saturated proportional-integral controller on vertex storage.

pub mod circulation;
pub mod cli;
pub mod corpus;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod io;
pub mod ipc;
pub mod network;
pub mod rational;
pub mod report;
pub mod sim;

pub use circulation::{decompose_circulation, feasible_circulation, flow_range, Circulation};
pub use dynamics::{FlowModel, Hamiltonian, Mode, Quadratic, SimState};
pub use error::{Error, Result};
pub use graph::{CircuitVector, DirectedGraph};
pub use ipc::{build_counterexample, check_ipc, IpcStatus, IpcVerdict};
pub use network::{normalize, solve_matching, ConstrainedNetwork, EdgeMap};
pub use rational::Q;
pub use sim::{integrate, SimConfig, Trajectory};
