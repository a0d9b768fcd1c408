//! Distributed proportional power sharing for grid-connected microgrids.
//!
//! Agents attached to distributed generators estimate the total generation
//! capacity through a pinned consensus, and dispatch `P_L·P_i,max / s_i`.
//! When one generator's capacity changes, only its own agent knows; the
//! estimates converge to the new total while a finite-time average consensus
//! lets the informed agent keep the delivered power equal to the load.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`. Scenario handling is `f64` only.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod consensus;
pub mod error;
pub mod finite_time;
pub mod graph;
pub mod matrix;
pub mod oracle;
pub mod plant;
pub mod scalar;
pub mod scenario;
pub mod spectral;
pub mod strategies;

pub use error::{Error, Result};
pub use scalar::Real;
pub use strategies::Strategy;

pub type Graph = graph::CommGraph<f64>;
pub type Mat = matrix::Matrix<f64>;
pub type Consensus = consensus::ConsensusState<f64>;
pub type Model = strategies::MicrogridModel<f64>;
pub type Command = strategies::PowerCommand<f64>;
pub type Plant = plant::PlantConfig<f64>;
pub type AgentNetwork = agents::Network<f64>;
pub type FtWeights = finite_time::FtWeights<f64>;
