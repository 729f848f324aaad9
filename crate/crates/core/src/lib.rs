//! Hybrid Hebbian networks on generalized cactus graphs: simulation,
//! structural controllability, minimum-energy steering and resilience.

pub mod cactus;
pub mod cluster;
pub mod control;
pub mod dynamics;
pub mod energy;
pub mod graph;
pub mod linalg;
pub mod output;
pub mod paths;
pub mod scenario;
pub mod resilience;
pub mod runs;
