//! Local configurations of network interference: a rooted-network
//! distance, an approximate permutation test of policy irrelevance, and a
//! k-nearest-neighbour estimator of policy effects with an error bound.

pub mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod metric;
pub mod permtest;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use graph::{Ball, CommunityBuilder, CommunityGraph, Dataset, Weight};
pub use metric::{DistanceResult, Metric, WitnessRadius};
pub use rng::SeedStreams;
