//! Fixtures, random networks, outcome models and Monte-Carlo experiments.

pub mod experiments;
pub mod fixtures;
pub mod models;
