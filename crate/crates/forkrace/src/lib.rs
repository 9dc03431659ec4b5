//! Selfish mining with several attackers: closed-form Markov models, a block
//! race simulator, strategic mining as an MDP and POMDP, and revenue under
//! difficulty adjustment.

pub mod analytic;
pub mod cli;
pub mod config;
pub mod csv;
pub mod daa;
pub mod error;
pub mod mdp;
pub mod pomdp;
pub mod race;
pub mod report;
pub mod rng;
pub mod sim;

pub use config::MinerConfig;
pub use error::{Error, Result};
pub use report::{RevenueReport, StationaryDistribution, ThresholdResult};
pub use rng::RngStream;
