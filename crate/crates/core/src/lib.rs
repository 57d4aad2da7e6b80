pub mod config;
pub mod data;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod nuisance;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod simulation;
