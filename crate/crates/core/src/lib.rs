//! Simulation of camera-to-vehicle streaming over a software-defined
//! vehicular network, comparing source-driven rule installation with
//! destination-driven, rewrite-based installation.

pub mod batch;
pub mod cli;
pub mod controller;
pub mod engine;
pub mod flowtable;
pub mod metrics;
pub mod pathfind;
pub mod scenario;
pub mod time;
pub mod topology;
