//! Command-line front end for the loop demultiplexer simulator.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
