//! Monte-Carlo model of a single-Pockels-cell loop demultiplexer for a pulsed
//! single-photon source, together with the time-tag estimators used to
//! characterise it.
//!
//! The modules follow the path of a photon:
//!
//! * [`clock_source`] emits photons on a laser clock with tunable purity and
//!   indistinguishability.
//! * [`control_sequencer`] builds and checks the gating schedule of the
//!   Pockels-cell driver.
//! * [`loop_demux`] steps the delay loop one round trip at a time and releases
//!   photons into spatial channels.
//! * [`detection`] turns channel outputs into time tags, optionally after
//!   mixing two channels on a beamsplitter.
//! * [`analysis`] recovers g2(0), interference visibility and channel
//!   efficiency from time tags.
//!
//! All randomness is addressed by `(seed, domain, index)` through [`rng`], so
//! splitting a run into shards and merging the results reproduces the
//! unsharded output exactly.

pub mod analysis;
pub mod clock_source;
pub mod control_sequencer;
pub mod detection;
pub mod error;
pub mod io;
pub mod loop_demux;
pub mod rng;

pub use error::{Error, Result};
