//! Agent-based open-ended evolution of nano-agent drug carriers against an
//! adaptable tumour, with physical unit mapping and a compartment-chain
//! stochastic reaction-diffusion validator.
//!
//! The crate is organised around the simulation pipeline:
//!
//! * [`world`]: the 2D grid, cell placement, nano-agent movement and memory.
//! * [`kinetics`]: the association / dissociation / internalization / killing
//!   state machine that governs nano-agent and cell interaction.
//! * [`evolution`]: fitness, truncation selection with Gaussian mutation, and
//!   tumour counter-adaptation (division, signature drift, resistance).
//! * [`runner`]: learning mode, simulation mode, and the dose schedule.
//! * [`unitmap`]: conversion between per-step probabilities and rate constants.
//! * [`ssa`]: Gillespie direct-method chain simulator and its mean-field oracle.
//! * [`commands`]: the `learn`, `simulate`, `validate` and `map-units` drivers.

pub mod commands;
pub mod config;
pub mod error;
pub mod evolution;
pub mod kinetics;
pub mod replicate;
pub mod report;
pub mod rng;
pub mod runner;
pub mod ssa;
pub mod stats;
pub mod unitmap;
pub mod world;

pub use config::SimConfig;
pub use error::{Error, Result};
