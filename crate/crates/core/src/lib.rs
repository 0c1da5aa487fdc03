//! Traffic abstractions, scheduling and sampling-rate analysis for linear
//! periodic event-triggered control (PETC) loops.
//!
//! A PETC loop checks a quadratic triggering condition every `h` seconds
//! and samples when it fires or when a heartbeat of `kmax * h` elapses. The
//! pipeline implemented here is:
//!
//! 1. [`abstraction`]: build a finite traffic model whose states are
//!    isosequential regions of the state space.
//! 2. [`ts`], [`game`]: rewrite models per checking period and synthesize a
//!    collision-free scheduler for loops sharing one channel.
//! 3. [`quant`]: smallest average inter-sample time and mean-payoff
//!    optimization of early sampling.
//! 4. [`sim`]: concrete closed-loop simulation.
//! 5. [`io`]: input files and exports.

pub mod abstraction;
pub mod error;
pub mod game;
pub mod io;
pub mod lti;
pub mod quant;
pub mod sim;
pub mod ts;

pub use abstraction::{
    build_traffic_model, AbstractionOptions, Backend, RegionLabel, TrafficModel,
};
pub use error::{Error, Result};
pub use lti::{LtiPlant, PetcLoop, QuadraticTrigger};
