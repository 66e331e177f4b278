//! Analysis and simulation toolkit for the advance-reservation game on a
//! preemptive-resume M/D/1 queue.
//!
//! Customers arriving to a single deterministic server may pay a fee to
//! reserve it ahead of time. Reserving earlier buys higher priority. The
//! crate covers:
//!
//! - [`queue`]: closed-form expected waits of the threshold customer.
//! - [`equilibrium`]: the cost-to-threshold map, critical costs and the
//!   equilibrium set for a given reservation cost.
//! - [`revenue`]: static and dynamic revenue, optimal fees and the price
//!   of conservatism.
//! - [`dynamics`]: best-response learning under strategy- and
//!   action-learning.
//! - [`sim`]: discrete-event simulation of the queue itself, both as a
//!   reservation calendar and as a continuous-priority preemptive queue.

pub mod dynamics;
pub mod equilibrium;
mod error;
pub mod queue;
pub mod revenue;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use queue::{PotentialPriority, QueueParams, Threshold};
