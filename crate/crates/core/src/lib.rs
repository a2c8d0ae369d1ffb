//! Stable-throughput regions for multi-user, multi-band cognitive radio networks.
//!
//! Three ways of handing primary bands to buffered secondary users are modelled:
//!
//! * [`orthogonal`]: a controller draws a one-to-one band assignment every slot
//!   (region envelope is a small linear program),
//! * [`randalloc`]: every secondary user picks a band at random and collisions
//!   destroy packets (two-user analysis via dominant systems),
//! * [`fixedalloc`]: permanent one-to-one mappings (orthotope regions).
//!
//! [`sim`] runs the corresponding slotted MAC loops so the analytic regions can be
//! checked empirically, and [`cli`] wires everything into the `cogband` binary.

pub mod cli;
pub mod error;
pub mod fixedalloc;
pub mod model;
pub mod optim;
pub mod orthogonal;
pub mod randalloc;
pub mod schedule;
pub mod sim;

pub use error::{Error, Result};
pub use model::{PrimaryBand, RateMatrix, Scenario, SecondaryUser, SlotConfig};
