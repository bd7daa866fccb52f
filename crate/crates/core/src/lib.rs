//! Transmission line capacitively coupled to a lumped circuit: netlist
//! reduction, time-domain simulation, pole analysis and impulse responses.
//!
//! The linear Heisenberg equations of the coupled system are classical ODEs
//! for the operator coefficients, so everything here works with real
//! (c-number) states and linear maps.

pub mod dynamics;
pub mod error;
pub mod inversion;
pub mod netlist;
pub mod poly;
pub mod quantum;
pub mod signal;
pub mod spectral;
pub mod tline;

pub use error::{Error, Result};
pub use signal::{OutOfDomain, Signal, TimeGrid};
