//! Time-domain integration of the reduced model, its memory-kernel form and
//! the LC-ladder oracle.

pub mod integrate;
pub mod ladder;
pub mod langevin;
pub mod rhs;
pub mod state;

pub use integrate::{integrate, IntegrateOptions, Integrator, LinearSystem};
pub use ladder::{ladder_oracle, LadderOptions, LadderRun, LadderState, LadderSystem};
pub use langevin::langevin_form;
pub use rhs::{assemble_rhs, ReducedRhs};
pub use state::{ReducedState, Trajectory};
