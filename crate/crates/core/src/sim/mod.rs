//! Time integration with invariant monitoring.

mod analysis;
mod ensemble;
mod integrator;

pub use analysis::*;
pub use ensemble::*;
pub use integrator::{
    integrate, integrate_until_settled, integrate_with, mass_balance, IntegratorConfig, Trajectory, NEGATIVITY_SLACK,
};
