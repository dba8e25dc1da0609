//! Chemostat with constant-rate neighbour mutation.
//!
//! `n` strains grow on one limiting substrate with Monod kinetics and mutate
//! into their neighbours on a line at rate `eps`; the vessel is diluted at
//! rate `u`. The crate computes the critical dilution rate, the washout and
//! coexistence equilibria with their local stability, the small-mutation
//! expansion of the coexistence point, and integrates trajectories.
//!
//! ```
//! use chemostat::{equilibria, fixtures};
//!
//! let model = fixtures::fig1_model(1.0, 0.2);
//! let eq = equilibria::coexistence_equilibrium(&model)?;
//! assert!((eq.x.iter().sum::<f64>() + eq.s - 1.0).abs() < 1e-10);
//! # Ok::<(), chemostat::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod equilibria;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
pub use model::{ChemostatModel, MonodKinetics, Monod, MutationMatrix, State};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/eigen.md")]
    mod eigen {}
    #[doc = include_str!("../../../book/src/equilibria.md")]
    mod equilibria {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    mod asymptotics {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
