//! Built-in models.
//!
//! * `fig1`: two species, `mu_1(s) = s / (1 + s)`, `mu_2(s) = 0.7 s / (0.5 + s)`;
//!   species 2 wins without mutation at `u = 0.2`.
//! * `fig2`: twenty species, `mu_i(s) = 20 s / (a_i + s)` with
//!   `a_i = 1 + (10 - i)^2 / 2` (one-based `i`), `epsilon = 1`, `u = 5`.

use std::sync::OnceLock;

use crate::model::{ChemostatModel, Monod, MonodKinetics};

pub fn fig1_kinetics() -> MonodKinetics {
    MonodKinetics::new(vec![Monod::new(1.0, 1.0), Monod::new(0.7, 0.5)]).expect("valid kinetics")
}

pub fn fig1_model(epsilon: f64, u: f64) -> ChemostatModel {
    ChemostatModel::new(fig1_kinetics(), epsilon, u).expect("valid model")
}

/// Built once per process; the symmetric profile repeats kinetics, which warns.
pub fn fig2_kinetics() -> MonodKinetics {
    static KINETICS: OnceLock<MonodKinetics> = OnceLock::new();
    KINETICS.get_or_init(build_fig2_kinetics).clone()
}

fn build_fig2_kinetics() -> MonodKinetics {
    let species = (1..=20)
        .map(|i| {
            let d = 10.0 - i as f64;
            Monod::new(20.0, 1.0 + 0.5 * d * d)
        })
        .collect();
    MonodKinetics::new(species).expect("valid kinetics")
}

pub fn fig2_model() -> ChemostatModel {
    ChemostatModel::new(fig2_kinetics(), 1.0, 5.0).expect("valid model")
}

/// Two laws crossing at `s = 3/4` where both equal `3/7`.
pub fn crossing_kinetics() -> MonodKinetics {
    MonodKinetics::new(vec![Monod::new(1.0, 1.0), Monod::new(0.6, 0.3)]).expect("valid kinetics")
}

/// Looks up a built-in model by name (`fig1` at `epsilon = 1, u = 0.2`, or `fig2`).
pub fn by_name(name: &str) -> Option<ChemostatModel> {
    match name {
        "fig1" => Some(fig1_model(1.0, 0.2)),
        "fig2" => Some(fig2_model()),
        _ => None,
    }
}
