use crate::error::{Error, Result};
use crate::model::{ChemostatModel, State};

use super::integrator::{integrate_with, IntegratorConfig, Trajectory};

/// Fraction of the run a trajectory must stay within tolerance to count as converged.
pub const HOLD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub converged: bool,
    pub final_distance: f64,
    /// Earliest sample time after which the distance stays `<= tol`.
    pub time_to_tol: Option<f64>,
}

/// Sup-norm distance to `target` along the run. Converged means the final
/// distance is within `tol` and it has stayed there for [`HOLD_FRACTION`] of
/// the run, or from the start.
pub fn convergence_check(trajectory: &Trajectory, target: &State, tol: f64) -> Convergence {
    let dist: Vec<f64> = trajectory.states.iter().map(|s| s.sup_distance(target)).collect();
    let final_distance = *dist.last().expect("non-empty trajectory");
    let mut time_to_tol = None;
    for (i, d) in dist.iter().enumerate().rev() {
        if *d > tol {
            break;
        }
        time_to_tol = Some(trajectory.times[i]);
    }
    let t0 = trajectory.times[0];
    let span = trajectory.final_time() - t0;
    let converged = match time_to_tol {
        Some(t) => t == t0 || trajectory.final_time() - t >= HOLD_FRACTION * span,
        None => false,
    };
    Convergence { converged, final_distance, time_to_tol }
}

/// Empirical lower bounds over the tail of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceMetrics {
    pub tail_window: f64,
    pub per_species_floor: Vec<f64>,
    pub biomass_floor: f64,
    pub substrate_range: (f64, f64),
}

impl PersistenceMetrics {
    pub fn min_floor(&self) -> f64 {
        self.per_species_floor.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Floors over samples with `t >= T - tail_fraction * T`.
pub fn persistence_metrics(trajectory: &Trajectory, tail_fraction: f64) -> Result<PersistenceMetrics> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::Precondition(format!("tail fraction must lie in (0, 1), got {tail_fraction}")));
    }
    let t_end = trajectory.final_time();
    let window = tail_fraction * (t_end - trajectory.times[0]);
    let cutoff = t_end - window;
    let n = trajectory.final_state().n();
    let mut floors = vec![f64::INFINITY; n];
    let mut biomass_floor = f64::INFINITY;
    let mut s_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (t, st) in trajectory.times.iter().zip(&trajectory.states) {
        if *t < cutoff {
            continue;
        }
        for (f, x) in floors.iter_mut().zip(&st.x) {
            *f = f.min(*x);
        }
        biomass_floor = biomass_floor.min(st.biomass());
        s_range = (s_range.0.min(st.s), s_range.1.max(st.s));
    }
    Ok(PersistenceMetrics { tail_window: window, per_species_floor: floors, biomass_floor, substrate_range: s_range })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchModeResult {
    /// `(b(0)/n * 1, 0)`.
    pub predicted: State,
    pub final_state: State,
    pub distance: f64,
    /// Largest drift of `b` from `b(0)`; `b` is conserved when `u = 0`.
    pub mass_drift: f64,
}

/// Runs the closed vessel (`u = 0`, `eps > 0`), where the substrate is used
/// up and mutation spreads the biomass evenly.
pub fn batch_mode_check(model: &ChemostatModel, initial: &State, horizon: f64, tol: f64) -> Result<BatchModeResult> {
    if model.u() != 0.0 || !(model.epsilon() > 0.0) {
        return Err(Error::Precondition("batch mode needs u = 0 and eps > 0".into()));
    }
    let mut cfg = IntegratorConfig::new(tol);
    cfg.sample_interval = horizon / 1000.0;
    let tr = integrate_with(model, initial, horizon, cfg)?;
    let n = model.n();
    let b0 = initial.total();
    let predicted = State { x: vec![b0 / n as f64; n], s: 0.0 };
    let final_state = tr.final_state().clone();
    Ok(BatchModeResult {
        distance: final_state.sup_distance(&predicted),
        predicted,
        final_state,
        mass_drift: tr.max_mass_error,
    })
}
