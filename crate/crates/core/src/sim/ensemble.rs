use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ChemostatModel, State};

use super::analysis::{convergence_check, persistence_metrics};
use super::integrator::{integrate_with, IntegratorConfig, Trajectory};

/// Lower bound on each biomass component of on-manifold random initial states.
pub const MIN_INITIAL_COMPONENT: f64 = 1e-3;

/// Independent generator for member `index` of a run seeded with `seed`.
pub fn member_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn simplex_point<R: Rng>(n: usize, rng: &mut R) -> State {
    // uniform on {x_i >= 1e-3, sum x <= 1} x {s = 1 - sum x}
    let w: Vec<f64> = (0..=n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    let free = 1.0 - n as f64 * MIN_INITIAL_COMPONENT;
    let x: Vec<f64> = w[..n].iter().map(|wi| MIN_INITIAL_COMPONENT + free * wi / total).collect();
    let s = (1.0 - x.iter().sum::<f64>()).max(0.0);
    State { x, s }
}

/// Random initial condition for ensemble member `index`: even members lie on
/// `sum x + s = 1`, odd members are that point scaled to `b(0)` drawn from
/// `[0.5, 1.5]` (redrawn until `s <= 1`).
pub fn random_initial(n: usize, seed: u64, index: u64) -> Result<State> {
    if n == 0 || n as f64 * MIN_INITIAL_COMPONENT >= 1.0 {
        return Err(Error::Precondition(format!("random initial states need 1 <= n < 1000, got {n}")));
    }
    let mut rng = member_rng(seed, index);
    if index.is_multiple_of(2) {
        return Ok(simplex_point(n, &mut rng));
    }
    loop {
        let p = simplex_point(n, &mut rng);
        let b0: f64 = rng.random_range(0.5..1.5);
        if b0 * p.s <= 1.0 {
            return Ok(State { x: p.x.iter().map(|v| v * b0).collect(), s: p.s * b0 });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub seed: u64,
    pub members: usize,
    pub horizon: f64,
    pub integrator: IntegratorConfig,
    /// Sup-distance counted as converged.
    pub convergence_tol: f64,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub index: u64,
    pub initial: State,
    pub converged: bool,
    pub final_distance: f64,
    pub time_to_tol: Option<f64>,
    pub floors: Vec<f64>,
    pub max_mass_error: f64,
    pub min_component: f64,
    pub final_state: State,
}

fn run_member(model: &ChemostatModel, target: &State, cfg: &EnsembleConfig, index: u64) -> Result<EnsembleMember> {
    let initial = random_initial(model.n(), cfg.seed, index)?;
    let tr: Trajectory = integrate_with(model, &initial, cfg.horizon, cfg.integrator)?;
    let conv = convergence_check(&tr, target, cfg.convergence_tol);
    let pers = persistence_metrics(&tr, cfg.tail_fraction)?;
    Ok(EnsembleMember {
        index,
        initial,
        converged: conv.converged,
        final_distance: conv.final_distance,
        time_to_tol: conv.time_to_tol,
        floors: pers.per_species_floor,
        max_mass_error: tr.max_mass_error,
        min_component: tr.min_component,
        final_state: tr.final_state().clone(),
    })
}

/// Runs members `0..members` in parallel; results are ordered by index.
pub fn run_ensemble(model: &ChemostatModel, target: &State, cfg: &EnsembleConfig) -> Result<Vec<EnsembleMember>> {
    (0..cfg.members as u64)
        .into_par_iter()
        .map(|i| run_member(model, target, cfg, i))
        .collect()
}

/// Writes `t, x_1..x_n, s, b_err`.
pub fn write_trajectory_csv<W: Write>(out: W, trajectory: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = trajectory.final_state().n();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend(["s".to_string(), "b_err".into()]);
    w.write_record(&header)?;
    for ((t, st), e) in trajectory.times.iter().zip(&trajectory.states).zip(&trajectory.mass_error) {
        let mut rec = vec![t.to_string()];
        rec.extend(st.x.iter().map(f64::to_string));
        rec.extend([st.s.to_string(), e.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `seed, converged, final_dist, time_to_tol, floor_1..floor_n`, where
/// `seed` is the member's stream index under the run seed and an empty
/// `time_to_tol` means the tolerance was never held.
pub fn write_ensemble_csv<W: Write>(out: W, members: &[EnsembleMember]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = members.first().map_or(0, |m| m.floors.len());
    let mut header = vec!["seed".to_string(), "converged".into(), "final_dist".into(), "time_to_tol".into()];
    header.extend((1..=n).map(|i| format!("floor_{i}")));
    w.write_record(&header)?;
    for m in members {
        let mut rec = vec![
            m.index.to_string(),
            m.converged.to_string(),
            m.final_distance.to_string(),
            m.time_to_tol.map_or(String::new(), |t| t.to_string()),
        ];
        rec.extend(m.floors.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
