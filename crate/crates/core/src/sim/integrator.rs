use crate::error::{Error, Result};
use crate::model::{ChemostatModel, State};

// Dormand-Prince 5(4) tableau; the drift is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// Steps whose new biomass has a component below `-NEGATIVITY_SLACK * tol` are rejected.
pub const NEGATIVITY_SLACK: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Absolute local error bound per step.
    pub tol: f64,
    /// Minimum time between recorded samples; `0` records every accepted step.
    pub sample_interval: f64,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn new(tol: f64) -> Self {
        IntegratorConfig { tol, sample_interval: 0.0, max_steps: 50_000_000 }
    }
}

/// Sampled solution with the mass-balance diagnostic
/// `|b(t) - (1 + (b(0) - 1) exp(-u t))|`, `b = s + sum x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub mass_error: Vec<f64>,
    /// Largest mass-balance error over every accepted step, sampled or not.
    pub max_mass_error: f64,
    /// Smallest biomass component over every accepted step.
    pub min_component: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial sample")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Closed-form total mass `1 + (b0 - 1) exp(-u t)`.
pub fn mass_balance(b0: f64, u: f64, t: f64) -> f64 {
    1.0 + (b0 - 1.0) * (-u * t).exp()
}

fn check_initial(model: &ChemostatModel, initial: &State) -> Result<()> {
    if initial.n() != model.n() {
        return Err(Error::Precondition(format!(
            "initial state has {} species, model has {}",
            initial.n(),
            model.n()
        )));
    }
    if initial.x.iter().any(|v| !(*v >= 0.0)) || !(0.0..=1.0).contains(&initial.s) {
        return Err(Error::Precondition("initial state must have x >= 0 and s in [0, 1]".into()));
    }
    if initial.biomass() <= 0.0 {
        return Err(Error::Precondition("initial biomass must be nonzero".into()));
    }
    Ok(())
}

/// Stateful stepper; `advance_to` may be called repeatedly with increasing end times.
pub(crate) struct Stepper<'a> {
    model: &'a ChemostatModel,
    cfg: IntegratorConfig,
    t: f64,
    y: Vec<f64>,
    h: f64,
    err_prev: f64,
    b0: f64,
    k: [Vec<f64>; 7],
    scratch: Vec<f64>,
    y_new: Vec<f64>,
    last_sample: f64,
    steps_taken: usize,
    pub(crate) traj: Trajectory,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(model: &'a ChemostatModel, initial: &State, cfg: IntegratorConfig) -> Result<Self> {
        if !(cfg.tol > 0.0) {
            return Err(Error::Precondition(format!("tol must be positive, got {}", cfg.tol)));
        }
        check_initial(model, initial)?;
        let y = initial.to_flat();
        let dim = y.len();
        let mut k: [Vec<f64>; 7] = Default::default();
        for ki in k.iter_mut() {
            *ki = vec![0.0; dim];
        }
        model.drift_into(&y, &mut k[0]);
        let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fnorm = k[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = if ynorm > 1e-5 && fnorm > 1e-5 { 0.01 * ynorm / fnorm } else { 1e-3 };
        let b0 = initial.total();
        let traj = Trajectory {
            times: vec![0.0],
            states: vec![initial.clone()],
            mass_error: vec![0.0],
            max_mass_error: 0.0,
            min_component: initial.x.iter().copied().fold(f64::INFINITY, f64::min),
            accepted_steps: 0,
            rejected_steps: 0,
        };
        Ok(Stepper {
            model,
            cfg,
            t: 0.0,
            y,
            h,
            err_prev: 1e-4,
            b0,
            k,
            scratch: vec![0.0; dim],
            y_new: vec![0.0; dim],
            last_sample: 0.0,
            steps_taken: 0,
            traj,
        })
    }

    pub(crate) fn time(&self) -> f64 {
        self.t
    }

    pub(crate) fn state_flat(&self) -> &[f64] {
        &self.y
    }

    /// Attempts one step of size `h` from `(t, y)`; returns the scaled error.
    #[allow(clippy::needless_range_loop)]
    fn trial(&mut self, h: f64) -> f64 {
        let n = self.model.n();
        let dim = self.y.len();
        for stage in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in A[stage].iter().enumerate().take(stage) {
                    acc += a * self.k[j][i];
                }
                self.scratch[i] = self.y[i] + h * acc;
            }
            self.model.drift_into(&self.scratch, &mut self.k[stage]);
        }
        // stage 7 was evaluated at the fifth-order solution
        self.y_new.copy_from_slice(&self.scratch);
        let mut err: f64 = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, ej) in E.iter().enumerate() {
                e += ej * self.k[j][i];
            }
            err = err.max((h * e).abs());
        }
        let neg = self.y_new[..n].iter().any(|&v| v < -NEGATIVITY_SLACK * self.cfg.tol);
        if neg {
            f64::INFINITY
        } else {
            err / self.cfg.tol
        }
    }

    fn record(&mut self, force: bool) {
        let t = self.t;
        let b: f64 = self.y.iter().sum();
        let merr = (b - mass_balance(self.b0, self.model.u(), t)).abs();
        let n = self.model.n();
        let traj = &mut self.traj;
        traj.max_mass_error = traj.max_mass_error.max(merr);
        traj.min_component = self.y[..n].iter().copied().fold(traj.min_component, f64::min);
        if force || t - self.last_sample >= self.cfg.sample_interval {
            traj.times.push(t);
            traj.states.push(State::from_flat(&self.y));
            traj.mass_error.push(merr);
            self.last_sample = t;
        }
    }

    /// Integrates up to `t_end`, landing on it exactly.
    pub(crate) fn advance_to(&mut self, t_end: f64, horizon_scale: f64) -> Result<()> {
        let h_min = 1e-14 * horizon_scale;
        while self.t < t_end {
            if self.steps_taken >= self.cfg.max_steps {
                return Err(Error::NotConverged { iterations: self.steps_taken, residual: t_end - self.t });
            }
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let err = self.trial(h);
            self.steps_taken += 1;
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                // first-same-as-last
                let (first, rest) = self.k.split_at_mut(6);
                first[0].copy_from_slice(&rest[0]);
                let err = err.max(1e-10);
                let factor = (SAFETY * err.powf(-PI_ALPHA) * self.err_prev.powf(PI_BETA)).clamp(MIN_FACTOR, MAX_FACTOR);
                self.err_prev = err;
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                self.traj.accepted_steps += 1;
                self.record(self.t == t_end);
            } else {
                self.traj.rejected_steps += 1;
                self.h = if err.is_finite() {
                    h * (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    0.5 * h
                };
                if self.h < h_min {
                    return Err(Error::StepUnderflow { t: self.t });
                }
            }
        }
        Ok(())
    }
}

/// Integrates `initial` over `[0, horizon]` with local error `tol` per step.
pub fn integrate(model: &ChemostatModel, initial: &State, horizon: f64, tol: f64) -> Result<Trajectory> {
    integrate_with(model, initial, horizon, IntegratorConfig::new(tol))
}

pub fn integrate_with(model: &ChemostatModel, initial: &State, horizon: f64, cfg: IntegratorConfig) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    let mut st = Stepper::new(model, initial, cfg)?;
    st.advance_to(horizon, horizon)?;
    Ok(st.traj)
}

/// Integrates in chunks of `chunk` time units until `||f(x, s)||_inf < settle_tol / 10`
/// and (for `u > 0`) `|b - 1| <= settle_tol`, or until `max_horizon`. The
/// flag reports which. `settle_tol` should sit well above `cfg.tol`, since
/// the stepper keeps a residual drift of order `cfg.tol` near equilibria.
pub fn integrate_until_settled(
    model: &ChemostatModel,
    initial: &State,
    cfg: IntegratorConfig,
    settle_tol: f64,
    chunk: f64,
    max_horizon: f64,
) -> Result<(Trajectory, bool)> {
    if !(chunk > 0.0 && max_horizon >= chunk) {
        return Err(Error::Precondition("need 0 < chunk <= max_horizon".into()));
    }
    let mut st = Stepper::new(model, initial, cfg)?;
    let mut dy = vec![0.0; initial.n() + 1];
    loop {
        let t_end = (st.time() + chunk).min(max_horizon);
        st.advance_to(t_end, max_horizon)?;
        model.drift_into(st.state_flat(), &mut dy);
        let speed = dy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let b: f64 = st.state_flat().iter().sum();
        let mass_ok = model.u() == 0.0 || (b - 1.0).abs() <= settle_tol;
        let settled = speed < settle_tol / 10.0 && mass_ok;
        if settled || t_end >= max_horizon {
            return Ok((st.traj, settled));
        }
    }
}
