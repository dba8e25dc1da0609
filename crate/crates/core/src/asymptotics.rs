//! Behaviour of the coexistence point at the two ends of the mutation range.
//!
//! As `eps -> 0` the coexistence point tends to the single-strain steady
//! state `E_i0` of the strain with the smallest break-even concentration,
//! and departs from it linearly in `eps`: `x = x* + eps xi + o(eps)`,
//! `s = s* + eps sigma + o(eps)`, with `xi` supported on `i0` and its two
//! neighbours. As `eps -> inf` the strains become uniformly distributed and
//! `s` tends to the root of `mean_rate(s) = u`.

use std::io::Write;

use crate::equilibria::coexistence_equilibrium;
use crate::error::{Error, Result};
use crate::model::{BreakEven, ChemostatModel, MonodKinetics, MutationMatrix, State};

/// Break-even concentrations closer than this are treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Centre of the finite-difference stencil used as the expansion oracle.
pub const FD_CENTER: f64 = 1e-5;

/// Zero-based index of the strain with the smallest break-even concentration.
pub fn winner_index(kinetics: &MonodKinetics, u: f64) -> Result<usize> {
    if !(u > 0.0) {
        return Err(Error::Precondition(format!("winner needs u > 0, got {u}")));
    }
    let mut finite: Vec<(usize, f64)> = Vec::with_capacity(kinetics.n());
    for i in 0..kinetics.n() {
        if let BreakEven::Finite(l) = kinetics.break_even(i, u)? {
            finite.push((i, l));
        }
    }
    finite.sort_by(|a, b| a.1.total_cmp(&b.1));
    match finite.as_slice() {
        [] => Err(Error::WashoutRegime),
        [(i, _)] => Ok(*i),
        [(i, li), (j, lj), ..] => {
            if lj - li <= TIE_TOLERANCE {
                Err(Error::NonGenericDilution { first: *i.min(j), second: *i.max(j) })
            } else {
                Ok(*i)
            }
        }
    }
}

/// First-order terms of the small-mutation expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionResult {
    pub u: f64,
    pub winner: usize,
    /// `E_i0`: the winner at `1 - lambda_i0(u)`, everything else extinct, `s = lambda_i0(u)`.
    pub base_point: State,
    pub xi: Vec<f64>,
    pub sigma: f64,
}

impl ExpansionResult {
    /// First-order prediction `E_i0 + eps (xi, sigma)`.
    pub fn predict(&self, epsilon: f64) -> State {
        State {
            x: self.base_point.x.iter().zip(&self.xi).map(|(x, d)| x + epsilon * d).collect(),
            s: self.base_point.s + epsilon * self.sigma,
        }
    }
}

pub fn first_order_expansion(kinetics: &MonodKinetics, u: f64) -> Result<ExpansionResult> {
    let i0 = winner_index(kinetics, u)?;
    let n = kinetics.n();
    let sp = kinetics.species();
    let lam = kinetics.break_even(i0, u)?.value().expect("winner has a finite break-even");
    let t = MutationMatrix::new(n);
    let sigma = -t.diag(i0) / sp[i0].derivative(lam);

    let mut xi = vec![0.0; n];
    let mut neighbours = 0.0;
    for j in [i0.wrapping_sub(1), i0 + 1] {
        if j < n {
            xi[j] = (1.0 - lam) / (u - sp[j].rate(lam));
            neighbours += xi[j];
        }
    }
    xi[i0] = -neighbours - sigma;

    let mut x = vec![0.0; n];
    x[i0] = 1.0 - lam;
    Ok(ExpansionResult { u, winner: i0, base_point: State { x, s: lam }, xi, sigma })
}

/// Central-difference derivative of the coexistence point with respect to `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdExpansion {
    pub center: f64,
    pub xi: Vec<f64>,
    pub sigma: f64,
}

pub fn finite_difference_expansion(kinetics: &MonodKinetics, u: f64, center: f64) -> Result<FdExpansion> {
    if !(center > 0.0) {
        return Err(Error::Precondition("finite-difference centre must be positive".into()));
    }
    let h = 0.5 * center;
    let lo = coexistence_equilibrium(&ChemostatModel::new(kinetics.clone(), center - h, u)?)?;
    let hi = coexistence_equilibrium(&ChemostatModel::new(kinetics.clone(), center + h, u)?)?;
    let w = 2.0 * h;
    Ok(FdExpansion {
        center,
        xi: hi.x.iter().zip(&lo.x).map(|(a, b)| (a - b) / w).collect(),
        sigma: (hi.s - lo.s) / w,
    })
}

/// `||E_eps - E_i0 - eps (xi, sigma)||_inf / eps`.
pub fn expansion_remainder(kinetics: &MonodKinetics, expansion: &ExpansionResult, epsilon: f64) -> Result<f64> {
    let eq = coexistence_equilibrium(&ChemostatModel::new(kinetics.clone(), epsilon, expansion.u)?)?;
    Ok(eq.state().sup_distance(&expansion.predict(epsilon)) / epsilon)
}

/// Root of `mean_rate(s) = level` on `[0, 1]`.
pub fn mean_rate_inverse(kinetics: &MonodKinetics, level: f64) -> Result<f64> {
    let top = kinetics.mean_rate(1.0);
    if !(level > 0.0 && level < top) {
        return Err(Error::Precondition(format!("mean-rate level {level} outside (0, {top})")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if kinetics.mean_rate(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Limit of the coexistence point as `eps -> inf`: uniform `x = (1 - s)/n`.
pub fn infinite_mutation_limit(model: &ChemostatModel) -> Result<State> {
    let u = model.u();
    let top = model.kinetics().mean_rate(1.0);
    if u >= top {
        return Err(Error::Precondition(format!("u = {u} is at or above mean_rate(1) = {top}: no limit point")));
    }
    let s = mean_rate_inverse(model.kinetics(), u)?;
    let n = model.n();
    Ok(State { x: vec![(1.0 - s) / n as f64; n], s })
}

/// Limit of the critical dilution rate as `eps -> inf`.
pub fn critical_dilution_limit(kinetics: &MonodKinetics) -> f64 {
    kinetics.mean_rate(1.0)
}

/// Writes `u, i0, sigma, xi_1..xi_n, fd_sigma, fd_xi_1..fd_xi_n, abs_err` with
/// a one-based `i0` and `abs_err` the largest deviation from the oracle.
pub fn write_expansion_csv<W: Write>(out: W, rows: &[(ExpansionResult, FdExpansion)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = rows.first().map_or(0, |r| r.0.xi.len());
    let mut header = vec!["u".to_string(), "i0".into(), "sigma".into()];
    header.extend((1..=n).map(|i| format!("xi_{i}")));
    header.push("fd_sigma".into());
    header.extend((1..=n).map(|i| format!("fd_xi_{i}")));
    header.push("abs_err".into());
    w.write_record(&header)?;
    for (e, fd) in rows {
        let err = e.xi.iter().zip(&fd.xi).fold((e.sigma - fd.sigma).abs(), |m, (a, b)| m.max((a - b).abs()));
        let mut rec = vec![e.u.to_string(), (e.winner + 1).to_string(), e.sigma.to_string()];
        rec.extend(e.xi.iter().map(f64::to_string));
        rec.push(fd.sigma.to_string());
        rec.extend(fd.xi.iter().map(f64::to_string));
        rec.push(err.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
