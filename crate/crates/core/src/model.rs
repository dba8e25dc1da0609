//! The chemostat with constant-rate mutation between neighbouring species.
//!
//! Species `i` grows on the substrate `s` with a Monod law
//! `mu_i(s) = m_i s / (a_i + s)`, is washed out at the dilution rate `u`
//! and exchanges biomass with species `i - 1` and `i + 1` at rate `epsilon`
//! through the mutation matrix `T` (the Neumann discretisation of the 1-D
//! Laplacian). The input substrate concentration and all yields are 1:
//!
//! ```text
//! x' = B(s, u, eps) x,        B(s, u, eps) = M(s) - u I + eps T
//! s' = -sum_j mu_j(s) x_j + u (1 - s)
//! ```
//!
//! Species indices are zero-based throughout the crate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::SymTridiag;

/// Monod growth law `m s / (a + s)` of a single species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monod {
    /// Maximal growth rate.
    pub m: f64,
    /// Half-saturation constant.
    pub a: f64,
}

impl Monod {
    pub const fn new(m: f64, a: f64) -> Self {
        Monod { m, a }
    }

    #[inline]
    pub fn rate(&self, s: f64) -> f64 {
        self.m * s / (self.a + s)
    }

    /// Analytic derivative `m a / (a + s)^2`.
    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        let d = self.a + s;
        self.m * self.a / (d * d)
    }

    /// Substrate level where the rate equals `level`, if the law ever reaches it.
    pub fn inverse(&self, level: f64) -> Option<f64> {
        (level < self.m).then(|| self.a * level / (self.m - level))
    }
}

/// Mean and maximum of the growth rates at one substrate level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticsStats {
    pub mean: f64,
    pub max: f64,
}

/// Break-even concentration `lambda_i(u)`: the substrate level at which a
/// species exactly balances dilution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BreakEven {
    Finite(f64),
    /// `mu_i(1) <= u`: the species cannot persist on the available substrate.
    Unreachable,
}

impl BreakEven {
    pub fn is_finite(&self) -> bool {
        matches!(self, BreakEven::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            BreakEven::Finite(v) => Some(v),
            BreakEven::Unreachable => None,
        }
    }
}

/// Per-species Monod parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MonodKinetics {
    species: Vec<Monod>,
}

impl MonodKinetics {
    /// Validates positivity of every parameter. Repeated `(m, a)` pairs are
    /// accepted with a warning.
    pub fn new(species: Vec<Monod>) -> Result<Self> {
        if species.is_empty() {
            return Err(invalid("species", "at least one species is required"));
        }
        for (i, sp) in species.iter().enumerate() {
            if !(sp.m.is_finite() && sp.m > 0.0) {
                return Err(invalid(format!("species[{i}].m"), format!("must be a positive number, got {}", sp.m)));
            }
            if !(sp.a.is_finite() && sp.a > 0.0) {
                return Err(invalid(format!("species[{i}].a"), format!("must be a positive number, got {}", sp.a)));
            }
        }
        for i in 0..species.len() {
            for j in i + 1..species.len() {
                if species[i] == species[j] {
                    log::warn!("species {i} and {j} share identical kinetics (m = {}, a = {})", species[i].m, species[i].a);
                }
            }
        }
        Ok(MonodKinetics { species })
    }

    pub fn n(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[Monod] {
        &self.species
    }

    fn get(&self, i: usize) -> Result<&Monod> {
        self.species.get(i).ok_or(Error::IndexOutOfRange { index: i, n: self.n() })
    }

    /// `mu_i(s)`.
    pub fn monod_rate(&self, i: usize, s: f64) -> Result<f64> {
        Ok(self.get(i)?.rate(s))
    }

    pub fn rates(&self, s: f64) -> impl Iterator<Item = f64> + '_ {
        self.species.iter().map(move |sp| sp.rate(s))
    }

    pub fn stats(&self, s: f64) -> KineticsStats {
        let (sum, max) = self
            .rates(s)
            .fold((0.0, f64::NEG_INFINITY), |(sum, max), r| (sum + r, max.max(r)));
        KineticsStats {
            mean: sum / self.n() as f64,
            max,
        }
    }

    pub fn mean_rate(&self, s: f64) -> f64 {
        self.stats(s).mean
    }

    pub fn max_rate(&self, s: f64) -> f64 {
        self.stats(s).max
    }

    pub fn break_even(&self, i: usize, u: f64) -> Result<BreakEven> {
        let sp = self.get(i)?;
        Ok(if sp.rate(1.0) > u {
            BreakEven::Finite(sp.a * u / (sp.m - u))
        } else {
            BreakEven::Unreachable
        })
    }
}

/// The mutation matrix `T`: tridiagonal stencil `(1, -2, 1)` with `-1` in the
/// two corner diagonal entries, so every row sums to zero. Never stored densely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutationMatrix {
    n: usize,
}

impl MutationMatrix {
    pub fn new(n: usize) -> Self {
        MutationMatrix { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Diagonal entry `t_{i,i}`.
    pub fn diag(&self, i: usize) -> f64 {
        if self.n == 1 {
            0.0
        } else if i == 0 || i + 1 == self.n {
            -1.0
        } else {
            -2.0
        }
    }

    /// `out = T x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut v = self.diag(i) * x[i];
            if i > 0 {
                v += x[i - 1];
            }
            if i + 1 < n {
                v += x[i + 1];
            }
            out[i] = v;
        }
    }

    pub fn to_tridiag(&self) -> SymTridiag {
        SymTridiag::new(
            (0..self.n).map(|i| self.diag(i)).collect(),
            vec![1.0; self.n.saturating_sub(1)],
        )
        .expect("consistent lengths")
    }
}

/// A point `(x, s)` of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub s: f64,
}

impl State {
    /// Checks `x_i >= 0` and `0 <= s <= 1`.
    pub fn new(x: Vec<f64>, s: f64) -> Result<Self> {
        for (i, &xi) in x.iter().enumerate() {
            if !(xi.is_finite() && xi >= 0.0) {
                return Err(invalid(format!("x[{i}]"), format!("must be nonnegative, got {xi}")));
            }
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid("s", format!("must lie in [0, 1], got {s}")));
        }
        Ok(State { x, s })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Total matter `b = s + sum_j x_j`.
    pub fn total(&self) -> f64 {
        self.s + self.x.iter().sum::<f64>()
    }

    pub fn biomass(&self) -> f64 {
        self.x.iter().sum()
    }

    /// Sup-norm distance over `(x, s)`.
    pub fn sup_distance(&self, other: &State) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b).abs())
            .fold((self.s - other.s).abs(), f64::max)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.push(self.s);
        v
    }

    pub fn from_flat(y: &[f64]) -> State {
        let (s, x) = y.split_last().expect("non-empty state vector");
        State { x: x.to_vec(), s: *s }
    }
}

/// Time derivative of a [`State`].
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Vec<f64>,
    pub ds: f64,
}

/// Species count, kinetics, mutation rate and dilution rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemostatModel {
    kinetics: MonodKinetics,
    epsilon: f64,
    u: f64,
}

impl ChemostatModel {
    pub fn new(kinetics: MonodKinetics, epsilon: f64, u: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(invalid("epsilon", format!("must be a nonnegative number, got {epsilon}")));
        }
        if !(u.is_finite() && u >= 0.0) {
            return Err(invalid("u", format!("must be a nonnegative number, got {u}")));
        }
        Ok(ChemostatModel { kinetics, epsilon, u })
    }

    pub fn n(&self) -> usize {
        self.kinetics.n()
    }

    pub fn kinetics(&self) -> &MonodKinetics {
        &self.kinetics
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn mutation(&self) -> MutationMatrix {
        MutationMatrix::new(self.n())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        ChemostatModel::new(self.kinetics.clone(), epsilon, self.u)
    }

    pub fn with_u(&self, u: f64) -> Result<Self> {
        ChemostatModel::new(self.kinetics.clone(), self.epsilon, u)
    }

    /// `B(s, u, eps) = M(s) - u I + eps T`.
    pub fn assemble_b(&self, s: f64) -> SymTridiag {
        let t = self.mutation();
        let diag = self
            .kinetics
            .rates(s)
            .enumerate()
            .map(|(i, mu)| mu - self.u + self.epsilon * t.diag(i))
            .collect();
        SymTridiag::new(diag, vec![self.epsilon; self.n() - 1]).expect("consistent lengths")
    }

    pub fn drift(&self, state: &State) -> Derivative {
        let y = state.to_flat();
        let mut dy = vec![0.0; y.len()];
        self.drift_into(&y, &mut dy);
        let ds = dy.pop().expect("non-empty");
        Derivative { dx: dy, ds }
    }

    /// Vector field on the flat layout `[x_1, ..., x_n, s]`. O(n).
    pub fn drift_into(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.n();
        let s = y[n];
        let x = &y[..n];
        self.mutation().apply(x, &mut dy[..n]);
        let mut uptake = 0.0;
        for (i, sp) in self.kinetics.species.iter().enumerate() {
            let mu = sp.rate(s);
            uptake += mu * x[i];
            dy[i] = (mu - self.u) * x[i] + self.epsilon * dy[i];
        }
        dy[n] = -uptake + self.u * (1.0 - s);
    }

    /// Lower bound `c_u = min(delta_u, 1/2)` on the asymptotic substrate level,
    /// where `delta_u` is the largest `s` in `[0, 1]` with `max_j mu_j(s) <= u/8`.
    pub fn substrate_floor(&self) -> Result<f64> {
        if !(self.u > 0.0) {
            return Err(invalid("u", "substrate floor requires a positive dilution rate"));
        }
        let level = self.u / 8.0;
        let delta = self
            .kinetics
            .species
            .iter()
            .map(|sp| sp.inverse(level).map_or(1.0, |s| s.min(1.0)))
            .fold(1.0, f64::min);
        Ok(delta.min(0.5))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ChemostatModel::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("plain data serialises")
    }
}

/// On-disk model definition:
/// `{ "n": 2, "species": [{"m": 1.0, "a": 1.0}, ...], "epsilon": 1.0, "u": 0.2 }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub species: Vec<Monod>,
    pub epsilon: f64,
    pub u: f64,
}

impl ModelFile {
    pub fn into_model(self) -> Result<ChemostatModel> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.species.len() != self.n {
            return Err(invalid(
                "species",
                format!("expected {} entries to match n, found {}", self.n, self.species.len()),
            ));
        }
        ChemostatModel::new(MonodKinetics::new(self.species)?, self.epsilon, self.u)
    }
}

impl From<&ChemostatModel> for ModelFile {
    fn from(model: &ChemostatModel) -> Self {
        ModelFile {
            n: model.n(),
            species: model.kinetics.species.clone(),
            epsilon: model.epsilon,
            u: model.u,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monod_rate_values() {
        let k = fixtures::fig1_kinetics();
        assert_abs_diff_eq!(k.monod_rate(0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(k.monod_rate(1, 0.2).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(k.monod_rate(0, 0.0).unwrap(), 0.0);
        assert!(matches!(k.monod_rate(2, 0.5), Err(Error::IndexOutOfRange { index: 2, n: 2 })));
    }

    #[test]
    fn stats_of_fig1_kinetics() {
        let k = fixtures::fig1_kinetics();
        let st = k.stats(1.0);
        assert_abs_diff_eq!(st.mean, (0.5 + 0.7 / 1.5) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.mean, 0.483333333333, epsilon = 1e-11);
        assert_eq!(st.max, 0.5);
        assert_eq!(k.stats(0.0), KineticsStats { mean: 0.0, max: 0.0 });

        let single = MonodKinetics::new(vec![Monod::new(0.9, 0.3)]).unwrap();
        let st = single.stats(0.4);
        assert_eq!(st.mean, st.max);
        assert_eq!(st.mean, Monod::new(0.9, 0.3).rate(0.4));
    }

    #[test]
    fn break_even_values() {
        let k = fixtures::fig1_kinetics();
        assert_abs_diff_eq!(k.break_even(1, 0.2).unwrap().value().unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(k.break_even(0, 0.2).unwrap().value().unwrap(), 0.25, epsilon = 1e-15);
        let slow = MonodKinetics::new(vec![Monod::new(0.5, 1.0)]).unwrap();
        assert_eq!(slow.break_even(0, 0.6).unwrap(), BreakEven::Unreachable);
        // mu(1) = 0.25 here: u = 0.25 is not reachable either.
        assert_eq!(slow.break_even(0, 0.25).unwrap(), BreakEven::Unreachable);
    }

    #[test]
    fn assemble_b_fig1() {
        let model = fixtures::fig1_model(1.0, 0.2);
        let b = model.assemble_b(1.0);
        assert_abs_diff_eq!(b.diag()[0], -0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(b.diag()[1], 0.7 / 1.5 - 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(b.diag()[1], -0.733333333333, epsilon = 1e-11);
        assert_eq!(b.offdiag(), &[1.0]);

        let b0 = model.with_epsilon(0.0).unwrap().assemble_b(0.6);
        assert_eq!(b0.offdiag(), &[0.0]);
        for (i, d) in b0.diag().iter().enumerate() {
            assert_eq!(*d, model.kinetics().monod_rate(i, 0.6).unwrap() - 0.2);
        }

        let m5 = fixtures::fig2_model();
        let bz = m5.assemble_b(0.0);
        let t = MutationMatrix::new(20);
        for i in 0..20 {
            assert_eq!(bz.diag()[i], -5.0 + t.diag(i));
        }
    }

    #[test]
    fn mutation_matrix_rows_sum_to_zero() {
        for n in 1..8 {
            let t = MutationMatrix::new(n);
            let ones = vec![1.0; n];
            let mut out = vec![f64::NAN; n];
            t.apply(&ones, &mut out);
            assert!(out.iter().all(|&v| v == 0.0), "n = {n}: {out:?}");
        }
        let t = MutationMatrix::new(4);
        assert_eq!((0..4).map(|i| t.diag(i)).collect::<Vec<_>>(), vec![-1.0, -2.0, -2.0, -1.0]);
    }

    #[test]
    fn drift_examples() {
        let model = fixtures::fig1_model(0.5, 0.2);
        let d = model.drift(&State::new(vec![0.0, 0.0], 1.0).unwrap());
        assert_eq!(d.dx, vec![0.0, 0.0]);
        assert_eq!(d.ds, 0.0);

        let batch = model.with_u(0.0).unwrap();
        let d = batch.drift(&State::new(vec![0.3, 0.1], 0.6).unwrap());
        assert!(d.ds < 0.0);
        assert_abs_diff_eq!(d.dx.iter().sum::<f64>() + d.ds, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn substrate_floor_examples() {
        let model = fixtures::fig1_model(1.0, 0.2);
        assert_abs_diff_eq!(model.substrate_floor().unwrap(), 0.0125 / 0.675, epsilon = 1e-15);
        assert_abs_diff_eq!(model.substrate_floor().unwrap(), 0.018519, epsilon = 1e-6);
        assert_eq!(model.with_u(100.0).unwrap().substrate_floor().unwrap(), 0.5);
        let single = ChemostatModel::new(MonodKinetics::new(vec![Monod::new(1.0, 1.0)]).unwrap(), 0.0, 0.8).unwrap();
        assert_abs_diff_eq!(single.substrate_floor().unwrap(), 1.0 / 9.0, epsilon = 1e-15);
        assert!(model.with_u(0.0).unwrap().substrate_floor().is_err());
    }

    #[test]
    fn json_round_trip_and_field_errors() {
        let text = r#"{"n": 2, "species": [{"m": 1.0, "a": 1.0}, {"m": 0.7, "a": 0.5}], "epsilon": 1.0, "u": 0.2}"#;
        let model = ChemostatModel::from_json_str(text).unwrap();
        assert_eq!(model, fixtures::fig1_model(1.0, 0.2));
        assert_eq!(ChemostatModel::from_json_str(&model.to_json()).unwrap(), model);

        let bad = r#"{"n": 2, "species": [{"m": 1.0, "a": 1.0}, {"m": 0.7, "a": -0.5}], "epsilon": 1.0, "u": 0.2}"#;
        match ChemostatModel::from_json_str(bad) {
            Err(Error::InvalidField { field, .. }) => assert_eq!(field, "species[1].a"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"n": 3, "species": [{"m": 1.0, "a": 1.0}], "epsilon": 1.0, "u": 0.2}"#;
        assert!(matches!(ChemostatModel::from_json_str(bad), Err(Error::InvalidField { field, .. }) if field == "species"));
        let bad = r#"{"n": 1, "species": [{"m": 1.0, "a": 1.0}], "epsilon": -1.0, "u": 0.2}"#;
        assert!(matches!(ChemostatModel::from_json_str(bad), Err(Error::InvalidField { field, .. }) if field == "epsilon"));
    }

    #[test]
    fn state_validation() {
        assert!(State::new(vec![0.1, -1e-3], 0.5).is_err());
        assert!(State::new(vec![0.1], 1.5).is_err());
        let st = State::new(vec![0.1, 0.2], 0.3).unwrap();
        assert_abs_diff_eq!(st.total(), 0.6, epsilon = 1e-15);
        assert_eq!(State::from_flat(&st.to_flat()), st);
    }
}
