//! Steady states of the chemostat with mutation.
//!
//! Besides the washout `(0, 1)`, the only candidate equilibrium is the
//! coexistence point: `B(s, u, eps)` must have a zero Perron root, which
//! happens at a single `s` because `s -> lambda(B(s, u, eps))` is strictly
//! increasing, from `-u` at `s = 0`. So coexistence exists iff
//! `lambda(B(1, u, eps)) > 0`, and then `x` is the Perron vector scaled onto
//! the mass-balance manifold `sum x + s = 1`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{spectral_abscissa, top_eigenvalue, AbscissaSign, EigResult, SymTridiag};
use crate::model::{ChemostatModel, MonodKinetics, State};

/// `|lambda(B(1, u, eps))|` below this is reported as [`Classification::Critical`].
pub const CLASSIFY_BAND: f64 = 1e-10;

const SUBSTRATE_BISECTIONS: usize = 60;

/// Dilution regimes separated by the sign of `lambda(B(1, u, eps))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    WashoutOnly,
    Coexistence,
    /// `u` sits on the critical dilution rate within [`CLASSIFY_BAND`].
    Critical,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::WashoutOnly => "washout-only",
            Classification::Coexistence => "coexistence",
            Classification::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Washout,
    Coexistence,
}

impl EquilibriumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquilibriumKind::Washout => "washout",
            EquilibriumKind::Coexistence => "coexistence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub x: Vec<f64>,
    pub s: f64,
    /// Perron data of `B(s, u, eps)`; coexistence only.
    pub perron: Option<EigResult>,
    pub lambda_at_one: f64,
}

impl Equilibrium {
    pub fn state(&self) -> State {
        State {
            x: self.x.clone(),
            s: self.s,
        }
    }
}

fn tight_tol(matrix: &SymTridiag) -> f64 {
    1e-15 * (1.0 + matrix.norm_inf())
}

/// `lambda(B(s, u, eps))` evaluated to near machine precision.
pub fn lambda_at(model: &ChemostatModel, s: f64) -> f64 {
    let b = model.assemble_b(s);
    top_eigenvalue(&b, tight_tol(&b))
}

/// Critical dilution rate `u_c(eps) = lambda(M(1) + eps T)`.
pub fn critical_dilution(kinetics: &MonodKinetics, epsilon: f64) -> Result<f64> {
    let model = ChemostatModel::new(kinetics.clone(), epsilon, 0.0)?;
    Ok(lambda_at(&model, 1.0))
}

/// Bracket `[max(m - 2 eps, mean_rate(1)), m]` for `u_c(eps)`, `m = max_rate(1)`.
pub fn critical_dilution_bounds(kinetics: &MonodKinetics, epsilon: f64) -> (f64, f64) {
    let st = kinetics.stats(1.0);
    ((st.max - 2.0 * epsilon).max(st.mean), st.max)
}

pub fn classify(model: &ChemostatModel) -> Result<Classification> {
    if !(model.epsilon() > 0.0 && model.u() > 0.0) {
        return Err(Error::Precondition(format!(
            "classification needs epsilon > 0 and u > 0 (epsilon = {}, u = {})",
            model.epsilon(),
            model.u()
        )));
    }
    let lam = lambda_at(model, 1.0);
    Ok(if lam > CLASSIFY_BAND {
        Classification::Coexistence
    } else if lam < -CLASSIFY_BAND {
        Classification::WashoutOnly
    } else {
        Classification::Critical
    })
}

/// Root `s` of `lambda(B(s, u, eps)) = 0` on `[0, 1]` by bisection.
pub fn solve_substrate(model: &ChemostatModel) -> Result<f64> {
    if !(model.u() > 0.0) {
        return Err(Error::Precondition("substrate root needs u > 0".into()));
    }
    let lambda_at_one = lambda_at(model, 1.0);
    if !(lambda_at_one > 0.0) {
        return Err(Error::NoCoexistence { lambda_at_one });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut f_lo, mut f_hi) = (-model.u(), lambda_at_one);
    for _ in 0..SUBSTRATE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f = lambda_at(model, mid);
        if f < 0.0 {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }
    Ok(if f_hi.abs() <= f_lo.abs() { hi } else { lo })
}

pub fn washout(model: &ChemostatModel) -> Equilibrium {
    Equilibrium {
        kind: EquilibriumKind::Washout,
        x: vec![0.0; model.n()],
        s: 1.0,
        perron: None,
        lambda_at_one: lambda_at(model, 1.0),
    }
}

/// The coexistence point `x = (1 - s) a / sum(a)`, `a` the Perron vector at the root `s`.
pub fn coexistence_equilibrium(model: &ChemostatModel) -> Result<Equilibrium> {
    let s = solve_substrate(model)?;
    let b = model.assemble_b(s);
    let lambda = top_eigenvalue(&b, tight_tol(&b));
    let eig = crate::linalg::perron_vector(&b, lambda)?;
    let total: f64 = eig.vector.iter().sum();
    let x = eig.vector.iter().map(|a| (1.0 - s) * a / total).collect();
    Ok(Equilibrium {
        kind: EquilibriumKind::Coexistence,
        x,
        s,
        perron: Some(eig),
        lambda_at_one: lambda_at(model, 1.0),
    })
}

/// Both steady states (when they exist) with their stability.
#[derive(Debug, Clone)]
pub struct SteadyStateAnalysis {
    pub classification: Classification,
    pub washout: (Equilibrium, StabilityReport),
    pub coexistence: Option<(Equilibrium, StabilityReport)>,
}

pub fn analyze(model: &ChemostatModel) -> Result<SteadyStateAnalysis> {
    let classification = classify(model)?;
    let wo = washout(model);
    let wo_report = stability_report(model, &wo)?;
    let coexistence = match classification {
        Classification::Coexistence => {
            let eq = coexistence_equilibrium(model)?;
            let report = stability_report(model, &eq)?;
            Some((eq, report))
        }
        _ => None,
    };
    Ok(SteadyStateAnalysis {
        classification,
        washout: (wo, wo_report),
        coexistence,
    })
}

fn require_two(kinetics: &MonodKinetics) -> Result<()> {
    if kinetics.n() != 2 {
        return Err(Error::Precondition(format!("closed forms need n = 2, got n = {}", kinetics.n())));
    }
    Ok(())
}

/// Closed-form `lambda(B(s, u, eps))` for two species:
/// `-eps - u + (mu_1 + mu_2)/2 + sqrt((mu_1 - mu_2)^2 + 4 eps^2)/2`.
pub fn two_species_lambda(kinetics: &MonodKinetics, s: f64, u: f64, epsilon: f64) -> Result<f64> {
    require_two(kinetics)?;
    let sp = kinetics.species();
    let (m1, m2) = (sp[0].rate(s), sp[1].rate(s));
    Ok(-epsilon - u + 0.5 * (m1 + m2) + 0.5 * ((m1 - m2).powi(2) + 4.0 * epsilon * epsilon).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpeciesEquilibrium {
    pub x1: f64,
    pub x2: f64,
    pub s: f64,
}

/// Coexistence point for two species from the closed-form eigenvalue: the
/// substrate root is bracketed on the closed form and the species split
/// follows from `mu_1 x_1 + mu_2 x_2 = u (x_1 + x_2)`.
pub fn two_species_equilibrium(kinetics: &MonodKinetics, u: f64, epsilon: f64) -> Result<TwoSpeciesEquilibrium> {
    require_two(kinetics)?;
    if !(u > 0.0) {
        return Err(Error::Precondition("two-species equilibrium needs u > 0".into()));
    }
    let f = |s: f64| two_species_lambda(kinetics, s, u, epsilon).expect("n = 2");
    let lambda_at_one = f(1.0);
    if !(lambda_at_one > 0.0) {
        return Err(Error::NoCoexistence { lambda_at_one });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if f(hi).abs() <= f(lo).abs() { hi } else { lo };
    let sp = kinetics.species();
    let (mu1, mu2) = (sp[0].rate(s), sp[1].rate(s));
    let (x1, x2) = if (mu1 - mu2).abs() < 1e-12 {
        ((1.0 - s) / 2.0, (1.0 - s) / 2.0)
    } else {
        (
            (1.0 - s) * (u - mu2) / (mu1 - mu2),
            (1.0 - s) * (u - mu1) / (mu2 - mu1),
        )
    };
    Ok(TwoSpeciesEquilibrium { x1, x2, s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Global asymptotic stability is a known result for this case.
    GasClaimed,
    Las,
    Stable,
    Unstable,
    Marginal,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::GasClaimed => "GAS-claimed",
            Verdict::Las => "LAS",
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub jacobian_abscissa: f64,
    /// Abscissa of `A = B - d a^T`; coexistence only.
    pub a_abscissa: Option<f64>,
    pub verdict: Verdict,
    /// `d = M'(s) x`; coexistence only.
    pub d_vector: Option<Vec<f64>>,
}

/// Local stability from the Jacobian in the `(x, b)` coordinates,
/// `J = [[B(s) - d a^T, d], [0, -u]]` at coexistence. At the washout the
/// Jacobian is block triangular, so its abscissa is `max(lambda(B(1)), -u)`.
pub fn stability_report(model: &ChemostatModel, eq: &Equilibrium) -> Result<StabilityReport> {
    let u = model.u();
    match eq.kind {
        EquilibriumKind::Washout => {
            let lam = eq.lambda_at_one;
            let abscissa = lam.max(-u);
            let verdict = if lam > CLASSIFY_BAND {
                Verdict::Unstable
            } else if u <= 0.0 {
                Verdict::Marginal
            } else if lam < -CLASSIFY_BAND {
                Verdict::GasClaimed
            } else {
                Verdict::Stable
            };
            Ok(StabilityReport {
                jacobian_abscissa: abscissa,
                a_abscissa: None,
                verdict,
                d_vector: None,
            })
        }
        EquilibriumKind::Coexistence => {
            let n = model.n();
            let d: Vec<f64> = model
                .kinetics()
                .species()
                .iter()
                .zip(&eq.x)
                .map(|(sp, xi)| sp.derivative(eq.s) * xi)
                .collect();
            let b = model.assemble_b(eq.s).to_dense();
            let a = DMatrix::from_fn(n, n, |i, j| b[(i, j)] - d[i]);
            let j = DMatrix::from_fn(n + 1, n + 1, |r, c| match (r < n, c < n) {
                (true, true) => a[(r, c)],
                (true, false) => d[r],
                (false, true) => 0.0,
                (false, false) => -u,
            });
            let a_ab = spectral_abscissa(&a)?;
            let j_ab = spectral_abscissa(&j)?;
            let verdict = match j_ab.sign {
                AbscissaSign::Negative if n <= 2 => Verdict::GasClaimed,
                AbscissaSign::Negative => Verdict::Las,
                AbscissaSign::Positive => Verdict::Unstable,
                AbscissaSign::Marginal => Verdict::Marginal,
            };
            Ok(StabilityReport {
                jacobian_abscissa: j_ab.value,
                a_abscissa: Some(a_ab.value),
                verdict,
                d_vector: Some(d),
            })
        }
    }
}

/// One inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl Certificate {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Bounds on the coexistence substrate level and on `lambda(B(1, u, eps))`:
///
/// ```text
/// mean(s*) <= u <= max(s*) <= u + 2 eps
/// max(max(1) - u - 2 eps, mean(1) - u) <= lambda(B(1)) <= max(1) - u
/// ```
///
/// where `mean`/`max` are taken over the growth rates. The first chain is
/// only evaluated when a coexistence equilibrium is supplied.
pub fn inequality_certificates(model: &ChemostatModel, eq: Option<&Equilibrium>) -> Result<Vec<Certificate>> {
    let (u, eps) = (model.u(), model.epsilon());
    let mut out = Vec::with_capacity(6);
    if let Some(eq) = eq {
        if eq.kind != EquilibriumKind::Coexistence {
            return Err(Error::Precondition("substrate bounds need a coexistence equilibrium".into()));
        }
        let st = model.kinetics().stats(eq.s);
        out.push(Certificate { name: "mean_rate(s*) <= u", lhs: st.mean, rhs: u });
        out.push(Certificate { name: "u <= max_rate(s*)", lhs: u, rhs: st.max });
        out.push(Certificate { name: "max_rate(s*) <= u + 2eps", lhs: st.max, rhs: u + 2.0 * eps });
    }
    let st = model.kinetics().stats(1.0);
    let lam = lambda_at(model, 1.0);
    out.push(Certificate { name: "max_rate(1) - u - 2eps <= lambda(B(1))", lhs: st.max - u - 2.0 * eps, rhs: lam });
    out.push(Certificate { name: "mean_rate(1) - u <= lambda(B(1))", lhs: st.mean - u, rhs: lam });
    out.push(Certificate { name: "lambda(B(1)) <= max_rate(1) - u", lhs: lam, rhs: st.max - u });
    Ok(out)
}

/// Rectangular `(eps, u)` grid with inclusive, evenly spaced axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGrid {
    pub epsilon: (f64, f64, usize),
    pub u: (f64, f64, usize),
}

/// Grid used by the sweep when none is given: the two-species fixture's
/// coexistence and washout regions.
pub const DEFAULT_SWEEP_GRID: &str = "0:2:21,0:0.6:25";

fn axis(values: (f64, f64, usize)) -> impl Iterator<Item = f64> {
    let (lo, hi, n) = values;
    (0..n).map(move |k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
}

impl ParamGrid {
    /// Parses `emin:emax:n,umin:umax:n`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 2 {
            return Err(crate::error::invalid("grid", format!("expected `emin:emax:n,umin:umax:n`, got `{text}`")));
        }
        let axis = |name: &str, p: &str| -> Result<(f64, f64, usize)> {
            let f: Vec<&str> = p.split(':').collect();
            let bad = || crate::error::invalid(format!("grid.{name}"), format!("expected `min:max:n`, got `{p}`"));
            if f.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = f[0].trim().parse().map_err(|_| bad())?;
            let hi: f64 = f[1].trim().parse().map_err(|_| bad())?;
            let n: usize = f[2].trim().parse().map_err(|_| bad())?;
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) || n == 0 {
                return Err(crate::error::invalid(
                    format!("grid.{name}"),
                    format!("need 0 <= min <= max and n >= 1, got `{p}`"),
                ));
            }
            Ok((lo, hi, n))
        };
        Ok(ParamGrid { epsilon: axis("epsilon", parts[0])?, u: axis("u", parts[1])? })
    }

    pub fn len(&self) -> usize {
        self.epsilon.2 * self.u.2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in row-major order: `eps` outer, `u` inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        axis(self.epsilon).flat_map(|e| axis(self.u).map(move |u| (e, u))).collect()
    }
}

/// One row of `equilibrium.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumRow {
    pub epsilon: f64,
    pub u: f64,
    pub kind: String,
    pub s: f64,
    pub x: Vec<f64>,
    pub lambda_at_one: f64,
    pub abscissa: f64,
}

impl EquilibriumRow {
    pub fn new(model: &ChemostatModel, eq: &Equilibrium, report: &StabilityReport) -> Self {
        EquilibriumRow {
            epsilon: model.epsilon(),
            u: model.u(),
            kind: eq.kind.as_str().to_string(),
            s: eq.s,
            x: eq.x.clone(),
            lambda_at_one: eq.lambda_at_one,
            abscissa: report.jacobian_abscissa,
        }
    }
}

/// Writes `epsilon, u, kind, s, x_1..x_n, lambda_at_one, abscissa`.
pub fn write_equilibrium_csv<W: Write>(out: W, n: usize, rows: &[EquilibriumRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["epsilon".to_string(), "u".into(), "kind".into(), "s".into()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend(["lambda_at_one".to_string(), "abscissa".into()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.epsilon.to_string(), r.u.to_string(), r.kind.clone(), r.s.to_string()];
        rec.extend(r.x.iter().map(f64::to_string));
        rec.extend([r.lambda_at_one.to_string(), r.abscissa.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `epsilon, u_c, lower_bound, upper_bound` for each `epsilon`.
pub fn write_uc_curve_csv<W: Write>(out: W, kinetics: &MonodKinetics, epsilons: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "u_c", "lower_bound", "upper_bound"])?;
    for &eps in epsilons {
        let uc = critical_dilution(kinetics, eps)?;
        let (lo, hi) = critical_dilution_bounds(kinetics, eps);
        w.write_record([eps.to_string(), uc.to_string(), lo.to_string(), hi.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    fn fig1_uc_closed_form(eps: f64) -> f64 {
        let (m1, m2) = (0.5, 0.7 / 1.5);
        -eps + 0.5 * (m1 + m2) + 0.5 * ((m1 - m2) * (m1 - m2) + 4.0 * eps * eps).sqrt()
    }

    #[test]
    fn critical_dilution_values() {
        let k = fixtures::fig1_kinetics();
        assert_abs_diff_eq!(critical_dilution(&k, 0.0).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(critical_dilution(&k, 1.0).unwrap(), fig1_uc_closed_form(1.0), epsilon = 1e-13);
        assert_abs_diff_eq!(critical_dilution(&k, 1.0).unwrap(), 0.483472, epsilon = 1e-6);
        assert_abs_diff_eq!(critical_dilution(&k, 2.0).unwrap(), 0.4834028, epsilon = 1e-7);
        assert_abs_diff_eq!(critical_dilution(&k, 1e4).unwrap(), k.mean_rate(1.0), epsilon = 1e-3);
    }

    #[test]
    fn critical_dilution_respects_bounds_and_decreases() {
        for k in [fixtures::fig1_kinetics(), fixtures::fig2_kinetics()] {
            let mut prev = f64::INFINITY;
            for i in 0..60 {
                let eps = 0.05 * i as f64;
                let uc = critical_dilution(&k, eps).unwrap();
                let (lo, hi) = critical_dilution_bounds(&k, eps);
                assert!(lo - 1e-12 <= uc && uc <= hi + 1e-12, "eps = {eps}: {lo} <= {uc} <= {hi}");
                assert!(uc <= prev + 1e-12);
                prev = uc;
            }
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&fixtures::fig1_model(1.0, 0.2)).unwrap(), Classification::Coexistence);
        assert_eq!(classify(&fixtures::fig1_model(1.0, 0.6)).unwrap(), Classification::WashoutOnly);
        // u below mean_rate(1) coexists whatever eps is
        for eps in [1e-3, 1.0, 50.0, 1e4] {
            assert_eq!(classify(&fixtures::fig1_model(eps, 0.48)).unwrap(), Classification::Coexistence);
        }
        let uc = critical_dilution(&fixtures::fig1_kinetics(), 1.0).unwrap();
        assert_eq!(classify(&fixtures::fig1_model(1.0, uc)).unwrap(), Classification::Critical);
        assert!(classify(&fixtures::fig1_model(0.0, 0.2)).is_err());
    }

    #[test]
    fn lambda_is_increasing_in_s() {
        let model = fixtures::fig2_model();
        let vals: Vec<f64> = (0..=64).map(|i| lambda_at(&model, i as f64 / 64.0)).collect();
        assert_abs_diff_eq!(vals[0], -5.0, epsilon = 1e-12);
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
        // exactly one sign change
        assert_eq!(vals.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count(), 1);
    }

    #[test]
    fn substrate_root_small_mutation() {
        let s = solve_substrate(&fixtures::fig1_model(1e-6, 0.2)).unwrap();
        assert_abs_diff_eq!(s, 0.2, epsilon = 1e-4);
        let s = solve_substrate(&fixtures::fig1_model(1e-3, 0.2)).unwrap();
        // first-order slope 1.4 in eps
        assert_abs_diff_eq!((s - 0.2) / 1e-3, 1.4, epsilon = 0.05);
        assert!(matches!(
            solve_substrate(&fixtures::fig1_model(1.0, 0.6)),
            Err(Error::NoCoexistence { .. })
        ));
    }

    #[test]
    fn substrate_root_equal_kinetics() {
        let k = MonodKinetics::new(vec![crate::model::Monod::new(0.8, 0.4); 2]).unwrap();
        for eps in [0.01, 0.3, 2.0] {
            let model = ChemostatModel::new(k.clone(), eps, 0.3).unwrap();
            let s = solve_substrate(&model).unwrap();
            assert_abs_diff_eq!(s, 0.4 * 0.3 / 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn coexistence_point_fig1_small_eps() {
        let eps = 1e-4;
        let eq = coexistence_equilibrium(&fixtures::fig1_model(eps, 0.2)).unwrap();
        assert_abs_diff_eq!(eq.x[1], 0.8, epsilon = 1e-2);
        assert_abs_diff_eq!(eq.x[0] / eps, 24.0, epsilon = 0.1);
    }

    #[test]
    fn coexistence_point_crossing_kinetics() {
        let k = fixtures::crossing_kinetics();
        let u = 3.0 / 7.0;
        for eps in [0.01, 0.5, 3.0] {
            let eq = coexistence_equilibrium(&ChemostatModel::new(k.clone(), eps, u).unwrap()).unwrap();
            assert_abs_diff_eq!(eq.s, 0.75, epsilon = 1e-12);
            assert_abs_diff_eq!(eq.x[0], 0.125, epsilon = 1e-10);
            assert_abs_diff_eq!(eq.x[1], 0.125, epsilon = 1e-10);
            let closed = two_species_equilibrium(&k, u, eps).unwrap();
            assert_abs_diff_eq!(closed.x1, 0.125, epsilon = 1e-10);
            assert_abs_diff_eq!(closed.x2, 0.125, epsilon = 1e-10);
        }
    }

    #[test]
    fn coexistence_point_fig2_is_a_fixed_point() {
        let model = fixtures::fig2_model();
        let eq = coexistence_equilibrium(&model).unwrap();
        let d = model.drift(&eq.state());
        let worst = d.dx.iter().fold(d.ds.abs(), |m, v| m.max(v.abs()));
        assert!(worst <= 1e-9, "drift {worst:e}");
        assert!(eq.x.iter().all(|&x| x > 0.0));
        assert_abs_diff_eq!(eq.x.iter().sum::<f64>() + eq.s, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn two_species_lambda_examples() {
        let k = fixtures::fig1_kinetics();
        assert_abs_diff_eq!(two_species_lambda(&k, 1.0, 0.2, 0.0).unwrap(), 0.3, epsilon = 1e-15);
        for s in [0.1, 0.5, 0.9] {
            let m = k.max_rate(s);
            assert_abs_diff_eq!(two_species_lambda(&k, s, 0.2, 0.0).unwrap(), m - 0.2, epsilon = 1e-15);
        }
        let same = MonodKinetics::new(vec![crate::model::Monod::new(0.8, 0.4); 2]).unwrap();
        assert_abs_diff_eq!(
            two_species_lambda(&same, 0.3, 0.1, 0.7).unwrap(),
            same.monod_rate(0, 0.3).unwrap() - 0.1,
            epsilon = 1e-15
        );
        assert!(two_species_lambda(&fixtures::fig2_kinetics(), 0.3, 0.1, 0.7).is_err());
    }

    #[test]
    fn two_species_equilibrium_sums_to_one_and_tends_to_winner() {
        let k = fixtures::fig1_kinetics();
        let e = two_species_equilibrium(&k, 0.2, 0.7).unwrap();
        assert_abs_diff_eq!(e.x1 + e.x2 + e.s, 1.0, epsilon = 1e-12);
        assert!(e.x1 > 0.0 && e.x2 > 0.0);
        let e = two_species_equilibrium(&k, 0.2, 1e-7).unwrap();
        assert_abs_diff_eq!(e.x1, 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(e.x2, 0.8, epsilon = 1e-5);
        assert_abs_diff_eq!(e.s, 0.2, epsilon = 1e-5);
    }

    #[test]
    fn stability_examples() {
        let model = fixtures::fig2_model();
        let eq = coexistence_equilibrium(&model).unwrap();
        let rep = stability_report(&model, &eq).unwrap();
        assert!(rep.jacobian_abscissa < 0.0);
        assert_eq!(rep.verdict, Verdict::Las);

        let model = fixtures::fig1_model(1.0, 0.6);
        let wo = washout(&model);
        let rep = stability_report(&model, &wo).unwrap();
        assert_abs_diff_eq!(rep.jacobian_abscissa, wo.lambda_at_one.max(-0.6), epsilon = 0.0);
        assert!(rep.jacobian_abscissa < 0.0);
        assert_eq!(rep.verdict, Verdict::GasClaimed);

        let model = fixtures::fig1_model(1.0, 0.2);
        let rep = stability_report(&model, &washout(&model)).unwrap();
        assert!(rep.jacobian_abscissa > 0.0);
        assert_eq!(rep.verdict, Verdict::Unstable);
        let eq = coexistence_equilibrium(&model).unwrap();
        let rep = stability_report(&model, &eq).unwrap();
        assert_eq!(rep.verdict, Verdict::GasClaimed);
        assert!(rep.a_abscissa.unwrap() < 0.0);
    }

    #[test]
    fn certificates_hold() {
        let model = fixtures::fig1_model(0.5, 0.2);
        let eq = coexistence_equilibrium(&model).unwrap();
        let certs = inequality_certificates(&model, Some(&eq)).unwrap();
        assert_eq!(certs.len(), 6);
        assert!(certs.iter().all(|c| c.slack() >= -1e-9), "{certs:?}");

        // eps -> 0: the winner's rate meets u
        let model = fixtures::fig1_model(1e-7, 0.2);
        let eq = coexistence_equilibrium(&model).unwrap();
        assert_abs_diff_eq!(model.kinetics().max_rate(eq.s) - 0.2, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn lambda_bounds_collapse_without_mutation() {
        let model = fixtures::fig1_model(0.0, 0.2);
        let certs = inequality_certificates(&model, None).unwrap();
        assert_abs_diff_eq!(certs[0].slack(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(certs[2].slack(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn grid_parsing() {
        let g = ParamGrid::parse("0:2:3,0.1:0.3:2").unwrap();
        assert_eq!(g.len(), 6);
        let p = g.points();
        assert_eq!(p[0], (0.0, 0.1));
        assert_eq!(p[1], (0.0, 0.3));
        assert_eq!(p[5], (2.0, 0.3));
        assert_eq!(ParamGrid::parse("1:1:1,0.2:0.2:1").unwrap().points(), vec![(1.0, 0.2)]);
        for bad in ["0:2:3", "2:0:3,0:1:2", "0:2:0,0:1:2", "-1:2:3,0:1:2", "a:2:3,0:1:2", "0:2,0:1:2"] {
            assert!(matches!(ParamGrid::parse(bad), Err(Error::InvalidField { .. })), "{bad}");
        }
        assert_eq!(ParamGrid::parse(DEFAULT_SWEEP_GRID).unwrap().len(), 21 * 25);
    }

    #[test]
    fn csv_headers() {
        let model = fixtures::fig1_model(1.0, 0.2);
        let a = analyze(&model).unwrap();
        let (eq, rep) = a.coexistence.unwrap();
        let mut buf = Vec::new();
        write_equilibrium_csv(&mut buf, 2, &[EquilibriumRow::new(&model, &eq, &rep)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epsilon,u,kind,s,x_1,x_2,lambda_at_one,abscissa\n"));
        let mut buf = Vec::new();
        write_uc_curve_csv(&mut buf, model.kinetics(), &[0.0, 1.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epsilon,u_c,lower_bound,upper_bound\n0,"));
        let uc0: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_abs_diff_eq!(uc0, 0.5, epsilon = 1e-13);
    }
}
