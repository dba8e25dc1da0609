//! Property battery. Every property reduces to a nonnegative violation
//! measure `value` that must satisfy `value <= tol`; the report prints the
//! slack `tol - value`.

use anyhow::bail;
use chemostat::asymptotics::{
    expansion_remainder, finite_difference_expansion, first_order_expansion, infinite_mutation_limit, FD_CENTER,
};
use chemostat::equilibria::{
    classify, coexistence_equilibrium, critical_dilution, inequality_certificates, lambda_at, stability_report,
    two_species_lambda, washout, Classification, ParamGrid, DEFAULT_SWEEP_GRID,
};
use chemostat::linalg::{dense_eigs_oracle, eig_sensitivity, perron_vector, top_eigenvalue, SymTridiag};
use chemostat::sim::{
    batch_mode_check, integrate, persistence_metrics, random_initial, run_ensemble, EnsembleConfig, IntegratorConfig,
};
use chemostat::{fixtures, ChemostatModel, Monod, MonodKinetics, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Common, Status};

type Measure = fn() -> chemostat::Result<f64>;

struct Property {
    name: &'static str,
    tol: f64,
    measure: Measure,
}

const PROPERTIES: &[Property] = &[
    Property { name: "oracle_two_species_eigenvalue", tol: 1e-12, measure: oracle_two_species },
    Property { name: "eigensolver_vs_dense_oracle", tol: 1e-10, measure: eigensolver_vs_dense },
    Property { name: "eigenvalue_sensitivity", tol: 1e-6, measure: sensitivity },
    Property { name: "critical_dilution_at_zero", tol: 1e-9, measure: uc_at_zero },
    Property { name: "critical_dilution_large_eps", tol: 1e-3, measure: uc_large_eps },
    Property { name: "critical_dilution_non_increasing", tol: 1e-12, measure: uc_monotone },
    Property { name: "steady_perron_root", tol: 1e-11, measure: steady_root },
    Property { name: "steady_mass_balance", tol: 1e-10, measure: steady_mass },
    Property { name: "inequality_certificates", tol: 1e-9, measure: certificates },
    Property { name: "expansion_vs_finite_differences", tol: 1e-3, measure: expansion_fd },
    Property { name: "expansion_balance", tol: 1e-14, measure: expansion_balance },
    Property { name: "expansion_remainder_ratio", tol: 0.0, measure: expansion_ratio },
    Property { name: "large_mutation_limit", tol: 1e-3, measure: large_mutation },
    Property { name: "twenty_strain_convergence", tol: 1e-6, measure: fig2_distance },
    Property { name: "twenty_strain_mass_balance", tol: 1e-8, measure: fig2_mass },
    Property { name: "batch_mode_limit", tol: 1e-6, measure: batch_mode },
    Property { name: "exclusion_without_mutation", tol: 1e-6, measure: cep_distance },
    Property { name: "exclusion_loser_floor", tol: 1e-8, measure: cep_loser },
    Property { name: "persistence_floor_log10", tol: 12.0, measure: persistence },
    Property { name: "stability_dichotomy_violations", tol: 0.0, measure: dichotomy },
];

pub fn property_names() -> Vec<&'static str> {
    PROPERTIES.iter().map(|p| p.name).collect()
}

pub fn run(_c: &Common, corrupt: Option<&str>) -> anyhow::Result<Status> {
    if let Some(name) = corrupt {
        if !PROPERTIES.iter().any(|p| p.name == name) {
            bail!("unknown property `{name}`; known: {}", property_names().join(", "));
        }
    }
    let mut failures = 0;
    for p in PROPERTIES {
        let tol = if corrupt == Some(p.name) { -1.0 } else { p.tol };
        let (status, value, slack) = match (p.measure)() {
            Ok(v) if v <= tol => ("PASS", v.to_string(), (tol - v).to_string()),
            Ok(v) => ("FAIL", v.to_string(), (tol - v).to_string()),
            Err(e) => ("FAIL", format!("error: {e}"), String::from("nan")),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("{status} property={} value={value} tol={tol} slack={slack}", p.name);
    }
    println!("{} properties, {failures} failed", PROPERTIES.len());
    Ok(if failures == 0 { Status::Success } else { Status::PropertyFailure })
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

fn random_quasi_positive(rng: &mut ChaCha8Rng) -> SymTridiag {
    let n = rng.random_range(2..=8);
    let diag = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let off = (0..n - 1).map(|_| rng.random_range(0.05..2.0)).collect();
    SymTridiag::new(diag, off).expect("consistent lengths")
}

fn oracle_two_species() -> chemostat::Result<f64> {
    let k = fixtures::fig1_kinetics();
    let mut worst: f64 = 0.0;
    for eps in linspace(0.0, 2.0, 50) {
        let model = ChemostatModel::new(k.clone(), eps, 0.2)?;
        for s in linspace(0.0, 1.0, 50) {
            let closed = two_species_lambda(&k, s, 0.2, eps)?;
            worst = worst.max((model.assemble_b(s).top_eigenvalue() - closed).abs());
        }
    }
    Ok(worst)
}

fn eigensolver_vs_dense() -> chemostat::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let m = random_quasi_positive(&mut rng);
        let n = m.n();
        let oracle = dense_eigs_oracle(&m.to_dense())?;
        let lam = m.top_eigenvalue();
        worst = worst.max((lam - oracle.values[n - 1]).abs());
        let v = perron_vector(&m, lam)?.vector;
        let col = oracle.vectors.column(n - 1);
        let sign = col.sum().signum();
        for i in 0..n {
            worst = worst.max((v[i] - sign * col[i]).abs());
        }
    }
    Ok(worst)
}

fn sensitivity() -> chemostat::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tight = |m: &SymTridiag| top_eigenvalue(m, 1e-15 * (1.0 + m.norm_inf()));
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = random_quasi_positive(&mut rng);
        let sens = eig_sensitivity(&m)?;
        for i in 0..m.n() {
            let (mut p, mut q) = (m.clone(), m.clone());
            p.diag_mut()[i] += h;
            q.diag_mut()[i] -= h;
            let fd = (tight(&p) - tight(&q)) / (2.0 * h);
            worst = worst.max((fd - sens[(i, i)]).abs() / sens.norm());
        }
    }
    Ok(worst)
}

fn uc_at_zero() -> chemostat::Result<f64> {
    Ok((critical_dilution(&fixtures::fig1_kinetics(), 0.0)? - 0.5).abs())
}

fn uc_large_eps() -> chemostat::Result<f64> {
    let k = fixtures::fig1_kinetics();
    Ok((critical_dilution(&k, 1e4)? - k.mean_rate(1.0)).abs())
}

fn uc_monotone() -> chemostat::Result<f64> {
    let k = fixtures::fig1_kinetics();
    let v: Vec<f64> = linspace(0.0, 5.0, 100).map(|e| critical_dilution(&k, e)).collect::<Result<_, _>>()?;
    Ok(v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max))
}

fn coexistence_points() -> chemostat::Result<Vec<(ChemostatModel, chemostat::equilibria::Equilibrium)>> {
    let mut out = Vec::new();
    for (k, eps_max) in [(fixtures::fig1_kinetics(), 2.0), (fixtures::fig2_kinetics(), 3.0)] {
        for eps in linspace(0.1 * eps_max, eps_max, 5) {
            let uc = critical_dilution(&k, eps)?;
            for frac in linspace(0.05, 0.95, 5) {
                let model = ChemostatModel::new(k.clone(), eps, frac * uc)?;
                if classify(&model)? == Classification::Coexistence {
                    let eq = coexistence_equilibrium(&model)?;
                    out.push((model, eq));
                }
            }
        }
    }
    Ok(out)
}

fn steady_root() -> chemostat::Result<f64> {
    Ok(coexistence_points()?.iter().map(|(m, e)| lambda_at(m, e.s).abs()).fold(0.0, f64::max))
}

fn steady_mass() -> chemostat::Result<f64> {
    Ok(coexistence_points()?
        .iter()
        .map(|(_, e)| (e.x.iter().sum::<f64>() + e.s - 1.0).abs())
        .fold(0.0, f64::max))
}

fn certificates() -> chemostat::Result<f64> {
    let mut worst: f64 = 0.0;
    for (m, e) in coexistence_points()? {
        for c in inequality_certificates(&m, Some(&e))? {
            worst = worst.max(-c.slack());
        }
    }
    Ok(worst)
}

fn expansion_fd() -> chemostat::Result<f64> {
    let k = fixtures::fig1_kinetics();
    let e = first_order_expansion(&k, 0.2)?;
    let fd = finite_difference_expansion(&k, 0.2, FD_CENTER)?;
    let mut rel = ((e.sigma - fd.sigma) / e.sigma).abs();
    for (a, b) in e.xi.iter().zip(&fd.xi) {
        rel = rel.max(((a - b) / a).abs());
    }
    Ok(rel)
}

fn expansion_balance() -> chemostat::Result<f64> {
    let mut worst: f64 = 0.0;
    for (k, u) in [(fixtures::fig1_kinetics(), 0.2), (fixtures::fig2_kinetics(), 5.0)] {
        let e = first_order_expansion(&k, u)?;
        worst = worst.max((e.sigma + e.xi.iter().sum::<f64>()).abs());
    }
    Ok(worst)
}

/// Distance of the consecutive remainder ratios from `[5, 20]`.
fn expansion_ratio() -> chemostat::Result<f64> {
    let k = fixtures::fig1_kinetics();
    let e = first_order_expansion(&k, 0.2)?;
    let r: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| expansion_remainder(&k, &e, eps))
        .collect::<Result<_, _>>()?;
    Ok([r[0] / r[1], r[1] / r[2]].iter().map(|q| (5.0 - q).max(q - 20.0).max(0.0)).fold(0.0, f64::max))
}

fn large_mutation() -> chemostat::Result<f64> {
    let model = fixtures::fig1_model(1e4, 0.2);
    let limit = infinite_mutation_limit(&model)?;
    Ok(coexistence_equilibrium(&model)?.state().sup_distance(&limit))
}

fn fig2_runs() -> chemostat::Result<Vec<chemostat::sim::EnsembleMember>> {
    let model = fixtures::fig2_model();
    let target = coexistence_equilibrium(&model)?.state();
    let mut integrator = IntegratorConfig::new(1e-11);
    integrator.sample_interval = 0.05;
    let cfg = EnsembleConfig { seed: 2024, members: 6, horizon: 200.0, integrator, convergence_tol: 1e-6, tail_fraction: 0.25 };
    run_ensemble(&model, &target, &cfg)
}

fn fig2_distance() -> chemostat::Result<f64> {
    Ok(fig2_runs()?.iter().map(|r| if r.converged { r.final_distance } else { f64::INFINITY }).fold(0.0, f64::max))
}

fn fig2_mass() -> chemostat::Result<f64> {
    Ok(fig2_runs()?.iter().map(|r| r.max_mass_error).fold(0.0, f64::max))
}

fn persistence() -> chemostat::Result<f64> {
    let floor = fig2_runs()?.iter().flat_map(|r| r.floors.clone()).fold(f64::INFINITY, f64::min);
    Ok(if floor > 0.0 { -floor.log10() } else { f64::INFINITY })
}

fn batch_mode() -> chemostat::Result<f64> {
    let mut worst: f64 = 0.0;
    for n in [2usize, 3, 5] {
        let species = (0..n).map(|i| Monod::new(1.0 + 0.3 * i as f64, 0.4 + 0.25 * i as f64)).collect();
        let model = ChemostatModel::new(MonodKinetics::new(species)?, 1.0, 0.0)?;
        for idx in 0..3 {
            let r = batch_mode_check(&model, &random_initial(n, 9, idx)?, 200.0, 1e-11)?;
            worst = worst.max(r.distance);
        }
    }
    Ok(worst)
}

fn cep_run() -> chemostat::Result<chemostat::sim::Trajectory> {
    integrate(&fixtures::fig1_model(0.0, 0.2), &State::new(vec![0.1, 0.1], 0.8)?, 1000.0, 1e-11)
}

fn cep_distance() -> chemostat::Result<f64> {
    Ok(cep_run()?.final_state().sup_distance(&State { x: vec![0.0, 0.8], s: 0.2 }))
}

fn cep_loser() -> chemostat::Result<f64> {
    Ok(persistence_metrics(&cep_run()?, 0.25)?.per_species_floor[0])
}

fn dichotomy() -> chemostat::Result<f64> {
    let k = fixtures::fig1_kinetics();
    let grid = ParamGrid::parse(DEFAULT_SWEEP_GRID)?;
    let mut violations = 0;
    for (eps, u) in grid.points() {
        if eps == 0.0 || u == 0.0 {
            continue;
        }
        let model = ChemostatModel::new(k.clone(), eps, u)?;
        let w_ab = stability_report(&model, &washout(&model))?.jacobian_abscissa;
        match classify(&model)? {
            Classification::Coexistence => {
                let j_ab = stability_report(&model, &coexistence_equilibrium(&model)?)?.jacobian_abscissa;
                if !(j_ab < 0.0 && w_ab > 0.0) {
                    violations += 1;
                }
            }
            _ if u > critical_dilution(&k, eps)? + 1e-3 && !(w_ab < 0.0) => violations += 1,
            _ => {}
        }
    }
    Ok(violations as f64)
}
