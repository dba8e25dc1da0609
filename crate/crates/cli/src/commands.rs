use anyhow::{bail, Context};
use chemostat::asymptotics::{finite_difference_expansion, first_order_expansion, winner_index, FD_CENTER};
use chemostat::equilibria::{
    analyze, classify, coexistence_equilibrium, critical_dilution, stability_report, washout,
    write_equilibrium_csv, write_uc_curve_csv, Classification, EquilibriumRow, Verdict, DEFAULT_SWEEP_GRID,
};
use chemostat::sim::{
    integrate_until_settled, integrate_with, random_initial, run_ensemble, write_ensemble_csv, write_trajectory_csv,
    EnsembleConfig, IntegratorConfig,
};
use chemostat::{ChemostatModel, MonodKinetics, State};
use rayon::prelude::*;

use crate::output::{create, fmt_opt, out_dir, write_table, write_text};
use crate::{parse_initial, Common, Fixture, Status};

const UC_GRID: &str = "0:2:101,0:0:1";
const FIG1_GRID: &str = "0:2:201,0:0:1";
const SETTLE_TOL: f64 = 1e-8;
const SETTLE_CHUNK: f64 = 50.0;
const SETTLE_CAP: f64 = 1e5;

pub fn steady(c: &Common) -> anyhow::Result<Status> {
    let model = c.resolve_model(Fixture::Fig1)?;
    if !(model.epsilon() > 0.0 && model.u() > 0.0) {
        bail!("steady needs eps > 0 and u > 0; use `sweep` for the eps = 0 and u = 0 regimes");
    }
    let a = analyze(&model)?;
    let mut rows = vec![EquilibriumRow::new(&model, &a.washout.0, &a.washout.1)];
    let mut marginal = a.classification == Classification::Critical || a.washout.1.verdict == Verdict::Marginal;
    println!("classification: {}", a.classification.as_str());
    println!("lambda(B(1)) = {:e}", a.washout.0.lambda_at_one);
    println!("washout: verdict {}, abscissa {:e}", a.washout.1.verdict.as_str(), a.washout.1.jacobian_abscissa);
    if let Some((eq, rep)) = &a.coexistence {
        marginal |= rep.verdict == Verdict::Marginal;
        println!(
            "coexistence: s = {}, x = {:?}, verdict {}, abscissa {:e}",
            eq.s,
            eq.x,
            rep.verdict.as_str(),
            rep.jacobian_abscissa
        );
        rows.push(EquilibriumRow::new(&model, eq, rep));
    }
    let dir = out_dir(&c.out)?;
    write_equilibrium_csv(create(&dir, "equilibrium.csv")?, model.n(), &rows)?;
    Ok(if marginal { Status::Marginal } else { Status::Success })
}

fn eps_axis(c: &Common, default: &str) -> anyhow::Result<Vec<f64>> {
    let grid = c.grid_or(default)?;
    let mut eps: Vec<f64> = grid.points().into_iter().map(|p| p.0).collect();
    eps.dedup();
    Ok(eps)
}

pub fn uc(c: &Common) -> anyhow::Result<Status> {
    let model = c.resolve_model(Fixture::Fig1)?;
    let eps = eps_axis(c, UC_GRID)?;
    let dir = out_dir(&c.out)?;
    write_uc_curve_csv(create(&dir, "uc_curve.csv")?, model.kinetics(), &eps)?;
    if let (Some(first), Some(last)) = (eps.first(), eps.last()) {
        println!("u_c({first}) = {}", critical_dilution(model.kinetics(), *first)?);
        println!("u_c({last}) = {}", critical_dilution(model.kinetics(), *last)?);
    }
    if c.gnuplot {
        write_text(&dir, "uc.gp", UC_GNUPLOT)?;
    }
    Ok(Status::Success)
}

/// Coexistence point, or the winner's single-strain state at `eps = 0`, or the washout.
fn limit_point(kinetics: &MonodKinetics, eps: f64, u: f64) -> anyhow::Result<State> {
    let n = kinetics.n();
    let wash = State { x: vec![0.0; n], s: 1.0 };
    if eps == 0.0 {
        return Ok(match first_order_expansion(kinetics, u) {
            Ok(e) => e.base_point,
            Err(chemostat::Error::WashoutRegime) => wash,
            Err(e) => return Err(e.into()),
        });
    }
    let model = ChemostatModel::new(kinetics.clone(), eps, u)?;
    Ok(match classify(&model)? {
        Classification::Coexistence => coexistence_equilibrium(&model)?.state(),
        _ => wash,
    })
}

pub fn fig1(c: &Common) -> anyhow::Result<Status> {
    let model = c.resolve_model(Fixture::Fig1)?;
    if model.n() != 2 {
        bail!("fig1 draws two strains; the model has {}", model.n());
    }
    let u = model.u();
    let eps = eps_axis(c, FIG1_GRID)?;
    let points: Vec<State> = eps
        .iter()
        .map(|&e| limit_point(model.kinetics(), e, u))
        .collect::<anyhow::Result<_>>()?;
    let dir = out_dir(&c.out)?;
    let column = |f: &dyn Fn(&State) -> f64| -> Vec<Vec<f64>> {
        eps.iter().zip(&points).map(|(e, p)| vec![*e, f(p)]).collect()
    };
    write_table(&dir, "fig1_s.csv", &["epsilon", "s"], &column(&|p| p.s))?;
    write_table(&dir, "fig1_x1.csv", &["epsilon", "x_1"], &column(&|p| p.x[0]))?;
    write_table(&dir, "fig1_x2.csv", &["epsilon", "x_2"], &column(&|p| p.x[1]))?;
    write_uc_curve_csv(create(&dir, "uc_curve.csv")?, model.kinetics(), &eps)?;
    if c.gnuplot {
        write_text(&dir, "fig1.gp", FIG1_GNUPLOT)?;
    }
    if let (Some(p0), Some(p1)) = (points.first(), points.last()) {
        println!("eps = {}: s = {}, x = {:?}", eps[0], p0.s, p0.x);
        println!("eps = {}: s = {}, x = {:?}", eps[eps.len() - 1], p1.s, p1.x);
    }
    Ok(Status::Success)
}

pub fn fig2(c: &Common) -> anyhow::Result<Status> {
    let model = c.resolve_model(Fixture::Fig2)?;
    let tol = c.tol_or(1e-11)?;
    let horizon = c.horizon()?.unwrap_or(200.0);
    let eq = coexistence_equilibrium(&model).context("fig2 needs a coexistence steady state")?;
    let initial = random_initial(model.n(), c.seed, 0)?;
    let mut cfg = IntegratorConfig::new(tol);
    cfg.sample_interval = horizon / 2000.0;
    let tr = integrate_with(&model, &initial, horizon, cfg)?;

    let dir = out_dir(&c.out)?;
    write_trajectory_csv(create(&dir, "fig2_trajectory.csv")?, &tr)?;
    let err_inf = |st: &State| st.x.iter().zip(&eq.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let errors: Vec<Vec<f64>> = tr.times.iter().zip(&tr.states).map(|(t, st)| vec![*t, err_inf(st)]).collect();
    write_table(&dir, "fig2_error.csv", &["t", "error_inf"], &errors)?;
    let profile: Vec<Vec<f64>> = (0..model.n())
        .map(|i| vec![(i + 1) as f64, tr.final_state().x[i], eq.x[i]])
        .collect();
    write_table(&dir, "fig2_profile.csv", &["species", "x_final", "x_equilibrium"], &profile)?;
    if c.gnuplot {
        write_text(&dir, "fig2.gp", FIG2_GNUPLOT)?;
    }

    let final_err = err_inf(tr.final_state());
    let min_final = tr.final_state().x.iter().copied().fold(f64::INFINITY, f64::min);
    println!("final error = {final_err:e}, max mass-balance error = {:e}, min final component = {min_final:e}", tr.max_mass_error);
    let ok = final_err <= 1e-6 && tr.max_mass_error <= 1e-8 && min_final > 0.0;
    if !ok {
        eprintln!("fig2 checks failed (error <= 1e-6, mass balance <= 1e-8, positive profile)");
    }
    Ok(if ok { Status::Success } else { Status::PropertyFailure })
}

/// Expected long-time state, when one state attracts every initial condition.
fn attractor(model: &ChemostatModel) -> anyhow::Result<Option<State>> {
    if model.u() == 0.0 {
        return Ok(None);
    }
    Ok(Some(limit_point(model.kinetics(), model.epsilon(), model.u())?))
}

pub fn simulate(c: &Common, initial: Option<&str>, ensemble: Option<usize>) -> anyhow::Result<Status> {
    let model = c.resolve_model(Fixture::Fig1)?;
    let tol = c.tol_or(1e-10)?;
    let dir = out_dir(&c.out)?;
    let target = attractor(&model)?;

    if let Some(members) = ensemble {
        let target = target.context("ensembles need u > 0 (the batch limit depends on each initial state)")?;
        let mut integrator = IntegratorConfig::new(tol);
        integrator.sample_interval = 1.0;
        let cfg = EnsembleConfig {
            seed: c.seed,
            members,
            horizon: c.horizon()?.unwrap_or(1000.0),
            integrator,
            convergence_tol: 1e-6,
            tail_fraction: 0.25,
        };
        let runs = run_ensemble(&model, &target, &cfg)?;
        write_ensemble_csv(create(&dir, "ensemble.csv")?, &runs)?;
        let conv = runs.iter().filter(|r| r.converged).count();
        println!("{conv} of {members} members converged to within 1e-6");
        return Ok(Status::Success);
    }

    let init = match initial {
        Some(text) => parse_initial(text, model.n())?,
        None => random_initial(model.n(), c.seed, 0)?,
    };
    let tr = match c.horizon()? {
        Some(h) => {
            let mut cfg = IntegratorConfig::new(tol);
            cfg.sample_interval = h / 2000.0;
            integrate_with(&model, &init, h, cfg)?
        }
        None => {
            let mut cfg = IntegratorConfig::new(tol);
            cfg.sample_interval = 1.0;
            let (tr, settled) = integrate_until_settled(&model, &init, cfg, SETTLE_TOL, SETTLE_CHUNK, SETTLE_CAP)?;
            if !settled {
                log::warn!("not settled by t = {SETTLE_CAP}");
            }
            tr
        }
    };
    write_trajectory_csv(create(&dir, "trajectory.csv")?, &tr)?;
    let end = tr.final_state();
    println!("t = {}: x = {:?}, s = {}", tr.final_time(), end.x, end.s);
    println!("max mass-balance error = {:e}", tr.max_mass_error);
    let target = match target {
        Some(t) => Some(t),
        None if model.epsilon() > 0.0 => {
            let b0 = init.total();
            Some(State { x: vec![b0 / model.n() as f64; model.n()], s: 0.0 })
        }
        None => None,
    };
    if let Some(t) = target {
        println!("distance to predicted limit = {:e}", end.sup_distance(&t));
    }
    Ok(Status::Success)
}

struct SweepRow {
    epsilon: f64,
    u: f64,
    regime: &'static str,
    kind: &'static str,
    lambda_at_one: Option<f64>,
    jacobian_abscissa: Option<f64>,
    washout_abscissa: Option<f64>,
    verdict: &'static str,
    empirical_gas: Option<bool>,
    max_final_dist: Option<f64>,
    error: String,
}

struct SweepSettings {
    ensemble: usize,
    seed: u64,
    tol: f64,
    horizon: Option<f64>,
}

/// Horizon long enough for 30 e-folds at the slowest known rate, at least 1000.
fn settle_horizon(rate: f64) -> f64 {
    (30.0 / rate).max(1000.0)
}

fn empirical(model: &ChemostatModel, target: &State, rate: f64, s: &SweepSettings) -> chemostat::Result<(bool, f64)> {
    let mut integrator = IntegratorConfig::new(s.tol);
    integrator.sample_interval = 1.0;
    let cfg = EnsembleConfig {
        seed: s.seed,
        members: s.ensemble,
        horizon: s.horizon.unwrap_or_else(|| settle_horizon(rate)),
        integrator,
        convergence_tol: 1e-6,
        tail_fraction: 0.25,
    };
    let runs = run_ensemble(model, target, &cfg)?;
    let dist = runs.iter().map(|r| r.final_distance).fold(0.0, f64::max);
    Ok((runs.iter().all(|r| r.converged), dist))
}

fn sweep_point(kinetics: &MonodKinetics, eps: f64, u: f64, s: &SweepSettings) -> SweepRow {
    let mut row = SweepRow {
        epsilon: eps,
        u,
        regime: "",
        kind: "",
        lambda_at_one: None,
        jacobian_abscissa: None,
        washout_abscissa: None,
        verdict: "",
        empirical_gas: None,
        max_final_dist: None,
        error: String::new(),
    };
    if let Err(e) = fill_sweep_row(kinetics, s, &mut row) {
        row.error = e.to_string();
    }
    row
}

fn fill_sweep_row(kinetics: &MonodKinetics, s: &SweepSettings, row: &mut SweepRow) -> chemostat::Result<()> {
    let model = ChemostatModel::new(kinetics.clone(), row.epsilon, row.u)?;
    let wo = washout(&model);
    row.lambda_at_one = Some(wo.lambda_at_one);
    let wo_rep = stability_report(&model, &wo)?;
    row.washout_abscissa = Some(wo_rep.jacobian_abscissa);
    let mut target = None;
    let mut rate = row.u;
    if row.u == 0.0 {
        row.regime = "batch";
        row.kind = "batch";
    } else if row.epsilon == 0.0 {
        row.regime = "cep";
        match winner_index(kinetics, row.u) {
            Ok(_) => {
                row.kind = "single-strain";
                row.verdict = Verdict::GasClaimed.as_str();
                target = Some(first_order_expansion(kinetics, row.u)?.base_point);
            }
            Err(chemostat::Error::WashoutRegime) => {
                row.kind = "washout";
                row.verdict = wo_rep.verdict.as_str();
                target = Some(wo.state());
            }
            Err(e) => return Err(e),
        }
    } else {
        match classify(&model)? {
            Classification::Coexistence => {
                row.regime = "coexistence";
                row.kind = "coexistence";
                let eq = coexistence_equilibrium(&model)?;
                let rep = stability_report(&model, &eq)?;
                row.jacobian_abscissa = Some(rep.jacobian_abscissa);
                rate = rate.min(-rep.jacobian_abscissa);
                row.verdict = rep.verdict.as_str();
                target = Some(eq.state());
            }
            Classification::Critical => {
                row.regime = "critical";
                row.kind = "washout";
                row.verdict = Verdict::Marginal.as_str();
            }
            Classification::WashoutOnly => {
                row.regime = "washout";
                row.kind = "washout";
                row.verdict = wo_rep.verdict.as_str();
                target = Some(wo.state());
            }
        }
    }
    if let (Some(t), true) = (target, s.ensemble > 0) {
        let (gas, dist) = empirical(&model, &t, rate, s)?;
        row.empirical_gas = Some(gas);
        row.max_final_dist = Some(dist);
    }
    Ok(())
}

pub fn sweep(c: &Common, ensemble: usize) -> anyhow::Result<Status> {
    let model = c.resolve_model(Fixture::Fig1)?;
    let grid = c.grid_or(DEFAULT_SWEEP_GRID)?;
    let settings = SweepSettings {
        ensemble,
        seed: c.seed,
        tol: c.tol_or(1e-10)?,
        horizon: c.horizon()?,
    };
    let rows: Vec<SweepRow> = grid
        .points()
        .into_par_iter()
        .map(|(e, u)| sweep_point(model.kinetics(), e, u, &settings))
        .collect();
    let dir = out_dir(&c.out)?;
    let mut w = csv::Writer::from_writer(create(&dir, "sweep.csv")?);
    w.write_record([
        "epsilon",
        "u",
        "regime",
        "kind",
        "lambda_at_one",
        "jacobian_abscissa",
        "washout_abscissa",
        "verdict",
        "empirical_gas",
        "max_final_dist",
        "error",
    ])?;
    for r in &rows {
        w.write_record([
            r.epsilon.to_string(),
            r.u.to_string(),
            r.regime.to_string(),
            r.kind.to_string(),
            fmt_opt(r.lambda_at_one),
            fmt_opt(r.jacobian_abscissa),
            fmt_opt(r.washout_abscissa),
            r.verdict.to_string(),
            r.empirical_gas.map_or(String::new(), |g| g.to_string()),
            fmt_opt(r.max_final_dist),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    let count = |name: &str| rows.iter().filter(|r| r.regime == name).count();
    println!(
        "{} points: {} coexistence, {} washout, {} critical, {} cep, {} batch, {} errors",
        rows.len(),
        count("coexistence"),
        count("washout"),
        count("critical"),
        count("cep"),
        count("batch"),
        rows.iter().filter(|r| !r.error.is_empty()).count()
    );
    Ok(Status::Success)
}

pub fn expand(c: &Common) -> anyhow::Result<Status> {
    let model = c.resolve_model(Fixture::Fig1)?;
    let us: Vec<f64> = match &c.grid {
        Some(_) => {
            let mut u: Vec<f64> = c.grid_or("")?.points().into_iter().map(|p| p.1).collect();
            u.sort_by(f64::total_cmp);
            u.dedup();
            u
        }
        None => vec![model.u()],
    };
    let mut rows = Vec::with_capacity(us.len());
    for u in us {
        let e = first_order_expansion(model.kinetics(), u).with_context(|| format!("expansion at u = {u}"))?;
        let fd = finite_difference_expansion(model.kinetics(), u, FD_CENTER)?;
        println!("u = {u}: winner {}, sigma = {}, xi = {:?}", e.winner + 1, e.sigma, e.xi);
        rows.push((e, fd));
    }
    let dir = out_dir(&c.out)?;
    chemostat::asymptotics::write_expansion_csv(create(&dir, "expansion.csv")?, &rows)?;
    Ok(Status::Success)
}

const UC_GNUPLOT: &str = "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'epsilon'\n\
plot 'uc_curve.csv' using 1:2 with lines, '' using 1:3 with lines dt 2, '' using 1:4 with lines dt 2\n";

const FIG1_GNUPLOT: &str = "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'epsilon'\n\
plot 'fig1_s.csv' using 1:2 with lines, 'fig1_x1.csv' using 1:2 with lines, 'fig1_x2.csv' using 1:2 with lines\n";

const FIG2_GNUPLOT: &str = "set datafile separator ','\nset key autotitle columnhead\nset multiplot layout 1,2\n\
set logscale y\nset xlabel 't'\nplot 'fig2_error.csv' using 1:2 with lines\nunset logscale y\n\
set xlabel 'species'\nplot 'fig2_profile.csv' using 1:2 with linespoints, '' using 1:3 with points\nunset multiplot\n";
