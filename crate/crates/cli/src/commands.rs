//! The four subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use kramers::convergence::Check;
use kramers::gibbs::{laplace_i_shifted, laplace_z};
use kramers::grid::uniform_x;
use kramers::transition::transition_grid;
use kramers::*;

use crate::config::Config;
use crate::output::{num, write_json, Table};

/// Per-step tolerances asserted by `simulate` and `limit`.
const MASS_TOL: f64 = 1e-10;
const CN_TOL: f64 = 1e-9;

/// A false report boolean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub block: String,
    pub name: String,
}

impl Failure {
    fn of(c: &Check) -> Self {
        Self {
            block: c.block.clone(),
            name: c.name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct RateRow {
    eps: f64,
    z: f64,
    laplace_z: f64,
    i_shifted: f64,
    laplace_i_shifted: f64,
    log_tau: f64,
    k_eps: f64,
    two_k_eps_over_k: f64,
    q_eps: f64,
    four_q_eps: f64,
}

#[derive(Serialize)]
struct RatesJson {
    profile: String,
    gap: f64,
    rows: Vec<RateRow>,
    limit: LimitRates,
}

#[derive(Serialize)]
struct LimitRates {
    k: f64,
    k_half: f64,
    q: f64,
}

pub fn rates(cfg: &Config, format: Format, out: Option<&Path>) -> Result<Vec<Failure>> {
    let profile = cfg.profile();
    let k = k_limit(&profile)?;
    let scale = TimeScale::critical();
    let rows: Vec<RateRow> = cfg
        .ladder
        .par_iter()
        .map(|&eps| -> Result<RateRow> {
            let g = GibbsMeasure::with_options(&profile, cfg.gap, eps, cfg.tol)?;
            let k_eps = g.transition_rate(&scale);
            let q_eps = TransitionProfile::new(&g, &transition_grid())?.second_moment()?;
            Ok(RateRow {
                eps,
                z: g.log_z().exp(),
                laplace_z: laplace_z(&profile, eps)?,
                i_shifted: g.log_i_shifted().exp(),
                laplace_i_shifted: laplace_i_shifted(&profile, eps)?,
                log_tau: scale.log_tau(eps),
                k_eps,
                two_k_eps_over_k: 2.0 * k_eps / k,
                q_eps,
                four_q_eps: 4.0 * q_eps,
            })
        })
        .collect::<Result<_>>()?;
    match format {
        Format::Json => {
            let doc = RatesJson {
                profile: profile.name().into(),
                gap: cfg.gap,
                rows,
                limit: LimitRates { k, k_half: 0.5 * k, q: 0.25 },
            };
            let text = serde_json::to_string_pretty(&doc)?;
            match out {
                Some(p) => fs::write(p, text + "\n").with_context(|| format!("cannot write {}", p.display()))?,
                None => println!("{text}"),
            }
        }
        Format::Csv => {
            let mut t = Table::new([
                "eps",
                "Z",
                "laplace_Z",
                "I_shifted",
                "laplace_I_shifted",
                "log_tau",
                "k_eps",
                "two_k_eps_over_k",
                "q_eps",
                "four_q_eps",
                "k",
            ]);
            for r in &rows {
                t.row(
                    [
                        r.eps,
                        r.z,
                        r.laplace_z,
                        r.i_shifted,
                        r.laplace_i_shifted,
                        r.log_tau,
                        r.k_eps,
                        r.two_k_eps_over_k,
                        r.q_eps,
                        r.four_q_eps,
                        k,
                    ]
                    .iter()
                    .map(|v| num(*v))
                    .collect(),
                );
            }
            let blank = String::new;
            t.row(vec![
                "limit".into(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                num(0.5 * k),
                num(1.0),
                num(0.25),
                num(1.0),
                num(k),
            ]);
            t.emit(out)?;
        }
    }
    Ok(Vec::new())
}

/// Sample times {0} ∪ {t ∈ times : t < T} ∪ {T}.
fn samples(times: &[f64], t_end: f64) -> Vec<f64> {
    let mut s = vec![0.0];
    s.extend(times.iter().copied().filter(|&t| t < t_end * (1.0 - 1e-12)));
    s.push(t_end);
    s
}

fn step_checks(drift: f64, cn: f64, failures: &mut Vec<Failure>, block: &str) {
    if !(drift <= MASS_TOL) {
        failures.push(Failure {
            block: block.into(),
            name: format!("mass drift per step {drift:e} exceeds {MASS_TOL:e}"),
        });
    }
    if !(cn <= CN_TOL) {
        failures.push(Failure {
            block: block.into(),
            name: format!("Crank-Nicolson energy residual {cn:e} exceeds {CN_TOL:e}"),
        });
    }
}

fn max_drift(mass: &[f64]) -> f64 {
    mass.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

pub fn simulate(cfg: &Config, eps: f64, out: Option<&Path>, snapshots: Option<&Path>) -> Result<Vec<Failure>> {
    let profile = cfg.profile();
    let grid = build_grid(cfg.nx, cfg.nxi, cfg.grading)?;
    let gibbs = GibbsMeasure::with_options(&profile, cfg.gap, eps, cfg.tol)?;
    let forms = assemble_with(&grid, &gibbs, &TimeScale::new(cfg.regime))?;
    let phi = TransitionProfile::new(&gibbs, grid.xi())?;
    let u0 = lift(&cfg.initial.traces(grid.x())?, &phi, &grid)?;
    let opts = SolveOptions::new(cfg.dt, cfg.t_end)
        .scheme(cfg.scheme)
        .solver(cfg.solver)
        .samples(&samples(&cfg.times, cfg.t_end));
    let traj = solve(&forms, &u0, &opts)?;

    let mut t = Table::new(["t", "mass", "b_eps", "a1_eps", "a2_eps"]);
    let i = &traj.initial;
    t.row(vec![num(0.0), num(i.mass), num(i.b), num(i.a1), num(i.a2)]);
    for s in &traj.steps {
        t.row(vec![num(s.t), num(s.mass), num(s.b), num(s.a1), num(s.a2)]);
    }
    t.emit(out)?;
    if let Some(p) = snapshots {
        let mut f = Table::new(["t", "x", "xi", "u"]);
        for s in &traj.snapshots {
            for (a, &x) in grid.x().iter().enumerate() {
                for (j, &xi) in grid.xi().iter().enumerate() {
                    f.row(vec![num(s.t), num(x), num(xi), num(s.field.get(a, j))]);
                }
            }
        }
        f.emit(Some(p))?;
    }

    let cn = energy_identity_residual(&traj)
        .iter()
        .zip(&traj.steps)
        .filter(|(_, s)| s.theta == 0.5)
        .map(|(r, _)| r.abs() / traj.initial.b.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let mut failures = Vec::new();
    step_checks(max_drift(&traj.mass()), cn, &mut failures, "simulate");
    Ok(failures)
}

pub fn limit(cfg: &Config, k: f64, u0: &InitialData, out: Option<&Path>) -> Result<Vec<Failure>> {
    let x = uniform_x(cfg.nx);
    let forms = assemble_limit_skewed(&x, k, cfg.gap)?;
    let opts = SolveOptions::new(cfg.dt, cfg.t_end)
        .scheme(cfg.scheme)
        .samples(&samples(&cfg.times, cfg.t_end));
    let traj = solve_limit(&forms, &u0.traces(&x)?, &opts)?;
    let mut t = Table::new(["t", "x", "u_minus", "u_plus"]);
    for s in &traj.snapshots {
        for (i, &xv) in x.iter().enumerate() {
            t.row(vec![num(s.t), num(xv), num(s.field.minus[i]), num(s.field.plus[i])]);
        }
    }
    t.emit(out)?;
    let cn = limit_energy_identity(&traj)
        .iter()
        .zip(&traj.steps)
        .filter(|(_, s)| s.theta == 0.5)
        .map(|(r, _)| r.abs() / traj.initial.b.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let mut failures = Vec::new();
    step_checks(max_drift(&traj.mass()), cn, &mut failures, "limit");
    Ok(failures)
}

#[derive(Serialize)]
struct BlockSummary {
    passed: bool,
    checks: usize,
    failed: usize,
}

#[derive(Serialize)]
struct Theorem1Block<'a> {
    passed: bool,
    checks: Vec<&'a Check>,
}

#[derive(Serialize)]
struct Theorem2Block<'a> {
    passed: bool,
    table: &'a Theorem2Table,
}

#[derive(Serialize)]
struct ConvergeReport<'a> {
    config: &'a Config,
    regime: Regime,
    passed: bool,
    failures: &'a [Failure],
    blocks: BTreeMap<String, BlockSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem1: Option<Theorem1Block<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem2: Option<Theorem2Block<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    limsup: Option<&'a LimsupReport>,
    study: &'a ConvergenceReport,
}

fn ladder_table(r: &ConvergenceReport) -> Table {
    let mut header: Vec<String> = [
        "eps",
        "t",
        "trace_error",
        "trace_gap",
        "b_eps",
        "a1_eps",
        "a2_eps",
        "b_error",
        "a_error",
        "a2_error",
        "flattening",
        "jensen_margin",
        "fiber_margin",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(r.dictionary.iter().map(|n| format!("pairing_error[{n}]")));
    header.extend(r.observables.iter().map(|n| format!("observable_error[{n}]")));
    let mut t = Table::new(header);
    for row in &r.rows {
        for s in &row.samples {
            let mut v = vec![
                row.eps,
                s.t,
                s.trace_error,
                s.trace_gap,
                s.b,
                s.a1,
                s.a2,
                s.b_error,
                s.a_error,
                s.a2_error,
                s.flattening,
                s.liminf.jensen,
                s.liminf.fiber,
            ];
            v.extend(&s.pairing_errors);
            v.extend(&s.observable_errors);
            t.row(v.into_iter().map(num).collect());
        }
    }
    t
}

fn reference_table(r: &ConvergenceReport) -> Table {
    let mut header: Vec<String> = ["t", "b", "a_grad", "a_react"].iter().map(|s| s.to_string()).collect();
    header.extend(r.dictionary.iter().map(|n| format!("pairing[{n}]")));
    header.extend(r.observables.iter().map(|n| format!("observable[{n}]")));
    let mut t = Table::new(header);
    for s in &r.reference_samples {
        let mut v = vec![s.t, s.b, s.a_grad, s.a_react];
        v.extend(&s.pairings);
        v.extend(&s.observables);
        t.row(v.into_iter().map(num).collect());
    }
    t
}

fn checks_table<'a>(checks: impl IntoIterator<Item = &'a Check>) -> Table {
    let mut t = Table::new(["block", "name", "passed", "values"]);
    for c in checks {
        let values: Vec<String> = c.values.iter().map(|v| num(*v)).collect();
        t.row(vec![c.block.clone(), c.name.clone(), c.passed.to_string(), values.join(";")]);
    }
    t
}

fn limsup_table(l: &LimsupReport) -> Table {
    let mut t = Table::new(["pair", "eps", "b_eps", "a1_eps", "a2_eps", "b", "a", "b_error", "a_error"]);
    for r in &l.rows {
        let mut v = vec![r.pair.to_string()];
        v.extend(
            [r.eps, r.b_eps, r.a1_eps, r.a2_eps, r.b, r.a, r.b_error, r.a_error]
                .into_iter()
                .map(num),
        );
        t.row(v);
    }
    t
}

fn theorem2_table(t2: &Theorem2Table) -> Table {
    let mut t = Table::new(["eps", "t", "b_error", "a_error", "a2_eps", "reaction"]);
    for (i, &eps) in t2.ladder.iter().enumerate() {
        for (j, &time) in t2.times.iter().enumerate() {
            t.row(
                [eps, time, t2.b_error[i][j], t2.a_error[i][j], t2.a2[i][j], t2.reaction[j]]
                    .into_iter()
                    .map(num)
                    .collect(),
            );
        }
    }
    t
}

pub fn converge(cfg: &Config, dir: &Path) -> Result<Vec<Failure>> {
    let study_cfg = cfg.study();
    let study = run_study(&study_cfg)?;
    let critical = cfg.regime == Regime::Critical;
    let limsup = if critical {
        Some(gamma_limsup_check(&study_cfg, &limsup_pairs())?)
    } else {
        None
    };
    let t2 = critical.then(|| Theorem2Table::from_report(&study));

    let all: Vec<&Check> = study
        .checks
        .iter()
        .chain(limsup.iter().flat_map(|l| &l.checks))
        .collect();
    let failures: Vec<Failure> = all.iter().filter(|c| !c.passed).map(|c| Failure::of(c)).collect();
    let mut blocks: BTreeMap<String, BlockSummary> = BTreeMap::new();
    for c in &all {
        let b = blocks.entry(c.block.clone()).or_insert(BlockSummary {
            passed: true,
            checks: 0,
            failed: 0,
        });
        b.checks += 1;
        if !c.passed {
            b.passed = false;
            b.failed += 1;
        }
    }
    let theorem1 = critical.then(|| {
        let checks = study.block("theorem1");
        Theorem1Block {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    });
    let theorem2 = t2.as_ref().map(|table| Theorem2Block {
        passed: table.checks.iter().all(|c| c.passed),
        table,
    });
    let report = ConvergeReport {
        config: cfg,
        regime: cfg.regime,
        passed: failures.is_empty(),
        failures: &failures,
        blocks,
        theorem1,
        theorem2,
        limsup: limsup.as_ref(),
        study: &study,
    };

    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_json(&dir.join("report.json"), &report)?;
    fs::write(dir.join("config.json"), cfg.to_json() + "\n")?;
    ladder_table(&study).emit(Some(&dir.join("ladder.csv")))?;
    reference_table(&study).emit(Some(&dir.join("reference.csv")))?;
    checks_table(all.iter().copied()).emit(Some(&dir.join("checks.csv")))?;
    if let Some(l) = &limsup {
        limsup_table(l).emit(Some(&dir.join("limsup.csv")))?;
    }
    if let Some(t) = &t2 {
        theorem2_table(t).emit(Some(&dir.join("theorem2.csv")))?;
    }
    Ok(failures)
}
