//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero unless the set of failing criteria is exactly the documented one.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kramers::convergence::{decreasing, liminf_margins, LiminfMargins, LIMINF_SLACK};
use kramers::gibbs::{laplace_i_shifted, laplace_z, log_partition, DEFAULT_TOL};
use kramers::grid::{uniform_x, xi_nodes};
use kramers::*;

const LADDER: [f64; 3] = [0.2, 0.1, 0.05];

/// Criterion 6 predicts the homogeneous trace gap as e^{−2k_ε t}. The lifted
/// constant data relax along the slowest ξ-mode, whose rate is
/// a_ε(φ_ε)/b_ε(φ_ε) = k_ε/q_ε ≈ 4k_ε, so the prediction is off by e^{−2k_ε t}
/// and this criterion fails. The corrected comparison is checked separately.
const EXPECTED_FAILURES: [usize; 1] = [6];

struct Outcome {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn report(o: &Outcome) {
    println!(
        "{} [{:>2}] {} ({:.2} s)\n         {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.id,
        o.title,
        o.elapsed.as_secs_f64(),
        o.detail
    );
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] < w[0])
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn quartic() -> EnthalpyProfile {
    EnthalpyProfile::quartic()
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let k = k_limit(&quartic()).unwrap();
    let ratio: Vec<f64> = LADDER.iter().map(|&e| 2.0 * k_eps(&quartic(), e).unwrap() / k).collect();
    let dist: Vec<f64> = ratio.iter().map(|r| (r - 1.0).abs()).collect();
    let elapsed = t0.elapsed();
    let closed = (k - 4.0 * 2f64.sqrt() / std::f64::consts::PI).abs() <= 1e-12 * k;
    Outcome {
        id: 1,
        title: "rate-constant asymptotics 2k_eps/k -> 1",
        passed: closed && strictly_decreasing(&dist) && dist[2] < 0.25 && elapsed.as_secs_f64() < 5.0,
        detail: format!("k = {k:.12}, 2k_eps/k = {}, |2k_0.05/k - 1| = {:.4} (< 0.25, < 5 s)", fmt(&ratio), dist[2]),
        elapsed,
    }
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let nodes = xi_nodes(4001, Grading::three_zone()).unwrap();
    let mut rel = Vec::new();
    for &e in &LADDER {
        let (_, min) = common::transition_program(&common::conductances(&quartic(), e, &nodes));
        rel.push(common::relative(k_eps(&quartic(), e).unwrap(), min));
    }
    let elapsed = t0.elapsed();
    Outcome {
        id: 2,
        title: "closed-form k_eps equals the discrete transition-program minimum",
        passed: rel.iter().all(|r| *r < 1e-6) && elapsed.as_secs_f64() < 10.0,
        detail: format!("relative gap on 4001 graded nodes = {} (< 1e-6, < 10 s)", fmt(&rel)),
        elapsed,
    }
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let dist: Vec<f64> = LADDER.iter().map(|&e| (4.0 * q_eps(&quartic(), e).unwrap() - 1.0).abs()).collect();
    Outcome {
        id: 3,
        title: "q_eps -> 1/4",
        passed: strictly_decreasing(&dist) && dist[2] < 0.3,
        detail: format!("|4q_eps - 1| = {} (strictly decreasing, < 0.3)", fmt(&dist)),
        elapsed: t0.elapsed(),
    }
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let h = quartic();
    let (mut ez, mut ei, mut oracle) = (Vec::new(), Vec::new(), 0.0f64);
    for &e in &LADDER {
        let z = log_partition(&h, e, DEFAULT_TOL).unwrap().exp();
        let i = GibbsMeasure::new(&h, e).unwrap().log_i_shifted().exp();
        oracle = oracle.max(common::relative(z, common::z(&h, e))).max(common::relative(i, common::i_shifted(&h, e)));
        ez.push(common::relative(laplace_z(&h, e).unwrap(), z));
        ei.push(common::relative(laplace_i_shifted(&h, e).unwrap(), i));
    }
    Outcome {
        id: 4,
        title: "Laplace consistency of Z_eps and I_eps",
        passed: strictly_decreasing(&ez) && strictly_decreasing(&ei) && ez[2] < 0.25 && ei[2] < 0.25 && oracle < 1e-10,
        detail: format!(
            "Z rel. error = {}, I rel. error = {} (strictly decreasing, < 0.25); quadrature vs Simpson {oracle:.1e}",
            fmt(&ez),
            fmt(&ei)
        ),
        elapsed: t0.elapsed(),
    }
}

/// A stored ε-state with the rate for its fiber bound.
struct Stored {
    label: String,
    margins: LiminfMargins,
}

fn margins_of(forms: &FormMatrices, traj: &Trajectory, label: &str) -> Vec<Stored> {
    let k = kramers::k_eps(&quartic(), forms.eps).unwrap();
    traj.snapshots
        .iter()
        .map(|s| Stored {
            label: format!("{label} t = {}", s.t),
            margins: liminf_margins(forms, &s.field, k).unwrap(),
        })
        .collect()
}

fn criterion_5(stored: &mut Vec<Stored>) -> Outcome {
    let t0 = Instant::now();
    let cfg = StudyConfig::default();
    let grid = build_grid(cfg.nx, cfg.nxi, cfg.grading).unwrap();
    let traces0 = cfg.initial.traces(grid.x()).unwrap();
    let (mut drift, mut cn, mut stationary, mut kernel) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &e in &LADDER {
        let forms = assemble(&grid, &quartic(), e).unwrap();
        let phi = TransitionProfile::new(&GibbsMeasure::new(&quartic(), e).unwrap(), grid.xi()).unwrap();
        let u0 = lift(&traces0, &phi, &grid).unwrap();
        let opts = SolveOptions::new(cfg.dt, 1.0).samples(&[0.0, 0.1, 0.5, 1.0]);
        let traj = solve(&forms, &u0, &opts).unwrap();
        drift = drift.max(traj.mass().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max));
        for (r, s) in energy_identity_residual(&traj).iter().zip(&traj.steps) {
            if s.theta == 0.5 {
                cn = cn.max(r.abs() / traj.initial.b);
            }
        }
        stored.extend(margins_of(&forms, &traj, &format!("structure eps = {e}")));

        let c = Field::constant(&grid, 0.7);
        let flat = solve(&forms, &c, &SolveOptions::new(cfg.dt, 0.1).samples(&[0.1])).unwrap();
        let dev = flat.snapshots.iter().flat_map(|s| s.field.values()).map(|v| (v - 0.7).abs());
        stationary = stationary.max(dev.fold(0.0, f64::max));

        let ones = vec![1.0; grid.len()];
        let a1 = forms.a.apply(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        kernel = kernel.max(a1 / forms.a.max_abs());
    }

    // Iterative path and limit solver.
    let small = build_grid(33, 81, Grading::three_zone()).unwrap();
    let forms = assemble(&small, &quartic(), 0.1).unwrap();
    let phi = TransitionProfile::new(&GibbsMeasure::new(&quartic(), 0.1).unwrap(), small.xi()).unwrap();
    let u0 = lift(&cfg.initial.traces(small.x()).unwrap(), &phi, &small).unwrap();
    let opts = SolveOptions::new(cfg.dt, 0.05).solver(Solver::Pcg).samples(&[0.0, 0.05]);
    let traj = solve(&forms, &u0, &opts).unwrap();
    let pcg_drift = traj.mass().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    stored.extend(margins_of(&forms, &traj, "structure pcg"));

    let x = uniform_x(cfg.nx);
    let limit = assemble_limit(&x, k_limit(&quartic()).unwrap()).unwrap();
    let lt = solve_limit(&limit, &cfg.initial.traces(&x).unwrap(), &SolveOptions::new(cfg.dt, 1.0)).unwrap();
    let limit_drift = lt.mass().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let limit_cn = limit_energy_identity(&lt)
        .iter()
        .zip(&lt.steps)
        .filter(|(_, s)| s.theta == 0.5)
        .map(|(r, _)| r.abs() / lt.initial.b)
        .fold(0.0, f64::max);

    let elapsed = t0.elapsed();
    let drift_all = drift.max(pcg_drift).max(limit_drift);
    Outcome {
        id: 5,
        title: "discrete structure",
        passed: drift_all <= 1e-10
            && cn.max(limit_cn) <= 1e-9
            && stationary <= 1e-10
            && kernel <= 1e-12
            && elapsed.as_secs_f64() < 60.0,
        detail: format!(
            "mass drift/step {drift:.1e} (direct), {pcg_drift:.1e} (pcg), {limit_drift:.1e} (limit) <= 1e-10; \
             CN residual/b0 {cn:.1e}, limit {limit_cn:.1e} <= 1e-9; constant field {stationary:.1e} <= 1e-10; \
             |A1|/|A| {kernel:.1e} <= 1e-12; < 60 s"
        ),
        elapsed,
    }
}

fn mean_gap(u: &Field) -> f64 {
    let t = traces(u);
    let n = t.len() as f64;
    t.plus.iter().zip(&t.minus).map(|(p, m)| p - m).sum::<f64>() / n
}

/// Returns the criterion and the corrected-rate comparison.
fn criterion_6(stored: &mut Vec<Stored>) -> (Outcome, Outcome) {
    let t0 = Instant::now();
    let eps = 0.1;
    let times = [0.1, 0.5];
    let grid = build_grid(129, 161, Grading::three_zone()).unwrap();
    let gibbs = GibbsMeasure::new(&quartic(), eps).unwrap();
    let forms = assemble(&grid, &quartic(), eps).unwrap();
    let phi = TransitionProfile::new(&gibbs, grid.xi()).unwrap();
    let u0 = lift(&LimitField::constant(grid.nx(), 0.0, 1.0), &phi, &grid).unwrap();
    let traj = solve(&forms, &u0, &SolveOptions::new(1e-3, 0.5).samples(&[0.0, 0.1, 0.5])).unwrap();
    stored.extend(margins_of(&forms, &traj, "homogeneous"));
    let ke = k_eps(&quartic(), eps).unwrap();
    let qe = q_eps(&quartic(), eps).unwrap();
    let gaps: Vec<f64> = times.iter().map(|&t| mean_gap(traj.snapshot(t).unwrap())).collect();
    let stated: Vec<f64> = times.iter().map(|t| (-2.0 * ke * t).exp()).collect();
    let corrected: Vec<f64> = times.iter().map(|t| (-(ke / qe) * t).exp()).collect();
    let rel = |p: &[f64]| -> Vec<f64> { gaps.iter().zip(p).map(|(g, p)| (g / p - 1.0).abs()).collect() };
    let (rel_stated, rel_corrected) = (rel(&stated), rel(&corrected));

    let x = uniform_x(129);
    let k = k_limit(&quartic()).unwrap();
    let limit = assemble_limit(&x, k).unwrap();
    let lt = solve_limit(
        &limit,
        &LimitField::constant(x.len(), 0.0, 1.0),
        &SolveOptions::new(1e-4, 0.5).samples(&times),
    )
    .unwrap();
    let mut ode = 0.0f64;
    for &t in &times {
        let (m, p) = homogeneous_solution(k, 0.0, 1.0, t);
        let s = lt.snapshot(t).unwrap();
        for (a, b) in s.minus.iter().zip(&s.plus) {
            ode = ode.max((a - m).abs()).max((b - p).abs());
        }
    }
    let elapsed = t0.elapsed();
    let limit_ok = ode <= 1e-6;
    (
        Outcome {
            id: 6,
            title: "homogeneous benchmark against e^{-2k_eps t}",
            passed: rel_stated.iter().all(|r| *r <= 0.1) && limit_ok,
            detail: format!(
                "eps = 0.1, gap(t = 0.1, 0.5) = {} vs e^(-2k_eps t) = {}: rel. error {} (<= 0.1); \
                 limit (dt = 1e-4) vs two-state ODE {ode:.3e} (<= 1e-6)",
                fmt(&gaps),
                fmt(&stated),
                fmt(&rel_stated)
            ),
            elapsed,
        },
        Outcome {
            id: 6,
            title: "homogeneous benchmark against the slowest-mode rate e^{-(k_eps/q_eps) t}",
            passed: rel_corrected.iter().all(|r| *r <= 0.1) && limit_ok,
            detail: format!(
                "k_eps/q_eps = {:.5} (limit 2k = {:.5}); prediction {}: rel. error {} (<= 0.1)",
                ke / qe,
                2.0 * k,
                fmt(&corrected),
                fmt(&rel_corrected)
            ),
            elapsed,
        },
    )
}

fn block_summary(checks: &[&kramers::convergence::Check]) -> (bool, String) {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let detail = if failed.is_empty() {
        format!("{} checks passed", checks.len())
    } else {
        format!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join("; "))
    };
    (failed.is_empty() && !checks.is_empty(), detail)
}

fn main() -> ExitCode {
    println!("acceptance suite");
    let mut outcomes = Vec::new();
    let mut stored = Vec::new();
    let total = Instant::now();

    for f in [criterion_1, criterion_2, criterion_3, criterion_4] {
        let o = f();
        report(&o);
        outcomes.push(o);
    }
    let o = criterion_5(&mut stored);
    report(&o);
    outcomes.push(o);
    let (o, corrected) = criterion_6(&mut stored);
    report(&o);
    outcomes.push(o);

    let cfg = StudyConfig::default();
    let t0 = Instant::now();
    let critical = theorem1_study(&cfg).unwrap();
    let elapsed = t0.elapsed();
    let (ok, detail) = block_summary(&critical.block("theorem1"));
    let trace: Vec<String> = cfg
        .times
        .iter()
        .map(|&t| format!("t = {t}: {}", fmt(&critical.column(t, |s| s.trace_error).unwrap())))
        .collect();
    let o = Outcome {
        id: 7,
        title: "weak-* convergence: pairings and trace L2 errors decrease along the ladder",
        passed: ok && elapsed.as_secs_f64() < 600.0,
        detail: format!("{detail}; trace errors {}", trace.join(", ")),
        elapsed,
    };
    report(&o);
    outcomes.push(o);

    let t0 = Instant::now();
    let table = Theorem2Table::from_report(&critical);
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, &t) in table.times.iter().enumerate() {
        if t < 0.5 - 1e-12 {
            continue;
        }
        let b: Vec<f64> = table.b_error.iter().map(|r| r[j]).collect();
        let a: Vec<f64> = table.a_error.iter().map(|r| r[j]).collect();
        ok &= decreasing(&b) && decreasing(&a);
        parts.push(format!("t = {t}: |db| {} |da| {}", fmt(&b), fmt(&a)));
    }
    let o = Outcome {
        id: 8,
        title: "energy convergence of b_eps and a_eps",
        passed: ok && !parts.is_empty(),
        detail: parts.join("; "),
        elapsed: t0.elapsed(),
    };
    report(&o);
    outcomes.push(o);
    let (ok, detail) = block_summary(&critical.block("corollary"));
    println!("INFO      nonlinear observables: {}", if ok { detail } else { format!("NOT MET, {detail}") });

    let t0 = Instant::now();
    let limsup = gamma_limsup_check(&cfg, &limsup_pairs()).unwrap();
    let (ok, detail) = block_summary(&limsup.checks.iter().collect::<Vec<_>>());
    let lift_rel: Vec<f64> = limsup.lift_costs.iter().map(|c| c.relative).collect();
    let o = Outcome {
        id: 9,
        title: "recovery sequences: b_eps(lift) -> b, a_eps(lift) -> a, a_eps(lift(0, 1)) = k_eps",
        passed: ok && limsup.pairs.len() == 3,
        detail: format!("{detail}; |a_eps(lift(0,1))/k_eps - 1| = {}", fmt(&lift_rel)),
        elapsed: t0.elapsed(),
    };
    report(&o);
    outcomes.push(o);

    let t0 = Instant::now();
    let sub = regime_study(Regime::Sub, &cfg).unwrap();
    let sup = regime_study(Regime::Super, &cfg).unwrap();
    let (ok_sub, d_sub) = block_summary(&sub.block("regime"));
    let (ok_sup, d_sup) = block_summary(&sup.block("regime"));
    let gap: Vec<f64> = sup.column(0.5, |s| s.trace_gap).unwrap();
    let o = Outcome {
        id: 10,
        title: "regime dichotomy",
        passed: ok_sub && ok_sup,
        detail: format!("sub: {d_sub}; super: {d_sup}; super trace gap at t = 0.5 {}", fmt(&gap)),
        elapsed: t0.elapsed(),
    };
    report(&o);
    outcomes.push(o);

    let t0 = Instant::now();
    let mut blocks = Vec::new();
    for r in [&critical, &sub, &sup] {
        blocks.extend(r.block("liminf"));
    }
    let (ok_blocks, detail) = block_summary(&blocks);
    let study_states: usize = blocks.iter().step_by(2).map(|c| c.values.len()).sum();
    let worst = stored
        .iter()
        .map(|s| (s.margins.jensen.min(s.margins.fiber), &s.label))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let ok_stored = stored.iter().all(|s| s.margins.hold());
    let study_min = blocks
        .iter()
        .flat_map(|c| &c.values)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let o = Outcome {
        id: 11,
        title: "liminf inequalities on every stored state",
        passed: ok_blocks && ok_stored,
        detail: format!(
            "studies: {detail} over {study_states} states, min margin {study_min:.2e}; \
             solver runs: {} states, min margin {:.2e} at {} (slack {LIMINF_SLACK:e})",
            stored.len(),
            worst.map_or(f64::NAN, |w| w.0),
            worst.map_or("-", |w| w.1.as_str())
        ),
        elapsed: t0.elapsed(),
    };
    report(&o);
    outcomes.push(o);

    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("corrected comparison for criterion 6:");
    report(&corrected);
    println!(
        "{} of {} criteria passed in {:.1} s; failing: {:?}; expected failing: {:?}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        total.elapsed().as_secs_f64(),
        failed,
        EXPECTED_FAILURES
    );
    if failed != EXPECTED_FAILURES || !corrected.passed {
        eprintln!("acceptance outcome differs from the documented one");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
