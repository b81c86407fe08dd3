//! Library values against independent reference computations.

mod common;

use std::f64::consts::PI;

use kramers::gibbs::{laplace_i_shifted, laplace_z, log_barrier_integral, log_partition, DEFAULT_TOL};
use kramers::grid::{uniform_x, xi_nodes};
use kramers::*;

fn quartic() -> EnthalpyProfile {
    EnthalpyProfile::quartic()
}

#[test]
fn partition_function_matches_simpson() {
    let h = quartic();
    for eps in [0.2, 0.1, 0.05, 0.02] {
        let lib = log_partition(&h, eps, DEFAULT_TOL).unwrap().exp();
        let oracle = common::z(&h, eps);
        assert!(common::relative(lib, oracle) < 1e-10, "eps {eps}: {lib} vs {oracle}");
    }
    let z = common::z(&h, 0.1);
    assert!(common::relative(z, (0.2 * PI / 8.0).sqrt()) < 0.15);
}

#[test]
fn barrier_integral_matches_simpson() {
    let h = quartic();
    for eps in [0.2, 0.1, 0.05, 0.02] {
        let lib = log_barrier_integral(&h, eps, DEFAULT_TOL).unwrap().exp();
        let oracle = common::i_shifted(&h, eps);
        assert!(common::relative(lib, oracle) < 1e-10, "eps {eps}: {lib} vs {oracle}");
    }
    let i = common::i_shifted(&h, 0.1);
    assert!(common::relative(i, (0.2 * PI / 4.0).sqrt()) < 0.15);
}

#[test]
fn laplace_ratios_approach_one_monotonically() {
    let h = quartic();
    let ladder = [0.2, 0.1, 0.05, 0.02];
    let z: Vec<f64> = ladder
        .iter()
        .map(|&e| common::relative(common::z(&h, e), laplace_z(&h, e).unwrap()))
        .collect();
    let i: Vec<f64> = ladder
        .iter()
        .map(|&e| common::relative(common::i_shifted(&h, e), laplace_i_shifted(&h, e).unwrap()))
        .collect();
    assert!(common::strictly_decreasing(&z), "{z:?}");
    assert!(common::strictly_decreasing(&i), "{i:?}");
}

#[test]
fn rate_constant_matches_simpson() {
    let h = quartic();
    for eps in [0.2, 0.1, 0.05] {
        let lib = kramers::k_eps(&h, eps).unwrap();
        assert!(common::relative(lib, common::k_eps(&h, eps)) < 1e-9);
    }
}

#[test]
fn transition_profile_at_one_half() {
    let h = quartic();
    let xi = kramers::transition::transition_grid();
    let phi = transition_profile(&h, 0.05, &xi).unwrap();
    let oracle = common::phi(&h, 0.05, 0.5);
    assert!((phi.eval(0.5) - oracle).abs() < 1e-3, "{} vs {oracle}", phi.eval(0.5));
}

#[test]
fn quadratic_program_minimum_and_minimizer() {
    let h = quartic();
    let nodes = xi_nodes(4001, Grading::three_zone()).unwrap();
    for eps in [0.2, 0.1, 0.05] {
        let kappa = common::conductances(&h, eps, &nodes);
        let (phi, energy) = common::transition_program(&kappa);
        let k = kramers::k_eps(&h, eps).unwrap();
        assert!(common::relative(energy, k) < 1e-6, "eps {eps}: {energy} vs {k}");
        let lib = transition_profile(&h, eps, &nodes).unwrap();
        let err = phi
            .iter()
            .zip(lib.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "eps {eps}: max nodal difference {err}");
    }
}

#[test]
fn moments_concentrate_on_the_wells() {
    let h = quartic();
    let mut prev = f64::INFINITY;
    for eps in [0.2, 0.1, 0.05, 0.02] {
        let g = GibbsMeasure::new(&h, eps).unwrap();
        let m2 = g.expectation(|x| x * x, 1e-12).unwrap();
        assert!((m2 - common::moment(&h, eps, |x| x * x)).abs() < 1e-9);
        assert!(g.expectation(|x| x, 1e-12).unwrap().abs() < 1e-14);
        assert!(g.expectation(|x| x * x * x, 1e-12).unwrap().abs() < 1e-14);
        assert!((1.0 - m2) < prev);
        prev = 1.0 - m2;
    }
}

#[test]
fn skew_tilts_the_well_masses() {
    let h = quartic();
    let gap = 2f64.ln();
    let mut prev = f64::INFINITY;
    for eps in [0.2, 0.1, 0.05, 0.02] {
        let g = GibbsMeasure::skewed(&h, gap, eps).unwrap();
        let minus = common::simpson(|x| g.density(x), -1.0, 0.0, 200_000);
        let plus = common::simpson(|x| g.density(x), 0.0, 1.0, 200_000);
        let err = (minus / plus - 2.0).abs();
        assert!(err < prev, "eps {eps}: ratio {}", minus / plus);
        prev = err;
    }
    assert!(prev < 0.05);
}

#[test]
fn mass_form_of_lift_is_the_transition_mass() {
    let h = quartic();
    let g = build_grid(9, 161, Grading::three_zone()).unwrap();
    for eps in [0.2, 0.1, 0.05] {
        let f = assemble(&g, &h, eps).unwrap();
        let phi = transition_profile(&h, eps, g.xi()).unwrap();
        let u = lift(&LimitField::constant(9, 0.0, 1.0), &phi, &g).unwrap();
        let q = q_eps(&h, eps).unwrap();
        let b = b_form(&f, &u, &u).unwrap();
        assert!((b - (0.5 + q - 0.25)).abs() < 1e-4, "eps {eps}: {b}");
        let mass = pair_measure(&f, &u, |_, _| 1.0).unwrap();
        assert!((mass - 0.5).abs() < 1e-12);
    }
}

#[test]
fn lift_mass_form_matches_integrated_transition_mass() {
    let h = quartic();
    let g = build_grid(33, 161, Grading::three_zone()).unwrap();
    let eps = 0.1;
    let f = assemble(&g, &h, eps).unwrap();
    let gibbs = GibbsMeasure::new(&h, eps).unwrap();
    let costs = TransitionCosts::new(&gibbs, &TimeScale::critical()).unwrap();
    let phi = TransitionProfile::new(&gibbs, g.xi()).unwrap();
    let tr = LimitField::from_fns(g.x(), |x| (PI * x).cos(), |x| 1.0 + x * x);
    let u = lift(&tr, &phi, &g).unwrap();
    let b = b_form(&f, &u, &u).unwrap();
    // ∫ Q_ε(u⁻, u⁺) dx with the x-interpolants, by Simpson
    let interp = |v: &[f64], x: f64| {
        let n = v.len() - 1;
        let c = ((x * n as f64).floor() as usize).min(n - 1);
        let s = x * n as f64 - c as f64;
        v[c] * (1.0 - s) + v[c + 1] * s
    };
    let oracle = common::simpson(|x| costs.mass(interp(&tr.minus, x), interp(&tr.plus, x)), 0.0, 1.0, 32 * 64);
    assert!((b - oracle).abs() < 1e-4, "{b} vs {oracle}");
}

#[test]
fn stiffness_refinement_order() {
    let h = quartic();
    let eps = 0.2;
    let tau = eps * (1.0 / eps as f64).exp();
    let m2 = common::moment(&h, eps, |x| x * x);
    let exact = 0.5 * PI * PI * m2 + 0.5 * tau;
    let errs: Vec<f64> = [33, 65, 129]
        .iter()
        .map(|&n| {
            let g = build_grid(n, n, Grading::three_zone()).unwrap();
            let f = assemble(&g, &h, eps).unwrap();
            let u = Field::from_fn(&g, |x, xi| (PI * x).cos() * xi);
            (a_form(&f, &u, &u).unwrap() - exact).abs()
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    assert!(orders.iter().all(|&p| p >= 1.8), "errors {errs:?}, orders {orders:?}");
}

#[test]
fn lifted_pair_equilibrates_to_one_half() {
    let h = quartic();
    let g = build_grid(5, 81, Grading::three_zone()).unwrap();
    let f = assemble(&g, &h, 0.1).unwrap();
    let phi = transition_profile(&h, 0.1, g.xi()).unwrap();
    let u0 = lift(&LimitField::constant(5, 0.0, 1.0), &phi, &g).unwrap();
    let opts = SolveOptions::new(0.05, 20.0).scheme(Scheme::BackwardEuler).samples(&[20.0]);
    let traj = solve(&f, &u0, &opts).unwrap();
    let u = traj.snapshot(20.0).unwrap();
    assert!(u.values().iter().all(|v| (v - 0.5).abs() < 1e-8));
    assert!((traj.b().last().unwrap() - 0.25).abs() < 1e-8);
}

#[test]
fn limit_solver_matches_two_state_ode() {
    let k = k_limit(&quartic()).unwrap();
    let f = assemble_limit(&uniform_x(17), k).unwrap();
    for (cm, cp) in [(0.0, 1.0), (2.0, -1.0)] {
        let u0 = LimitField::constant(17, cm, cp);
        let traj = solve_limit(&f, &u0, &SolveOptions::new(1e-4, 0.5).samples(&[0.5])).unwrap();
        let u = traj.snapshot(0.5).unwrap();
        let (m, p) = homogeneous_solution(k, cm, cp, 0.5);
        assert!(u.minus.iter().all(|v| (v - m).abs() < 1e-6));
        assert!(u.plus.iter().all(|v| (v - p).abs() < 1e-6));
    }
}

#[test]
fn step_doubling_changes_final_mass_form_little() {
    let h = quartic();
    let g = build_grid(33, 161, Grading::three_zone()).unwrap();
    let f = assemble(&g, &h, 0.1).unwrap();
    let phi = transition_profile(&h, 0.1, g.xi()).unwrap();
    let tr = LimitField::from_fns(g.x(), |x| (PI * x).cos(), |x| 1.0 + (PI * x).cos());
    let u0 = lift(&tr, &phi, &g).unwrap();
    let b1 = |dt: f64| *solve(&f, &u0, &SolveOptions::new(dt, 1.0)).unwrap().b().last().unwrap();
    let diff = (b1(1e-3) - b1(5e-4)).abs();
    assert!(diff < 1e-4, "{diff}");
}

#[test]
fn pcg_and_direct_paths_agree() {
    let h = quartic();
    let g = build_grid(17, 41, Grading::three_zone()).unwrap();
    let f = assemble(&g, &h, 0.1).unwrap();
    let u0 = Field::from_fn(&g, |x, xi| (PI * x).cos() + xi * xi * x);
    let opts = SolveOptions::new(1e-2, 0.1).samples(&[0.1]);
    let a = solve(&f, &u0, &opts.clone().solver(Solver::Direct)).unwrap();
    let b = solve(&f, &u0, &opts.solver(Solver::Pcg)).unwrap();
    let (ua, ub) = (a.snapshot(0.1).unwrap(), b.snapshot(0.1).unwrap());
    let err = ua
        .values()
        .iter()
        .zip(ub.values())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn rough_data_respects_the_smoothing_bound() {
    let h = quartic();
    let g = build_grid(17, 41, Grading::three_zone()).unwrap();
    let f = assemble(&g, &h, 0.1).unwrap();
    let u0 = Field::from_fn(&g, |x, xi| {
        let i = (x * 16.0).round() as i64;
        let j = g.xi().iter().position(|&v| v == xi).unwrap() as i64;
        if (i + j) % 2 == 0 { 1.0 } else { -1.0 }
    });
    let traj = solve(&f, &u0, &SolveOptions::new(1e-3, 0.2)).unwrap();
    let check = regularization_check(&traj);
    assert!(check.bounded.iter().all(|&b| b));
}

#[test]
fn even_data_stays_even() {
    let h = quartic();
    let g = build_grid(17, 81, Grading::three_zone()).unwrap();
    let f = assemble(&g, &h, 0.1).unwrap();
    let u0 = Field::from_fn(&g, |x, xi| (PI * x).cos() * (1.0 + xi * xi));
    let traj = solve(&f, &u0, &SolveOptions::new(1e-3, 0.5).samples(&[0.1, 0.5])).unwrap();
    for s in &traj.snapshots {
        assert!(s.field.mirror_error() <= 1e-9, "t {}: {}", s.t, s.field.mirror_error());
    }
}
