//! θ-scheme for the limit reaction-diffusion system.
//!
//! In the x-eigenbasis of (K_x, M_x) each mode couples only its two species
//! coefficients, so a step is one 2×2 solve per mode. The solve is written
//! symmetrically in (u⁻, u⁺), which makes swapping the species commute with
//! the scheme bit for bit when the weights are equal.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{sample_index, schedule, SolveOptions, XModes};
use crate::forms::LimitForms;
use crate::grid::LimitField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitStepRecord {
    pub t: f64,
    pub dt: f64,
    pub theta: f64,
    pub mass: f64,
    pub b: f64,
    /// π⁻‖∇u⁻‖² + π⁺‖∇u⁺‖².
    pub a_grad: f64,
    /// κ‖u⁺ − u⁻‖².
    pub a_react: f64,
    pub a_mid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitSnapshot {
    pub t: f64,
    pub field: LimitField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitTrajectory {
    pub initial: LimitStepRecord,
    pub steps: Vec<LimitStepRecord>,
    pub snapshots: Vec<LimitSnapshot>,
}

impl LimitTrajectory {
    pub fn times(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.steps.iter().map(|s| s.t)).collect()
    }

    pub fn mass(&self) -> Vec<f64> {
        std::iter::once(&self.initial).chain(&self.steps).map(|s| s.mass).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        std::iter::once(&self.initial).chain(&self.steps).map(|s| s.b).collect()
    }

    pub fn a(&self) -> Vec<f64> {
        std::iter::once(&self.initial)
            .chain(&self.steps)
            .map(|s| s.a_grad + s.a_react)
            .collect()
    }

    pub fn snapshot(&self, t: f64) -> Option<&LimitField> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.max(1e-3))
            .map(|s| &s.field)
    }
}

struct Modal<'a> {
    forms: &'a LimitForms,
    modes: XModes,
}

impl Modal<'_> {
    /// Coefficient matrix of mode k: [[π⁻λ + κ, −κ], [−κ, π⁺λ + κ]].
    fn diag(&self, lam: f64) -> (f64, f64) {
        let w = &self.forms.weights;
        (w.minus * lam + self.forms.coupling, w.plus * lam + self.forms.coupling)
    }

    fn energy(&self, lam: f64, m: f64, p: f64) -> (f64, f64) {
        let w = &self.forms.weights;
        let d = p - m;
        (lam * (w.minus * m * m + w.plus * p * p), self.forms.coupling * d * d)
    }

    fn step(&self, w: &mut [f64], dt: f64, theta: f64) -> f64 {
        let pi = self.forms.weights;
        let kappa = self.forms.coupling;
        let beta = theta * dt;
        let n = self.modes.n();
        let (minus, plus) = w.split_at_mut(n);
        let mids: Vec<f64> = minus
            .par_iter_mut()
            .zip(plus.par_iter_mut())
            .enumerate()
            .map(|(k, (m, p))| {
                let lam = self.modes.eigenvalues[k];
                let (dm, dp) = self.diag(lam);
                let fm = -dt * (dm * *m - kappa * *p);
                let fp = -dt * (dp * *p - kappa * *m);
                let a = pi.minus + beta * dm;
                let c = pi.plus + beta * dp;
                let q = beta * kappa;
                let det = a * c - q * q;
                let em = (c * fm + q * fp) / det;
                let ep = (a * fp + q * fm) / det;
                let (mm, mp) = (*m + 0.5 * em, *p + 0.5 * ep);
                *m += em;
                *p += ep;
                let (g, r) = self.energy(lam, mm, mp);
                g + r
            })
            .collect();
        mids.iter().sum()
    }

    fn record(&self, w: &[f64], t: f64, dt: f64, theta: f64, a_mid: f64) -> LimitStepRecord {
        let n = self.modes.n();
        let pi = self.forms.weights;
        let (mut mass, mut b, mut g, mut r) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            let (m, p) = (w[k], w[n + k]);
            mass += self.modes.ones[k] * (pi.minus * m + pi.plus * p);
            b += pi.minus * m * m + pi.plus * p * p;
            let (eg, er) = self.energy(self.modes.eigenvalues[k], m, p);
            g += eg;
            r += er;
        }
        LimitStepRecord {
            t,
            dt,
            theta,
            mass,
            b,
            a_grad: g,
            a_react: r,
            a_mid,
        }
    }

    fn to_modal(&self, u: &LimitField) -> Vec<f64> {
        let mut w = self.modes.to_modal(&u.minus, 1);
        w.extend(self.modes.to_modal(&u.plus, 1));
        w
    }

    fn to_field(&self, w: &[f64]) -> LimitField {
        let n = self.modes.n();
        LimitField {
            minus: self.modes.to_nodal(&w[..n], 1),
            plus: self.modes.to_nodal(&w[n..], 1),
        }
    }
}

/// Integrates the limit system from `u0` over [0, T].
pub fn solve_limit(forms: &LimitForms, u0: &LimitField, opts: &SolveOptions) -> Result<LimitTrajectory> {
    if u0.len() != forms.n() {
        return Err(Error::ShapeMismatch {
            what: "limit initial data",
            expected: forms.n(),
            found: u0.len(),
        });
    }
    let plan = schedule(opts)?;
    let modal = Modal {
        forms,
        modes: XModes::new(&forms.x)?,
    };
    let mut w = modal.to_modal(u0);
    let initial = modal.record(&w, 0.0, 0.0, 0.0, 0.0);
    let mut snapshots = Vec::new();
    if sample_index(opts, 0.0).is_some() {
        snapshots.push(LimitSnapshot {
            t: 0.0,
            field: u0.clone(),
        });
    }
    let mut steps = Vec::with_capacity(plan.len());
    for p in &plan {
        let a_mid = modal.step(&mut w, p.dt, p.theta);
        steps.push(modal.record(&w, p.t, p.dt, p.theta, a_mid));
        if sample_index(opts, p.t).is_some() {
            snapshots.push(LimitSnapshot {
                t: p.t,
                field: modal.to_field(&w),
            });
        }
    }
    Ok(LimitTrajectory {
        initial,
        steps,
        snapshots,
    })
}

/// Per-step ½b(u_{n+1}) − ½b(u_n) + Δt·a(ū_n).
pub fn limit_energy_identity(traj: &LimitTrajectory) -> Vec<f64> {
    let mut prev = traj.initial.b;
    traj.steps
        .iter()
        .map(|s| {
            let r = 0.5 * s.b - 0.5 * prev + s.dt * s.a_mid;
            prev = s.b;
            r
        })
        .collect()
}

/// u±(t) of the x-homogeneous symmetric system with data (c⁻, c⁺):
/// m ± ½(c⁺ − c⁻)e^{−2kt}, m = ½(c⁻ + c⁺).
pub fn homogeneous_solution(k: f64, c_minus: f64, c_plus: f64, t: f64) -> (f64, f64) {
    let m = 0.5 * (c_minus + c_plus);
    let h = 0.5 * (c_plus - c_minus) * (-2.0 * k * t).exp();
    (m - h, m + h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::Scheme;
    use crate::forms::{assemble_limit, assemble_limit_rates};
    use crate::grid::uniform_x;
    use std::f64::consts::PI;

    #[test]
    fn constant_pair_is_stationary() {
        let f = assemble_limit(&uniform_x(33), 1.8).unwrap();
        let u0 = LimitField::constant(33, 0.3, 0.3);
        let t = solve_limit(&f, &u0, &SolveOptions::new(0.01, 0.5).samples(&[0.5])).unwrap();
        let u = t.snapshot(0.5).unwrap();
        assert!(u.minus.iter().chain(&u.plus).all(|v| (v - 0.3).abs() < 1e-14));
        assert!(limit_energy_identity(&t).iter().all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn homogeneous_closed_form() {
        let k = 4.0 * 2f64.sqrt() / PI;
        let f = assemble_limit(&uniform_x(9), k).unwrap();
        let u0 = LimitField::constant(9, 0.0, 1.0);
        let opts = SolveOptions::new(1e-4, 0.5).samples(&[0.5]);
        let t = solve_limit(&f, &u0, &opts).unwrap();
        let u = t.snapshot(0.5).unwrap();
        let (m, p) = homogeneous_solution(k, 0.0, 1.0, 0.5);
        for i in 0..9 {
            assert!((u.minus[i] - m).abs() < 1e-6);
            assert!((u.plus[i] - p).abs() < 1e-6);
        }
    }

    #[test]
    fn decoupled_when_k_vanishes() {
        let x = uniform_x(17);
        let f = assemble_limit(&x, 0.0).unwrap();
        let a = LimitField::from_fns(&x, |x| (PI * x).cos(), |x| x * x);
        let b = LimitField::from_fns(&x, |x| (3.0 * x).sin(), |x| x * x);
        let opts = SolveOptions::new(1e-2, 0.2).samples(&[0.2]);
        let ua = solve_limit(&f, &a, &opts).unwrap();
        let ub = solve_limit(&f, &b, &opts).unwrap();
        assert_eq!(ua.snapshot(0.2).unwrap().plus, ub.snapshot(0.2).unwrap().plus);
    }

    #[test]
    fn swap_symmetry_is_exact() {
        let x = uniform_x(33);
        let f = assemble_limit(&x, 1.3).unwrap();
        let u0 = LimitField::from_fns(&x, |x| (PI * x).cos(), |x| 1.0 + x * (1.0 - x));
        let opts = SolveOptions::new(1e-2, 0.3).samples(&[0.1, 0.3]);
        let a = solve_limit(&f, &u0, &opts).unwrap();
        let b = solve_limit(&f, &u0.swapped(), &opts).unwrap();
        for t in [0.1, 0.3] {
            assert_eq!(a.snapshot(t).unwrap().swapped(), *b.snapshot(t).unwrap());
        }
    }

    #[test]
    fn unequal_rates_reach_weighted_equilibrium() {
        let x = uniform_x(9);
        let f = assemble_limit_rates(&x, 1.0, 2.0).unwrap();
        let u0 = LimitField::constant(9, 0.0, 1.0);
        let t = solve_limit(&f, &u0, &SolveOptions::new(1e-2, 10.0).samples(&[10.0])).unwrap();
        let u = t.snapshot(10.0).unwrap();
        // mass π⁻u⁻ + π⁺u⁺ = 1/3 is conserved and the equilibrium is constant
        assert!((u.minus[4] - 1.0 / 3.0).abs() < 1e-10);
        assert!((u.plus[4] - 1.0 / 3.0).abs() < 1e-10);
        let m = t.mass();
        assert!(m.windows(2).all(|w| (w[1] - w[0]).abs() < 1e-14));
        let _ = Scheme::default();
    }
}
