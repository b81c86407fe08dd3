//! θ-scheme integration of M u̇ + A u = 0 and its energy diagnostics.
//!
//! The direct solver diagonalizes the x-direction: with K_x V = M_x V Λ and
//! VᵀM_x V = I, the modal coefficients W = VᵀM_x U decouple and each x-mode
//! needs one tridiagonal solve in ξ per step. Steps are taken in increment
//! form, (M + θΔtA)δ = −ΔtAu, and the ξ-solves are refined against a
//! residual evaluated in flux form, which keeps mass and the Crank-Nicolson
//! energy identity at rounding level even when τ_ε is large.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{Conductance, FormMatrices, SymTridiag, TensorForms, XFactor};
use crate::grid::Field;
use crate::sparse::pcg;

/// Relative residual required from iterative solves.
pub const SOLVER_TOL: f64 = 1e-11;
/// Below this many unknowns the direct (modal) solver is used.
pub const DIRECT_LIMIT: usize = 50_000;

const REFINEMENTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Two backward-Euler half steps, then Crank-Nicolson.
    #[default]
    CnRannacher,
    #[serde(rename = "be")]
    BackwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Direct below [`DIRECT_LIMIT`] unknowns, conjugate gradients above.
    #[default]
    Auto,
    Direct,
    Pcg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub solver: Solver,
    /// Times at which the state is kept; each must be a step time.
    pub sample_times: Vec<f64>,
}

impl SolveOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::CnRannacher,
            solver: Solver::Auto,
            sample_times: Vec::new(),
        }
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn samples(mut self, times: &[f64]) -> Self {
        self.sample_times = times.to_vec();
        self
    }
}

/// One step of the schedule: end time, step size, implicitness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StepPlan {
    pub t: f64,
    pub dt: f64,
    pub theta: f64,
}

fn on_step(t: f64, dt: f64) -> Option<usize> {
    let n = (t / dt).round();
    ((t - n * dt).abs() <= 1e-9 * dt.max(t)).then_some(n as usize)
}

pub(crate) fn schedule(opts: &SolveOptions) -> Result<Vec<StepPlan>> {
    let SolveOptions { dt, t_end, .. } = *opts;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be nonnegative, got {t_end}")));
    }
    let n = on_step(t_end, dt).ok_or_else(|| {
        Error::InvalidArgument(format!("final time {t_end} is not a multiple of the step {dt}"))
    })?;
    for &s in &opts.sample_times {
        if !(0.0..=t_end * (1.0 + 1e-12)).contains(&s) || on_step(s, dt).is_none() {
            return Err(Error::InvalidArgument(format!(
                "sample time {s} is not a step time in [0, {t_end}]"
            )));
        }
    }
    let mut plan = Vec::with_capacity(n + 1);
    for k in 1..=n {
        let t = k as f64 * dt;
        match opts.scheme {
            Scheme::BackwardEuler => plan.push(StepPlan { t, dt, theta: 1.0 }),
            Scheme::CnRannacher if k == 1 => {
                plan.push(StepPlan {
                    t: 0.5 * dt,
                    dt: 0.5 * dt,
                    theta: 1.0,
                });
                plan.push(StepPlan {
                    t,
                    dt: 0.5 * dt,
                    theta: 1.0,
                });
            }
            Scheme::CnRannacher => plan.push(StepPlan { t, dt, theta: 0.5 }),
        }
    }
    Ok(plan)
}

pub(crate) fn sample_index(opts: &SolveOptions, t: f64) -> Option<usize> {
    opts.sample_times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * opts.dt.max(s))
}

/// Generalized eigenpairs of (K_x, M_x) with the constant mode pinned.
#[derive(Debug, Clone)]
pub struct XModes {
    /// Column k holds the nodal values of mode k.
    pub vectors: DMatrix<f64>,
    /// VᵀM_x, mapping nodal values to modal coefficients.
    pub analysis: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Modal coefficients of the constant function 1.
    pub ones: Vec<f64>,
}

fn dense(t: &SymTridiag) -> DMatrix<f64> {
    let n = t.n();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = t.diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = t.off[i];
            m[(i + 1, i)] = t.off[i];
        }
    }
    m
}

impl XModes {
    pub fn new(x: &XFactor) -> Result<Self> {
        let mx = dense(&x.mass);
        let kx = dense(&x.stiffness.to_tridiag());
        let chol = mx
            .clone()
            .cholesky()
            .ok_or_else(|| Error::MassNotPositive("x mass matrix".into()))?;
        let l = chol.l();
        let linv_k = l
            .solve_lower_triangular(&kx)
            .ok_or_else(|| Error::MassNotPositive("x mass factor".into()))?;
        let c = l
            .solve_lower_triangular(&linv_k.transpose())
            .ok_or_else(|| Error::MassNotPositive("x mass factor".into()))?;
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let n = x.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let q = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
        let mut vectors = l
            .transpose()
            .solve_upper_triangular(&q)
            .ok_or_else(|| Error::MassNotPositive("x mass factor".into()))?;
        let mut eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        // The Neumann kernel is exactly the constants.
        let total: f64 = mx.iter().sum();
        let sign = if vectors.column(0).sum() < 0.0 { -1.0 } else { 1.0 };
        vectors.column_mut(0).fill(sign / total.sqrt());
        eigenvalues[0] = 0.0;
        for k in 0..n {
            let col = vectors.column(k).clone_owned();
            let norm = (col.transpose() * &mx * &col)[(0, 0)].sqrt();
            vectors.column_mut(k).scale_mut(1.0 / norm);
        }
        let analysis = vectors.transpose() * &mx;
        let ones = (&analysis * DMatrix::from_element(n, 1, 1.0)).column(0).iter().copied().collect();
        Ok(Self {
            vectors,
            analysis,
            eigenvalues,
            ones,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Modal coefficients of a row-major (n × cols) nodal array.
    pub fn to_modal(&self, nodal: &[f64], cols: usize) -> Vec<f64> {
        let u = DMatrix::from_row_slice(self.n(), cols, nodal);
        row_major(&(&self.analysis * u))
    }

    pub fn to_nodal(&self, modal: &[f64], cols: usize) -> Vec<f64> {
        let w = DMatrix::from_row_slice(self.n(), cols, modal);
        row_major(&(&self.vectors * w))
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

fn not_definite(j: usize, p: f64) -> Error {
    Error::InvalidArgument(format!("step matrix is not positive definite (pivot {j} = {p})"))
}

/// LDLᵀ factorization of an SPD tridiagonal matrix.
#[derive(Debug, Clone)]
pub(crate) struct TriFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TriFactor {
    pub fn new(t: &SymTridiag) -> Result<Self> {
        let n = t.n();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        for j in 0..n {
            let p = if j == 0 {
                t.diag[0]
            } else {
                t.diag[j] - l[j - 1] * t.off[j - 1]
            };
            if !(p > 0.0) {
                return Err(not_definite(j, p));
            }
            d.push(p);
            if j + 1 < n {
                l.push(t.off[j] / p);
            }
        }
        Ok(Self { d, l })
    }

    /// Factorization of the matrix with off-diagonal `off` ≤ 0 and row sums
    /// `rows` > 0. The pivot excess e_j = d_j + o_j obeys
    /// e_j = r_j + |o_{j−1}|·e_{j−1}/d_{j−1}, a sum of positive terms, so no
    /// cancellation occurs however large the off-diagonal entries are.
    pub fn from_row_sums(rows: &[f64], off: &[f64]) -> Result<Self> {
        let n = rows.len();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        let mut excess = 0.0;
        for j in 0..n {
            let e = if j == 0 {
                rows[0]
            } else {
                rows[j] - off[j - 1] * (excess / d[j - 1])
            };
            let p = if j + 1 < n { e - off[j] } else { e };
            if !(p > 0.0) {
                return Err(not_definite(j, p));
            }
            d.push(p);
            excess = e;
            if j + 1 < n {
                l.push(off[j] / p);
            }
        }
        Ok(Self { d, l })
    }

    pub fn solve(&self, f: &mut [f64]) {
        let n = self.d.len();
        for j in 1..n {
            f[j] -= self.l[j - 1] * f[j - 1];
        }
        for j in 0..n {
            f[j] /= self.d[j];
        }
        for j in (0..n - 1).rev() {
            f[j] -= self.l[j] * f[j + 1];
        }
    }
}

/// Diagnostics after one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub theta: f64,
    pub mass: f64,
    pub b: f64,
    pub a1: f64,
    pub a2: f64,
    /// a(ū) at the step midpoint ū = ½(u_n + u_{n+1}).
    pub a_mid: f64,
}

/// Diagnostics of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateDiagnostics {
    pub mass: f64,
    pub b: f64,
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub initial: StateDiagnostics,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.steps.iter().map(|s| s.t)).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        std::iter::once(self.initial.b).chain(self.steps.iter().map(|s| s.b)).collect()
    }

    pub fn a(&self) -> Vec<f64> {
        std::iter::once(self.initial.a1 + self.initial.a2)
            .chain(self.steps.iter().map(|s| s.a1 + s.a2))
            .collect()
    }

    pub fn mass(&self) -> Vec<f64> {
        std::iter::once(self.initial.mass).chain(self.steps.iter().map(|s| s.mass)).collect()
    }

    pub fn snapshot(&self, t: f64) -> Option<&Field> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.max(1e-3))
            .map(|s| &s.field)
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Modal propagator for the ε-problem.
pub struct ModalSolver<'a> {
    forms: &'a TensorForms,
    modes: XModes,
    stiffness: SymTridiag,
    mass_ones: Vec<f64>,
    cache: Vec<(f64, f64, Vec<TriFactor>)>,
}

impl<'a> ModalSolver<'a> {
    pub fn new(forms: &'a TensorForms) -> Result<Self> {
        let modes = XModes::new(&forms.x)?;
        let nxi = forms.nxi();
        Ok(Self {
            forms,
            modes,
            stiffness: forms.xi.stiffness.to_tridiag(),
            mass_ones: forms.xi.mass.apply(&vec![1.0; nxi]),
            cache: Vec::new(),
        })
    }

    pub fn modes(&self) -> &XModes {
        &self.modes
    }

    pub fn to_modal(&self, u: &Field) -> Vec<f64> {
        self.modes.to_modal(u.values(), self.forms.nxi())
    }

    pub fn to_field(&self, w: &[f64]) -> Field {
        let nxi = self.forms.nxi();
        Field::new(self.modes.n(), nxi, self.modes.to_nodal(w, nxi)).expect("finite modal state")
    }

    fn factors(&mut self, dt: f64, theta: f64) -> Result<usize> {
        if let Some(k) = self.cache.iter().position(|c| c.0 == dt && c.1 == theta) {
            return Ok(k);
        }
        let m = &self.forms.xi.mass;
        let s = &self.stiffness;
        let kappa = &self.forms.xi.stiffness.kappa;
        let beta = theta * dt;
        let factors = self
            .modes
            .eigenvalues
            .iter()
            .map(|&lam| {
                let alpha = 1.0 + beta * lam;
                let off: Vec<f64> = m.off.iter().zip(kappa).map(|(a, k)| alpha * a - beta * k).collect();
                if off.iter().all(|&o| o < 0.0) {
                    // S annihilates constants, so the row sums are those of αM.
                    let rows: Vec<f64> = self.mass_ones.iter().map(|r| alpha * r).collect();
                    TriFactor::from_row_sums(&rows, &off)
                } else {
                    TriFactor::new(&SymTridiag {
                        diag: m.diag.iter().zip(&s.diag).map(|(a, b)| alpha * a + beta * b).collect(),
                        off,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.cache.push((dt, theta, factors));
        Ok(self.cache.len() - 1)
    }

    /// Advances the modal state by one θ-step; returns a(ū) at the midpoint.
    pub fn step(&mut self, w: &mut [f64], dt: f64, theta: f64) -> Result<f64> {
        let slot = self.factors(dt, theta)?;
        let nxi = self.forms.nxi();
        let m = &self.forms.xi.mass;
        let cond: &Conductance = &self.forms.xi.stiffness;
        let factors = &self.cache[slot].2;
        let lambdas = &self.modes.eigenvalues;
        let beta = theta * dt;
        let mids: Vec<f64> = w
            .par_chunks_mut(nxi)
            .enumerate()
            .map(|(k, wk)| {
                let lam = lambdas[k];
                let alpha = 1.0 + beta * lam;
                let mw = m.apply(wk);
                let sw = cond.apply(wk);
                let rhs: Vec<f64> = mw.iter().zip(&sw).map(|(a, b)| -dt * (lam * a + b)).collect();
                let mut delta = rhs.clone();
                factors[k].solve(&mut delta);
                for _ in 0..REFINEMENTS {
                    let md = m.apply(&delta);
                    let sd = cond.apply(&delta);
                    let mut r: Vec<f64> = (0..nxi)
                        .map(|j| rhs[j] - (alpha * md[j] + beta * sd[j]))
                        .collect();
                    factors[k].solve(&mut r);
                    delta.iter_mut().zip(&r).for_each(|(d, c)| *d += c);
                }
                let mid: Vec<f64> = wk.iter().zip(&delta).map(|(a, d)| a + 0.5 * d).collect();
                wk.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
                lam * m.bilinear(&mid, &mid) + cond.bilinear(&mid, &mid)
            })
            .collect();
        Ok(mids.iter().sum())
    }

    pub fn diagnostics(&self, w: &[f64]) -> StateDiagnostics {
        let nxi = self.forms.nxi();
        let m = &self.forms.xi.mass;
        let cond = &self.forms.xi.stiffness;
        let parts: Vec<[f64; 4]> = w
            .par_chunks(nxi)
            .enumerate()
            .map(|(k, wk)| {
                let bm = m.bilinear(wk, wk);
                let mass: f64 = self.mass_ones.iter().zip(wk).map(|(a, b)| a * b).sum();
                [
                    self.modes.ones[k] * mass,
                    bm,
                    self.modes.eigenvalues[k] * bm,
                    cond.bilinear(wk, wk),
                ]
            })
            .collect();
        let mut s = [0.0; 4];
        for p in &parts {
            for (a, b) in s.iter_mut().zip(p) {
                *a += b;
            }
        }
        StateDiagnostics {
            mass: s[0],
            b: s[1],
            a1: s[2],
            a2: s[3],
        }
    }
}

fn nodal_diagnostics(forms: &TensorForms, u: &[f64]) -> StateDiagnostics {
    let ones = vec![1.0; u.len()];
    StateDiagnostics {
        mass: forms.b(u, &ones),
        b: forms.b(u, u),
        a1: forms.a1(u, u),
        a2: forms.a2(u, u),
    }
}

/// One θ-step (M + θΔtA)u_next = (M − (1 − θ)ΔtA)u with the assembled
/// sparse matrices and Jacobi-preconditioned conjugate gradients.
pub fn step_theta(forms: &FormMatrices, u: &Field, dt: f64, theta: f64) -> Result<Field> {
    u.matches(&forms.grid)?;
    if !(dt > 0.0) || !(0.5..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "need Δt > 0 and θ ∈ [1/2, 1], got Δt = {dt}, θ = {theta}"
        )));
    }
    let delta = pcg_increment(forms, u.values(), dt, theta)?;
    let next: Vec<f64> = u.values().iter().zip(&delta).map(|(a, d)| a + d).collect();
    Field::new(u.nx(), u.nxi(), next)
}

fn pcg_increment(forms: &FormMatrices, u: &[f64], dt: f64, theta: f64) -> Result<Vec<f64>> {
    // Solved for u_next with u as the initial guess, so the right-hand side
    // is never a pure rounding residue.
    let lhs = forms.m.combine(1.0, &forms.a, theta * dt);
    let explicit = forms.m.combine(1.0, &forms.a, -(1.0 - theta) * dt);
    let rhs = explicit.apply(u);
    let mut next = u.to_vec();
    pcg(&lhs, &rhs, &mut next, SOLVER_TOL, 20 * u.len() + 100)?;
    // A·1 = 0, so the exact step conserves 1ᵀM u; remove the iterative
    // residual's component along the constants.
    let mass = |v: &[f64]| forms.m.apply(v).iter().sum::<f64>();
    let one = vec![1.0; u.len()];
    let shift = (mass(u) - mass(&next)) / mass(&one);
    Ok(next.iter().zip(u).map(|(a, b)| a + shift - b).collect())
}

fn use_direct(forms: &FormMatrices, solver: Solver) -> bool {
    match solver {
        Solver::Direct => true,
        Solver::Pcg => false,
        Solver::Auto => forms.grid.len() < DIRECT_LIMIT,
    }
}

/// Integrates from `u0` over [0, T].
pub fn solve(forms: &FormMatrices, u0: &Field, opts: &SolveOptions) -> Result<Trajectory> {
    u0.matches(&forms.grid)?;
    let plan = schedule(opts)?;
    let mut snapshots = Vec::new();
    if sample_index(opts, 0.0).is_some() {
        snapshots.push(Snapshot {
            t: 0.0,
            field: u0.clone(),
        });
    }
    let mut steps = Vec::with_capacity(plan.len());
    let initial;
    if use_direct(forms, opts.solver) {
        let mut solver = ModalSolver::new(&forms.tensor)?;
        let mut w = solver.to_modal(u0);
        initial = nodal_diagnostics(&forms.tensor, u0.values());
        for (n, p) in plan.iter().enumerate() {
            let a_mid = solver
                .step(&mut w, p.dt, p.theta)
                .map_err(|e| Error::Step {
                    step: n + 1,
                    source: Box::new(e),
                })?;
            let d = solver.diagnostics(&w);
            steps.push(record(p, d, a_mid));
            if sample_index(opts, p.t).is_some() {
                snapshots.push(Snapshot {
                    t: p.t,
                    field: solver.to_field(&w),
                });
            }
        }
    } else {
        let mut u = u0.values().to_vec();
        initial = nodal_diagnostics(&forms.tensor, &u);
        for (n, p) in plan.iter().enumerate() {
            let delta = pcg_increment(forms, &u, p.dt, p.theta).map_err(|e| Error::Step {
                step: n + 1,
                source: Box::new(e),
            })?;
            let mid: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + 0.5 * d).collect();
            let a_mid = forms.tensor.a1(&mid, &mid) + forms.tensor.a2(&mid, &mid);
            u.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
            steps.push(record(p, nodal_diagnostics(&forms.tensor, &u), a_mid));
            if sample_index(opts, p.t).is_some() {
                snapshots.push(Snapshot {
                    t: p.t,
                    field: Field::new(u0.nx(), u0.nxi(), u.clone())?,
                });
            }
        }
    }
    Ok(Trajectory {
        initial,
        steps,
        snapshots,
    })
}

fn record(p: &StepPlan, d: StateDiagnostics, a_mid: f64) -> StepRecord {
    StepRecord {
        t: p.t,
        dt: p.dt,
        theta: p.theta,
        mass: d.mass,
        b: d.b,
        a1: d.a1,
        a2: d.a2,
        a_mid,
    }
}

/// Per-step ½b(u_{n+1}) − ½b(u_n) + Δt·a(ū_n).
pub fn energy_identity_residual(traj: &Trajectory) -> Vec<f64> {
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

/// Per-step flags of the smoothing estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationCheck {
    /// a(u_{n+1}) ≤ a(u_n).
    pub monotone: Vec<bool>,
    /// t_{n+1}·a(u_{n+1}) ≤ ½b(u_0).
    pub bounded: Vec<bool>,
}

impl RegularizationCheck {
    pub fn all(&self) -> bool {
        self.monotone.iter().chain(&self.bounded).all(|&f| f)
    }
}

/// Relative slack granted to the bound t·a ≤ ½b(u₀).
pub const REGULARIZATION_SLACK: f64 = 1e-6;

pub fn regularization_check(traj: &Trajectory) -> RegularizationCheck {
    let a = traj.a();
    let half_b0 = 0.5 * traj.initial.b;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(*v));
    let monotone = a
        .windows(2)
        .map(|w| w[1] <= w[0] + 1e-12 * scale + 1e-300)
        .collect();
    let bounded = traj
        .steps
        .iter()
        .map(|s| s.t * (s.a1 + s.a2) <= half_b0 * (1.0 + REGULARIZATION_SLACK))
        .collect();
    RegularizationCheck { monotone, bounded }
}
