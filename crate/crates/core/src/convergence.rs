//! ε-ladder studies: traces, weak-* pairings, form values and the liminf
//! inequalities, compared against the limit system.
//!
//! Every monotonicity claim is an explicit [`Check`]. Values at or below
//! [`NOISE_FLOOR`] count as converged, so that errors that vanish
//! analytically (the mass pairing, decoupled cosine modes) do not produce
//! spurious failures from rounding.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enthalpy::EnthalpyProfile;
use crate::error::{check_eps, Error, Result};
use crate::evolve::{solve, Scheme, SolveOptions, Solver};
use crate::forms::{assemble_limit_skewed, assemble_with, FormMatrices, LimitForms, TestFunction, XFactor};
use crate::gibbs::{GibbsMeasure, Regime, TimeScale, DEFAULT_TOL, EPS_FLOOR};
use crate::grid::{build_grid, uniform_x, Field, Grading, Grid, LimitField};
use crate::limit::solve_limit;
use crate::transition::{k_limit, lift, transition_grid, TransitionCosts, TransitionProfile};

/// Errors at or below this level count as converged in ladder checks.
pub const NOISE_FLOOR: f64 = 1e-9;
/// Slack of the liminf inequalities.
pub const LIMINF_SLACK: f64 = 1e-8;
/// Half-width δ of the excluded barrier band in the flattening norm.
pub const FLATTENING_DELTA: f64 = 0.5;
/// Relative tolerance of a_ε(lift(0, 1)) = k_ε on the transition grid.
pub const LIFT_COST_TOL: f64 = 1e-4;

/// Initial traces (u⁻, u⁺) on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constants { minus: f64, plus: f64 },
    /// u± = mean± + amplitude±·cos(mode·πx).
    Cosine {
        mean_minus: f64,
        mean_plus: f64,
        amplitude_minus: f64,
        amplitude_plus: f64,
        mode: u32,
    },
    /// Piecewise linear through (x, u⁻, u⁺); x must cover [0, 1].
    Tabulated {
        x: Vec<f64>,
        minus: Vec<f64>,
        plus: Vec<f64>,
    },
}

impl Default for InitialData {
    /// (cos πx, 1 + cos πx).
    fn default() -> Self {
        InitialData::Cosine {
            mean_minus: 0.0,
            mean_plus: 1.0,
            amplitude_minus: 1.0,
            amplitude_plus: 1.0,
            mode: 1,
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let s = (x - x0) / (x1 - x0);
    ys[k - 1] + s * (ys[k] - ys[k - 1])
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            InitialData::Constants { minus, plus } => {
                if !(minus.is_finite() && plus.is_finite()) {
                    return bad("initial constants must be finite".into());
                }
            }
            InitialData::Cosine {
                mean_minus,
                mean_plus,
                amplitude_minus,
                amplitude_plus,
                ..
            } => {
                if ![mean_minus, mean_plus, amplitude_minus, amplitude_plus]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return bad("cosine coefficients must be finite".into());
                }
            }
            InitialData::Tabulated { x, minus, plus } => {
                if x.len() < 2 || minus.len() != x.len() || plus.len() != x.len() {
                    return bad(format!(
                        "tabulated data needs equal lengths ≥ 2 (x {}, minus {}, plus {})",
                        x.len(),
                        minus.len(),
                        plus.len()
                    ));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("tabulated x must be strictly increasing".into());
                }
                if x[0] > 0.0 || x[x.len() - 1] < 1.0 {
                    return bad("tabulated x must cover [0, 1]".into());
                }
                if minus.iter().chain(plus).any(|v| !v.is_finite()) {
                    return bad("tabulated values must be finite".into());
                }
            }
        }
        Ok(())
    }

    pub fn traces(&self, x: &[f64]) -> Result<LimitField> {
        self.validate()?;
        Ok(match self {
            InitialData::Constants { minus, plus } => LimitField::constant(x.len(), *minus, *plus),
            InitialData::Cosine {
                mean_minus,
                mean_plus,
                amplitude_minus,
                amplitude_plus,
                mode,
            } => {
                let w = PI * *mode as f64;
                LimitField::from_fns(
                    x,
                    |x| mean_minus + amplitude_minus * (w * x).cos(),
                    |x| mean_plus + amplitude_plus * (w * x).cos(),
                )
            }
            InitialData::Tabulated { x: xs, minus, plus } => LimitField::from_fns(
                x,
                |x| interpolate(xs, minus, x),
                |x| interpolate(xs, plus, x),
            ),
        })
    }
}

/// Nonlinear integrands f(u) with quadratic growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Square,
    ThreeHalves,
}

impl Observable {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Observable::Square => r * r,
            Observable::ThreeHalves => r.abs().powf(1.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::Square => "r^2",
            Observable::ThreeHalves => "|r|^1.5",
        }
    }

    pub fn all() -> [Observable; 2] {
        [Observable::Square, Observable::ThreeHalves]
    }
}

/// ∫ f(u) dγ_ε.
pub fn nonlinear_observable(forms: &FormMatrices, u: &Field, f: Observable) -> Result<f64> {
    crate::forms::integrate_field(forms, u, |_, _, r| f.eval(r))
}

/// π⁻∫f(u⁻) + π⁺∫f(u⁺).
pub fn limit_observable(forms: &LimitForms, u: &LimitField, f: Observable) -> Result<f64> {
    forms.integrate(u, |_, _, r| f.eval(r))
}

/// Restriction to the ξ = ∓1 rows.
pub fn traces(u: &Field) -> LimitField {
    LimitField {
        minus: u.row(0),
        plus: u.row(u.nxi() - 1),
    }
}

/// ‖u − v‖ in L²(Ω)² for pairs, via the x mass matrix.
pub fn trace_error(x: &XFactor, u: &LimitField, v: &LimitField) -> f64 {
    let dm: Vec<f64> = u.minus.iter().zip(&v.minus).map(|(a, b)| a - b).collect();
    let dp: Vec<f64> = u.plus.iter().zip(&v.plus).map(|(a, b)| a - b).collect();
    (x.mass.bilinear(&dm, &dm) + x.mass.bilinear(&dp, &dp)).sqrt()
}

/// ‖u⁺ − u⁻‖ in L²(Ω).
pub fn trace_gap(x: &XFactor, u: &LimitField) -> f64 {
    let d: Vec<f64> = u.plus.iter().zip(&u.minus).map(|(p, m)| p - m).collect();
    x.mass.bilinear(&d, &d).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

/// Smoothstep cutoff η⁻: 1 at ξ = −1, 0 on [−½, 1].
pub fn cutoff(side: Side, xi: f64) -> f64 {
    let s = match side {
        Side::Minus => 2.0 * (xi + 1.0),
        Side::Plus => 2.0 * (1.0 - xi),
    };
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        1.0 - 3.0 * s * s + 2.0 * s * s * s
    }
}

/// ũ(x) = J⁻¹∫u(x, ξ)η(ξ)dγ̃_ε(ξ) and J = ∫η dγ̃_ε, both with the ξ
/// quadrature of the mass matrix.
pub fn cutoff_average(forms: &FormMatrices, u: &Field, side: Side) -> Result<(Vec<f64>, f64)> {
    u.matches(&forms.grid)?;
    let pts = &forms.tensor.xi.points;
    let weights: Vec<f64> = pts.iter().map(|q| q.weight * cutoff(side, q.at)).collect();
    let j: f64 = weights.iter().sum();
    if !(j > 0.0) {
        return Err(Error::MassNotPositive("cutoff weight underflowed".into()));
    }
    let avg = (0..u.nx())
        .map(|i| {
            let f = u.fiber(i);
            let s: f64 = pts
                .iter()
                .zip(&weights)
                .map(|(q, w)| w * (q.left * f[q.cell] + q.right * f[q.cell + 1]))
                .sum();
            s / j
        })
        .collect();
    Ok((avg, j))
}

/// Margins of the two liminf inequalities on one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiminfMargins {
    /// a¹_ε(u) − (J⁻‖∇ũ⁻‖² + J⁺‖∇ũ⁺‖²).
    pub jensen: f64,
    /// a²_ε(u) − k_ε‖u⁺ − u⁻‖².
    pub fiber: f64,
}

impl LiminfMargins {
    pub fn hold(&self) -> bool {
        self.jensen >= -LIMINF_SLACK && self.fiber >= -LIMINF_SLACK
    }
}

pub fn liminf_margins(forms: &FormMatrices, u: &Field, k_eps: f64) -> Result<LiminfMargins> {
    let (a1, a2) = crate::forms::energy_split(forms, u)?;
    let kx = &forms.tensor.x.stiffness;
    let mut bound = 0.0;
    for side in [Side::Minus, Side::Plus] {
        let (avg, j) = cutoff_average(forms, u, side)?;
        bound += j * kx.bilinear(&avg, &avg);
    }
    let gap = trace_gap(&forms.tensor.x, &traces(u));
    Ok(LiminfMargins {
        jensen: a1 - bound,
        fiber: a2 - k_eps * gap * gap,
    })
}

/// Unweighted L² norm of ∂_ξu over Ω × {|ξ| ≥ δ}.
pub fn flattening_norm(forms: &FormMatrices, u: &Field, delta: f64) -> Result<f64> {
    u.matches(&forms.grid)?;
    let xi = forms.grid.xi();
    let mx = &forms.tensor.x.mass;
    let mut s = 0.0;
    for c in 0..xi.len() - 1 {
        if xi[c] >= delta || xi[c + 1] <= -delta {
            let d: Vec<f64> = u.row(c + 1).iter().zip(u.row(c)).map(|(a, b)| a - b).collect();
            s += mx.bilinear(&d, &d) / (xi[c + 1] - xi[c]);
        }
    }
    Ok(s.sqrt())
}

/// Ladder study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub profile: EnthalpyProfile,
    /// Unequal-well skew Δ; 0 for the symmetric problem.
    pub gap: f64,
    pub ladder: Vec<f64>,
    pub nx: usize,
    pub nxi: usize,
    pub grading: Grading,
    pub dt: f64,
    pub scheme: Scheme,
    pub solver: Solver,
    pub times: Vec<f64>,
    pub initial: InitialData,
    pub regime: Regime,
    /// Reaction rate of the limit system; defaults to `k_limit(profile)`.
    pub k: Option<f64>,
    /// Relative tolerance of the Gibbs quadratures.
    pub tol: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            profile: EnthalpyProfile::quartic(),
            gap: 0.0,
            ladder: vec![0.2, 0.1, 0.05],
            nx: 129,
            nxi: 161,
            grading: Grading::three_zone(),
            dt: 1e-3,
            scheme: Scheme::CnRannacher,
            solver: Solver::Auto,
            times: vec![0.1, 0.5, 1.0],
            initial: InitialData::default(),
            regime: Regime::Critical,
            k: None,
            tol: DEFAULT_TOL,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.ladder.is_empty() {
            return bad("ladder is empty".into());
        }
        for &e in &self.ladder {
            check_eps(e)?;
            if !(EPS_FLOOR..=1.0).contains(&e) {
                return bad(format!("ladder value {e} is outside [{EPS_FLOOR}, 1]"));
            }
        }
        if self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("ladder must be strictly decreasing".into());
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("sample times must be positive".into());
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("sample times must be strictly increasing".into());
        }
        if !self.gap.is_finite() {
            return bad("gap must be finite".into());
        }
        if !(self.tol > 0.0 && self.tol <= 1e-6) {
            return bad(format!("quadrature tolerance must lie in (0, 1e-6], got {}", self.tol));
        }
        if let Some(k) = self.k {
            if !(k >= 0.0 && k.is_finite()) {
                return bad(format!("k must be nonnegative, got {k}"));
            }
        }
        self.initial.validate()
    }

    pub fn t_end(&self) -> f64 {
        self.times.iter().copied().fold(0.0, f64::max)
    }

    /// The limit reaction rate k.
    pub fn rate(&self) -> Result<f64> {
        match self.k {
            Some(k) => Ok(k),
            None => k_limit(&self.profile),
        }
    }

    fn grid(&self) -> Result<Grid> {
        build_grid(self.nx, self.nxi, self.grading)
    }

    fn options(&self) -> SolveOptions {
        let mut samples = vec![0.0];
        samples.extend(&self.times);
        SolveOptions::new(self.dt, self.t_end())
            .scheme(self.scheme)
            .solver(self.solver)
            .samples(&samples)
    }
}

/// What the ε-traces are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// The limit system with reaction rate k.
    Coupled { k: f64 },
    /// k = 0: independent heat equations.
    Decoupled,
    /// Both species follow the heat equation from the weighted mean.
    Averaged,
}

/// Limit-side values at a sampled time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSample {
    pub t: f64,
    pub b: f64,
    pub a_grad: f64,
    pub a_react: f64,
    pub pairings: Vec<f64>,
    pub observables: Vec<f64>,
    #[serde(skip)]
    pub field: LimitField,
}

/// ε-side values at a sampled time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSample {
    pub t: f64,
    pub trace_error: f64,
    pub trace_gap: f64,
    pub pairing_errors: Vec<f64>,
    pub b: f64,
    pub a1: f64,
    pub a2: f64,
    pub b_error: f64,
    pub a_error: f64,
    /// |a²_ε(u_ε) − κ‖u⁺ − u⁻‖²| against the reference reaction term.
    pub a2_error: f64,
    pub observables: Vec<f64>,
    pub observable_errors: Vec<f64>,
    pub liminf: LiminfMargins,
    pub flattening: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRow {
    pub eps: f64,
    pub k_eps: f64,
    pub q_eps: f64,
    /// k_ε at the critical scaling, for the effective-rate ratio.
    pub k_eps_critical: f64,
    pub j_minus: f64,
    pub j_plus: f64,
    pub max_mass_drift: f64,
    pub samples: Vec<EpsSample>,
    pub failure: Option<String>,
}

impl LadderRow {
    fn failed(eps: f64, reason: String) -> Self {
        Self {
            eps,
            k_eps: f64::NAN,
            q_eps: f64::NAN,
            k_eps_critical: f64::NAN,
            j_minus: f64::NAN,
            j_plus: f64::NAN,
            max_mass_drift: f64::NAN,
            samples: Vec::new(),
            failure: Some(reason),
        }
    }

    pub fn sample(&self, t: f64) -> Option<&EpsSample> {
        self.samples.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub block: String,
    pub name: String,
    pub passed: bool,
    /// The checked sequence along the ladder.
    pub values: Vec<f64>,
}

/// Sequence decreases along the ladder, up to [`NOISE_FLOOR`].
pub fn decreasing(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
        && values.windows(2).all(|w| w[1] < w[0] || w[1] <= NOISE_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub regime: Regime,
    pub gap: f64,
    pub ladder: Vec<f64>,
    pub times: Vec<f64>,
    pub k: f64,
    pub reference: Reference,
    pub dictionary: Vec<String>,
    pub observables: Vec<String>,
    pub reference_samples: Vec<ReferenceSample>,
    pub rows: Vec<LadderRow>,
    pub checks: Vec<Check>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn block(&self, block: &str) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.block == block).collect()
    }

    pub fn reference_at(&self, t: f64) -> Option<&ReferenceSample> {
        self.reference_samples.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.max(1.0))
    }

    /// Ladder sequence of a sample column at time t; None if any row lacks it.
    pub fn column<F: Fn(&EpsSample) -> f64>(&self, t: f64, f: F) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.sample(t).map(&f)).collect()
    }
}

fn reference_forms(cfg: &StudyConfig, x: &[f64]) -> Result<(LimitForms, Reference)> {
    Ok(match cfg.regime {
        Regime::Critical => {
            let k = cfg.rate()?;
            (assemble_limit_skewed(x, k, cfg.gap)?, Reference::Coupled { k })
        }
        Regime::Sub => (assemble_limit_skewed(x, 0.0, cfg.gap)?, Reference::Decoupled),
        Regime::Super => (assemble_limit_skewed(x, 0.0, cfg.gap)?, Reference::Averaged),
    })
}

fn reference_run(cfg: &StudyConfig, forms: &LimitForms, u0: &LimitField) -> Result<Vec<ReferenceSample>> {
    let start = match cfg.regime {
        Regime::Super => {
            let w = forms.weights;
            let mean: Vec<f64> = u0
                .minus
                .iter()
                .zip(&u0.plus)
                .map(|(m, p)| (w.minus * m + w.plus * p) / w.total())
                .collect();
            LimitField::new(mean.clone(), mean)?
        }
        _ => u0.clone(),
    };
    let traj = solve_limit(forms, &start, &cfg.options())?;
    let dict = TestFunction::dictionary();
    traj.snapshots
        .iter()
        .map(|s| {
            let u = &s.field;
            let (a_grad, a_react) = forms.a_split(u)?;
            Ok(ReferenceSample {
                t: s.t,
                b: forms.b(u, u)?,
                a_grad,
                a_react,
                pairings: dict
                    .iter()
                    .map(|f| crate::forms::pair_limit(forms, u, |x, xi| f.eval(x, xi)))
                    .collect::<Result<_>>()?,
                observables: Observable::all()
                    .iter()
                    .map(|&f| limit_observable(forms, u, f))
                    .collect::<Result<_>>()?,
                field: u.clone(),
            })
        })
        .collect()
}

fn ladder_row(
    cfg: &StudyConfig,
    eps: f64,
    u0: &LimitField,
    reference: &[ReferenceSample],
) -> Result<LadderRow> {
    let grid = cfg.grid()?;
    let gibbs = GibbsMeasure::with_options(&cfg.profile, cfg.gap, eps, cfg.tol)?;
    let scale = TimeScale::new(cfg.regime);
    let forms = assemble_with(&grid, &gibbs, &scale)?;
    let costs = TransitionCosts::new(&gibbs, &scale)?;
    let phi = TransitionProfile::new(&gibbs, grid.xi())?;
    let start = lift(u0, &phi, &grid)?;
    let traj = solve(&forms, &start, &cfg.options())?;
    let mass = traj.mass();
    let max_mass_drift = mass.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let dict = TestFunction::dictionary();
    let x = &forms.tensor.x;
    let mut samples = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        let u = &snap.field;
        let r = reference
            .iter()
            .find(|s| (s.t - snap.t).abs() <= 1e-12 * snap.t.max(1.0))
            .ok_or_else(|| Error::InvalidArgument(format!("no reference sample at t = {}", snap.t)))?;
        let tr = traces(u);
        let (a1, a2) = crate::forms::energy_split(&forms, u)?;
        let b = crate::forms::b_form(&forms, u, u)?;
        let pairing_errors = dict
            .iter()
            .zip(&r.pairings)
            .map(|(f, lim)| Ok((crate::forms::pair_measure(&forms, u, |x, xi| f.eval(x, xi))? - lim).abs()))
            .collect::<Result<Vec<_>>>()?;
        let observables = Observable::all()
            .iter()
            .map(|&f| nonlinear_observable(&forms, u, f))
            .collect::<Result<Vec<_>>>()?;
        let observable_errors = observables.iter().zip(&r.observables).map(|(a, b)| (a - b).abs()).collect();
        samples.push(EpsSample {
            t: snap.t,
            trace_error: trace_error(x, &tr, &r.field),
            trace_gap: trace_gap(x, &tr),
            pairing_errors,
            b,
            a1,
            a2,
            b_error: (b - r.b).abs(),
            a_error: (a1 + a2 - r.a_grad - r.a_react).abs(),
            a2_error: (a2 - r.a_react).abs(),
            observables,
            observable_errors,
            liminf: liminf_margins(&forms, u, costs.k_eps)?,
            flattening: flattening_norm(&forms, u, FLATTENING_DELTA)?,
        });
    }
    let (_, j_minus) = cutoff_average(&forms, &start, Side::Minus)?;
    let (_, j_plus) = cutoff_average(&forms, &start, Side::Plus)?;
    Ok(LadderRow {
        eps,
        k_eps: costs.k_eps,
        q_eps: costs.q_eps,
        k_eps_critical: gibbs.transition_rate(&TimeScale::critical()),
        j_minus,
        j_plus,
        max_mass_drift,
        samples,
        failure: None,
    })
}

/// Runs the ladder and assembles the report with its checks.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let x = uniform_x(cfg.nx);
    let u0 = cfg.initial.traces(&x)?;
    let (limit, reference) = reference_forms(cfg, &x)?;
    let reference_samples = reference_run(cfg, &limit, &u0)?;
    let rows: Vec<LadderRow> = cfg
        .ladder
        .par_iter()
        .map(|&eps| {
            ladder_row(cfg, eps, &u0, &reference_samples)
                .unwrap_or_else(|e| LadderRow::failed(eps, e.to_string()))
        })
        .collect();
    let mut report = ConvergenceReport {
        regime: cfg.regime,
        gap: cfg.gap,
        ladder: cfg.ladder.clone(),
        times: cfg.times.clone(),
        k: k_limit(&cfg.profile)?,
        reference,
        dictionary: TestFunction::dictionary().iter().map(|f| f.name()).collect(),
        observables: Observable::all().iter().map(|f| f.name().to_string()).collect(),
        reference_samples,
        rows,
        checks: Vec::new(),
    };
    report.checks = study_checks(&report);
    Ok(report)
}

fn push_decreasing(checks: &mut Vec<Check>, block: &str, name: String, values: Option<Vec<f64>>) {
    let passed = values.as_deref().is_some_and(decreasing);
    checks.push(Check {
        block: block.into(),
        name,
        passed,
        values: values.unwrap_or_default(),
    });
}

fn study_checks(r: &ConvergenceReport) -> Vec<Check> {
    let mut checks = Vec::new();
    for row in &r.rows {
        if let Some(reason) = &row.failure {
            checks.push(Check {
                block: "ladder".into(),
                name: format!("eps {} failed: {reason}", row.eps),
                passed: false,
                values: vec![row.eps],
            });
        }
    }
    let finite = r.rows.iter().flat_map(|row| &row.samples).all(|s| {
        [s.trace_error, s.trace_gap, s.b, s.a1, s.a2, s.flattening]
            .iter()
            .chain(&s.pairing_errors)
            .chain(&s.observables)
            .all(|v| v.is_finite())
    });
    checks.push(Check {
        block: "ladder".into(),
        name: "all entries finite".into(),
        passed: finite,
        values: Vec::new(),
    });
    let all_t = std::iter::once(0.0).chain(r.times.iter().copied());
    let margins: Vec<LiminfMargins> = r
        .rows
        .iter()
        .flat_map(|row| row.samples.iter().map(|s| s.liminf))
        .collect();
    checks.push(Check {
        block: "liminf".into(),
        name: "Jensen bound for a1 on every state".into(),
        passed: margins.iter().all(|m| m.jensen >= -LIMINF_SLACK),
        values: margins.iter().map(|m| m.jensen).collect(),
    });
    checks.push(Check {
        block: "liminf".into(),
        name: "fiber bound a2 >= k_eps |u+ - u-|^2 on every state".into(),
        passed: margins.iter().all(|m| m.fiber >= -LIMINF_SLACK),
        values: margins.iter().map(|m| m.fiber).collect(),
    });
    let dist = |row: &LadderRow| (row.j_minus - 0.5).abs().max((row.j_plus - 0.5).abs());
    push_decreasing(
        &mut checks,
        "traces",
        "cutoff mass J -> 1/2".into(),
        Some(r.rows.iter().map(dist).collect()),
    );
    for &t in &r.times {
        if (t - 0.5).abs() < 1e-12 {
            push_decreasing(
                &mut checks,
                "traces",
                format!("d/dxi flattening away from the barrier at t = {t}"),
                r.column(t, |s| s.flattening),
            );
        }
    }
    match r.regime {
        Regime::Critical => {
            for t in all_t {
                for (i, name) in r.dictionary.iter().enumerate() {
                    push_decreasing(
                        &mut checks,
                        "theorem1",
                        format!("pairing {name} at t = {t}"),
                        r.column(t, |s| s.pairing_errors[i]),
                    );
                }
                push_decreasing(
                    &mut checks,
                    "theorem1",
                    format!("trace L2 error at t = {t}"),
                    r.column(t, |s| s.trace_error),
                );
            }
            for &t in &r.times {
                push_decreasing(&mut checks, "theorem2", format!("|b_eps - b| at t = {t}"), r.column(t, |s| s.b_error));
                push_decreasing(&mut checks, "theorem2", format!("|a_eps - a| at t = {t}"), r.column(t, |s| s.a_error));
                for (i, name) in r.observables.iter().enumerate() {
                    push_decreasing(
                        &mut checks,
                        "corollary",
                        format!("observable {name} at t = {t}"),
                        r.column(t, |s| s.observable_errors[i]),
                    );
                }
            }
        }
        Regime::Sub => {
            let ratio: Vec<f64> = r
                .rows
                .iter()
                .map(|row| (row.k_eps / (row.eps * row.k_eps_critical) - 1.0).abs())
                .collect();
            checks.push(Check {
                block: "regime".into(),
                name: "effective rate equals eps * k_eps".into(),
                passed: ratio.iter().all(|v| *v <= 1e-12),
                values: ratio,
            });
            push_decreasing(
                &mut checks,
                "regime",
                "effective rate -> 0".into(),
                Some(r.rows.iter().map(|row| row.k_eps).collect()),
            );
            for &t in &r.times {
                push_decreasing(
                    &mut checks,
                    "regime",
                    format!("trace error to decoupled diffusion at t = {t}"),
                    r.column(t, |s| s.trace_error),
                );
            }
        }
        Regime::Super => {
            for &t in &r.times {
                push_decreasing(&mut checks, "regime", format!("trace gap at t = {t}"), r.column(t, |s| s.trace_gap));
                push_decreasing(
                    &mut checks,
                    "regime",
                    format!("trace error to averaged diffusion at t = {t}"),
                    r.column(t, |s| s.trace_error),
                );
            }
        }
    }
    checks
}

/// Critical study: the ladder against the coupled limit.
pub fn theorem1_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let cfg = StudyConfig {
        regime: Regime::Critical,
        ..cfg.clone()
    };
    run_study(&cfg)
}

/// Per-ε rows of the form errors at the sampled times t > 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Table {
    pub ladder: Vec<f64>,
    pub times: Vec<f64>,
    /// b_error[ε][t].
    pub b_error: Vec<Vec<f64>>,
    pub a_error: Vec<Vec<f64>>,
    /// a²_ε(u_ε(t)) and the reaction term κ‖u⁺ − u⁻‖² of the limit.
    pub a2: Vec<Vec<f64>>,
    pub reaction: Vec<f64>,
    pub checks: Vec<Check>,
}

impl Theorem2Table {
    pub fn from_report(r: &ConvergenceReport) -> Self {
        let grab = |f: fn(&EpsSample) -> f64| -> Vec<Vec<f64>> {
            r.rows
                .iter()
                .map(|row| r.times.iter().map(|&t| row.sample(t).map_or(f64::NAN, f)).collect())
                .collect()
        };
        Self {
            ladder: r.ladder.clone(),
            times: r.times.clone(),
            b_error: grab(|s| s.b_error),
            a_error: grab(|s| s.a_error),
            a2: grab(|s| s.a2),
            reaction: r
                .times
                .iter()
                .map(|&t| r.reference_at(t).map_or(f64::NAN, |s| s.a_react))
                .collect(),
            checks: r.block("theorem2").into_iter().cloned().collect(),
        }
    }
}

pub fn theorem2_study(cfg: &StudyConfig) -> Result<Theorem2Table> {
    Ok(Theorem2Table::from_report(&theorem1_study(cfg)?))
}

/// The ladder under the given τ_ε scaling.
pub fn regime_study(regime: Regime, cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let cfg = StudyConfig { regime, ..cfg.clone() };
    run_study(&cfg)
}

/// Recovery-sequence values for one pair and one ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimsupRow {
    pub pair: usize,
    pub eps: f64,
    pub b_eps: f64,
    pub a1_eps: f64,
    pub a2_eps: f64,
    pub b: f64,
    pub a: f64,
    pub b_error: f64,
    pub a_error: f64,
}

/// a_ε(lift(0, 1)) on the transition grid against the closed-form k_ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftCost {
    pub eps: f64,
    pub a_lift: f64,
    pub k_eps: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimsupReport {
    pub pairs: Vec<InitialData>,
    pub rows: Vec<LimsupRow>,
    pub lift_costs: Vec<LiftCost>,
    pub checks: Vec<Check>,
}

impl LimsupReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Ladder rows of one pair.
    pub fn pair_rows(&self, pair: usize) -> Vec<&LimsupRow> {
        self.rows.iter().filter(|r| r.pair == pair).collect()
    }
}

/// The three recovery pairs: constants (0, 1), single cosine (0, cos πx)
/// and mixed (cos πx, 1 + cos πx).
pub fn limsup_pairs() -> Vec<InitialData> {
    vec![
        InitialData::Constants { minus: 0.0, plus: 1.0 },
        InitialData::Cosine {
            mean_minus: 0.0,
            mean_plus: 0.0,
            amplitude_minus: 0.0,
            amplitude_plus: 1.0,
            mode: 1,
        },
        InitialData::default(),
    ]
}

/// b_ε(lift) → b and a_ε(lift) → a along the ladder at the critical scaling.
pub fn gamma_limsup_check(cfg: &StudyConfig, pairs: &[InitialData]) -> Result<LimsupReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let x = grid.x().to_vec();
    let k = cfg.rate()?;
    let limit = assemble_limit_skewed(&x, k, cfg.gap)?;
    let traces0: Vec<LimitField> = pairs.iter().map(|p| p.traces(&x)).collect::<Result<_>>()?;
    let per_eps: Vec<Result<(Vec<LimsupRow>, LiftCost)>> = cfg
        .ladder
        .par_iter()
        .map(|&eps| {
            let gibbs = GibbsMeasure::with_options(&cfg.profile, cfg.gap, eps, cfg.tol)?;
            let scale = TimeScale::critical();
            let forms = assemble_with(&grid, &gibbs, &scale)?;
            let phi = TransitionProfile::new(&gibbs, grid.xi())?;
            let mut rows = Vec::new();
            for (i, tr) in traces0.iter().enumerate() {
                let u = lift(tr, &phi, &grid)?;
                let (a1, a2) = crate::forms::energy_split(&forms, &u)?;
                let b_eps = crate::forms::b_form(&forms, &u, &u)?;
                let b = limit.b(tr, tr)?;
                let a = limit.a(tr, tr)?;
                rows.push(LimsupRow {
                    pair: i,
                    eps,
                    b_eps,
                    a1_eps: a1,
                    a2_eps: a2,
                    b,
                    a,
                    b_error: (b_eps - b).abs(),
                    a_error: (a1 + a2 - a).abs(),
                });
            }
            let fine = Grid::from_nodes(uniform_x(5), transition_grid(), grid.order())?;
            let f = assemble_with(&fine, &gibbs, &scale)?;
            let p = TransitionProfile::new(&gibbs, fine.xi())?;
            let u = lift(&LimitField::constant(5, 0.0, 1.0), &p, &fine)?;
            let a_lift = crate::forms::a_form(&f, &u, &u)?;
            let k_eps = gibbs.transition_rate(&scale);
            Ok((
                rows,
                LiftCost {
                    eps,
                    a_lift,
                    k_eps,
                    relative: (a_lift / k_eps - 1.0).abs(),
                },
            ))
        })
        .collect();
    let mut rows = Vec::new();
    let mut lift_costs = Vec::new();
    for r in per_eps {
        let (r, c) = r?;
        rows.extend(r);
        lift_costs.push(c);
    }
    rows.sort_by(|a, b| a.pair.cmp(&b.pair).then(b.eps.total_cmp(&a.eps)));
    let mut checks = Vec::new();
    for i in 0..pairs.len() {
        let pr: Vec<&LimsupRow> = rows.iter().filter(|r| r.pair == i).collect();
        push_decreasing(&mut checks, "limsup", format!("pair {i}: |b_eps - b|"), Some(pr.iter().map(|r| r.b_error).collect()));
        push_decreasing(&mut checks, "limsup", format!("pair {i}: |a_eps - a|"), Some(pr.iter().map(|r| r.a_error).collect()));
    }
    checks.push(Check {
        block: "limsup".into(),
        name: "a_eps(lift(0, 1)) = k_eps".into(),
        passed: lift_costs.iter().all(|c| c.relative <= LIFT_COST_TOL),
        values: lift_costs.iter().map(|c| c.relative).collect(),
    });
    Ok(LimsupReport {
        pairs: pairs.to_vec(),
        rows,
        lift_costs,
        checks,
    })
}
