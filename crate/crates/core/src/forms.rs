//! Weighted Galerkin forms on the tensor grid and the limit forms.
//!
//! With piecewise-bilinear elements and a weight that depends on ξ only,
//! every ε-form is a Kronecker product of 1D factors:
//!
//! * b_ε  = M_x ⊗ M_ξ        (M_ξ weighted by γ̃_ε)
//! * a¹_ε = K_x ⊗ M_ξ
//! * a²_ε = M_x ⊗ S_ξ        (S_ξ weighted by τ_ε γ̃_ε)
//!
//! The stiffness factors K_x and S_ξ are kept as cell conductances, so that
//! quadratic forms are sums of κ_c (Δu)² and never cancel.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enthalpy::EnthalpyProfile;
use crate::error::{Error, Result};
use crate::gibbs::{GibbsMeasure, LimitMeasure, TimeScale};
use crate::grid::{Field, Grid, LimitField};
use crate::quadrature::GaussRule;
use crate::sparse::Csr;

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j] * v[j];
                if j > 0 {
                    s += self.off[j - 1] * v[j - 1];
                }
                if j + 1 < n {
                    s += self.off[j] * v[j + 1];
                }
                s
            })
            .collect()
    }

    /// uᵀ T v, written so that swapping u and v gives the same bits.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n() {
            s += self.diag[j] * (u[j] * v[j]);
        }
        for j in 0..self.off.len() {
            s += self.off[j] * (u[j] * v[j + 1] + u[j + 1] * v[j]);
        }
        s
    }

    pub fn to_csr(&self) -> Csr {
        Csr::tridiagonal(&self.diag, &self.off)
    }

    /// LDLᵀ pivots; all positive iff the matrix is positive definite.
    pub fn pivots(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.n());
        for j in 0..self.n() {
            let p = if j == 0 {
                self.diag[0]
            } else {
                self.diag[j] - self.off[j - 1] * self.off[j - 1] / d[j - 1]
            };
            d.push(p);
        }
        d
    }
}

/// Stiffness Σ_c κ_c (u_{c+1} − u_c)(v_{c+1} − v_c) of a 1D P1 space.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductance {
    pub kappa: Vec<f64>,
}

impl Conductance {
    pub fn nodes(&self) -> usize {
        self.kappa.len() + 1
    }

    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        self.kappa
            .iter()
            .enumerate()
            .map(|(c, k)| k * ((u[c + 1] - u[c]) * (v[c + 1] - v[c])))
            .sum()
    }

    /// S v in flux form: (Sv)_j = F_{j−1} − F_j with F_c = κ_c (v_{c+1} − v_c).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes()];
        for (c, k) in self.kappa.iter().enumerate() {
            let f = k * (v[c + 1] - v[c]);
            out[c] -= f;
            out[c + 1] += f;
        }
        out
    }

    pub fn to_tridiag(&self) -> SymTridiag {
        let n = self.nodes();
        let mut diag = vec![0.0; n];
        for (c, k) in self.kappa.iter().enumerate() {
            diag[c] += k;
            diag[c + 1] += k;
        }
        SymTridiag {
            diag,
            off: self.kappa.iter().map(|k| -k).collect(),
        }
    }
}

/// One quadrature point of a 1D cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub cell: usize,
    pub at: f64,
    /// Values of the left and right hat functions of the cell.
    pub left: f64,
    pub right: f64,
    /// Gauss weight times the measure density.
    pub weight: f64,
}

/// Mass matrix and quadrature points of a P1 space against `density`.
fn weighted_factor<F: Fn(f64) -> f64>(
    nodes: &[f64],
    rule: &GaussRule,
    density: F,
) -> (SymTridiag, Vec<QuadPoint>) {
    let n = nodes.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    let mut points = Vec::with_capacity((n - 1) * rule.nodes.len());
    for c in 0..n - 1 {
        let (a, b) = (nodes[c], nodes[c + 1]);
        let h = b - a;
        for (t, w) in rule.mapped(a, b) {
            let right = (t - a) / h;
            let left = (b - t) / h;
            let weight = w * density(t);
            diag[c] += weight * left * left;
            diag[c + 1] += weight * right * right;
            off[c] += weight * left * right;
            points.push(QuadPoint {
                cell: c,
                at: t,
                left,
                right,
                weight,
            });
        }
    }
    (SymTridiag { diag, off }, points)
}

/// Lebesgue P1 factor on the x nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct XFactor {
    pub nodes: Vec<f64>,
    pub mass: SymTridiag,
    pub stiffness: Conductance,
    pub points: Vec<QuadPoint>,
}

impl XFactor {
    pub fn new(nodes: &[f64], order: usize) -> Self {
        let rule = GaussRule::new(order);
        let (mass, points) = weighted_factor(nodes, &rule, |_| 1.0);
        let kappa = nodes.windows(2).map(|w| 1.0 / (w[1] - w[0])).collect();
        Self {
            nodes: nodes.to_vec(),
            mass,
            stiffness: Conductance { kappa },
            points,
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// ∫ f(x, u_h(x)) dx for a nodal function u.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, u: &[f64], f: F) -> f64 {
        self.points
            .iter()
            .map(|p| p.weight * f(p.at, p.left * u[p.cell] + p.right * u[p.cell + 1]))
            .sum()
    }
}

/// γ̃_ε-weighted P1 factor on the ξ nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct XiFactor {
    pub nodes: Vec<f64>,
    pub mass: SymTridiag,
    /// τ_ε γ̃_ε-weighted stiffness.
    pub stiffness: Conductance,
    pub points: Vec<QuadPoint>,
    /// Cells in which every mass quadrature weight underflowed to zero.
    pub underflow: Vec<usize>,
}

impl XiFactor {
    pub fn new(nodes: &[f64], order: usize, gibbs: &GibbsMeasure, scale: &TimeScale) -> Result<Self> {
        let rule = GaussRule::new(order);
        let (mass, points) = weighted_factor(nodes, &rule, |t| gibbs.density(t));
        let kappa: Vec<f64> = nodes
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                let s: f64 = rule
                    .mapped(w[0], w[1])
                    .map(|(t, q)| q * gibbs.log_scaled_density(scale, t).exp())
                    .sum();
                s / (h * h)
            })
            .collect();
        let underflow: Vec<usize> = (0..nodes.len() - 1)
            .filter(|&c| points.iter().filter(|p| p.cell == c).all(|p| p.weight == 0.0))
            .collect();
        if let Some(j) = mass.pivots().iter().position(|p| !(*p > 0.0)) {
            return Err(Error::MassNotPositive(format!(
                "ξ mass pivot {j} is not positive ({} underflowed cells)",
                underflow.len()
            )));
        }
        if kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidArgument(
                "ξ stiffness overflowed; ε is below the supported range".into(),
            ));
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            mass,
            stiffness: Conductance { kappa },
            points,
            underflow,
        })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }
}

/// Evaluates Σ_{i,i'} X_{ii'} B(u_i, v_{i'}) over ξ-fibers.
fn tensor_sum<B>(x: &SymTridiag, nxi: usize, u: &[f64], v: &[f64], b: B) -> f64
where
    B: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let nx = x.n();
    let fiber = |w: &[f64], i: usize| -> Vec<f64> { w[i * nxi..(i + 1) * nxi].to_vec() };
    let parts: Vec<f64> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let (ui, vi) = (fiber(u, i), fiber(v, i));
            let mut s = x.diag[i] * b(&ui, &vi);
            if i + 1 < nx {
                let (un, vn) = (fiber(u, i + 1), fiber(v, i + 1));
                s += x.off[i] * (b(&ui, &vn) + b(&un, &vi));
            }
            s
        })
        .collect();
    parts.iter().sum()
}

/// The 1D factors of the ε-forms.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorForms {
    pub x: XFactor,
    pub xi: XiFactor,
}

impl TensorForms {
    pub fn nx(&self) -> usize {
        self.x.n()
    }

    pub fn nxi(&self) -> usize {
        self.xi.n()
    }

    pub fn b(&self, u: &[f64], v: &[f64]) -> f64 {
        tensor_sum(&self.x.mass, self.nxi(), u, v, |p, q| self.xi.mass.bilinear(p, q))
    }

    pub fn a1(&self, u: &[f64], v: &[f64]) -> f64 {
        let nxi = self.nxi();
        let parts: Vec<f64> = self
            .x
            .stiffness
            .kappa
            .par_iter()
            .enumerate()
            .map(|(c, k)| {
                let du: Vec<f64> = (0..nxi).map(|j| u[(c + 1) * nxi + j] - u[c * nxi + j]).collect();
                let dv: Vec<f64> = (0..nxi).map(|j| v[(c + 1) * nxi + j] - v[c * nxi + j]).collect();
                k * self.xi.mass.bilinear(&du, &dv)
            })
            .collect();
        parts.iter().sum()
    }

    pub fn a2(&self, u: &[f64], v: &[f64]) -> f64 {
        tensor_sum(&self.x.mass, self.nxi(), u, v, |p, q| self.xi.stiffness.bilinear(p, q))
    }

    /// Σ_q f(x_q, ξ_q, u_h(x_q, ξ_q)) w_q over the tensor quadrature of γ_ε.
    pub fn integrate<F>(&self, u: &[f64], f: F) -> f64
    where
        F: Fn(f64, f64, f64) -> f64 + Sync,
    {
        let nxi = self.nxi();
        let xp = &self.x.points;
        let parts: Vec<f64> = xp
            .par_iter()
            .map(|px| {
                let (i0, i1) = (px.cell * nxi, (px.cell + 1) * nxi);
                let s: f64 = self
                    .xi
                    .points
                    .iter()
                    .map(|q| {
                        let (j0, j1) = (q.cell, q.cell + 1);
                        let val = px.left * (q.left * u[i0 + j0] + q.right * u[i0 + j1])
                            + px.right * (q.left * u[i1 + j0] + q.right * u[i1 + j1]);
                        q.weight * f(px.at, q.at, val)
                    })
                    .sum();
                px.weight * s
            })
            .collect();
        parts.iter().sum()
    }
}

/// Assembled ε-forms: the tensor factors and the sparse matrices they define.
#[derive(Debug, Clone)]
pub struct FormMatrices {
    pub grid: Grid,
    pub eps: f64,
    pub scale: TimeScale,
    pub tensor: TensorForms,
    pub m: Csr,
    pub a1: Csr,
    pub a2: Csr,
    pub a: Csr,
}

impl FormMatrices {
    pub fn underflow_cells(&self) -> &[usize] {
        &self.tensor.xi.underflow
    }

    fn check(&self, u: &Field) -> Result<()> {
        u.matches(&self.grid)
    }
}

/// Assembles the ε-forms of `gibbs` at the time scale `scale`.
pub fn assemble_with(grid: &Grid, gibbs: &GibbsMeasure, scale: &TimeScale) -> Result<FormMatrices> {
    let tensor = TensorForms {
        x: XFactor::new(grid.x(), grid.order()),
        xi: XiFactor::new(grid.xi(), grid.order(), gibbs, scale)?,
    };
    let mx = tensor.x.mass.to_csr();
    let kx = tensor.x.stiffness.to_tridiag().to_csr();
    let mxi = tensor.xi.mass.to_csr();
    let sxi = tensor.xi.stiffness.to_tridiag().to_csr();
    let m = Csr::kron(&mx, &mxi);
    let a1 = Csr::kron(&kx, &mxi);
    let a2 = Csr::kron(&mx, &sxi);
    let a = a1.combine(1.0, &a2, 1.0);
    Ok(FormMatrices {
        grid: grid.clone(),
        eps: gibbs.eps(),
        scale: *scale,
        tensor,
        m,
        a1,
        a2,
        a,
    })
}

/// Assembles the ε-forms for the critical time scale τ_ε = ε e^{1/ε}.
pub fn assemble(grid: &Grid, profile: &EnthalpyProfile, eps: f64) -> Result<FormMatrices> {
    assemble_with(grid, &GibbsMeasure::new(profile, eps)?, &TimeScale::critical())
}

/// b_ε(u, v).
pub fn b_form(forms: &FormMatrices, u: &Field, v: &Field) -> Result<f64> {
    forms.check(u)?;
    forms.check(v)?;
    Ok(forms.tensor.b(u.values(), v.values()))
}

/// a_ε(u, v) = a¹_ε(u, v) + a²_ε(u, v).
pub fn a_form(forms: &FormMatrices, u: &Field, v: &Field) -> Result<f64> {
    forms.check(u)?;
    forms.check(v)?;
    let (p, q) = (u.values(), v.values());
    Ok(forms.tensor.a1(p, q) + forms.tensor.a2(p, q))
}

/// (a¹_ε(u), a²_ε(u)).
pub fn energy_split(forms: &FormMatrices, u: &Field) -> Result<(f64, f64)> {
    forms.check(u)?;
    let p = u.values();
    Ok((forms.tensor.a1(p, p), forms.tensor.a2(p, p)))
}

/// ∫ u φ dγ_ε.
pub fn pair_measure<F>(forms: &FormMatrices, u: &Field, phi: F) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    forms.check(u)?;
    Ok(forms.tensor.integrate(u.values(), |x, xi, r| r * phi(x, xi)))
}

/// ∫ f(x, ξ, u) dγ_ε.
pub fn integrate_field<F>(forms: &FormMatrices, u: &Field, f: F) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    forms.check(u)?;
    Ok(forms.tensor.integrate(u.values(), f))
}

/// The limit forms over pairs (u⁻, u⁺):
/// b = π⁻∫u⁻v⁻ + π⁺∫u⁺v⁺ and
/// a = π⁻∫∇u⁻·∇v⁻ + π⁺∫∇u⁺·∇v⁺ + κ∫(u⁺ − u⁻)(v⁺ − v⁻).
///
/// The symmetric system has π± = ½ and κ = k/2.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitForms {
    pub x: XFactor,
    pub weights: LimitMeasure,
    pub coupling: f64,
}

/// Limit forms with reaction rate k.
pub fn assemble_limit(x: &[f64], k: f64) -> Result<LimitForms> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate k must be nonnegative, got {k}")));
    }
    Ok(LimitForms {
        x: XFactor::new(x, crate::grid::DEFAULT_ORDER),
        weights: LimitMeasure::symmetric(),
        coupling: 0.5 * k,
    })
}

/// Limit forms for ∂_t u⁻ = Δu⁻ + k⁺(u⁺ − u⁻), ∂_t u⁺ = Δu⁺ + k⁻(u⁻ − u⁺).
pub fn assemble_limit_rates(x: &[f64], k_plus: f64, k_minus: f64) -> Result<LimitForms> {
    if !(k_plus > 0.0 && k_minus > 0.0 && k_plus.is_finite() && k_minus.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rates must be positive, got k⁺ = {k_plus}, k⁻ = {k_minus}"
        )));
    }
    let total = k_plus + k_minus;
    if k_plus == k_minus {
        return assemble_limit(x, k_plus);
    }
    Ok(LimitForms {
        x: XFactor::new(x, crate::grid::DEFAULT_ORDER),
        weights: LimitMeasure {
            minus: k_minus / total,
            plus: k_plus / total,
        },
        coupling: k_plus * k_minus / total,
    })
}

/// Limit forms for the unequal-well skew Δ with k⁻/k⁺ = e^{Δ} and
/// √(k⁺k⁻) = k; k = 0 gives the decoupled skew-weighted heat equations.
pub fn assemble_limit_skewed(x: &[f64], k: f64, gap: f64) -> Result<LimitForms> {
    if gap == 0.0 || k == 0.0 {
        let mut forms = assemble_limit(x, k)?;
        forms.weights = LimitMeasure::skewed(gap);
        return Ok(forms);
    }
    assemble_limit_rates(x, k * (-0.5 * gap).exp(), k * (0.5 * gap).exp())
}

impl LimitForms {
    pub fn n(&self) -> usize {
        self.x.n()
    }

    fn check(&self, u: &LimitField) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::ShapeMismatch {
                what: "limit field",
                expected: self.n(),
                found: u.len(),
            });
        }
        Ok(())
    }

    pub fn b(&self, u: &LimitField, v: &LimitField) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let m = &self.x.mass;
        Ok(self.weights.minus * m.bilinear(&u.minus, &v.minus)
            + self.weights.plus * m.bilinear(&u.plus, &v.plus))
    }

    /// (gradient part, reaction part) of a(u, u).
    pub fn a_split(&self, u: &LimitField) -> Result<(f64, f64)> {
        self.check(u)?;
        let k = &self.x.stiffness;
        let grad = self.weights.minus * k.bilinear(&u.minus, &u.minus)
            + self.weights.plus * k.bilinear(&u.plus, &u.plus);
        let d: Vec<f64> = u.plus.iter().zip(&u.minus).map(|(p, m)| p - m).collect();
        Ok((grad, self.coupling * self.x.mass.bilinear(&d, &d)))
    }

    pub fn a(&self, u: &LimitField, v: &LimitField) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let k = &self.x.stiffness;
        let du: Vec<f64> = u.plus.iter().zip(&u.minus).map(|(p, m)| p - m).collect();
        let dv: Vec<f64> = v.plus.iter().zip(&v.minus).map(|(p, m)| p - m).collect();
        Ok(self.weights.minus * k.bilinear(&u.minus, &v.minus)
            + self.weights.plus * k.bilinear(&u.plus, &v.plus)
            + self.coupling * self.x.mass.bilinear(&du, &dv))
    }

    /// π⁻∫u⁻ + π⁺∫u⁺.
    pub fn mass(&self, u: &LimitField) -> Result<f64> {
        self.check(u)?;
        let ones = vec![1.0; self.n()];
        let m = &self.x.mass;
        Ok(self.weights.minus * m.bilinear(&u.minus, &ones)
            + self.weights.plus * m.bilinear(&u.plus, &ones))
    }

    /// Block mass matrix over the unknowns (u⁻, u⁺).
    pub fn mass_matrix(&self) -> Csr {
        let m = self.x.mass.to_csr();
        block(&m.combine(self.weights.minus, &m, 0.0), None, &m.combine(self.weights.plus, &m, 0.0))
    }

    /// Block stiffness matrix over the unknowns (u⁻, u⁺).
    pub fn stiffness_matrix(&self) -> Csr {
        let m = self.x.mass.to_csr();
        let k = self.x.stiffness.to_tridiag().to_csr();
        let c = self.coupling;
        let minus = k.combine(self.weights.minus, &m, c);
        let plus = k.combine(self.weights.plus, &m, c);
        let cross = m.combine(-c, &m, 0.0);
        block(&minus, Some(&cross), &plus)
    }

    /// ∫ f(x, ξ, u) dγ: π⁻∫f(x, −1, u⁻) + π⁺∫f(x, 1, u⁺).
    pub fn integrate<F: Fn(f64, f64, f64) -> f64>(&self, u: &LimitField, f: F) -> Result<f64> {
        self.check(u)?;
        Ok(self.weights.minus * self.x.integrate(&u.minus, |x, r| f(x, -1.0, r))
            + self.weights.plus * self.x.integrate(&u.plus, |x, r| f(x, 1.0, r)))
    }
}

fn block(d0: &Csr, cross: Option<&Csr>, d1: &Csr) -> Csr {
    let n = d0.n();
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut r: Vec<(usize, f64)> = d0.row(i).collect();
        if let Some(c) = cross {
            r.extend(c.row(i).map(|(j, v)| (n + j, v)));
        }
        rows.push(r);
    }
    for i in 0..n {
        let mut r: Vec<(usize, f64)> = d1.row(i).map(|(j, v)| (n + j, v)).collect();
        if let Some(c) = cross {
            r.extend(c.row(i));
        }
        rows.push(r);
    }
    Csr::from_rows(2 * n, rows)
}

/// ⟨ρ, φ⟩ = π⁻∫u⁻φ(x, −1) + π⁺∫u⁺φ(x, 1).
pub fn pair_limit<F: Fn(f64, f64) -> f64>(forms: &LimitForms, u: &LimitField, phi: F) -> Result<f64> {
    forms.integrate(u, |x, xi, r| r * phi(x, xi))
}

/// Smooth test functions for weak-* pairings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    One,
    Xi,
    XiSquared,
    Cosine { m: u32 },
    CosineXi { m: u32 },
}

impl TestFunction {
    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        match *self {
            TestFunction::One => 1.0,
            TestFunction::Xi => xi,
            TestFunction::XiSquared => xi * xi,
            TestFunction::Cosine { m } => (PI * m as f64 * x).cos(),
            TestFunction::CosineXi { m } => (PI * m as f64 * x).cos() * xi,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TestFunction::One => "1".into(),
            TestFunction::Xi => "xi".into(),
            TestFunction::XiSquared => "xi^2".into(),
            TestFunction::Cosine { m } => format!("cos({m}pi x)"),
            TestFunction::CosineXi { m } => format!("cos({m}pi x) xi"),
        }
    }

    /// {1, ξ, ξ², cos(πmx), cos(πmx)·ξ : m = 1, 2}.
    pub fn dictionary() -> Vec<TestFunction> {
        vec![
            TestFunction::One,
            TestFunction::Xi,
            TestFunction::XiSquared,
            TestFunction::Cosine { m: 1 },
            TestFunction::Cosine { m: 2 },
            TestFunction::CosineXi { m: 1 },
            TestFunction::CosineXi { m: 2 },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Grading};

    fn forms(eps: f64, nx: usize, nxi: usize) -> FormMatrices {
        let g = build_grid(nx, nxi, Grading::three_zone()).unwrap();
        assemble(&g, &EnthalpyProfile::quartic(), eps).unwrap()
    }

    #[test]
    fn total_mass_is_one() {
        for eps in [0.2, 0.1, 0.05, 0.02] {
            let f = forms(eps, 9, 161);
            let one = Field::constant(&f.grid, 1.0);
            assert!((b_form(&f, &one, &one).unwrap() - 1.0).abs() < 1e-10, "eps = {eps}");
            let ones = vec![1.0; f.grid.len()];
            assert!((f.m.bilinear(&ones, &ones) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constants_are_in_the_kernel() {
        for eps in [0.2, 0.05] {
            let f = forms(eps, 9, 161);
            let ones = vec![1.0; f.grid.len()];
            let r = f.a.apply(&ones);
            let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst <= 1e-12 * f.a.max_abs(), "{worst}");
            let one = Field::constant(&f.grid, 1.0);
            let v = Field::from_fn(&f.grid, |x, xi| (3.0 * x).sin() + xi * xi);
            assert_eq!(a_form(&f, &one, &v).unwrap(), 0.0);
        }
    }

    #[test]
    fn matrices_are_symmetric() {
        let f = forms(0.1, 6, 21);
        assert_eq!(f.m.asymmetry(), 0.0);
        assert_eq!(f.a1.asymmetry(), 0.0);
        assert_eq!(f.a2.asymmetry(), 0.0);
        assert_eq!(f.a.asymmetry(), 0.0);
    }

    #[test]
    fn tensor_forms_match_sparse_matrices() {
        let f = forms(0.1, 7, 21);
        let u = Field::from_fn(&f.grid, |x, xi| (2.0 * x).cos() * xi + 0.3 * xi * xi);
        let v = Field::from_fn(&f.grid, |x, xi| x * x - x * xi);
        let (p, q) = (u.values(), v.values());
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        assert!(rel(f.tensor.b(p, q), f.m.bilinear(p, q)) < 1e-12);
        assert!(rel(f.tensor.a1(p, q), f.a1.bilinear(p, q)) < 1e-12);
        assert!(rel(f.tensor.a2(p, q), f.a2.bilinear(p, q)) < 1e-10);
    }

    #[test]
    fn linear_in_x_has_unit_gradient_energy() {
        let f = forms(0.1, 17, 161);
        let u = Field::from_fn(&f.grid, |x, _| x);
        let (a1, a2) = energy_split(&f, &u).unwrap();
        assert!((a1 - 1.0).abs() < 1e-3);
        assert_eq!(a2, 0.0);
    }

    #[test]
    fn pairings_of_constants() {
        let f = forms(0.05, 9, 161);
        let one = Field::constant(&f.grid, 1.0);
        assert!((pair_measure(&f, &one, |_, _| 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(pair_measure(&f, &one, |_, xi| xi).unwrap().abs() < 1e-14);
        let l = assemble_limit(f.grid.x(), 1.0).unwrap();
        let lone = LimitField::constant(9, 1.0, 1.0);
        assert!((pair_limit(&l, &lone, |_, _| 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(pair_limit(&l, &lone, |_, xi| xi).unwrap().abs() < 1e-15);
        assert!((pair_limit(&l, &lone, |_, xi| xi * xi).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn squared_observable_equals_mass_form() {
        let f = forms(0.1, 9, 41);
        let u = Field::from_fn(&f.grid, |x, xi| (PI * x).cos() + xi);
        let b = b_form(&f, &u, &u).unwrap();
        let q = integrate_field(&f, &u, |_, _, r| r * r).unwrap();
        assert!((b - q).abs() < 1e-13 * b);
    }

    #[test]
    fn limit_forms_values() {
        let x = crate::grid::uniform_x(17);
        let k = 1.7;
        let l = assemble_limit(&x, k).unwrap();
        let one = LimitField::constant(17, 1.0, 1.0);
        assert!((l.b(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(l.a(&LimitField::constant(17, 0.4, 0.4), &one).unwrap(), 0.0);
        let jump = LimitField::constant(17, 0.0, 1.0);
        assert!((l.a(&jump, &jump).unwrap() - k / 2.0).abs() < 1e-14);
        assert_eq!(l.stiffness_matrix().asymmetry(), 0.0);
        assert_eq!(l.mass_matrix().asymmetry(), 0.0);
    }

    #[test]
    fn rates_reduce_to_symmetric_forms() {
        let x = crate::grid::uniform_x(9);
        let a = assemble_limit_rates(&x, 2.0, 2.0).unwrap();
        assert_eq!(a, assemble_limit(&x, 2.0).unwrap());
        let s = assemble_limit_rates(&x, 1.0, 2.0).unwrap();
        assert!((s.weights.minus - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.coupling - 2.0 / 3.0).abs() < 1e-15);
    }
}
