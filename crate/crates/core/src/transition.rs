//! Optimal transition profile φ_ε, the cost and mass coefficients k_ε, q_ε,
//! the lift 𝒯_ε and the limit rate k.

use std::f64::consts::PI;

use serde::Serialize;

use crate::enthalpy::EnthalpyProfile;
use crate::error::{Error, Result};
use crate::gibbs::{GibbsMeasure, TimeScale};
use crate::grid::{xi_nodes, Field, Grading, Grid, LimitField};
use crate::quadrature::{gk15, integrate, Tolerance};

/// Node count of the default ξ grid for transition quantities.
pub const TRANSITION_NODES: usize = 801;

const CELL_TOL: f64 = 1e-13;

/// φ_ε sampled on a ξ grid.
///
/// φ_ε(ξ) = −½ + ∫_{−1}^{ξ} e^{H_ε} / ∫_{−1}^{1} e^{H_ε}, which for even
/// enthalpies equals I_ε⁻¹∫_0^ξ e^{H/ε}. The normalization is the sum of
/// the cell integrals, so the endpoint values ±½ are exact.
#[derive(Debug, Clone)]
pub struct TransitionProfile {
    gibbs: GibbsMeasure,
    xi: Vec<f64>,
    values: Vec<f64>,
    norm: f64,
}

fn cell_integral(gibbs: &GibbsMeasure, a: f64, b: f64) -> Result<f64> {
    let r = integrate(
        |t| gibbs.barrier_exponent(t).exp(),
        a,
        b,
        Tolerance::relative(CELL_TOL),
        1,
    )?;
    Ok(r.value)
}

fn is_mirrored(xi: &[f64]) -> bool {
    let n = xi.len();
    n % 2 == 1 && (0..n).all(|j| xi[j] == -xi[n - 1 - j])
}

fn is_even(profile: &EnthalpyProfile) -> bool {
    profile.coefficients().iter().skip(1).step_by(2).all(|&c| c == 0.0)
}

impl TransitionProfile {
    pub fn new(gibbs: &GibbsMeasure, xi: &[f64]) -> Result<Self> {
        let n = xi.len();
        if n < 3 || xi[0] != -1.0 || xi[n - 1] != 1.0 || !xi.contains(&0.0) {
            return Err(Error::InvalidGrid(
                "transition profile needs ξ nodes containing −1, 0 and 1".into(),
            ));
        }
        if xi.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("ξ nodes not strictly increasing".into()));
        }
        let mut values = vec![0.0; n];
        let norm;
        if gibbs.gap() == 0.0 && is_even(gibbs.profile()) && is_mirrored(xi) {
            // Integrate the positive half and mirror, so oddness is exact.
            let c = n / 2;
            let mut acc = 0.0;
            let mut cumulative = vec![0.0; n - c];
            for k in 1..n - c {
                acc += cell_integral(gibbs, xi[c + k - 1], xi[c + k])?;
                cumulative[k] = acc;
            }
            norm = 2.0 * acc;
            for (k, s) in cumulative.iter().enumerate() {
                values[c + k] = s / norm;
                values[c - k] = -(s / norm);
            }
        } else {
            let mut acc = 0.0;
            let mut cumulative = vec![0.0; n];
            for j in 1..n {
                acc += cell_integral(gibbs, xi[j - 1], xi[j])?;
                cumulative[j] = acc;
            }
            norm = acc;
            for j in 0..n {
                values[j] = cumulative[j] / norm - 0.5;
            }
            values[0] = -0.5;
            values[n - 1] = 0.5;
        }
        Ok(Self {
            gibbs: gibbs.clone(),
            xi: xi.to_vec(),
            values,
            norm,
        })
    }

    pub fn eps(&self) -> f64 {
        self.gibbs.eps()
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gibbs(&self) -> &GibbsMeasure {
        &self.gibbs
    }

    /// log of ∫_{−1}^{1} e^{(H−1)/ε}, as used in the normalization.
    pub fn log_i_shifted(&self) -> f64 {
        self.gibbs.log_i_shifted()
    }

    /// φ_ε at an arbitrary ξ ∈ [−1, 1].
    pub fn eval(&self, xi: f64) -> f64 {
        let xi = xi.clamp(-1.0, 1.0);
        let j = match self.xi.partition_point(|&v| v <= xi) {
            0 => 0,
            p => p - 1,
        };
        if self.xi[j] == xi {
            return self.values[j];
        }
        let f = |t: f64| self.gibbs.barrier_exponent(t).exp();
        let (partial, _) = gk15(&f, self.xi[j], xi);
        self.values[j] + partial / self.norm
    }

    /// q_ε = ∫ φ_ε² dγ̃_ε.
    pub fn second_moment(&self) -> Result<f64> {
        let r = integrate(
            |xi| {
                let p = self.eval(xi);
                p * p * self.gibbs.density(xi)
            },
            -1.0,
            1.0,
            Tolerance {
                rel: 1e-12,
                abs: 1e-15,
            },
            64,
        )?;
        Ok(r.value)
    }
}

/// φ_ε of `profile` at `eps` on the given ξ nodes.
pub fn transition_profile(profile: &EnthalpyProfile, eps: f64, xi: &[f64]) -> Result<TransitionProfile> {
    TransitionProfile::new(&GibbsMeasure::new(profile, eps)?, xi)
}

/// The default graded ξ grid for transition quantities.
pub fn transition_grid() -> Vec<f64> {
    xi_nodes(TRANSITION_NODES, Grading::three_zone()).expect("default grading is valid")
}

/// k_ε = τ_ε/(Z_ε I_ε) at the critical scaling.
pub fn k_eps(profile: &EnthalpyProfile, eps: f64) -> Result<f64> {
    Ok(GibbsMeasure::new(profile, eps)?.transition_rate(&TimeScale::critical()))
}

/// q_ε on the default transition grid.
pub fn q_eps(profile: &EnthalpyProfile, eps: f64) -> Result<f64> {
    transition_profile(profile, eps, &transition_grid())?.second_moment()
}

/// k = √(|H''(0)|·H''(1))/π.
pub fn k_limit(profile: &EnthalpyProfile) -> Result<f64> {
    let barrier = profile.deriv2(0.0);
    let well = profile.deriv2(1.0);
    if !(barrier < 0.0) {
        return Err(Error::DegenerateCurvature {
            at: 0.0,
            value: barrier,
        });
    }
    if !(well > 0.0) {
        return Err(Error::DegenerateCurvature { at: 1.0, value: well });
    }
    Ok((barrier.abs() * well).sqrt() / PI)
}

/// Quadratic transition cost and mass coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionCosts {
    pub k_eps: f64,
    pub q_eps: f64,
}

impl TransitionCosts {
    pub fn new(gibbs: &GibbsMeasure, scale: &TimeScale) -> Result<Self> {
        let q = TransitionProfile::new(gibbs, &transition_grid())?.second_moment()?;
        Ok(Self {
            k_eps: gibbs.transition_rate(scale),
            q_eps: q,
        })
    }

    /// K_ε(a, b) = k_ε (b − a)².
    pub fn cost(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        self.k_eps * d * d
    }

    /// Q_ε(a, b) = ½(a² + b²) + (q_ε − ¼)(b − a)².
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        0.5 * (a * a + b * b) + (self.q_eps - 0.25) * d * d
    }
}

/// Recovery field u(x_i, ξ_j) = ½(u⁻ + u⁺)(x_i) + (u⁺ − u⁻)(x_i)·φ_ε(ξ_j).
///
/// The ξ = ±1 rows are set to u∓ directly.
pub fn lift(traces: &LimitField, phi: &TransitionProfile, grid: &Grid) -> Result<Field> {
    if traces.len() != grid.nx() {
        return Err(Error::ShapeMismatch {
            what: "lift traces",
            expected: grid.nx(),
            found: traces.len(),
        });
    }
    if phi.xi() != grid.xi() {
        return Err(Error::InvalidGrid("transition profile lives on a different ξ grid".into()));
    }
    let nxi = grid.nxi();
    let p = phi.values();
    let mut values = Vec::with_capacity(grid.len());
    for (&a, &b) in traces.minus.iter().zip(&traces.plus) {
        let m = 0.5 * (a + b);
        let d = b - a;
        values.push(a);
        values.extend(p[1..nxi - 1].iter().map(|&s| m + d * s));
        values.push(b);
    }
    Field::new(grid.nx(), nxi, values)
}
