//! Double-well enthalpy profiles H on [-1, 1].
//!
//! Admissible profiles have a single barrier of height one at the origin,
//! two symmetric wells at ±1 with vanishing slope, and non-degenerate
//! curvature at the three critical points. Profiles are polynomials, so
//! first and second derivatives are exact.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_eps, Result};

/// Tolerance for the pointwise normalization, slope and symmetry conditions.
pub const CONDITION_TOL: f64 = 1e-14;

/// A polynomial enthalpy H(ξ) = Σ c_k ξ^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnthalpyProfile {
    name: String,
    /// Coefficients in increasing powers of ξ.
    coefficients: Vec<f64>,
}

impl EnthalpyProfile {
    pub fn polynomial(name: impl Into<String>, coefficients: Vec<f64>) -> Self {
        let mut coefficients = coefficients;
        while coefficients.len() > 1 && coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            coefficients.push(0.0);
        }
        Self {
            name: name.into(),
            coefficients,
        }
    }

    /// H(ξ) = (1 - ξ²)², with H'(ξ) = -4ξ(1 - ξ²) and H''(ξ) = 12ξ² - 4.
    pub fn quartic() -> Self {
        Self::polynomial("quartic", vec![1.0, 0.0, -2.0, 0.0, 1.0])
    }

    /// Look up a shipped profile by name.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "quartic" => Some(Self::quartic()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * xi + c)
    }

    pub fn deriv(&self, xi: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * xi + k as f64 * c)
    }

    pub fn deriv2(&self, xi: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * xi + (k * (k - 1)) as f64 * c)
    }
}

/// A failed admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// H(0) = 1 and H(±1) = 0.
    Normalization,
    /// H(ξ) = H(-ξ).
    Evenness,
    /// H'(±1) = 0.
    FlatWells,
    /// H > 0 on (-1, 1).
    Positivity,
    /// H''(0) < 0.
    BarrierCurvature,
    /// H''(1) > 0.
    WellCurvature,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Normalization => "H(0)=1, H(±1)=0",
            Condition::Evenness => "evenness",
            Condition::FlatWells => "H′(±1)=0",
            Condition::Positivity => "H>0 on (−1,1)",
            Condition::BarrierCurvature => "H″(0)<0",
            Condition::WellCurvature => "H″(1)>0",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub location: f64,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} fails at ξ = {} (value {:e})",
            self.condition, self.location, self.value
        )
    }
}

/// Check every admissibility condition on `samples` uniform points of
/// [-1, 1] plus the endpoints and the origin. At most one violation is
/// reported per condition (the worst location).
pub fn validate(profile: &EnthalpyProfile, samples: usize) -> Vec<Violation> {
    let samples = samples.max(3);
    let mut points: Vec<f64> = (0..samples)
        .map(|i| -1.0 + 2.0 * i as f64 / (samples - 1) as f64)
        .collect();
    points.extend([-1.0, 0.0, 1.0]);

    let mut out = Vec::new();
    let worst = |condition, location: f64, value: f64, out: &mut Vec<Violation>| {
        match out.iter_mut().find(|v: &&mut Violation| v.condition == condition) {
            Some(v) if v.value.abs() >= value.abs() => {}
            Some(v) => {
                v.location = location;
                v.value = value;
            }
            None => out.push(Violation {
                condition,
                location,
                value,
            }),
        }
    };

    for (xi, target) in [(0.0, 1.0), (-1.0, 0.0), (1.0, 0.0)] {
        let r = profile.eval(xi) - target;
        if r.abs() > CONDITION_TOL {
            worst(Condition::Normalization, xi, r, &mut out);
        }
    }
    for xi in [-1.0, 1.0] {
        let d = profile.deriv(xi);
        if d.abs() > CONDITION_TOL {
            worst(Condition::FlatWells, xi, d, &mut out);
        }
    }
    let scale = profile
        .coefficients()
        .iter()
        .map(|c| c.abs())
        .sum::<f64>()
        .max(1.0);
    for &xi in &points {
        let r = profile.eval(xi) - profile.eval(-xi);
        if r.abs() > CONDITION_TOL * scale {
            worst(Condition::Evenness, xi, r, &mut out);
        }
        if xi.abs() < 1.0 {
            let h = profile.eval(xi);
            if h <= 0.0 || !h.is_finite() {
                worst(Condition::Positivity, xi, h, &mut out);
            }
        }
    }
    let c0 = profile.deriv2(0.0);
    if c0 >= 0.0 || !c0.is_finite() {
        worst(Condition::BarrierCurvature, 0.0, c0, &mut out);
    }
    let c1 = profile.deriv2(1.0);
    if c1 <= 0.0 || !c1.is_finite() {
        worst(Condition::WellCurvature, 1.0, c1, &mut out);
    }
    out
}

/// Profile for unequal wells: H₀(ξ) = (Δ/2)·sin(πξ/2), so that
/// H₀'(±1) = 0 and H₀(1) - H₀(-1) = Δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewedEnthalpy {
    pub base: EnthalpyProfile,
    /// Δ = log k⁻ - log k⁺.
    pub gap: f64,
}

impl SkewedEnthalpy {
    pub fn new(base: EnthalpyProfile, gap: f64) -> Self {
        Self { base, gap }
    }

    pub fn skew(&self, xi: f64) -> f64 {
        skew_potential(self.gap, xi)
    }

    pub fn skew_deriv(&self, xi: f64) -> f64 {
        0.25 * self.gap * PI * (0.5 * PI * xi).cos()
    }

    /// H_ε(ξ) = H₀(ξ) + H(ξ)/ε.
    pub fn eval(&self, eps: f64, xi: f64) -> f64 {
        self.skew(xi) + self.base.eval(xi) / eps
    }
}

pub(crate) fn skew_potential(gap: f64, xi: f64) -> f64 {
    if gap == 0.0 {
        0.0
    } else {
        0.5 * gap * (0.5 * PI * xi).sin()
    }
}

/// The composed enthalpy ξ ↦ H₀(ξ) + H(ξ)/ε.
pub fn skewed(
    base: &EnthalpyProfile,
    gap: f64,
    eps: f64,
) -> Result<impl Fn(f64) -> f64 + Clone + Send + Sync> {
    check_eps(eps)?;
    let skewed = SkewedEnthalpy::new(base.clone(), gap);
    Ok(move |xi: f64| skewed.eval(eps, xi))
}
