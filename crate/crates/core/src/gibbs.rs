//! Reference measures γ̃_ε ∝ exp(-H/ε) on [-1, 1] and their limit.
//!
//! Everything exponentially large or small in 1/ε is carried as a logarithm.
//! The partition function Z_ε = ∫ e^{-H/ε} is integrated directly (the
//! integrand is at most one), and the barrier integral I_ε = ∫ e^{H/ε} is
//! stored shifted by the barrier height, I_ε = e^{1/ε}·∫ e^{(H-1)/ε}.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::enthalpy::{skew_potential, EnthalpyProfile};
use crate::error::{check_eps, Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Relative tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Smallest ε accepted by the simulation pipeline. Below it the ratio of
/// barrier to well weights, e^{-1/ε}, falls under 2e-22 and ξ-stiffness
/// entries in the barrier region vanish against the well entries in double
/// precision.
pub const EPS_FLOOR: f64 = 0.02;

const INITIAL_PANELS: usize = 16;

fn log_integral<F: Fn(f64) -> f64>(exponent: F, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    let r = integrate(
        |xi| exponent(xi).exp(),
        -1.0,
        1.0,
        Tolerance::relative(tol),
        INITIAL_PANELS,
    )?;
    Ok(r.value.ln())
}

/// log Z_ε = log ∫ e^{-H(ξ)/ε} dξ.
pub fn log_partition(profile: &EnthalpyProfile, eps: f64, tol: f64) -> Result<f64> {
    check_eps(eps)?;
    log_integral(|xi| -profile.eval(xi) / eps, tol)
}

/// log ∫ e^{(H(ξ)-1)/ε} dξ, so that log I_ε is this value plus 1/ε.
pub fn log_barrier_integral(profile: &EnthalpyProfile, eps: f64, tol: f64) -> Result<f64> {
    check_eps(eps)?;
    log_integral(|xi| (profile.eval(xi) - 1.0) / eps, tol)
}

/// τ_ε = ε·e^{1/ε}, with the linear value when it is representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tau {
    pub log: f64,
    pub value: Option<f64>,
}

pub fn tau(eps: f64) -> Result<Tau> {
    check_eps(eps)?;
    let log = eps.ln() + 1.0 / eps;
    let value = Some(log.exp()).filter(|v| v.is_finite());
    Ok(Tau { log, value })
}

fn curvatures(profile: &EnthalpyProfile) -> Result<(f64, f64)> {
    let barrier = profile.deriv2(0.0);
    if !(barrier < 0.0) {
        return Err(Error::DegenerateCurvature {
            at: 0.0,
            value: barrier,
        });
    }
    let well = profile.deriv2(1.0);
    if !(well > 0.0) {
        return Err(Error::DegenerateCurvature { at: 1.0, value: well });
    }
    Ok((barrier, well))
}

/// Leading-order Laplace value of Z_ε: √(2πε/H''(1)).
pub fn laplace_z(profile: &EnthalpyProfile, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let (_, well) = curvatures(profile)?;
    Ok((2.0 * PI * eps / well).sqrt())
}

/// Logarithm of the leading-order Laplace value of I_ε:
/// ½·log(2πε/|H''(0)|) + 1/ε.
pub fn laplace_log_i(profile: &EnthalpyProfile, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let (barrier, _) = curvatures(profile)?;
    Ok(0.5 * (2.0 * PI * eps / barrier.abs()).ln() + 1.0 / eps)
}

/// Laplace value of the shifted barrier integral, e^{-1/ε}·I_ε.
pub fn laplace_i_shifted(profile: &EnthalpyProfile, eps: f64) -> Result<f64> {
    Ok((laplace_log_i(profile, eps)? - 1.0 / eps).exp())
}

/// How the ξ-mobility τ scales with ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// τ_ε = ε·e^{1/ε}.
    #[default]
    Critical,
    /// τ_ε = ε²·e^{1/ε}.
    Sub,
    /// τ_ε = e^{1/ε}.
    Super,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Critical => "critical",
            Regime::Sub => "sub",
            Regime::Super => "super",
        }
    }
}

/// τ = prefactor · εᵖ · e^{1/ε}, with p fixed by the regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScale {
    pub regime: Regime,
    pub prefactor: f64,
}

impl Default for TimeScale {
    fn default() -> Self {
        Self::critical()
    }
}

impl TimeScale {
    pub fn critical() -> Self {
        Self::new(Regime::Critical)
    }

    pub fn new(regime: Regime) -> Self {
        Self {
            regime,
            prefactor: 1.0,
        }
    }

    pub fn with_prefactor(mut self, prefactor: f64) -> Self {
        self.prefactor = prefactor;
        self
    }

    /// log τ - 1/ε; the part of log τ that stays bounded as ε → 0.
    pub fn log_tau_reduced(&self, eps: f64) -> f64 {
        let power = match self.regime {
            Regime::Critical => 1.0,
            Regime::Sub => 2.0,
            Regime::Super => 0.0,
        };
        self.prefactor.ln() + power * eps.ln()
    }

    pub fn log_tau(&self, eps: f64) -> f64 {
        self.log_tau_reduced(eps) + 1.0 / eps
    }
}

/// The probability measure γ̃_ε(dξ) = Z_ε⁻¹·e^{-H₀(ξ) - H(ξ)/ε} dξ.
///
/// H₀ is the unequal-well skew; it vanishes unless a gap is configured.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsMeasure {
    eps: f64,
    profile: EnthalpyProfile,
    gap: f64,
    log_z: f64,
    log_i_shifted: f64,
}

impl GibbsMeasure {
    pub fn new(profile: &EnthalpyProfile, eps: f64) -> Result<Self> {
        Self::with_options(profile, 0.0, eps, DEFAULT_TOL)
    }

    pub fn skewed(profile: &EnthalpyProfile, gap: f64, eps: f64) -> Result<Self> {
        Self::with_options(profile, gap, eps, DEFAULT_TOL)
    }

    pub fn with_options(profile: &EnthalpyProfile, gap: f64, eps: f64, tol: f64) -> Result<Self> {
        check_eps(eps)?;
        if !gap.is_finite() {
            return Err(Error::InvalidArgument(format!("skew gap must be finite, got {gap}")));
        }
        let log_z = log_integral(|xi| -skew_potential(gap, xi) - profile.eval(xi) / eps, tol)?;
        let log_i_shifted =
            log_integral(|xi| skew_potential(gap, xi) + (profile.eval(xi) - 1.0) / eps, tol)?;
        Ok(Self {
            eps,
            profile: profile.clone(),
            gap,
            log_z,
            log_i_shifted,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn profile(&self) -> &EnthalpyProfile {
        &self.profile
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn log_i_shifted(&self) -> f64 {
        self.log_i_shifted
    }

    pub fn log_density(&self, xi: f64) -> f64 {
        -skew_potential(self.gap, xi) - self.profile.eval(xi) / self.eps - self.log_z
    }

    pub fn density(&self, xi: f64) -> f64 {
        self.log_density(xi).exp()
    }

    /// log of τ·(density) at ξ, assembled as one exponent so that the huge
    /// τ and the tiny e^{-H/ε} never meet in floating point.
    pub fn log_scaled_density(&self, scale: &TimeScale, xi: f64) -> f64 {
        scale.log_tau_reduced(self.eps) + (1.0 - self.profile.eval(xi)) / self.eps
            - skew_potential(self.gap, xi)
            - self.log_z
    }

    /// Exponent of the shifted barrier integrand, H₀(ξ) + (H(ξ) - 1)/ε.
    pub fn barrier_exponent(&self, xi: f64) -> f64 {
        skew_potential(self.gap, xi) + (self.profile.eval(xi) - 1.0) / self.eps
    }

    /// Minimal transition cost coefficient τ/(Z_ε·I_ε); the e^{1/ε} of τ
    /// cancels against that of I_ε before exponentiation.
    pub fn transition_rate(&self, scale: &TimeScale) -> f64 {
        (scale.log_tau_reduced(self.eps) - self.log_z - self.log_i_shifted).exp()
    }

    /// ∫ f dγ̃_ε by adaptive quadrature.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F, tol: f64) -> Result<f64> {
        let r = integrate(
            |xi| f(xi) * self.density(xi),
            -1.0,
            1.0,
            Tolerance {
                rel: tol,
                abs: tol * 1e-3,
            },
            INITIAL_PANELS,
        )?;
        Ok(r.value)
    }
}

/// The ε → 0 limit of γ̃_ε: point masses at ξ = -1 and ξ = +1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitMeasure {
    pub minus: f64,
    pub plus: f64,
}

impl LimitMeasure {
    pub fn symmetric() -> Self {
        Self {
            minus: 0.5,
            plus: 0.5,
        }
    }

    /// Weights for the unequal-well skew: the skew tilts the well masses by
    /// e^{∓Δ/2}, so minus/plus = e^{Δ}.
    pub fn skewed(gap: f64) -> Self {
        if gap == 0.0 {
            return Self::symmetric();
        }
        let minus = 1.0 / (1.0 + (-gap).exp());
        Self {
            minus,
            plus: 1.0 - minus,
        }
    }

    pub fn total(&self) -> f64 {
        self.minus + self.plus
    }

    pub fn pair<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.minus * f(-1.0) + self.plus * f(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_profiles_integrate_to_two() {
        let zero = EnthalpyProfile::polynomial("zero", vec![0.0]);
        let one = EnthalpyProfile::polynomial("one", vec![1.0]);
        assert!((log_partition(&zero, 0.3, 1e-12).unwrap() - 2f64.ln()).abs() < 1e-14);
        assert!((log_barrier_integral(&one, 0.3, 1e-12).unwrap() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn tau_values() {
        assert!((tau(1.0).unwrap().value.unwrap() - std::f64::consts::E).abs() < 1e-15);
        assert!((tau(0.1).unwrap().value.unwrap() - 2202.646579480672).abs() < 1e-9);
        assert_eq!(tau(0.05).unwrap().log, 0.05f64.ln() + 20.0);
        assert!(tau(0.0).is_err());
        let tiny = tau(1e-3).unwrap();
        assert!(tiny.log.is_finite());
        assert!(tiny.value.is_none());
    }

    #[test]
    fn laplace_values() {
        let h = EnthalpyProfile::quartic();
        assert!((laplace_z(&h, 0.1).unwrap() - (0.2 * PI / 8.0).sqrt()).abs() < 1e-15);
        assert!((laplace_z(&h, 0.1).unwrap() - 0.28025).abs() < 1e-5);
        let li = laplace_log_i(&h, 0.1).unwrap();
        assert!((li - (0.5 * (0.2 * PI / 4.0).ln() + 10.0)).abs() < 1e-13);
        let r = laplace_z(&h, 0.4).unwrap() / laplace_z(&h, 0.1).unwrap();
        assert!((r - 2.0).abs() < 1e-15);
    }

    #[test]
    fn laplace_rejects_degenerate_points() {
        let flat = EnthalpyProfile::polynomial("flat-top", vec![1.0, 0.0, 0.0, 0.0, -2.0, 0.0, 1.0]);
        assert!(matches!(
            laplace_log_i(&flat, 0.1),
            Err(Error::DegenerateCurvature { at, .. }) if at == 0.0
        ));
    }

    #[test]
    fn density_is_normalized_and_even() {
        let h = EnthalpyProfile::quartic();
        for eps in [0.2, 0.1, 0.05, 0.02] {
            let g = GibbsMeasure::new(&h, eps).unwrap();
            let mass = g.expectation(|_| 1.0, 1e-13).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "eps = {eps}: mass {mass}");
            for i in 0..=50 {
                let x = i as f64 / 50.0;
                let d = g.density(x);
                assert!((d - g.density(-x)).abs() <= 1e-12 * d.max(1.0));
            }
        }
    }

    #[test]
    fn time_scales() {
        let eps = 0.1;
        let c = TimeScale::critical();
        assert!((c.log_tau(eps) - tau(eps).unwrap().log).abs() < 1e-14);
        let sub = TimeScale::new(Regime::Sub);
        assert!((sub.log_tau(eps) - c.log_tau(eps) - eps.ln()).abs() < 1e-14);
        let sup = TimeScale::new(Regime::Super);
        assert!((sup.log_tau(eps) - 1.0 / eps).abs() < 1e-14);
        let doubled = c.with_prefactor(2.0);
        assert!((doubled.log_tau(eps) - c.log_tau(eps) - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn skewed_limit_weights() {
        let w = LimitMeasure::skewed(2f64.ln());
        assert!((w.minus / w.plus - 2.0).abs() < 1e-14);
        assert!((w.total() - 1.0).abs() < 1e-15);
        assert_eq!(LimitMeasure::skewed(0.0), LimitMeasure::symmetric());
    }
}
