//! Reference computations that share no numerical code with the library:
//! composite Simpson sums and a Thomas solve of the transition-cost program.

#![allow(dead_code)]

use kramers::EnthalpyProfile;

pub const ORACLE_PANELS: usize = 1_000_000;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Z_ε = ∫ e^{−H/ε}.
pub fn z(h: &EnthalpyProfile, eps: f64) -> f64 {
    simpson(|x| (-h.eval(x) / eps).exp(), -1.0, 1.0, ORACLE_PANELS)
}

/// I_ε e^{−1/ε} = ∫ e^{(H−1)/ε}.
pub fn i_shifted(h: &EnthalpyProfile, eps: f64) -> f64 {
    simpson(|x| ((h.eval(x) - 1.0) / eps).exp(), -1.0, 1.0, ORACLE_PANELS)
}

/// k_ε = τ_ε/(Z_ε I_ε) with τ_ε = ε e^{1/ε}.
pub fn k_eps(h: &EnthalpyProfile, eps: f64) -> f64 {
    eps / (z(h, eps) * i_shifted(h, eps))
}

/// φ_ε(ξ) = ½ (∫_0^ξ e^{H/ε}) / (∫_0^1 e^{H/ε}).
pub fn phi(h: &EnthalpyProfile, eps: f64, xi: f64) -> f64 {
    let f = |x: f64| ((h.eval(x) - 1.0) / eps).exp();
    0.5 * simpson(f, 0.0, xi, ORACLE_PANELS) / simpson(f, 0.0, 1.0, ORACLE_PANELS)
}

/// ∫ p dγ̃_ε.
pub fn moment<F: Fn(f64) -> f64>(h: &EnthalpyProfile, eps: f64, p: F) -> f64 {
    simpson(|x| p(x) * (-h.eval(x) / eps).exp(), -1.0, 1.0, ORACLE_PANELS) / z(h, eps)
}

/// Cell conductances τ_ε h⁻² ∫_cell γ̃_ε for a P1 discretization.
pub fn conductances(h: &EnthalpyProfile, eps: f64, nodes: &[f64]) -> Vec<f64> {
    let z = z(h, eps);
    nodes
        .windows(2)
        .map(|w| {
            let len = w[1] - w[0];
            let s = simpson(|x| ((1.0 - h.eval(x)) / eps).exp(), w[0], w[1], 16);
            eps * s / (z * len * len)
        })
        .collect()
}

/// Minimizer and minimum of Σ κ_c (φ_{c+1} − φ_c)² with φ at the ends
/// fixed to ∓½, from the tridiagonal normal equations.
pub fn transition_program(kappa: &[f64]) -> (Vec<f64>, f64) {
    let n = kappa.len() + 1;
    let m = n - 2;
    let mut diag: Vec<f64> = (1..n - 1).map(|j| kappa[j - 1] + kappa[j]).collect();
    let off: Vec<f64> = (1..n - 2).map(|j| -kappa[j]).collect();
    let mut rhs = vec![0.0; m];
    rhs[0] += kappa[0] * -0.5;
    rhs[m - 1] += kappa[n - 2] * 0.5;
    // Thomas forward sweep
    for j in 1..m {
        let w = off[j - 1] / diag[j - 1];
        diag[j] -= w * off[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    let mut inner = vec![0.0; m];
    inner[m - 1] = rhs[m - 1] / diag[m - 1];
    for j in (0..m - 1).rev() {
        inner[j] = (rhs[j] - off[j] * inner[j + 1]) / diag[j];
    }
    let mut phi = Vec::with_capacity(n);
    phi.push(-0.5);
    phi.extend(inner);
    phi.push(0.5);
    let energy = kappa
        .iter()
        .enumerate()
        .map(|(c, k)| k * (phi[c + 1] - phi[c]).powi(2))
        .sum();
    (phi, energy)
}

/// Σ κ_c (ψ_{c+1} − ψ_c)².
pub fn dirichlet_energy(kappa: &[f64], psi: &[f64]) -> f64 {
    kappa
        .iter()
        .enumerate()
        .map(|(c, k)| k * (psi[c + 1] - psi[c]).powi(2))
        .sum()
}

pub fn relative(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}
