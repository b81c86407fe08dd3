//! Numerical laboratory for the Kramers-Smoluchowski equation on Ω×(−1, 1)
//! with high activation energy, and for its two-species reaction-diffusion
//! limit.
//!
//! The ε-problem is posed for the density u of ρ_ε with respect to the
//! invariant measure γ_ε = λ ⊗ γ̃_ε and discretized by weighted tensor
//! Galerkin; the limit system acts on the pair of traces (u⁻, u⁺).

pub mod convergence;
pub mod enthalpy;
pub mod error;
pub mod evolve;
pub mod forms;
pub mod gibbs;
pub mod grid;
pub mod limit;
pub mod quadrature;
pub mod sparse;
pub mod transition;

pub use enthalpy::{validate, Condition, EnthalpyProfile, SkewedEnthalpy, Violation};
pub use error::{Error, Result};
pub use gibbs::{GibbsMeasure, LimitMeasure, Regime, Tau, TimeScale};
pub use forms::{
    a_form, assemble, assemble_limit, assemble_limit_rates, assemble_limit_skewed, assemble_with, b_form, energy_split,
    integrate_field, pair_limit, pair_measure, FormMatrices, LimitForms, TestFunction,
};
pub use grid::{build_grid, Field, Grading, Grid, LimitField};
pub use transition::{k_eps, k_limit, lift, q_eps, transition_profile, TransitionCosts, TransitionProfile};
pub use evolve::{
    energy_identity_residual, regularization_check, solve, step_theta, Scheme, SolveOptions, Solver,
    Trajectory,
};
pub use limit::{
    homogeneous_solution, limit_energy_identity, solve_limit, LimitSnapshot, LimitStepRecord,
    LimitTrajectory,
};
pub use convergence::{
    cutoff_average, gamma_limsup_check, limsup_pairs, nonlinear_observable, regime_study, run_study,
    theorem1_study, theorem2_study, traces, ConvergenceReport, InitialData, LimsupReport, Observable,
    Side, StudyConfig, Theorem2Table,
};
