//! JSON run configuration: strict parsing, defaults and field-path validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use kramers::enthalpy::{validate as validate_profile, EnthalpyProfile};
use kramers::evolve::{Scheme, Solver};
use kramers::gibbs::{Regime, DEFAULT_TOL, EPS_FLOOR};
use kramers::grid::{xi_nodes, Grading};
use kramers::{InitialData, StudyConfig};

/// Samples used when checking a user-supplied polynomial profile.
const PROFILE_SAMPLES: usize = 2001;

/// A shipped profile by name, or explicit polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(String),
    Polynomial(PolynomialSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSpec {
    pub name: String,
    /// Coefficients in increasing powers of ξ.
    pub coefficients: Vec<f64>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Named("quartic".into())
    }
}

impl ProfileSpec {
    pub fn resolve(&self) -> Option<EnthalpyProfile> {
        match self {
            ProfileSpec::Named(n) => EnthalpyProfile::named(n),
            ProfileSpec::Polynomial(p) => Some(EnthalpyProfile::polynomial(p.name.clone(), p.coefficients.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub profile: ProfileSpec,
    /// Unequal-well skew Δ.
    pub gap: f64,
    pub ladder: Vec<f64>,
    pub nx: usize,
    pub nxi: usize,
    pub grading: Grading,
    pub dt: f64,
    /// Final time of `simulate` and `limit`.
    #[serde(rename = "T")]
    pub t_end: f64,
    pub scheme: Scheme,
    pub solver: Solver,
    /// Sample times of `converge`, and snapshot times of `simulate` and `limit`.
    pub times: Vec<f64>,
    pub initial: InitialData,
    pub regime: Regime,
    /// Reaction rate of the limit system; the profile's k when absent.
    pub k: Option<f64>,
    /// Relative tolerance of the Gibbs quadratures.
    pub tol: f64,
    pub output_dir: String,
}

impl Default for Config {
    fn default() -> Self {
        let s = StudyConfig::default();
        Self {
            profile: ProfileSpec::default(),
            gap: s.gap,
            ladder: s.ladder,
            nx: s.nx,
            nxi: s.nxi,
            grading: s.grading,
            dt: s.dt,
            t_end: 1.0,
            scheme: s.scheme,
            solver: s.solver,
            times: s.times,
            initial: s.initial,
            regime: s.regime,
            k: None,
            tol: DEFAULT_TOL,
            output_dir: "kramers-out".into(),
        }
    }
}

/// A rejected configuration value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Read { path: String, message: String },
    Parse { path: String, line: usize, column: usize, message: String },
    Invalid(Vec<FieldError>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, message } => write!(f, "cannot read {path}: {message}"),
            ConfigError::Parse { path, line, column, message } => {
                write!(f, "{path}:{line}:{column}: {message}")
            }
            ConfigError::Invalid(errors) => {
                let lines: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
                write!(f, "invalid configuration:\n  {}", lines.join("\n  "))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_error(e: serde_json::Error, path: &str) -> ConfigError {
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    let text = e.to_string();
    ConfigError::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        message: text.strip_suffix(&suffix).unwrap_or(&text).to_string(),
    }
}

/// Why ε below the floor is refused.
pub fn eps_floor_message(eps: f64) -> String {
    format!(
        "ε = {eps} is outside [{EPS_FLOOR}, 1]; below {EPS_FLOOR} the barrier weight e^(-1/ε) drops under 2e-22 \
         and barrier-region stiffness entries vanish against the well entries in double precision"
    )
}

fn check_eps(path: String, eps: f64, out: &mut Vec<FieldError>) {
    if !(eps.is_finite() && (EPS_FLOOR..=1.0).contains(&eps)) {
        out.push(FieldError {
            path,
            message: eps_floor_message(eps),
        });
    }
}

/// Whether t is an integer multiple of dt.
fn on_grid(t: f64, dt: f64) -> bool {
    let n = (t / dt).round();
    (t - n * dt).abs() <= 1e-9 * dt.max(t)
}

impl Config {
    pub fn from_json(text: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| parse_error(e, path))?;
        cfg.checked()
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: name.clone(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, &name)
    }

    pub fn checked(self) -> Result<Self, ConfigError> {
        let errors = self.violations();
        if errors.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Every rejected value, with its field path.
    pub fn violations(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        let mut err = |path: &str, message: String| {
            out.push(FieldError {
                path: path.into(),
                message,
            })
        };
        match self.profile.resolve() {
            None => {
                let name = match &self.profile {
                    ProfileSpec::Named(n) => n.as_str(),
                    ProfileSpec::Polynomial(p) => p.name.as_str(),
                };
                err("profile", format!("unknown profile {name:?}; known: \"quartic\""))
            }
            Some(p) => {
                for v in validate_profile(&p, PROFILE_SAMPLES) {
                    err("profile", v.to_string());
                }
            }
        }
        if !self.gap.is_finite() {
            err("gap", format!("must be finite, got {}", self.gap));
        }
        if self.ladder.is_empty() {
            err("ladder", "must not be empty".into());
        }
        if self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            err("ladder", "must be strictly decreasing".into());
        }
        if self.nx < 4 {
            err("nx", format!("must be at least 4, got {}", self.nx));
        }
        if let Err(e) = xi_nodes(self.nxi, self.grading) {
            err("nxi", e.to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            err("dt", format!("must be positive, got {}", self.dt));
        }
        let dt_ok = self.dt > 0.0 && self.dt.is_finite();
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            err("T", format!("must be positive, got {}", self.t_end));
        } else if dt_ok && !on_grid(self.t_end, self.dt) {
            err("T", format!("{} is not a multiple of dt = {}", self.t_end, self.dt));
        }
        if self.times.is_empty() {
            err("times", "must not be empty".into());
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            err("times", "must be strictly increasing".into());
        }
        for (i, &t) in self.times.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                err(&format!("times[{i}]"), format!("must be positive, got {t}"));
            } else if dt_ok && !on_grid(t, self.dt) {
                err(&format!("times[{i}]"), format!("{t} is not a multiple of dt = {}", self.dt));
            }
        }
        if let Err(e) = self.initial.validate() {
            err("initial", e.to_string());
        }
        if let Some(k) = self.k {
            if !(k >= 0.0 && k.is_finite()) {
                err("k", format!("must be nonnegative, got {k}"));
            }
        }
        if !(self.tol > 0.0 && self.tol <= 1e-6) {
            err("tol", format!("must lie in (0, 1e-6], got {}", self.tol));
        }
        if self.output_dir.is_empty() {
            err("output_dir", "must not be empty".into());
        }
        for (i, &e) in self.ladder.iter().enumerate() {
            check_eps(format!("ladder[{i}]"), e, &mut out);
        }
        out
    }

    pub fn profile(&self) -> EnthalpyProfile {
        self.profile.resolve().expect("validated profile")
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            profile: self.profile(),
            gap: self.gap,
            ladder: self.ladder.clone(),
            nx: self.nx,
            nxi: self.nxi,
            grading: self.grading,
            dt: self.dt,
            scheme: self.scheme,
            solver: self.solver,
            times: self.times.clone(),
            initial: self.initial.clone(),
            regime: self.regime,
            k: self.k,
            tol: self.tol,
        }
    }
}

/// Validates a single ε given on the command line.
pub fn validate_eps(eps: f64) -> Result<(), ConfigError> {
    let mut out = Vec::new();
    check_eps("eps".into(), eps, &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(out))
    }
}
