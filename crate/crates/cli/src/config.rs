//! The TOML run configuration.

use std::fmt;

use quasicontrol::{
    BvpSpec, CostKind, IntegratorConfig, Method, PlanarRigidBody, PlanarRigidBodyParams, PointMassLq, Tolerances,
    W1StateF64,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Derive,
    Simulate,
    Solve,
    Check,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Derive => "derive",
            Command::Simulate => "simulate",
            Command::Solve => "solve",
            Command::Check => "check",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemName {
    PlanarRigidBody,
    PointMassLq,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostName {
    #[default]
    Quadratic,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub name: SystemName,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub inertia: f64,
    #[serde(default = "one")]
    pub offset: f64,
    #[serde(default)]
    pub cost: CostName,
    /// Value of the running cost when `cost = "constant"`.
    #[serde(default = "one")]
    pub cost_value: f64,
    /// Scale of the rigid body's completion field; zero makes the frame singular.
    #[serde(default = "one")]
    pub completion_scale: f64,
}

/// The initial `W₁` state. Missing entries default to zeros of the right size.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub q: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub ydot_a: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub ptilde_alpha: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Rk4,
    Rk45,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub tf: f64,
    #[serde(default = "one_usize")]
    pub save_every: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let tol = Tolerances::default();
        Self { method: MethodName::Rk4, dt: 1e-3, rtol: tol.rtol, atol: tol.atol, t0: 0.0, tf: 1.0, save_every: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub q0: Vec<f64>,
    pub y0: Vec<f64>,
    pub qf: Vec<f64>,
    pub yf: Vec<f64>,
    pub guess: Option<Vec<f64>>,
    pub max_iter: Option<usize>,
    pub residual_tol: Option<f64>,
    pub fd_step: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; when present it must agree with the command line.
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub system: SystemSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    pub boundary: Option<BoundarySection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_dt() -> f64 {
    1e-3
}

fn default_rtol() -> f64 {
    Tolerances::default().rtol
}

fn default_atol() -> f64 {
    Tolerances::default().atol
}

/// A configuration problem, with a source position when one is known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self { line: None, column: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

/// A built-in system ready for the library.
#[derive(Clone, Debug)]
pub enum BuiltSystem {
    RigidBody(PlanarRigidBody),
    PointMass(PointMassLq),
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e: toml::de::Error| {
            let pos = e.span().map(|s| line_col(src, s.start));
            ConfigError { line: pos.map(|p| p.0), column: pos.map(|p| p.1), message: e.message().to_string() }
        })
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    /// Checks the cross-field rules for running `command`.
    pub fn validate_for(&self, command: Command) -> Result<(), ConfigError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(ConfigError::new(format!("config is for `{c}` but `{command}` was requested")));
            }
        }
        match (command, &self.boundary) {
            (Command::Solve, None) => Err(ConfigError::new("`solve` needs a [boundary] section")),
            (Command::Solve, Some(_)) | (_, None) => Ok(()),
            (_, Some(_)) => Err(ConfigError::new(format!("[boundary] is only allowed with `solve`, not `{command}`"))),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self.system.name {
            SystemName::PlanarRigidBody => (3, 2),
            SystemName::PointMassLq => (2, 1),
        }
    }

    pub fn build_system(&self) -> Result<BuiltSystem, ConfigError> {
        let s = &self.system;
        let cost = match s.cost {
            CostName::Quadratic => CostKind::Quadratic,
            CostName::Constant => CostKind::Constant(s.cost_value),
        };
        match s.name {
            SystemName::PlanarRigidBody => {
                let params = PlanarRigidBodyParams { mass: s.mass, inertia: s.inertia, offset: s.offset };
                PlanarRigidBody::with_completion_scale(params, s.completion_scale)
                    .map(|b| BuiltSystem::RigidBody(b.with_cost(cost)))
                    .map_err(|e| ConfigError::new(e.to_string()))
            }
            SystemName::PointMassLq => {
                if s.cost != CostName::Quadratic {
                    return Err(ConfigError::new("point-mass-lq only supports the quadratic cost"));
                }
                Ok(BuiltSystem::PointMass(PointMassLq))
            }
        }
    }

    pub fn initial_state(&self) -> Result<W1StateF64, ConfigError> {
        let (n, m) = self.dims();
        let pick = |v: &Option<Vec<f64>>, len: usize, name: &str| -> Result<Vec<f64>, ConfigError> {
            let v = v.clone().unwrap_or_else(|| vec![0.0; len]);
            if v.len() != len {
                return Err(ConfigError::new(format!("state.{name} needs {len} entries, got {}", v.len())));
            }
            Ok(v)
        };
        let st = &self.state;
        W1StateF64::new(
            pick(&st.q, n, "q")?,
            pick(&st.y, n, "y")?,
            pick(&st.ydot_a, m, "ydot_a")?,
            pick(&st.p, n, "p")?,
            pick(&st.ptilde_alpha, n - m, "ptilde_alpha")?,
        )
        .map_err(|e| ConfigError::new(e.to_string()))
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, ConfigError> {
        let s = &self.integrator;
        let cfg = IntegratorConfig {
            method: match s.method {
                MethodName::Rk4 => Method::Rk4,
                MethodName::Rk45 => Method::Rk45,
            },
            dt: s.dt,
            tol: Tolerances { rtol: s.rtol, atol: s.atol },
            t0: s.t0,
            tf: s.tf,
            save_every: s.save_every,
        };
        cfg.validate().map_err(|e| ConfigError::new(e.to_string()))?;
        Ok(cfg)
    }

    pub fn bvp(&self) -> Result<BvpSpec, ConfigError> {
        let b = self.boundary.as_ref().ok_or_else(|| ConfigError::new("missing [boundary] section"))?;
        let mut spec = BvpSpec::new(b.q0.clone(), b.y0.clone(), b.qf.clone(), b.yf.clone());
        if let Some(g) = &b.guess {
            spec.guess = g.clone();
        }
        spec.max_iter = b.max_iter.unwrap_or(spec.max_iter);
        spec.residual_tol = b.residual_tol.unwrap_or(spec.residual_tol);
        spec.fd_step = b.fd_step.unwrap_or(spec.fd_step);
        spec.validate(self.dims().0).map_err(|e| ConfigError::new(e.to_string()))?;
        Ok(spec)
    }
}
