//! Scenario configuration files (TOML).
//!
//! ```toml
//! scenario = "oscillator_compression"
//! output_dir = "out/compression"
//!
//! [rescaling]
//! family = "sin"
//! a = 4.0
//! t_f = 100.0
//!
//! [model]
//! omega0 = 1.0
//! omega_f = 6.0
//! basis_dim = 64
//!
//! [solver]
//! target_tol = 1e-6
//! compare_levels = 32
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rescale::{RescalingFamily, RescalingSpec};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "TR_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[serde(alias = "SpinFlipConstantZ")]
    SpinFlipConstantZ,
    #[serde(alias = "SpinRotatingField")]
    SpinRotatingField,
    #[serde(alias = "OscillatorCompression")]
    OscillatorCompression,
    #[serde(alias = "TrapTransport")]
    TrapTransport,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::SpinFlipConstantZ => "spin_flip_constant_z",
            Scenario::SpinRotatingField => "spin_rotating_field",
            Scenario::OscillatorCompression => "oscillator_compression",
            Scenario::TrapTransport => "trap_transport",
        }
    }

    pub fn is_spin(self) -> bool {
        matches!(self, Scenario::SpinFlipConstantZ | Scenario::SpinRotatingField)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescalingSection {
    #[serde(default = "default_family")]
    pub family: String,
    pub a: f64,
    /// Reference duration; scenario default when omitted.
    pub t_f: Option<f64>,
}

fn default_family() -> String {
    "sin".into()
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hbar: Option<f64>,
    pub mass: Option<f64>,
    pub gamma: Option<f64>,
    pub b0: Option<f64>,
    /// Angle of the rotating field from the z axis.
    pub tilt: Option<f64>,
    pub omega_rot: Option<f64>,
    pub omega0: Option<f64>,
    pub omega_f: Option<f64>,
    /// Fixed trap frequency of the transport scenario.
    pub omega: Option<f64>,
    pub d: Option<f64>,
    pub basis_dim: Option<usize>,
    pub basis_frequency: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Fixed step count; when absent the step count is refined until
    /// `target_tol` is met.
    pub n_steps: Option<usize>,
    #[serde(default = "default_target_tol")]
    pub target_tol: f64,
    #[serde(default = "default_initial_steps")]
    pub initial_steps: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Compare and propagate only the lowest levels (truncation guard).
    pub compare_levels: Option<usize>,
    #[serde(default = "default_samples")]
    pub trajectory_samples: usize,
    #[serde(default = "default_quadrature")]
    pub quadrature_points: usize,
    #[serde(default = "default_norm_samples")]
    pub norm_samples: usize,
    #[serde(default = "default_fidelity_threshold")]
    pub fidelity_threshold: f64,
    #[serde(default = "default_operator_tol")]
    pub operator_tol: f64,
    #[serde(default = "default_unitarity_tol")]
    pub unitarity_tol: f64,
    #[serde(default = "default_integral_tol")]
    pub integral_tol: f64,
}

fn default_target_tol() -> f64 {
    1e-7
}
fn default_initial_steps() -> usize {
    16
}
fn default_max_steps() -> usize {
    1 << 20
}
fn default_samples() -> usize {
    201
}
fn default_quadrature() -> usize {
    4001
}
fn default_norm_samples() -> usize {
    2001
}
fn default_fidelity_threshold() -> f64 {
    1.0 - 1e-6
}
fn default_operator_tol() -> f64 {
    1e-6
}
fn default_unitarity_tol() -> f64 {
    1e-10
}
fn default_integral_tol() -> f64 {
    1e-8
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            n_steps: None,
            target_tol: default_target_tol(),
            initial_steps: default_initial_steps(),
            max_steps: default_max_steps(),
            compare_levels: None,
            trajectory_samples: default_samples(),
            quadrature_points: default_quadrature(),
            norm_samples: default_norm_samples(),
            fidelity_threshold: default_fidelity_threshold(),
            operator_tol: default_operator_tol(),
            unitarity_tol: default_unitarity_tol(),
            integral_tol: default_integral_tol(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub rescaling: RescalingSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("tr-output")
}

/// Model parameters with scenario defaults filled in and validated.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedModel {
    pub hbar: f64,
    pub mass: f64,
    pub gamma: f64,
    pub b0: f64,
    pub tilt: f64,
    pub omega_rot: f64,
    pub omega0: f64,
    pub omega_f: f64,
    pub omega: f64,
    pub d: f64,
    pub basis_dim: usize,
    pub basis_frequency: f64,
    pub t_f: f64,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Built-in configuration with every parameter at its scenario default.
    pub fn preset(scenario: Scenario, a: f64) -> Self {
        Self {
            scenario,
            output_dir: default_output_dir(),
            rescaling: RescalingSection {
                family: default_family(),
                a,
                t_f: None,
            },
            model: ModelSection::default(),
            solver: SolverSection::default(),
        }
    }

    pub fn with_a(&self, a: f64) -> Self {
        let mut c = self.clone();
        c.rescaling.a = a;
        c
    }

    /// Output directory after applying the environment override.
    pub fn effective_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone())
    }

    pub fn rescaling_spec(&self) -> Result<RescalingSpec> {
        let model = self.resolve()?;
        let family = RescalingFamily::parse(&self.rescaling.family)?;
        RescalingSpec::new(family, self.rescaling.a, model.t_f)
    }

    pub fn resolve(&self) -> Result<ResolvedModel> {
        let m = &self.model;
        let hbar = m.hbar.unwrap_or(1.0);
        let mass = m.mass.unwrap_or(1.0);
        let gamma = m.gamma.unwrap_or(1.0);
        let b0 = m.b0.unwrap_or(1.0);
        let omega_spin = gamma * b0;
        let omega0 = m.omega0.unwrap_or(1.0);
        let omega = m.omega.unwrap_or(1.0);
        let (default_tf, default_dim, default_basis) = match self.scenario {
            Scenario::SpinFlipConstantZ => (PI / omega_spin.abs(), 2, 1.0),
            Scenario::SpinRotatingField => (2.0 * PI / omega_spin.abs(), 2, 1.0),
            Scenario::OscillatorCompression => (100.0, 64, omega0),
            Scenario::TrapTransport => (50.0, 96, omega),
        };
        let r = ResolvedModel {
            hbar,
            mass,
            gamma,
            b0,
            tilt: m.tilt.unwrap_or(PI / 4.0),
            omega_rot: m.omega_rot.unwrap_or(omega_spin / 2.0),
            omega0,
            omega_f: m.omega_f.unwrap_or(6.0),
            omega,
            d: m.d.unwrap_or(5.0),
            basis_dim: m.basis_dim.unwrap_or(default_dim),
            basis_frequency: m.basis_frequency.unwrap_or(default_basis),
            t_f: self.rescaling.t_f.unwrap_or(default_tf),
        };
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be a positive number, got {v}")))
            }
        };
        positive("hbar", r.hbar)?;
        positive("t_f", r.t_f)?;
        positive("a", self.rescaling.a)?;
        RescalingFamily::parse(&self.rescaling.family).map_err(|e| Error::Config(e.to_string()))?;
        if self.scenario.is_spin() {
            if !(r.gamma != 0.0 && r.gamma.is_finite()) {
                return Err(Error::Config("gamma must be finite and nonzero".into()));
            }
            positive("b0", r.b0)?;
        } else {
            positive("mass", r.mass)?;
            positive("basis_frequency", r.basis_frequency)?;
            if r.basis_dim < 2 {
                return Err(Error::Config(format!("basis_dim must be ≥ 2, got {}", r.basis_dim)));
            }
            match self.scenario {
                Scenario::OscillatorCompression => {
                    positive("omega0", r.omega0)?;
                    positive("omega_f", r.omega_f)?;
                }
                _ => {
                    positive("omega", r.omega)?;
                    if !r.d.is_finite() {
                        return Err(Error::Config("d must be finite".into()));
                    }
                }
            }
        }
        let s = &self.solver;
        if let Some(n) = s.n_steps {
            if n == 0 {
                return Err(Error::Config("solver.n_steps must be ≥ 1".into()));
            }
        }
        positive("solver.target_tol", s.target_tol)?;
        if s.quadrature_points < 3 || s.quadrature_points % 2 == 0 {
            return Err(Error::Config("solver.quadrature_points must be odd and ≥ 3".into()));
        }
        if s.norm_samples < 2 || s.trajectory_samples < 2 {
            return Err(Error::Config("sample counts must be ≥ 2".into()));
        }
        if let Some(k) = s.compare_levels {
            let dim = if self.scenario.is_spin() { 2 } else { r.basis_dim };
            if k == 0 || k > dim {
                return Err(Error::Config(format!("compare_levels must be in 1..={dim}, got {k}")));
            }
        }
        Ok(r)
    }
}
