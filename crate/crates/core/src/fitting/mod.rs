//! Least-squares fitting: the Levenberg-Marquardt engine and the models
//! applied to spectra and to drive-power sweeps.

mod guess;
pub mod lm;
pub mod models;
pub mod power_laws;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::to_hz;

pub use lm::{levenberg_marquardt, LmOutcome};
pub use models::{
    fit_avoided_crossing, fit_avoided_crossing_from, fit_crossing_trace, fit_crossing_trace_from,
    fit_flux_arch, fit_lorentzian, fit_resonance,
    FluxPoint,
};
pub use power_laws::{fit_power_laws, PowerLawFit, PowerLawPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Bound on `max_j |J_jᵀr| / (‖J_j‖·max(‖r‖, residual_floor))`.
    pub gradient_tolerance: f64,
    /// Relative step size (scaled parameters) at which iteration stops.
    pub step_tolerance: f64,
    /// Initial damping as a fraction of the largest diagonal of `JᵀJ`.
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Residual norm below which a fit counts as exact. Models express
    /// residuals in units where the data are of order one.
    pub residual_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            step_tolerance: 1e-12,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 0.1,
            residual_floor: 1e-8,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gradient_tolerance", self.gradient_tolerance),
            ("step_tolerance", self.step_tolerance),
            ("initial_damping", self.initial_damping),
            ("residual_floor", self.residual_floor),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("fit config `{key}` must be positive")));
            }
        }
        if !(self.damping_up > 1.0 && self.damping_down > 0.0 && self.damping_down < 1.0) {
            return Err(Error::domain("damping factors must satisfy up > 1 > down > 0"));
        }
        Ok(())
    }
}

/// Physical dimension of a fitted quantity; decides the file representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    /// rad/s internally, Hz in files.
    AngularFrequency,
    /// radians
    Angle,
    Dimensionless,
    /// henry
    Inductance,
    /// units of Φ₀
    FluxQuantum,
}

impl Unit {
    pub fn to_file(self, value: f64) -> f64 {
        match self {
            Unit::AngularFrequency => to_hz(value),
            _ => value,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Unit::AngularFrequency => "Hz",
            Unit::Angle => "rad",
            Unit::Dimensionless => "1",
            Unit::Inductance => "H",
            Unit::FluxQuantum => "Phi0",
        }
    }
}

/// Start value and order-one scale of one fit parameter; the optimizer works
/// on `(p − init)/scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub init: f64,
    pub scale: f64,
    pub unit: Unit,
}

impl ParamSpec {
    pub fn new(name: &'static str, init: f64, scale: f64, unit: Unit) -> Self {
        Self {
            name,
            init,
            scale,
            unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedParam {
    pub name: &'static str,
    pub value: f64,
    pub std_error: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<FittedParam>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// False when the Jacobian at the optimum is rank deficient; the
    /// standard errors are then infinite.
    pub std_errors_reliable: bool,
}

impl FitResult {
    pub fn from_outcome(specs: &[ParamSpec], out: LmOutcome) -> Self {
        let params = specs
            .iter()
            .zip(out.params.iter().zip(&out.std_errors))
            .map(|(s, (&value, &std_error))| FittedParam {
                name: s.name,
                value,
                std_error,
                unit: s.unit,
            })
            .collect();
        Self {
            params,
            residual_norm: out.residual_norm,
            iterations: out.iterations,
            converged: out.converged,
            std_errors_reliable: out.std_errors_reliable,
        }
    }

    pub fn param(&self, name: &str) -> Option<&FittedParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Value of a named parameter in SI units.
    ///
    /// # Panics
    /// If the model has no such parameter.
    pub fn value(&self, name: &str) -> f64 {
        self.param(name)
            .unwrap_or_else(|| panic!("fit result has no parameter `{name}`"))
            .value
    }

    pub fn std_error(&self, name: &str) -> f64 {
        self.param(name)
            .unwrap_or_else(|| panic!("fit result has no parameter `{name}`"))
            .std_error
    }

    pub fn to_file(&self) -> FitResultFile {
        FitResultFile {
            params: self
                .params
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.to_string(),
                    value: p.unit.to_file(p.value),
                    std_error: if p.std_error.is_finite() {
                        Some(p.unit.to_file(p.std_error))
                    } else {
                        None
                    },
                    unit: p.unit.label().to_string(),
                })
                .collect(),
            residual_norm: self.residual_norm,
            iterations: self.iterations,
            converged: self.converged,
            std_errors_reliable: self.std_errors_reliable,
        }
    }
}

/// JSON form of a [`FitResult`]; angular frequencies are written in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResultFile {
    pub params: Vec<ParamEntry>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub std_errors_reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub value: f64,
    /// `null` when the Jacobian was rank deficient.
    pub std_error: Option<f64>,
    pub unit: String,
}
