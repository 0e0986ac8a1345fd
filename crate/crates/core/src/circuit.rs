//! Lumped-element model of the device: a SQUID-tunable high-frequency
//! resonator whose loop picks up the zero-point current of a nearby
//! low-frequency LC resonator.
//!
//! Everything here works in SI units with angular frequencies. Flux
//! arguments are in webers; helpers taking reduced flux (units of Φ₀) say so.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 exact values (μ₀ is the 2018 recommended value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub e_charge: f64,
    pub mu0: f64,
    pub flux_quantum: f64,
}

impl PhysicalConstants {
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

    pub const SI: PhysicalConstants = PhysicalConstants {
        hbar: Self::PLANCK / (2.0 * PI),
        e_charge: Self::ELEMENTARY_CHARGE,
        mu0: 1.256_637_062_12e-6,
        flux_quantum: Self::PLANCK / (2.0 * Self::ELEMENTARY_CHARGE),
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::SI
    }
}

/// Geometric and electrical constants of the two-resonator circuit.
///
/// Keys of the JSON device file are exactly these field names, values in SI
/// (angular frequencies in rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Capacitance of the low-frequency resonator.
    pub c_low: f64,
    /// Angular frequency of the low-frequency resonator.
    pub omega_b: f64,
    /// SQUID loop area.
    pub loop_area: f64,
    /// Distance between the inductive wire and the SQUID.
    pub wire_distance: f64,
    /// Geometric inductance of the high-frequency resonator.
    pub l_geo: f64,
    /// Self-inductance of the SQUID loop.
    pub l_loop: f64,
    /// Josephson inductance of the SQUID at zero loop flux.
    pub l_j0: f64,
    /// Resonance frequency of the high-frequency resonator at zero flux.
    pub omega_a_max: f64,
}

const REFERENCE_DEVICE_JSON: &str = include_str!("../data/reference_device.json");

impl DeviceParams {
    /// Reference device, bundled as
    /// `data/reference_device.json`.
    pub fn reference() -> Self {
        serde_json::from_str(REFERENCE_DEVICE_JSON).expect("bundled device file is valid")
    }

    pub fn bundled_json() -> &'static str {
        REFERENCE_DEVICE_JSON
    }

    /// Checks every field is finite and positive; `l_loop` may be zero.
    pub fn validate(&self) -> Result<()> {
        let strictly_positive = [
            ("c_low", self.c_low),
            ("omega_b", self.omega_b),
            ("loop_area", self.loop_area),
            ("wire_distance", self.wire_distance),
            ("l_geo", self.l_geo),
            ("l_j0", self.l_j0),
            ("omega_a_max", self.omega_a_max),
        ];
        for (key, value) in strictly_positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(format!("`{key}` must be positive, got {value}")));
            }
        }
        if !(self.l_loop.is_finite() && self.l_loop >= 0.0) {
            return Err(Error::domain(format!(
                "`l_loop` must be non-negative, got {}",
                self.l_loop
            )));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let dev: DeviceParams = crate::io::parse_json(text, origin)?;
        dev.validate()
            .map_err(|e| Error::parse(origin, e.to_string()))?;
        Ok(dev)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    /// Effective capacitance of the high-frequency resonator, fixed by
    /// `omega_a_max = 1/√((l_geo + l_j0)·C_a)`.
    pub fn c_high(&self) -> f64 {
        1.0 / (self.omega_a_max * self.omega_a_max * (self.l_geo + self.l_j0))
    }
}

/// Settings for the loop-flux screening solve and the half-flux clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningSolver {
    /// Refuse loop fluxes closer than this to Φ₀/2 (units of Φ₀).
    pub clamp: f64,
    /// Convergence tolerance on the loop flux (units of Φ₀).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ScreeningSolver {
    fn default() -> Self {
        Self {
            clamp: 0.02,
            tolerance: 1e-12,
            max_iterations: 200,
        }
    }
}

/// Converged loop flux for a given applied flux, in units of Φ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopFlux {
    /// Applied flux folded into [−½, ½).
    pub external: f64,
    pub loop_flux: f64,
    /// ∂(loop flux)/∂(applied flux).
    pub susceptibility: f64,
    pub iterations: usize,
}

/// An operating point of the tunable resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasPoint {
    /// Applied flux, Wb.
    pub phi_ext: f64,
    /// Resonance at this bias, rad/s.
    pub omega_a: f64,
    /// ∂ω_a/∂Φ_ext, rad/s per Wb.
    pub gradient: f64,
    /// Self-Kerr constant, rad/s.
    pub kerr: f64,
    /// Josephson inductance at the bias, H.
    pub l_j: f64,
}

impl BiasPoint {
    pub fn l_tot(&self, dev: &DeviceParams) -> f64 {
        dev.l_geo + self.l_j
    }
}

/// The device together with the constants and solver settings used to
/// evaluate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circuit {
    pub device: DeviceParams,
    pub constants: PhysicalConstants,
    pub solver: ScreeningSolver,
}

impl Circuit {
    pub fn new(device: DeviceParams) -> Self {
        Self {
            device,
            constants: PhysicalConstants::SI,
            solver: ScreeningSolver::default(),
        }
    }

    pub fn with_solver(mut self, solver: ScreeningSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn flux_quantum(&self) -> f64 {
        self.constants.flux_quantum
    }

    /// `I_zpf = √(ħ ω_b³ C / 2)`.
    pub fn zero_point_current(&self) -> Result<f64> {
        let dev = &self.device;
        non_negative("c_low", dev.c_low)?;
        non_negative("omega_b", dev.omega_b)?;
        Ok((self.constants.hbar * dev.omega_b.powi(3) * dev.c_low / 2.0).sqrt())
    }

    /// Flux threading the SQUID loop from the zero-point current, using the
    /// field of a long straight wire at distance `wire_distance`.
    pub fn zero_point_flux(&self) -> Result<f64> {
        let dev = &self.device;
        if !(dev.wire_distance.is_finite() && dev.wire_distance > 0.0) {
            return Err(Error::domain(format!(
                "wire_distance must be positive, got {}",
                dev.wire_distance
            )));
        }
        non_negative("loop_area", dev.loop_area)?;
        let b_zpf = self.constants.mu0 * self.zero_point_current()? / (2.0 * PI * dev.wire_distance);
        Ok(dev.loop_area * b_zpf)
    }

    /// Symmetric-SQUID inductance `L_J0 / |cos(π φ/Φ₀)|` at loop flux `phi_loop` (Wb).
    pub fn josephson_inductance(&self, phi_loop: f64) -> Result<f64> {
        let f = fold(phi_loop / self.flux_quantum());
        self.check_clamp(f)?;
        Ok(self.device.l_j0 / (PI * f).cos().abs())
    }

    fn check_clamp(&self, reduced_loop: f64) -> Result<()> {
        let distance = 0.5 - fold(reduced_loop).abs();
        if distance < self.solver.clamp || distance <= 0.0 {
            return Err(Error::Singularity {
                loop_flux: reduced_loop,
                clamp: self.solver.clamp,
            });
        }
        Ok(())
    }

    /// Screening parameter `L_loop·I_c/Φ₀` with the per-junction critical
    /// current `I_c = Φ₀/(4π L_J0)`.
    pub fn screening_beta(&self) -> f64 {
        self.device.l_loop / (4.0 * PI * self.device.l_j0)
    }

    /// Solves `φ = φ_ext − β·sin(πφ)·sgn(cos(πφ))` (reduced units) by damped
    /// fixed-point iteration.
    pub fn loop_flux(&self, phi_ext: f64) -> Result<LoopFlux> {
        let external = fold(phi_ext / self.flux_quantum());
        if !external.is_finite() {
            return Err(Error::domain(format!("applied flux must be finite, got {phi_ext}")));
        }
        if external.abs() >= 0.5 {
            // Both screening branches are degenerate exactly at half flux.
            return Err(Error::Singularity {
                loop_flux: external,
                clamp: self.solver.clamp,
            });
        }
        let beta = self.screening_beta();
        let damping = 1.0 / (1.0 + PI * beta * (PI * external).cos());
        let mut f = external;
        let mut iterations = 0;
        loop {
            iterations += 1;
            let (s, c) = (PI * f).sin_cos();
            let target = external - beta * s * c.signum();
            let next = f + damping * (target - f);
            let step = (next - f).abs();
            f = next;
            if step <= self.solver.tolerance {
                break;
            }
            if iterations >= self.solver.max_iterations {
                return Err(Error::Convergence {
                    what: "loop-flux screening iteration",
                    iterations,
                    residual: step,
                });
            }
        }
        self.check_clamp(f)?;
        Ok(LoopFlux {
            external,
            loop_flux: f,
            susceptibility: 1.0 / (1.0 + PI * beta * (PI * f).cos()),
            iterations,
        })
    }

    /// Resonance, analytic flux gradient and Kerr constant at applied flux
    /// `phi_ext` (Wb).
    pub fn resonator_frequency(&self, phi_ext: f64) -> Result<BiasPoint> {
        let dev = &self.device;
        let screened = self.loop_flux(phi_ext)?;
        let (s, c) = (PI * screened.loop_flux).sin_cos();
        let l_j = dev.l_j0 / c;
        let l_tot = dev.l_geo + l_j;
        let omega_a = dev.omega_a_max * ((dev.l_geo + dev.l_j0) / l_tot).sqrt();

        let dlj_dflux = dev.l_j0 * PI * s / (c * c);
        let gradient =
            -omega_a / (2.0 * l_tot) * dlj_dflux * screened.susceptibility / self.flux_quantum();

        let mut bias = BiasPoint {
            phi_ext,
            omega_a,
            gradient,
            kerr: 0.0,
            l_j,
        };
        bias.kerr = self.kerr_constant(&bias);
        Ok(bias)
    }

    /// `ħK = E_c (L_J/L_tot)³` with `E_c = e² ω_a² L_tot / 2`.
    pub fn kerr_constant(&self, bias: &BiasPoint) -> f64 {
        let l_tot = bias.l_tot(&self.device);
        let charging = self.constants.e_charge.powi(2) * bias.omega_a.powi(2) * l_tot / 2.0;
        charging * (bias.l_j / l_tot).powi(3) / self.constants.hbar
    }

    /// Bare longitudinal coupling `g₀ = Φ_zpf·|∂ω_a/∂Φ_ext|` at `bias`.
    pub fn bare_coupling(&self, bias: &BiasPoint) -> Result<f64> {
        Ok(bare_coupling(self.zero_point_flux()?, bias.gradient))
    }

    /// Finds the bias on `0 ≤ Φ_ext < Φ₀/2` where the resonance equals
    /// `omega_a`, by bisection on the monotone branch.
    pub fn bias_for_frequency(&self, omega_a: f64) -> Result<BiasPoint> {
        let phi0 = self.flux_quantum();
        let top = self.resonator_frequency(0.0)?;
        if omega_a > top.omega_a {
            return Err(Error::domain(format!(
                "target {omega_a:.6e} rad/s exceeds the maximum {:.6e} rad/s",
                top.omega_a
            )));
        }
        // Largest usable flux: walk toward half flux until the clamp or branch stops it.
        let mut hi = 0.5 - f64::EPSILON;
        let mut lo = 0.0;
        while self.resonator_frequency(hi * phi0).is_err() {
            let mid = 0.5 * (lo + hi);
            if self.resonator_frequency(mid * phi0).is_ok() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                hi = lo;
                break;
            }
        }
        let bottom = self.resonator_frequency(hi * phi0)?;
        if omega_a < bottom.omega_a {
            return Err(Error::domain(format!(
                "target {omega_a:.6e} rad/s is below the lowest reachable {:.6e} rad/s",
                bottom.omega_a
            )));
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.resonator_frequency(mid * phi0)?.omega_a > omega_a {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        self.resonator_frequency(0.5 * (lo + hi) * phi0)
    }
}

/// Folds a reduced flux into [−½, ½).
fn fold(reduced: f64) -> f64 {
    reduced - (reduced + 0.5).floor()
}

fn non_negative(key: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("`{key}` must be non-negative, got {value}")))
    }
}

/// `g₀ = Φ_zpf·|∂ω_a/∂Φ_ext|`.
pub fn bare_coupling(phi_zpf: f64, gradient: f64) -> f64 {
    phi_zpf * gradient.abs()
}

/// Drive-enhanced beam-splitter coupling `g = g₀·α_d`.
pub fn effective_coupling(g0: f64, alpha_d: f64) -> Result<f64> {
    if !(alpha_d >= 0.0) {
        return Err(Error::domain(format!(
            "drive amplitude must be non-negative, got {alpha_d}"
        )));
    }
    Ok(g0 * alpha_d)
}

/// Drive-induced Stark shift `Δ = 2K·α_d²`.
pub fn stark_shift(kerr: f64, alpha_d: f64) -> f64 {
    2.0 * kerr * alpha_d * alpha_d
}

/// Cooperativity `4g²/(κγ)`.
pub fn cooperativity(g: f64, kappa: f64, gamma: f64) -> Result<f64> {
    if !(kappa > 0.0 && gamma > 0.0) {
        return Err(Error::domain(format!(
            "linewidths must be positive, got κ = {kappa}, γ = {gamma}"
        )));
    }
    Ok(4.0 * g * g / (kappa * gamma))
}
