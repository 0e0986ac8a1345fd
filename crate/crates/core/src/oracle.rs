//! Independent routes to the steady-state transmission: a 2×2 linear solve
//! and fixed-step RK4 integration of the linearized mode equations.
//!
//! Neither route calls into [`crate::spectra`]; tests compare them against
//! the closed form.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectra::CoupledModeParams;

/// Fluctuation-frame steady-state problem at fixed detunings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateProblem {
    /// `δ_a = ω_in − ω_a`
    pub detuning_a: f64,
    /// `δ_b = ω_in − ω_d − ω_b`
    pub detuning_b: f64,
    pub params: CoupledModeParams,
    pub probe_amp: Complex64,
}

impl SteadyStateProblem {
    pub fn new(detuning_a: f64, detuning_b: f64, params: CoupledModeParams) -> Self {
        Self {
            detuning_a,
            detuning_b,
            params,
            probe_amp: Complex64::new(1.0, 0.0),
        }
    }

    /// Builds the problem seen by a probe at `omega_in` with the drive at `omega_d`.
    pub fn at(omega_in: f64, omega_d: f64, params: CoupledModeParams) -> Self {
        Self::new(
            omega_in - params.omega_a,
            omega_in - omega_d - params.omega_b,
            params,
        )
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.kappa() > 0.0 && p.gamma > 0.0) {
            return Err(Error::domain("steady-state problem needs positive κ and γ"));
        }
        Ok(())
    }

    /// `[[δ_a + iκ/2, g], [g, δ_b + iγ/2]]`
    pub fn coupling_matrix(&self) -> Matrix2<Complex64> {
        let p = &self.params;
        Matrix2::new(
            Complex64::new(self.detuning_a, p.kappa() / 2.0),
            Complex64::new(p.g, 0.0),
            Complex64::new(p.g, 0.0),
            Complex64::new(self.detuning_b, p.gamma / 2.0),
        )
    }

    /// Dynamical matrix of the time-domain equations, `ẋ = −i·M̄·x + f`.
    /// This is the conjugate of [`Self::coupling_matrix`], so decays appear
    /// with negative real parts in `−iM̄`.
    pub fn dynamical_matrix(&self) -> Matrix2<Complex64> {
        self.coupling_matrix().map(|z| z.conj())
    }

    fn drive(&self) -> Vector2<Complex64> {
        Vector2::new(self.probe_amp * self.params.kappa_ext.sqrt(), Complex64::new(0.0, 0.0))
    }
}

/// `e^{iθ} − iκ_int·(M⁻¹)₁₁` from an LU solve.
pub fn steady_state_s21(prob: &SteadyStateProblem) -> Result<Complex64> {
    prob.validate()?;
    let m = prob.coupling_matrix();
    let column = m
        .lu()
        .solve(&Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)))
        .ok_or_else(|| Error::Numeric("singular coupling matrix".into()))?;
    let p = &prob.params;
    Ok(Complex64::from_polar(1.0, p.theta) - Complex64::i() * p.kappa_int * column[0])
}

/// Steady mode amplitudes `(ã, b)` of the time-domain equations from a
/// linear solve of `M̄x = −i·f`.
pub fn steady_state_amplitudes(prob: &SteadyStateProblem) -> Result<[Complex64; 2]> {
    prob.validate()?;
    let rhs = prob.drive() * -Complex64::i();
    let x = prob
        .dynamical_matrix()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular dynamical matrix".into()))?;
    Ok([x[0], x[1]])
}

/// Maps the driven-mode amplitude back to transmission:
/// `S21 = e^{iθ} − (κ_int/√κ_ext)·conj(ã/s_in)`.
pub fn s21_from_amplitude(a: Complex64, prob: &SteadyStateProblem) -> Result<Complex64> {
    let p = &prob.params;
    if !(p.kappa_ext > 0.0) {
        return Err(Error::domain("transmission needs a finite external coupling"));
    }
    if prob.probe_amp.norm() == 0.0 {
        return Err(Error::domain("probe amplitude must be non-zero"));
    }
    Ok(Complex64::from_polar(1.0, p.theta) - p.kappa_int / p.kappa_ext.sqrt() * (a / prob.probe_amp).conj())
}

/// Eigenvalues of `−iM̄`; both must have negative real part.
pub fn decay_eigenvalues(prob: &SteadyStateProblem) -> [Complex64; 2] {
    let m = prob.dynamical_matrix();
    let half_diff = (m[(0, 0)] - m[(1, 1)]) / 2.0;
    let mean = (m[(0, 0)] + m[(1, 1)]) / 2.0;
    let root = (half_diff * half_diff + m[(0, 1)] * m[(1, 0)]).sqrt();
    let minus_i = -Complex64::i();
    [minus_i * (mean + root), minus_i * (mean - root)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Step as a fraction of the fastest rate's period, `h = step_fraction / max rate`.
    pub step_fraction: f64,
    /// Overrides `step_fraction` when set (seconds).
    pub step: Option<f64>,
    /// Relative change per linewidth-time that counts as settled.
    pub tolerance: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step_fraction: 0.05,
            step: None,
            tolerance: 1e-9,
            max_steps: 200_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettledAmplitudes {
    pub a: Complex64,
    pub b: Complex64,
    pub time: f64,
    pub steps: u64,
}

/// Integrates `d/dt(ã, b) = −iM̄(ã, b) + (√κ_ext·s_in, 0)` from rest with
/// fixed-step RK4 until the state changes by less than `tolerance`
/// (relative) over one linewidth-time `1/min(κ, γ)`.
pub fn integrate_to_steady_state(
    prob: &SteadyStateProblem,
    cfg: &IntegratorConfig,
) -> Result<SettledAmplitudes> {
    prob.validate()?;
    for lambda in decay_eigenvalues(prob) {
        if !(lambda.re < 0.0) {
            return Err(Error::Numeric(format!(
                "unstable mode: eigenvalue {lambda} of −iM̄"
            )));
        }
    }
    let p = &prob.params;
    let fastest = [
        p.kappa(),
        p.gamma,
        prob.detuning_a.abs(),
        prob.detuning_b.abs(),
        p.g.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let h = cfg.step.unwrap_or(cfg.step_fraction / fastest);
    if !(h > 0.0 && h < 0.1 / fastest) {
        return Err(Error::domain(format!(
            "RK4 step {h:.3e} s must be below 0.1/max rate = {:.3e} s",
            0.1 / fastest
        )));
    }
    let linewidth_time = 1.0 / p.kappa().min(p.gamma);
    let steps_per_check = (linewidth_time / h).ceil() as u64;

    let a_mat = prob.dynamical_matrix() * -Complex64::i();
    let f = prob.drive();
    let rhs = |x: &Vector2<Complex64>| a_mat * x + f;

    let (half, full) = (Complex64::from(h / 2.0), Complex64::from(h));
    let (two, sixth) = (Complex64::from(2.0), Complex64::from(h / 6.0));
    let mut x = Vector2::zeros();
    let mut steps = 0u64;
    loop {
        let before = x;
        for _ in 0..steps_per_check {
            let k1 = rhs(&x);
            let k2 = rhs(&(x + k1 * half));
            let k3 = rhs(&(x + k2 * half));
            let k4 = rhs(&(x + k3 * full));
            x += (k1 + k2 * two + k3 * two + k4) * sixth;
        }
        steps += steps_per_check;
        let change = (x - before).norm();
        let scale = x.norm();
        if scale > 0.0 && change <= cfg.tolerance * scale {
            break;
        }
        if steps >= cfg.max_steps {
            return Err(Error::Convergence {
                what: "RK4 steady-state integration",
                iterations: steps as usize,
                residual: change / scale.max(f64::MIN_POSITIVE),
            });
        }
    }
    Ok(SettledAmplitudes {
        a: x[0],
        b: x[1],
        time: steps as f64 * h,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{s21_bare, s21_coupled};
    use std::f64::consts::TAU;

    fn params() -> CoupledModeParams {
        CoupledModeParams {
            omega_a: TAU * 5.408e9,
            omega_b: TAU * 583.53e6,
            kappa_int: TAU * 0.8e6,
            kappa_ext: TAU * 0.7e6,
            gamma: TAU * 300e3,
            g: TAU * 280e3,
            theta: TAU * -0.04,
        }
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn diagonal_inverse_at_zero_coupling() {
        let p = params().with_g(0.0);
        for k in [-3.0, -0.4, 0.0, 0.8, 5.0] {
            let w = p.omega_a + k * p.kappa();
            let prob = SteadyStateProblem::at(w, p.resonant_drive(), p);
            let expected = Complex64::from_polar(1.0, p.theta)
                - Complex64::i() * p.kappa_int / Complex64::new(prob.detuning_a, p.kappa() / 2.0);
            let s = steady_state_s21(&prob).unwrap();
            assert!(rel(s, expected) < 1e-14);
            assert!(rel(s, s21_bare(w, &p)) < 1e-12);
        }
    }

    #[test]
    fn linear_solve_matches_closed_form_at_resonance() {
        let p = params();
        let prob = SteadyStateProblem::at(p.omega_a, p.resonant_drive(), p);
        let s = steady_state_s21(&prob).unwrap();
        assert!(rel(s, s21_coupled(p.omega_a, p.resonant_drive(), &p)) < 1e-10);
    }

    #[test]
    fn decoupled_mode_settles_to_lorentzian() {
        let p = params().with_g(0.0);
        let prob = SteadyStateProblem::new(0.6 * p.kappa(), -0.2 * p.kappa(), p);
        let out = integrate_to_steady_state(&prob, &IntegratorConfig::default()).unwrap();
        let expected = p.kappa_ext.sqrt() / Complex64::new(p.kappa() / 2.0, prob.detuning_a);
        assert!(rel(out.a, expected) < 1e-8);
        assert!(out.b.norm() == 0.0);
    }

    #[test]
    fn integrated_transmission_matches_closed_form() {
        let p = params();
        for k in [-1.0, 0.0, 0.25, 2.0] {
            let w = p.omega_a + k * p.kappa();
            let prob = SteadyStateProblem::at(w, p.resonant_drive(), p);
            let out = integrate_to_steady_state(&prob, &IntegratorConfig::default()).unwrap();
            let s = s21_from_amplitude(out.a, &prob).unwrap();
            assert!(rel(s, s21_coupled(w, p.resonant_drive(), &p)) < 1e-6);
            let lin = steady_state_amplitudes(&prob).unwrap();
            assert!(rel(out.b, lin[1]) < 1e-6);
        }
    }

    #[test]
    fn halving_step_is_converged() {
        let p = params();
        let prob = SteadyStateProblem::at(p.omega_a + 0.3 * p.kappa(), p.resonant_drive(), p);
        let cfg = IntegratorConfig::default();
        let coarse = integrate_to_steady_state(&prob, &cfg).unwrap();
        let fine = integrate_to_steady_state(
            &prob,
            &IntegratorConfig {
                step_fraction: cfg.step_fraction / 2.0,
                ..cfg
            },
        )
        .unwrap();
        assert!(rel(coarse.a, fine.a) < 1e-8);
        assert!(rel(coarse.b, fine.b) < 1e-8);
    }

    #[test]
    fn rejects_oversized_step_and_zero_linewidth() {
        let p = params();
        let prob = SteadyStateProblem::at(p.omega_a, p.resonant_drive(), p);
        let cfg = IntegratorConfig {
            step: Some(1.0 / p.kappa()),
            ..IntegratorConfig::default()
        };
        assert!(matches!(integrate_to_steady_state(&prob, &cfg), Err(Error::Domain(_))));
        let mut q = prob;
        q.params.gamma = 0.0;
        assert!(steady_state_s21(&q).is_err());
    }

    #[test]
    fn decay_eigenvalues_are_stable() {
        let p = params();
        for k in [-50.0, -1.0, 0.0, 3.0, 80.0] {
            let prob = SteadyStateProblem::new(k * p.kappa(), -k * p.gamma, p);
            for l in decay_eigenvalues(&prob) {
                assert!(l.re < 0.0);
            }
        }
    }
}
