use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use coupled_resonators::circuit::{cooperativity, Circuit};
use coupled_resonators::fitting::{levenberg_marquardt, FitConfig, ParamSpec, Unit};
use coupled_resonators::oracle::{steady_state_s21, SteadyStateProblem};
use coupled_resonators::spectra::{
    linear_grid, normal_mode_frequencies, s21_bare, s21_coupled, upconversion_power,
    CoupledModeParams,
};
use coupled_resonators::DeviceParams;

fn circuit() -> Circuit {
    Circuit::new(DeviceParams::reference())
}

fn params() -> impl Strategy<Value = CoupledModeParams> {
    let mhz = TAU * 1e6;
    (0.05..2.0f64, 0.05..2.0f64, 0.05..1.0f64, 0.0..2.0f64, -PI..PI).prop_map(
        move |(ki, ke, gm, g, theta)| CoupledModeParams {
            omega_a: TAU * 5.408e9,
            omega_b: TAU * 583.53e6,
            kappa_int: ki * mhz,
            kappa_ext: ke * mhz,
            gamma: gm * mhz,
            g: g * mhz,
            theta,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn frequency_is_even_and_flux_periodic(x in -0.44..0.44f64, n in -3i32..3) {
        let c = circuit();
        let phi0 = c.flux_quantum();
        let w = c.resonator_frequency(x * phi0).unwrap().omega_a;
        let mirrored = c.resonator_frequency(-x * phi0).unwrap().omega_a;
        let shifted = c.resonator_frequency((x + n as f64) * phi0).unwrap().omega_a;
        prop_assert!((w - mirrored).abs() <= 1e-12 * w);
        prop_assert!((w - shifted).abs() <= 1e-9 * w);
    }

    #[test]
    fn frequency_falls_toward_half_flux(x in 0.0..0.44f64, dx in 1e-4..0.01f64) {
        let c = circuit();
        let phi0 = c.flux_quantum();
        let lo = c.resonator_frequency(x * phi0).unwrap();
        let hi = c.resonator_frequency((x + dx) * phi0).unwrap();
        prop_assert!(hi.omega_a < lo.omega_a);
        prop_assert!(hi.kerr > lo.kerr);
    }

    #[test]
    fn gradient_matches_central_difference(x in 0.05..0.43f64) {
        let c = circuit();
        let phi0 = c.flux_quantum();
        let h = 1e-5 * phi0;
        let b = c.resonator_frequency(x * phi0).unwrap();
        let up = c.resonator_frequency(x * phi0 + h).unwrap().omega_a;
        let down = c.resonator_frequency(x * phi0 - h).unwrap().omega_a;
        let fd = (up - down) / (2.0 * h);
        prop_assert!((b.gradient - fd).abs() <= 1e-4 * fd.abs());
    }

    #[test]
    fn closed_form_matches_linear_solve(p in params(), da in -5.0..5.0f64, db in -5.0..5.0f64) {
        let w = p.omega_a + da * p.kappa();
        let wd = p.resonant_drive() + db * p.gamma;
        let closed = s21_coupled(w, wd, &p);
        let lu = steady_state_s21(&SteadyStateProblem::at(w, wd, p)).unwrap();
        prop_assert!((closed - lu).norm() <= 1e-10 * closed.norm());
    }

    #[test]
    fn vanishing_coupling_recovers_bare_notch(p in params(), da in -5.0..5.0f64) {
        let p = p.with_g(0.0);
        let w = p.omega_a + da * p.kappa();
        let cross = s21_coupled(w, p.resonant_drive(), &p);
        prop_assert!((cross - s21_bare(w, &p)).norm() <= 1e-14);
    }

    #[test]
    fn upconversion_power_is_normalized(p in params()) {
        let grid = linear_grid(p.omega_b, 5.0 * p.gamma, 201);
        let v = upconversion_power(&grid, &p, p.omega_a);
        let max = v.iter().cloned().fold(0.0, f64::max);
        prop_assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
        if p.g > 0.0 {
            prop_assert!((max - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_modes_decay(p in params(), db in -5.0..5.0f64) {
        let modes = normal_mode_frequencies(&p, p.resonant_drive() + db * p.gamma);
        for m in modes {
            prop_assert!(m.im < 0.0, "{m}");
        }
        prop_assert!(modes[0].re <= modes[1].re);
    }

    #[test]
    fn cooperativity_is_scale_free(g in 1e3..1e7f64, k in 1e3..1e8f64, gm in 1e3..1e8f64, s in 1e-3..1e3f64) {
        let c = cooperativity(g, k, gm).unwrap();
        let scaled = cooperativity(s * g, s * k, s * gm).unwrap();
        prop_assert!((c - scaled).abs() <= 1e-12 * c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Accepted steps never raise the cost, and reruns are bitwise identical.
    #[test]
    fn lm_is_monotone_and_deterministic(a in 0.5..3.0f64, b in 0.1..2.0f64, a0 in 0.1..5.0f64, b0 in 0.05..3.0f64) {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| a * (-b * x).exp() + 0.01 * (7.0 * x).sin()).collect();
        let residuals = |p: &[f64]| -> Option<Vec<f64>> {
            Some(xs.iter().zip(&ys).map(|(&x, &y)| y - p[0] * (-p[1] * x).exp()).collect())
        };
        let specs = [
            ParamSpec::new("a", a0, 1.0, Unit::Dimensionless),
            ParamSpec::new("b", b0, 1.0, Unit::Dimensionless),
        ];
        let cfg = FitConfig::default();
        let one = levenberg_marquardt(residuals, &specs, &cfg).unwrap();
        let two = levenberg_marquardt(residuals, &specs, &cfg).unwrap();
        prop_assert!(one.cost_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(one.params, two.params);
        prop_assert_eq!(one.std_errors, two.std_errors);
    }
}
