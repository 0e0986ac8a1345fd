//! Levenberg-Marquardt on internally rescaled parameters with a
//! forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use super::{FitConfig, ParamSpec};
use crate::error::{Error, Result};

/// Raw optimizer output in physical parameter units.
#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub std_errors_reliable: bool,
    pub residual_norm: f64,
    /// Number of trial steps taken (accepted or rejected).
    pub iterations: usize,
    pub converged: bool,
    /// Scaled-gradient measure at the returned point, `max_j |J_jᵀr| / (‖J_j‖·max(‖r‖, floor))`.
    pub gradient_measure: f64,
    /// Sum of squares after the initial point and after every accepted step.
    pub cost_history: Vec<f64>,
}

struct Scaled<'a, F> {
    residuals: F,
    specs: &'a [ParamSpec],
}

impl<F> Scaled<'_, F>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    fn physical(&self, x: &DVector<f64>) -> Vec<f64> {
        self.specs
            .iter()
            .zip(x.iter())
            .map(|(s, &xi)| s.init + s.scale * xi)
            .collect()
    }

    fn eval(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let r = (self.residuals)(&self.physical(x))?;
        if r.iter().all(|v| v.is_finite()) {
            Some(DVector::from_vec(r))
        } else {
            None
        }
    }

    /// Forward differences with step `1e-7·max(|x_j|, 1)`; falls back to a
    /// backward step where the forward point cannot be evaluated.
    fn jacobian(&self, x: &DVector<f64>, r: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = x.len();
        let mut jac = DMatrix::zeros(r.len(), n);
        for j in 0..n {
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let column = match self.eval(&xp) {
                Some(rp) => (rp - r) / h,
                None => {
                    xp[j] = x[j] - h;
                    (r - self.eval(&xp)?) / h
                }
            };
            jac.set_column(j, &column);
        }
        Some(jac)
    }

    fn central_jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = x.len();
        let mut columns = Vec::with_capacity(n);
        for j in 0..n {
            let h = 1e-5 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            columns.push((self.eval(&xp)? - self.eval(&xm)?) / (2.0 * h));
        }
        Some(DMatrix::from_columns(&columns))
    }
}

fn gradient_measure(jac: &DMatrix<f64>, r: &DVector<f64>, floor: f64) -> f64 {
    let rnorm = r.norm().max(floor);
    let g = jac.tr_mul(r);
    (0..jac.ncols())
        .map(|j| {
            let cn = jac.column(j).norm();
            if cn == 0.0 {
                0.0
            } else {
                g[j].abs() / (cn * rnorm)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimizes `Σ r_i(p)²` starting from `specs[..].init`.
///
/// `residuals` returns `None` where the model cannot be evaluated; such trial
/// points are treated as rejected steps.
pub fn levenberg_marquardt<F>(residuals: F, specs: &[ParamSpec], cfg: &FitConfig) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    cfg.validate()?;
    let n = specs.len();
    if n == 0 {
        return Err(Error::domain("no parameters to fit"));
    }
    for s in specs {
        if !(s.init.is_finite() && s.scale.is_finite() && s.scale > 0.0) {
            return Err(Error::domain(format!(
                "parameter `{}` has non-finite start {} or invalid scale {}",
                s.name, s.init, s.scale
            )));
        }
    }
    let problem = Scaled { residuals, specs };
    let mut x = DVector::zeros(n);
    let mut r = problem
        .eval(&x)
        .ok_or_else(|| Error::Numeric("model cannot be evaluated at the initial point".into()))?;
    let m = r.len();
    if m <= n {
        return Err(Error::domain(format!(
            "need more residuals than parameters ({m} ≤ {n})"
        )));
    }
    let mut cost = r.norm_squared();
    let mut cost_history = vec![cost];
    let mut jac = problem
        .jacobian(&x, &r)
        .ok_or_else(|| Error::Numeric("Jacobian cannot be evaluated at the initial point".into()))?;

    let mut normal = jac.tr_mul(&jac);
    let mut lambda = cfg.initial_damping * normal.diagonal().max().max(f64::MIN_POSITIVE);
    let mut iterations = 0usize;

    'outer: loop {
        if gradient_measure(&jac, &r, cfg.residual_floor) <= cfg.gradient_tolerance {
            break;
        }
        let grad = jac.tr_mul(&r);
        loop {
            if iterations >= cfg.max_iterations || lambda > 1e32 {
                break 'outer;
            }
            let mut damped = normal.clone();
            for i in 0..n {
                damped[(i, i)] += lambda;
            }
            let step = match damped.cholesky() {
                Some(ch) => -ch.solve(&grad),
                None => {
                    lambda *= cfg.damping_up;
                    continue;
                }
            };
            iterations += 1;
            let x_new = &x + &step;
            match problem.eval(&x_new) {
                Some(r_new) if r_new.norm_squared() < cost => {
                    let small = step.norm() <= cfg.step_tolerance * (x.norm() + cfg.step_tolerance);
                    x = x_new;
                    r = r_new;
                    cost = r.norm_squared();
                    cost_history.push(cost);
                    lambda *= cfg.damping_down;
                    jac = match problem.jacobian(&x, &r) {
                        Some(j) => j,
                        None => break 'outer,
                    };
                    normal = jac.tr_mul(&jac);
                    if small {
                        break 'outer;
                    }
                    continue 'outer;
                }
                _ => lambda *= cfg.damping_up,
            }
        }
    }

    let measure = gradient_measure(&jac, &r, cfg.residual_floor);
    let converged = measure <= cfg.gradient_tolerance;

    // Covariance from a central-difference Jacobian at the optimum.
    let cov_jac = problem.central_jacobian(&x).unwrap_or_else(|| jac.clone());
    let (std_scaled, reliable) = scaled_std_errors(&cov_jac, cost, m, n);
    let params = problem.physical(&x);
    let std_errors = std_scaled
        .iter()
        .zip(specs)
        .map(|(s, spec)| s * spec.scale)
        .collect();

    Ok(LmOutcome {
        params,
        std_errors,
        std_errors_reliable: reliable,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
        gradient_measure: measure,
        cost_history,
    })
}

/// `√diag(s²(JᵀJ)⁻¹)` with `s² = cost/(m − n)`, via SVD so rank deficiency
/// can be flagged.
fn scaled_std_errors(jac: &DMatrix<f64>, cost: f64, m: usize, n: usize) -> (Vec<f64>, bool) {
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sv = &svd.singular_values;
    let s_max = sv.max();
    let cutoff = 1e-10 * s_max;
    let reliable = s_max > 0.0 && sv.iter().all(|&s| s > cutoff);
    let variance = cost / (m - n) as f64;
    let errors = (0..n)
        .map(|j| {
            let sum: f64 = (0..sv.len())
                .filter(|&k| sv[k] > cutoff)
                .map(|k| (v_t[(k, j)] / sv[k]).powi(2))
                .sum();
            let se = (variance * sum).sqrt();
            if reliable {
                se
            } else {
                f64::INFINITY
            }
        })
        .collect();
    (errors, reliable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::Unit;
    use crate::spectra::NoiseSpec;

    fn spec(name: &'static str, init: f64, scale: f64) -> ParamSpec {
        ParamSpec::new(name, init, scale, Unit::Dimensionless)
    }

    #[test]
    fn linear_model_is_exact() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.75 * x).collect();
        let out = levenberg_marquardt(
            |p| Some(xs.iter().zip(&ys).map(|(x, y)| p[0] * x - y).collect()),
            &[spec("a", 1.0, 1.0)],
            &FitConfig::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 2.75).abs() < 1e-12 * 2.75);
    }

    #[test]
    fn already_at_optimum() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 10.0).collect();
        let f = |p: &[f64], x: f64| p[0] * (-p[1] * x).exp() + p[2];
        let truth = [1.3, 0.7, 0.2];
        let ys: Vec<f64> = xs.iter().map(|&x| f(&truth, x)).collect();
        let specs = [spec("a", 1.3, 1.0), spec("k", 0.7, 1.0), spec("c", 0.2, 1.0)];
        let out = levenberg_marquardt(
            |p| Some(xs.iter().zip(&ys).map(|(&x, y)| f(p, x) - y).collect()),
            &specs,
            &FitConfig::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        assert!(out.residual_norm < 1e-12);
    }

    #[test]
    fn accepted_steps_never_increase_cost() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 2.0 * (1.7 * x).sin() * (-0.3 * x).exp()).collect();
        let specs = [spec("a", 1.0, 1.0), spec("w", 1.5, 1.0), spec("d", 0.1, 1.0)];
        let out = levenberg_marquardt(
            |p| {
                Some(
                    xs.iter()
                        .zip(&ys)
                        .map(|(&x, y)| p[0] * (p[1] * x).sin() * (-p[2] * x).exp() - y)
                        .collect(),
                )
            },
            &specs,
            &FitConfig::default(),
        )
        .unwrap();
        assert!(out.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.converged);
        assert!((out.params[1] - 1.7).abs() < 1e-8);
    }

    // Ordinary least squares for y = c0 + c1 x + c2 x²: the LM standard error
    // of c2 must agree with σ·√((XᵀX)⁻¹)₂₂ on average.
    #[test]
    fn std_error_matches_ols_formula() {
        let xs: Vec<f64> = (0..40).map(|i| -1.0 + 2.0 * i as f64 / 39.0).collect();
        let sigma = 0.05;
        let design = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j as i32));
        let inv = (design.tr_mul(&design)).try_inverse().unwrap();
        let analytic = sigma * inv[(2, 2)].sqrt();

        let mut mean_se = 0.0;
        let reps = 200;
        for seed in 0..reps {
            let noise = NoiseSpec::new(sigma, seed).samples(xs.len()).unwrap();
            let ys: Vec<f64> = xs
                .iter()
                .zip(&noise)
                .map(|(&x, e)| 0.5 - 0.2 * x + 1.1 * x * x + e)
                .collect();
            let out = levenberg_marquardt(
                |p| {
                    Some(
                        xs.iter()
                            .zip(&ys)
                            .map(|(&x, y)| p[0] + p[1] * x + p[2] * x * x - y)
                            .collect(),
                    )
                },
                &[spec("c0", 0.0, 1.0), spec("c1", 0.0, 1.0), spec("c2", 0.0, 1.0)],
                &FitConfig::default(),
            )
            .unwrap();
            assert!(out.converged);
            mean_se += out.std_errors[2] / reps as f64;
        }
        assert!((mean_se - analytic).abs() / analytic < 0.30, "{mean_se} vs {analytic}");
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let out = levenberg_marquardt(
            |p| Some(xs.iter().map(|&x| (p[0] + p[1]) * x - 3.0 * x).collect()),
            &[spec("a", 1.0, 1.0), spec("b", 1.0, 1.0)],
            &FitConfig::default(),
        )
        .unwrap();
        assert!(!out.std_errors_reliable);
        assert!(((out.params[0] + out.params[1]) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn hitting_the_iteration_cap_is_not_an_error() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (3.0 * x).sin()).collect();
        let cfg = FitConfig {
            max_iterations: 1,
            ..FitConfig::default()
        };
        let out = levenberg_marquardt(
            |p| Some(xs.iter().zip(&ys).map(|(&x, y)| (p[0] * x).sin() - y).collect()),
            &[spec("w", 1.0, 1.0)],
            &cfg,
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn underdetermined_is_rejected() {
        let err = levenberg_marquardt(
            |p| Some(vec![p[0] - 1.0]),
            &[spec("a", 0.0, 1.0)],
            &FitConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
