//! Drive-amplitude scaling laws `g = g₀·α_d` and `Δ = 2K·α_d²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted coupling and Stark shift at one drive amplitude, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawPoint {
    pub alpha_d: f64,
    pub g: f64,
    pub stark: f64,
    pub g_std: Option<f64>,
    pub stark_std: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// rad/s
    pub g0: f64,
    pub g0_std: f64,
    /// rad/s
    pub kerr: f64,
    pub kerr_std: f64,
}

/// Weighted least squares for `y = c·x`. Supplied errors are taken as
/// absolute; otherwise the error is scaled by the residual variance.
fn through_origin(pts: &[(f64, f64, Option<f64>)]) -> Result<(f64, f64)> {
    let weighted = pts.iter().all(|p| p.2.is_some());
    let weight = |s: Option<f64>| -> Result<f64> {
        match s {
            Some(s) if s > 0.0 && s.is_finite() => Ok(1.0 / (s * s)),
            Some(s) => Err(Error::domain(format!("standard error {s} must be positive and finite"))),
            None => Ok(1.0),
        }
    };
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y, s) in pts {
        let w = if weighted { weight(s)? } else { 1.0 };
        sxx += w * x * x;
        sxy += w * x * y;
    }
    if !(sxx > 0.0) {
        return Err(Error::domain("drive amplitudes must not all be zero"));
    }
    let c = sxy / sxx;
    let se = if weighted {
        1.0 / sxx.sqrt()
    } else {
        let ssr: f64 = pts.iter().map(|&(x, y, _)| (y - c * x).powi(2)).sum();
        (ssr / (pts.len() - 1) as f64 / sxx).sqrt()
    };
    Ok((c, se))
}

pub fn fit_power_laws(points: &[PowerLawPoint]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::domain(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.alpha_d >= 0.0 && p.alpha_d.is_finite())) {
        return Err(Error::domain(format!("drive amplitude {} must be non-negative", p.alpha_d)));
    }
    let g: Vec<_> = points.iter().map(|p| (p.alpha_d, p.g, p.g_std)).collect();
    let stark: Vec<_> = points
        .iter()
        .map(|p| (2.0 * p.alpha_d * p.alpha_d, p.stark, p.stark_std))
        .collect();
    let (g0, g0_std) = through_origin(&g)?;
    let (kerr, kerr_std) = through_origin(&stark)?;
    Ok(PowerLawFit {
        g0,
        g0_std,
        kerr,
        kerr_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(g0: f64, k: f64) -> Vec<PowerLawPoint> {
        (0..10)
            .map(|i| {
                let a = 11.4 * 1.06f64.powi(i);
                PowerLawPoint {
                    alpha_d: a,
                    g: g0 * a,
                    stark: 2.0 * k * a * a,
                    g_std: None,
                    stark_std: None,
                }
            })
            .collect()
    }

    #[test]
    fn exact_data() {
        let fit = fit_power_laws(&points(13e3, 2e4)).unwrap();
        assert!((fit.g0 - 13e3).abs() < 1e-9);
        assert!((fit.kerr - 2e4).abs() < 1e-8);
        assert!(fit.g0_std < 1e-9);
    }

    #[test]
    fn weighted_error_is_absolute() {
        let mut pts = points(1.0, 1.0);
        for p in &mut pts {
            p.g_std = Some(0.5);
            p.stark_std = Some(0.5);
        }
        let fit = fit_power_laws(&pts).unwrap();
        let sxx: f64 = pts.iter().map(|p| p.alpha_d * p.alpha_d).sum();
        assert!((fit.g0_std - 0.5 / sxx.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_power_laws(&points(1.0, 1.0)[..2]).is_err());
    }
}
