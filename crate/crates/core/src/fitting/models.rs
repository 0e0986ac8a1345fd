//! Fit models: bare notch resonance, Lorentzian power peak, the sideband
//! avoided crossing (single trace or joint over a drive sweep) and the
//! flux-tuning arch of the SQUID resonator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::guess::{
    argmax, argmin, crossing_width, edge_mean, edge_mean_real, moving_average, noise_sigma,
    noise_sigma_complex,
};
use super::{levenberg_marquardt, FitConfig, FitResult, ParamSpec, Unit};
use crate::circuit::{Circuit, DeviceParams, ScreeningSolver};
use crate::error::{Error, Result};
use crate::spectra::{s21_bare, s21_coupled, CoupledModeParams, SpectrumTrace};

const SMOOTHING_WINDOW: usize = 5;

fn flatten(out: &mut Vec<f64>, z: Complex64) {
    out.push(z.re);
    out.push(z.im);
}

/// Least-squares complex scale `A` minimizing `‖y − A·m‖`.
fn project_scale(model: &[Complex64], data: &[Complex64]) -> Complex64 {
    let num: Complex64 = model.iter().zip(data).map(|(m, y)| m.conj() * y).sum();
    let den: f64 = model.iter().map(|m| m.norm_sqr()).sum();
    if den > 0.0 {
        num / den
    } else {
        Complex64::new(0.0, 0.0)
    }
}

fn complex_data(trace: &SpectrumTrace) -> Result<&[Complex64]> {
    trace
        .complex()
        .ok_or_else(|| Error::domain("model needs a complex S21 trace"))
}

fn bare_params(omega_a: f64, kappa_int: f64, kappa_ext: f64, theta: f64) -> CoupledModeParams {
    CoupledModeParams {
        omega_a,
        omega_b: 0.0,
        kappa_int,
        kappa_ext,
        gamma: 0.0,
        g: 0.0,
        theta,
    }
}

// ---------------------------------------------------------------------------
// bare resonance

struct ResonanceGuess {
    omega_a: f64,
    kappa_int: f64,
    kappa_ext: f64,
    scale: Complex64,
}

fn resonance_guess(freqs: &[f64], data: &[Complex64]) -> Result<ResonanceGuess> {
    let mags: Vec<f64> = data.iter().map(|z| z.norm()).collect();
    let smooth = moving_average(&mags, SMOOTHING_WINDOW);
    let background = edge_mean(data, 0.05).norm();
    let i0 = argmin(&smooth);
    let depth = background - smooth[i0];
    let noise = noise_sigma_complex(data);
    if !(depth > 3.0 * noise + 1e-6 * background) {
        return Err(Error::FitRejected(format!(
            "no discernible dip: depth {depth:.3e} against noise {noise:.3e}"
        )));
    }
    let width = crossing_width(freqs, &smooth, i0, background - depth / 2.0, false)
        .ok_or_else(|| Error::FitRejected("dip has no half-depth crossing".into()))?;
    let span = freqs[freqs.len() - 1] - freqs[0];
    if span < 2.0 * width {
        return Err(Error::FitRejected(format!(
            "trace spans {span:.3e} rad/s, less than two estimated linewidths"
        )));
    }
    let fraction = ((1.0 - smooth[i0] / background) / 2.0).clamp(0.05, 0.95);
    let (omega_a, kappa_int, kappa_ext) = (freqs[i0], fraction * width, (1.0 - fraction) * width);
    let p = bare_params(omega_a, kappa_int, kappa_ext, 0.0);
    let shape: Vec<Complex64> = freqs.iter().map(|&w| s21_bare(w, &p)).collect();
    Ok(ResonanceGuess {
        omega_a,
        kappa_int,
        kappa_ext,
        scale: project_scale(&shape, data),
    })
}

/// Fits `A·(e^{iθ} − iκ_int/(δ_a + iκ/2))` to a complex trace.
///
/// Parameters: `omega_a`, `kappa_int`, `kappa_ext`, `theta`, `scale_re`,
/// `scale_im`.
pub fn fit_resonance(trace: &SpectrumTrace, cfg: &FitConfig) -> Result<FitResult> {
    let data = complex_data(trace)?;
    let freqs = trace.probe_freqs();
    if data.len() < 12 {
        return Err(Error::domain("resonance fit needs at least 12 points"));
    }
    let g0 = resonance_guess(freqs, data)?;
    let kappa = g0.kappa_int + g0.kappa_ext;
    let amp = g0.scale.norm().max(f64::MIN_POSITIVE);
    let specs = [
        ParamSpec::new("omega_a", g0.omega_a, kappa, Unit::AngularFrequency),
        ParamSpec::new("kappa_int", g0.kappa_int, kappa, Unit::AngularFrequency),
        ParamSpec::new("kappa_ext", g0.kappa_ext, kappa, Unit::AngularFrequency),
        ParamSpec::new("theta", 0.0, 0.1, Unit::Angle),
        ParamSpec::new("scale_re", g0.scale.re, amp, Unit::Dimensionless),
        ParamSpec::new("scale_im", g0.scale.im, amp, Unit::Dimensionless),
    ];
    let residuals = |p: &[f64]| {
        let bare = bare_params(p[0], p[1], p[2], p[3]);
        let a = Complex64::new(p[4], p[5]);
        let mut out = Vec::with_capacity(2 * data.len());
        for (&w, &y) in freqs.iter().zip(data) {
            flatten(&mut out, y - a * s21_bare(w, &bare));
        }
        Some(out)
    };
    let out = levenberg_marquardt(residuals, &specs, cfg)?;
    Ok(FitResult::from_outcome(&specs, out))
}

// ---------------------------------------------------------------------------
// Lorentzian

fn lorentzian(w: f64, p: &[f64]) -> f64 {
    let x = 2.0 * (w - p[0]) / p[1];
    p[3] + p[2] / (1.0 + x * x)
}

/// Fits `offset + height/(1 + (2(ω − center)/fwhm)²)` to a power trace.
///
/// Parameters: `center`, `fwhm`, `height`, `offset`.
pub fn fit_lorentzian(trace: &SpectrumTrace, cfg: &FitConfig) -> Result<FitResult> {
    let data = trace
        .power()
        .ok_or_else(|| Error::domain("Lorentzian fit needs a power trace"))?;
    let freqs = trace.probe_freqs();
    if data.len() < 8 {
        return Err(Error::domain("Lorentzian fit needs at least 8 points"));
    }
    let smooth = moving_average(data, SMOOTHING_WINDOW);
    let offset = edge_mean_real(data, 0.05);
    let i0 = argmax(&smooth);
    let height = smooth[i0] - offset;
    let noise = noise_sigma(data);
    if !(height > 3.0 * noise) || height <= 0.0 {
        return Err(Error::FitRejected(format!(
            "no discernible peak: height {height:.3e} against noise {noise:.3e}"
        )));
    }
    let fwhm = crossing_width(freqs, &smooth, i0, offset + height / 2.0, true)
        .ok_or_else(|| Error::FitRejected("peak has no half-height crossing".into()))?;
    let specs = [
        ParamSpec::new("center", freqs[i0], fwhm, Unit::AngularFrequency),
        ParamSpec::new("fwhm", fwhm, fwhm, Unit::AngularFrequency),
        ParamSpec::new("height", height, height, Unit::Dimensionless),
        ParamSpec::new("offset", offset, height, Unit::Dimensionless),
    ];
    let residuals = |p: &[f64]| {
        Some(
            freqs
                .iter()
                .zip(data)
                .map(|(&w, &y)| y - lorentzian(w, p))
                .collect(),
        )
    };
    let out = levenberg_marquardt(residuals, &specs, cfg)?;
    let mut fit = FitResult::from_outcome(&specs, out);
    // the sign of the width is not observable
    if let Some(p) = fit.params.iter_mut().find(|p| p.name == "fwhm") {
        p.value = p.value.abs();
    }
    Ok(fit)
}

// ---------------------------------------------------------------------------
// avoided crossing

struct CrossingTrace<'a> {
    freqs: &'a [f64],
    data: &'a [Complex64],
    omega_d: f64,
}

fn crossing_traces(traces: &[SpectrumTrace]) -> Result<Vec<CrossingTrace<'_>>> {
    traces
        .iter()
        .map(|t| {
            Ok(CrossingTrace {
                freqs: t.probe_freqs(),
                data: complex_data(t)?,
                omega_d: t
                    .meta
                    .drive_freq
                    .ok_or_else(|| Error::domain("crossing trace is missing its drive frequency"))?,
            })
        })
        .collect()
}

const CROSSING_NAMES: [&str; 7] = ["omega_a", "omega_b", "kappa", "kappa_int", "gamma", "g", "theta"];

fn crossing_params(p: &[f64]) -> CoupledModeParams {
    CoupledModeParams {
        omega_a: p[0],
        omega_b: p[1],
        kappa_int: p[3],
        kappa_ext: p[2] - p[3],
        gamma: p[4],
        g: p[5],
        theta: p[6],
    }
}

/// Residuals after projecting out one complex scale per trace.
fn crossing_residuals(traces: &[CrossingTrace], p: &[f64]) -> Vec<f64> {
    let params = crossing_params(p);
    let total: usize = traces.iter().map(|t| t.data.len()).sum();
    let mut out = Vec::with_capacity(2 * total);
    let mut shape = Vec::new();
    for t in traces {
        shape.clear();
        shape.extend(t.freqs.iter().map(|&w| s21_coupled(w, t.omega_d, &params)));
        let a = project_scale(&shape, t.data);
        for (m, y) in shape.iter().zip(t.data) {
            flatten(&mut out, y - a * m);
        }
    }
    out
}

struct Feature {
    height: f64,
    index: usize,
    trace: usize,
    response: f64,
    width: Option<f64>,
}

/// Starting values from a bare-resonance fit plus the narrow feature the
/// low-frequency mode imprints on each trace.
fn crossing_guess(traces: &[CrossingTrace], cfg: &FitConfig) -> Result<[f64; 7]> {
    // Reference bare fit on the trace(s) with the most extreme drive detuning.
    let mut order: Vec<usize> = (0..traces.len()).collect();
    order.sort_by(|&a, &b| traces[a].omega_d.total_cmp(&traces[b].omega_d));
    let refs: Vec<usize> = if traces.len() == 1 {
        vec![0]
    } else {
        vec![order[0], order[order.len() - 1]]
    };
    let mut bare = Vec::new();
    for &i in &refs {
        let t = &traces[i];
        let trace = SpectrumTrace::new(
            t.freqs.to_vec(),
            crate::spectra::TraceValues::Complex(t.data.to_vec()),
            Default::default(),
        )?;
        bare.push(fit_resonance(&trace, cfg)?);
    }
    let mean = |name: &str| bare.iter().map(|f| f.value(name)).sum::<f64>() / bare.len() as f64;
    let (omega_a, kappa_int, kappa_ext, theta) =
        (mean("omega_a"), mean("kappa_int"), mean("kappa_ext"), mean("theta"));
    let kappa = kappa_int + kappa_ext;
    let reference = bare_params(omega_a, kappa_int, kappa_ext, theta);

    let mut best: Option<Feature> = None;
    for (k, t) in traces.iter().enumerate() {
        let shape: Vec<Complex64> = t.freqs.iter().map(|&w| s21_bare(w, &reference)).collect();
        let a = project_scale(&shape, t.data);
        let resid: Vec<f64> = shape
            .iter()
            .zip(t.data)
            .map(|(m, y)| (y - a * m).norm())
            .collect();
        let smooth = moving_average(&resid, SMOOTHING_WINDOW);
        let idx = argmax(&smooth);
        let n = smooth.len();
        let margin = (n as f64 * 0.05).ceil() as usize;
        let height = smooth[idx];
        let depth = 2.0 * kappa_int / kappa * a.norm();
        let noise = noise_sigma_complex(t.data);
        let accepted = idx >= margin && idx + margin < n && height > (5.0 * noise).max(0.01 * depth);
        if !accepted {
            continue;
        }
        if best.as_ref().is_none_or(|b| height > b.height) {
            let delta_a = t.freqs[idx] - omega_a;
            best = Some(Feature {
                height,
                index: idx,
                trace: k,
                response: kappa_int / delta_a.hypot(kappa / 2.0) * a.norm(),
                width: crossing_width(t.freqs, &smooth, idx, height / 2.0, true),
            });
        }
    }
    let f = best.ok_or_else(|| {
        Error::FitRejected("no trace shows the low-frequency mode inside the probe window".into())
    })?;
    let t = &traces[f.trace];
    let omega_b = t.freqs[f.index] - t.omega_d;
    let ratio = (f.height / f.response).clamp(0.01, 0.9);
    let coop = ratio / (1.0 - ratio);
    let width = f.width.unwrap_or(kappa / 4.0).min(kappa);
    let gamma = width / (1.0 + coop);
    let g = (coop * kappa * gamma / 4.0).sqrt().max(0.1 * gamma);
    Ok([omega_a, omega_b, kappa, kappa_int, gamma, g, theta])
}

fn start_vector(p: &CoupledModeParams) -> [f64; 7] {
    [p.omega_a, p.omega_b, p.kappa(), p.kappa_int, p.gamma, p.g, p.theta]
}

fn crossing_fit(traces: &[CrossingTrace], init: [f64; 7], cfg: &FitConfig) -> Result<FitResult> {
    let (kappa, gamma, g) = (init[2], init[4], init[5].abs());
    let scales = [kappa, gamma, kappa, kappa, gamma, g.max(0.2 * gamma), 0.1];
    let units = [
        Unit::AngularFrequency,
        Unit::AngularFrequency,
        Unit::AngularFrequency,
        Unit::AngularFrequency,
        Unit::AngularFrequency,
        Unit::AngularFrequency,
        Unit::Angle,
    ];
    let specs: Vec<ParamSpec> = (0..7)
        .map(|i| ParamSpec::new(CROSSING_NAMES[i], init[i], scales[i], units[i]))
        .collect();
    let out = levenberg_marquardt(|p| Some(crossing_residuals(traces, p)), &specs, cfg)?;
    let mut fit = FitResult::from_outcome(&specs, out);
    // only g² enters the model
    if let Some(p) = fit.params.iter_mut().find(|p| p.name == "g") {
        p.value = p.value.abs();
    }
    Ok(fit)
}

/// Fits the sideband transmission model to one trace at a fixed drive.
///
/// Parameters: `omega_a`, `omega_b`, `kappa`, `kappa_int`, `gamma`, `g`,
/// `theta`; a complex amplitude scale is projected out.
pub fn fit_crossing_trace(trace: &SpectrumTrace, cfg: &FitConfig) -> Result<FitResult> {
    let traces = crossing_traces(std::slice::from_ref(trace))?;
    let init = crossing_guess(&traces, cfg)?;
    crossing_fit(&traces, init, cfg)
}

/// [`fit_crossing_trace`] from a given starting point instead of the
/// automatic guess.
pub fn fit_crossing_trace_from(
    trace: &SpectrumTrace,
    start: &CoupledModeParams,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let traces = crossing_traces(std::slice::from_ref(trace))?;
    crossing_fit(&traces, start_vector(start), cfg)
}

/// Joint fit of a drive-frequency sweep: one shared physical parameter set,
/// one complex amplitude scale per trace.
pub fn fit_avoided_crossing(traces: &[SpectrumTrace], cfg: &FitConfig) -> Result<FitResult> {
    if traces.len() < 3 {
        return Err(Error::domain(format!(
            "joint crossing fit needs at least 3 traces, got {}",
            traces.len()
        )));
    }
    let traces = crossing_traces(traces)?;
    let init = crossing_guess(&traces, cfg)?;
    crossing_fit(&traces, init, cfg)
}

/// [`fit_avoided_crossing`] from a given starting point instead of the
/// automatic guess.
pub fn fit_avoided_crossing_from(
    traces: &[SpectrumTrace],
    start: &CoupledModeParams,
    cfg: &FitConfig,
) -> Result<FitResult> {
    if traces.len() < 3 {
        return Err(Error::domain(format!(
            "joint crossing fit needs at least 3 traces, got {}",
            traces.len()
        )));
    }
    let traces = crossing_traces(traces)?;
    crossing_fit(&traces, start_vector(start), cfg)
}

// ---------------------------------------------------------------------------
// flux arch

/// A fitted resonance at one nominal flux setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    /// Nominal applied flux before calibration, units of Φ₀.
    pub flux: f64,
    /// rad/s
    pub omega_a: f64,
    pub std_error: f64,
}

/// Fits resonance-versus-flux data to the screened SQUID model with an
/// affine flux calibration `Φ_ext/Φ₀ = flux_scale·flux + flux_offset`.
///
/// `l_j0` is held at the device value: frequencies constrain the
/// inductances only through `L_J0/(L_geo + L_J0)` and `L_loop/L_J0`.
/// Parameters: `omega_a_max`, `l_geo`, `l_loop`, `flux_scale`, `flux_offset`.
pub fn fit_flux_arch(points: &[FluxPoint], device: &DeviceParams, cfg: &FitConfig) -> Result<FitResult> {
    if points.len() < 5 {
        return Err(Error::domain(format!(
            "flux-arch fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    let omegas: Vec<f64> = points.iter().map(|p| p.omega_a).collect();
    let top = argmax(&omegas);
    let omega_max = omegas[top];
    // vertex of the parabola through the top point and its neighbours
    let offset = -if top > 0 && top + 1 < points.len() {
        let (x0, x1, x2) = (points[top - 1].flux, points[top].flux, points[top + 1].flux);
        let (y0, y1, y2) = (omegas[top - 1], omegas[top], omegas[top + 1]);
        let den = (x0 - x1) * (x0 - x2) * (x1 - x2);
        let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
        let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
        if a < 0.0 {
            (-b / (2.0 * a)).clamp(x0, x2)
        } else {
            x1
        }
    } else {
        points[top].flux
    };

    // unscreened inversion for the inductance ratio
    let mut ratios: Vec<f64> = points
        .iter()
        .filter_map(|p| {
            let f = p.flux + offset;
            let f = f - (f + 0.5).floor();
            if f.abs() < 0.15 || f.abs() > 0.49 {
                return None;
            }
            let r = ((omega_max / p.omega_a).powi(2) - 1.0) / (1.0 / (std::f64::consts::PI * f).cos() - 1.0);
            (r > 0.0 && r < 1.0).then_some(r)
        })
        .collect();
    ratios.sort_by(|a, b| a.total_cmp(b));
    let l_geo = match ratios.get(ratios.len() / 2) {
        Some(&r) => device.l_j0 * (1.0 / r - 1.0),
        None => device.l_geo,
    };

    let specs = [
        ParamSpec::new("omega_a_max", omega_max, 1e-3 * omega_max, Unit::AngularFrequency),
        ParamSpec::new("l_geo", l_geo, 0.1 * l_geo, Unit::Inductance),
        ParamSpec::new("l_loop", 0.2 * device.l_j0, device.l_j0, Unit::Inductance),
        ParamSpec::new("flux_scale", 1.0, 0.01, Unit::Dimensionless),
        ParamSpec::new("flux_offset", offset, 0.01, Unit::FluxQuantum),
    ];
    let solver = ScreeningSolver {
        clamp: 1e-4,
        ..ScreeningSolver::default()
    };
    let residuals = |p: &[f64]| {
        let dev = DeviceParams {
            omega_a_max: p[0],
            l_geo: p[1],
            l_loop: p[2],
            ..*device
        };
        if !(dev.l_geo > 0.0 && dev.omega_a_max > 0.0) {
            return None;
        }
        let circuit = Circuit::new(dev).with_solver(solver);
        let phi0 = circuit.flux_quantum();
        points
            .iter()
            .map(|pt| {
                let phi_ext = (p[3] * pt.flux + p[4]) * phi0;
                let model = circuit.resonator_frequency(phi_ext).ok()?.omega_a;
                Some((pt.omega_a - model) / omega_max)
            })
            .collect()
    };
    let out = levenberg_marquardt(residuals, &specs, cfg)?;
    Ok(FitResult::from_outcome(&specs, out))
}
