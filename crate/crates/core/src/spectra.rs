//! Closed-form lineshapes of the driven two-mode system and synthetic traces.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{to_angular, to_hz};

/// Spectroscopic parameters of the coupled modes, SI angular units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledModeParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub kappa_int: f64,
    pub kappa_ext: f64,
    pub gamma: f64,
    pub g: f64,
    /// Background phase of the feedline, rad.
    pub theta: f64,
}

impl CoupledModeParams {
    pub fn kappa(&self) -> f64 {
        self.kappa_int + self.kappa_ext
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega_a,
            self.omega_b,
            self.kappa_int,
            self.kappa_ext,
            self.gamma,
            self.g,
            self.theta,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("coupled-mode parameters must be finite"));
        }
        if self.kappa_int < 0.0 || self.kappa_ext < 0.0 || self.gamma < 0.0 {
            return Err(Error::domain("loss rates must be non-negative"));
        }
        if self.kappa() <= 0.0 {
            return Err(Error::domain("total linewidth κ must be positive"));
        }
        if self.omega_b >= self.omega_a {
            return Err(Error::domain("ω_b must lie below ω_a"));
        }
        Ok(())
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    /// Drive frequency for which the sideband coupling is resonant.
    pub fn resonant_drive(&self) -> f64 {
        self.omega_a - self.omega_b
    }
}

/// `CoupledModeParams` in ordinary-frequency units, used in every file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledModeParamsHz {
    pub omega_a_hz: f64,
    pub omega_b_hz: f64,
    pub kappa_int_hz: f64,
    pub kappa_ext_hz: f64,
    pub gamma_hz: f64,
    pub g_hz: f64,
    pub theta_rad: f64,
}

impl From<CoupledModeParams> for CoupledModeParamsHz {
    fn from(p: CoupledModeParams) -> Self {
        Self {
            omega_a_hz: to_hz(p.omega_a),
            omega_b_hz: to_hz(p.omega_b),
            kappa_int_hz: to_hz(p.kappa_int),
            kappa_ext_hz: to_hz(p.kappa_ext),
            gamma_hz: to_hz(p.gamma),
            g_hz: to_hz(p.g),
            theta_rad: p.theta,
        }
    }
}

impl From<CoupledModeParamsHz> for CoupledModeParams {
    fn from(p: CoupledModeParamsHz) -> Self {
        Self {
            omega_a: to_angular(p.omega_a_hz),
            omega_b: to_angular(p.omega_b_hz),
            kappa_int: to_angular(p.kappa_int_hz),
            kappa_ext: to_angular(p.kappa_ext_hz),
            gamma: to_angular(p.gamma_hz),
            g: to_angular(p.g_hz),
            theta: p.theta_rad,
        }
    }
}

/// Shared input-output denominator `g² − (iγ/2 + δ_b)(iκ/2 + δ_a)`.
#[inline]
pub fn coupled_denominator(delta_a: f64, delta_b: f64, p: &CoupledModeParams) -> Complex64 {
    let b = Complex64::new(delta_b, p.gamma / 2.0);
    let a = Complex64::new(delta_a, p.kappa() / 2.0);
    Complex64::new(p.g * p.g, 0.0) - b * a
}

/// Transmission past the side-coupled high-frequency resonator under a
/// sideband drive at `omega_d`:
///
/// `S21 = iκ_int(iγ/2 + δ_b) / (g² − (iγ/2 + δ_b)(iκ/2 + δ_a)) + e^{iθ}`,
/// `δ_b = ω_in − ω_d − ω_b`, `δ_a = ω_in − ω_a`.
pub fn s21_coupled(omega_in: f64, omega_d: f64, p: &CoupledModeParams) -> Complex64 {
    let delta_a = omega_in - p.omega_a;
    let delta_b = omega_in - omega_d - p.omega_b;
    let numerator = Complex64::i() * p.kappa_int * Complex64::new(delta_b, p.gamma / 2.0);
    numerator / coupled_denominator(delta_a, delta_b, p) + Complex64::from_polar(1.0, p.theta)
}

/// Bare notch resonance, the `g → 0` limit of [`s21_coupled`]:
/// `e^{iθ} − iκ_int/(δ_a + iκ/2)`.
pub fn s21_bare(omega_in: f64, p: &CoupledModeParams) -> Complex64 {
    let a = Complex64::new(omega_in - p.omega_a, p.kappa() / 2.0);
    Complex64::from_polar(1.0, p.theta) - Complex64::i() * p.kappa_int / a
}

/// Unnormalized conversion efficiency `|g / D|²` from an input at
/// `omega_in` near ω_b to the fixed output `omega_out` near ω_a, with the
/// drive at `omega_out − omega_in`.
pub fn upconversion_transfer(omega_in: f64, p: &CoupledModeParams, omega_out: f64) -> f64 {
    let d = coupled_denominator(omega_out - p.omega_a, omega_in - p.omega_b, p);
    (Complex64::new(p.g, 0.0) / d).norm_sqr()
}

/// Upconverted power over `grid`, normalized to unit maximum. An all-zero
/// transfer (no coupling) stays zero.
pub fn upconversion_power(grid: &[f64], p: &CoupledModeParams, omega_out: f64) -> Vec<f64> {
    let raw: Vec<f64> = grid
        .iter()
        .map(|&w| upconversion_transfer(w, p, omega_out))
        .collect();
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        raw.into_iter().map(|v| v / peak).collect()
    } else {
        raw
    }
}

/// Complex normal-mode frequencies of the linearized system in the frame
/// of the driven mode, ordered by real part.
pub fn normal_mode_frequencies(p: &CoupledModeParams, omega_d: f64) -> [Complex64; 2] {
    let a = Complex64::new(p.omega_a, -p.kappa() / 2.0);
    let b = Complex64::new(omega_d + p.omega_b, -p.gamma / 2.0);
    // Offsets from the mean avoid cancellation at GHz scale.
    let half_diff = Complex64::new(p.omega_a - omega_d - p.omega_b, (p.gamma - p.kappa()) / 2.0) / 2.0;
    let root = (half_diff * half_diff + p.g * p.g).sqrt();
    let mean = (a + b) / 2.0;
    let (lo, hi) = (mean - root, mean + root);
    if lo.re <= hi.re {
        [lo, hi]
    } else {
        [hi, lo]
    }
}

/// Per-quadrature Gaussian noise with an explicit seed and stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            seed: 0,
            stream: 0,
        }
    }

    pub fn new(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            seed,
            stream: 0,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// `n` samples from N(0, σ²); all zeros when σ = 0.
    pub fn samples(&self, n: usize) -> Result<Vec<f64>> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("noise σ must be non-negative, got {}", self.sigma)));
        }
        if self.sigma == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let normal = Normal::new(0.0, self.sigma).map_err(|e| Error::domain(e.to_string()))?;
        let mut rng = self.rng();
        Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    ComplexS21,
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceValues {
    Complex(Vec<Complex64>),
    Power(Vec<f64>),
}

impl TraceValues {
    pub fn len(&self) -> usize {
        match self {
            TraceValues::Complex(v) => v.len(),
            TraceValues::Power(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> TraceKind {
        match self {
            TraceValues::Complex(_) => TraceKind::ComplexS21,
            TraceValues::Power(_) => TraceKind::Power,
        }
    }
}

/// Metadata carried alongside a trace and written to its JSON sidecar.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub drive_freq: Option<f64>,
    pub drive_amp: Option<f64>,
    pub seed: Option<u64>,
    pub params: Option<CoupledModeParams>,
}

/// A probe-frequency sweep (rad/s, strictly increasing) with its measured
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    probe_freqs: Vec<f64>,
    values: TraceValues,
    pub meta: TraceMeta,
}

impl SpectrumTrace {
    pub fn new(probe_freqs: Vec<f64>, values: TraceValues, meta: TraceMeta) -> Result<Self> {
        if probe_freqs.len() != values.len() {
            return Err(Error::domain(format!(
                "trace has {} frequencies but {} values",
                probe_freqs.len(),
                values.len()
            )));
        }
        if probe_freqs.is_empty() {
            return Err(Error::domain("trace is empty"));
        }
        if let Some(i) = probe_freqs.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::domain(format!(
                "probe frequencies must be strictly increasing (index {})",
                i + 1
            )));
        }
        Ok(Self {
            probe_freqs,
            values,
            meta,
        })
    }

    pub fn probe_freqs(&self) -> &[f64] {
        &self.probe_freqs
    }

    pub fn values(&self) -> &TraceValues {
        &self.values
    }

    pub fn kind(&self) -> TraceKind {
        self.values.kind()
    }

    pub fn len(&self) -> usize {
        self.probe_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probe_freqs.is_empty()
    }

    pub fn complex(&self) -> Option<&[Complex64]> {
        match &self.values {
            TraceValues::Complex(v) => Some(v),
            TraceValues::Power(_) => None,
        }
    }

    pub fn power(&self) -> Option<&[f64]> {
        match &self.values {
            TraceValues::Power(v) => Some(v),
            TraceValues::Complex(_) => None,
        }
    }

    /// `|S21|²` for complex traces, the values themselves for power traces.
    pub fn squared_magnitude(&self) -> Vec<f64> {
        match &self.values {
            TraceValues::Complex(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            TraceValues::Power(v) => v.clone(),
        }
    }
}

/// `n` evenly spaced points over `[center − half_span, center + half_span]`.
pub fn linear_grid(center: f64, half_span: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![center],
        _ => (0..n)
            .map(|k| center - half_span + 2.0 * half_span * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Evaluates [`s21_coupled`] over `grid` and adds independent Gaussian
/// noise to each quadrature.
pub fn synthesize_trace(
    grid: &[f64],
    omega_d: f64,
    p: &CoupledModeParams,
    noise: &NoiseSpec,
) -> Result<SpectrumTrace> {
    p.validate()?;
    let n = grid.len();
    let noise_samples = noise.samples(2 * n)?;
    let values = grid
        .iter()
        .zip(noise_samples.chunks_exact(2))
        .map(|(&w, eps)| s21_coupled(w, omega_d, p) + Complex64::new(eps[0], eps[1]))
        .collect();
    SpectrumTrace::new(
        grid.to_vec(),
        TraceValues::Complex(values),
        TraceMeta {
            drive_freq: Some(omega_d),
            drive_amp: None,
            seed: Some(noise.seed),
            params: Some(*p),
        },
    )
}

/// Bare-resonance trace (no drive) with noise.
pub fn synthesize_bare_trace(
    grid: &[f64],
    p: &CoupledModeParams,
    noise: &NoiseSpec,
) -> Result<SpectrumTrace> {
    let n = grid.len();
    let noise_samples = noise.samples(2 * n)?;
    let values = grid
        .iter()
        .zip(noise_samples.chunks_exact(2))
        .map(|(&w, eps)| s21_bare(w, p) + Complex64::new(eps[0], eps[1]))
        .collect();
    SpectrumTrace::new(
        grid.to_vec(),
        TraceValues::Complex(values),
        TraceMeta {
            drive_freq: None,
            drive_amp: None,
            seed: Some(noise.seed),
            params: Some(p.with_g(0.0)),
        },
    )
}

/// Normalized upconversion trace at fixed output frequency with additive
/// Gaussian noise on the normalized power.
pub fn synthesize_upconversion_trace(
    grid: &[f64],
    p: &CoupledModeParams,
    omega_out: f64,
    noise: &NoiseSpec,
) -> Result<SpectrumTrace> {
    let noise_samples = noise.samples(grid.len())?;
    let values = upconversion_power(grid, p, omega_out)
        .into_iter()
        .zip(noise_samples)
        .map(|(v, eps)| v + eps)
        .collect();
    SpectrumTrace::new(
        grid.to_vec(),
        TraceValues::Power(values),
        TraceMeta {
            drive_freq: None,
            drive_amp: None,
            seed: Some(noise.seed),
            params: Some(*p),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const TWO_PI: f64 = 2.0 * PI;

    fn crossing_params() -> CoupledModeParams {
        CoupledModeParams {
            omega_a: TWO_PI * 5.408e9,
            omega_b: TWO_PI * 583.53e6,
            kappa_int: TWO_PI * 0.8e6,
            kappa_ext: TWO_PI * 0.7e6,
            gamma: TWO_PI * 300e3,
            g: TWO_PI * 280e3,
            theta: 0.0,
        }
    }

    #[test]
    fn background_far_off_resonance() {
        let p = crossing_params().with_g(0.0);
        let p = CoupledModeParams { theta: 0.3, ..p };
        let s = s21_coupled(p.omega_a + 1e6 * p.kappa(), p.resonant_drive(), &p);
        assert!((s - Complex64::from_polar(1.0, 0.3)).norm() < 1e-5);
    }

    #[test]
    fn bare_resonance_depth() {
        let p = crossing_params().with_g(0.0);
        let s = s21_coupled(p.omega_a, p.resonant_drive(), &p);
        let expected = 1.0 - 2.0 * p.kappa_int / p.kappa();
        assert_relative_eq!(s.re, expected, max_relative = 1e-12);
        assert!(s.im.abs() < 1e-14);
    }

    #[test]
    fn doubly_resonant_value() {
        let p = crossing_params();
        let s = s21_coupled(p.omega_a, p.resonant_drive(), &p);
        let expected =
            1.0 - (p.kappa_int * p.gamma / 2.0) / (p.g * p.g + p.kappa() * p.gamma / 4.0);
        assert_relative_eq!(s.re, expected, max_relative = 1e-9);
        assert!(s.im.abs() < 1e-9);
    }

    #[test]
    fn bare_equals_coupled_at_zero_g() {
        let p = CoupledModeParams {
            theta: TWO_PI * -0.04,
            ..crossing_params().with_g(0.0)
        };
        for w in linear_grid(p.omega_a, 10.0 * p.kappa(), 201) {
            let a = s21_coupled(w, p.resonant_drive() + 1.3e6, &p);
            let b = s21_bare(w, &p);
            let scale = 1.0 + p.kappa_int / (w - p.omega_a).hypot(p.kappa() / 2.0);
            assert!((a - b).norm() <= 1e-15 * scale * 4.0, "{a} vs {b}");
        }
    }

    #[test]
    fn bare_dip_minimum_on_resonance() {
        let p = crossing_params().with_g(0.0);
        let grid = linear_grid(p.omega_a, 3.0 * p.kappa(), 601);
        let (imin, _) = grid
            .iter()
            .map(|&w| s21_bare(w, &p).norm())
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        assert_eq!(imin, 300);
    }

    #[test]
    fn theta_makes_tails_asymmetric() {
        let p = CoupledModeParams {
            theta: TWO_PI * -0.04,
            ..crossing_params().with_g(0.0)
        };
        let d = 1.5 * p.kappa();
        let hi = s21_bare(p.omega_a + d, &p).norm();
        let lo = s21_bare(p.omega_a - d, &p).norm();
        assert!((hi - lo).abs() > 1e-3, "{hi} {lo}");
    }

    #[test]
    fn resonant_magnitude_symmetric() {
        let p = crossing_params();
        for k in 1..50 {
            let d = k as f64 * 0.1 * p.kappa();
            let hi = s21_coupled(p.omega_a + d, p.resonant_drive(), &p).norm();
            let lo = s21_coupled(p.omega_a - d, p.resonant_drive(), &p).norm();
            assert!((hi - lo).abs() < 1e-12);
        }
    }

    #[test]
    fn background_envelope() {
        let p = CoupledModeParams {
            theta: 0.7,
            ..crossing_params()
        };
        for k in [101.0, 150.0, 400.0, -120.0, -1000.0] {
            let delta_a = k * p.kappa();
            let s = s21_coupled(p.omega_a + delta_a, p.resonant_drive(), &p);
            assert!((s - Complex64::from_polar(1.0, p.theta)).norm() < p.kappa_int / delta_a.abs());
        }
    }

    fn numeric_fwhm(p: &CoupledModeParams) -> f64 {
        let f = |w: f64| upconversion_transfer(w, p, p.omega_a);
        let peak = f(p.omega_b);
        let half = |mut lo: f64, mut hi: f64| {
            // lo above half max, hi below
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > peak / 2.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        half(p.omega_b, p.omega_b + 100.0 * p.gamma) - half(p.omega_b, p.omega_b - 100.0 * p.gamma)
    }

    #[test]
    fn upconversion_band_width() {
        let p = CoupledModeParams {
            g: TWO_PI * 120e3,
            kappa_int: TWO_PI * 0.8e6,
            kappa_ext: TWO_PI * 0.7e6,
            ..crossing_params()
        };
        let fwhm = numeric_fwhm(&p);
        assert!((fwhm / TWO_PI - 340e3).abs() / 340e3 < 0.10);
        // Purcell-broadened width γ + 4g²/κ
        assert_relative_eq!(
            fwhm,
            p.gamma + 4.0 * p.g * p.g / p.kappa(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn upconversion_peak_and_null() {
        let p = crossing_params();
        let grid = linear_grid(p.omega_b, 4.0 * p.gamma, 401);
        let power = upconversion_power(&grid, &p, p.omega_a);
        let imax = power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(imax, 200);
        assert_relative_eq!(power[200], 1.0);
        let none = upconversion_power(&grid, &p.with_g(0.0), p.omega_a);
        assert!(none.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conversion_and_transmission_share_denominator() {
        let p = CoupledModeParams {
            theta: 0.4,
            ..crossing_params()
        };
        let omega_d = p.resonant_drive() + 0.3 * p.kappa();
        for k in -20..=20 {
            let w_in = p.omega_a + 0.17 * k as f64 * p.kappa();
            let delta_a = w_in - p.omega_a;
            let delta_b = w_in - omega_d - p.omega_b;
            let d = coupled_denominator(delta_a, delta_b, &p);
            // S21 − e^{iθ} = iκ_int (δ_b + iγ/2) · (g/D) / g
            let conversion_amp = Complex64::new(p.g, 0.0) / d;
            let lhs = s21_coupled(w_in, omega_d, &p) - Complex64::from_polar(1.0, p.theta);
            let rhs = Complex64::i() * p.kappa_int * Complex64::new(delta_b, p.gamma / 2.0)
                * conversion_amp
                / p.g;
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1e-3));
        }
    }

    #[test]
    fn normal_modes() {
        let p = crossing_params().with_g(0.0);
        let wd = p.resonant_drive() + 5.0 * p.kappa();
        let [lo, hi] = normal_mode_frequencies(&p, wd);
        assert_relative_eq!(lo.re, p.omega_a, max_relative = 1e-15);
        assert_relative_eq!(lo.im, -p.kappa() / 2.0, max_relative = 1e-9);
        assert_relative_eq!(hi.re, wd + p.omega_b, max_relative = 1e-15);
        assert_relative_eq!(hi.im, -p.gamma / 2.0, max_relative = 1e-9);

        let p = CoupledModeParams {
            gamma: crossing_params().kappa(),
            ..crossing_params()
        };
        let [lo, hi] = normal_mode_frequencies(&p, p.resonant_drive());
        assert_relative_eq!(hi.re - lo.re, 2.0 * p.g, max_relative = 1e-6);
    }

    #[test]
    fn minimum_mode_separation_at_resonant_drive() {
        let p = crossing_params();
        let center = p.resonant_drive();
        let drives = linear_grid(center, 10.0 * p.g, 41);
        let seps: Vec<f64> = drives
            .iter()
            .map(|&wd| {
                let [lo, hi] = normal_mode_frequencies(&p, wd);
                hi.re - lo.re
            })
            .collect();
        let imin = seps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(imin, 20);
    }

    fn dip_separation(p: &CoupledModeParams) -> f64 {
        // two minima of |S21| symmetric about ω_a; locate the upper one
        let f = |w: f64| s21_coupled(w, p.resonant_drive(), p).norm();
        let grid = linear_grid(p.omega_a + 1.5 * p.g, 1.5 * p.g, 3001);
        let (i, _) = grid
            .iter()
            .map(|&w| f(w))
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let (mut a, mut b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
        // golden section refine
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        2.0 * (0.5 * (a + b) - p.omega_a)
    }

    #[test]
    fn splitting_grows_with_coupling() {
        let base = crossing_params();
        let mut last = 0.0;
        for k in 0..=18 {
            let g = base.kappa() * (1.0 + 0.5 * k as f64);
            let sep = dip_separation(&base.with_g(g));
            assert!(sep > last, "g = {g}: {sep} <= {last}");
            last = sep;
        }
    }

    #[test]
    fn synthesis_noiseless_and_deterministic() {
        let p = crossing_params();
        let grid = linear_grid(p.omega_a, 5.0 * p.kappa(), 101);
        let t = synthesize_trace(&grid, p.resonant_drive(), &p, &NoiseSpec::none()).unwrap();
        for (w, z) in grid.iter().zip(t.complex().unwrap()) {
            assert_eq!(*z, s21_coupled(*w, p.resonant_drive(), &p));
        }
        let noise = NoiseSpec::new(0.01, 42);
        let a = synthesize_trace(&grid, p.resonant_drive(), &p, &noise).unwrap();
        let b = synthesize_trace(&grid, p.resonant_drive(), &p, &noise).unwrap();
        assert_eq!(a, b);
        let c = synthesize_trace(&grid, p.resonant_drive(), &p, &noise.with_stream(1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthesis_noise_level() {
        let p = crossing_params();
        let grid = linear_grid(p.omega_a, 5.0 * p.kappa(), 10_000);
        let t = synthesize_trace(&grid, p.resonant_drive(), &p, &NoiseSpec::new(0.01, 3)).unwrap();
        let resid: Vec<f64> = grid
            .iter()
            .zip(t.complex().unwrap())
            .flat_map(|(w, z)| {
                let d = z - s21_coupled(*w, p.resonant_drive(), &p);
                [d.re, d.im]
            })
            .collect();
        let n = resid.len() as f64;
        let mean = resid.iter().sum::<f64>() / n;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.01).abs() / 0.01 < 0.15, "{sd}");
    }

    #[test]
    fn trace_validation() {
        assert!(SpectrumTrace::new(vec![1.0, 1.0], TraceValues::Power(vec![0.0, 0.0]), TraceMeta::default()).is_err());
        assert!(SpectrumTrace::new(vec![1.0, 2.0], TraceValues::Power(vec![0.0]), TraceMeta::default()).is_err());
    }
}
