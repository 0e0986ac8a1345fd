//! Starting-value heuristics shared by the fit models.

use num_complex::Complex64;

/// Centered moving average; the window shrinks at the edges.
pub(crate) fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust white-noise σ from second differences:
/// `σ ≈ 1.4826·MAD(Δ²x)/√6`. Smooth signal structure barely contributes.
pub(crate) fn noise_sigma(v: &[f64]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let d2: Vec<f64> = v.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let m = median(d2.clone());
    let mad = median(d2.into_iter().map(|d| (d - m).abs()).collect());
    1.4826 * mad / 6f64.sqrt()
}

/// Per-quadrature noise σ of a complex trace.
pub(crate) fn noise_sigma_complex(v: &[Complex64]) -> f64 {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    0.5 * (noise_sigma(&re) + noise_sigma(&im))
}

pub(crate) fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Mean of the outer `fraction` of points on both ends.
pub(crate) fn edge_mean(v: &[Complex64], fraction: f64) -> Complex64 {
    let k = ((v.len() as f64 * fraction).ceil() as usize).clamp(1, v.len().div_ceil(2));
    let sum: Complex64 = v[..k].iter().chain(&v[v.len() - k..]).sum();
    sum / (2 * k) as f64
}

pub(crate) fn edge_mean_real(v: &[f64], fraction: f64) -> f64 {
    let k = ((v.len() as f64 * fraction).ceil() as usize).clamp(1, v.len().div_ceil(2));
    let sum: f64 = v[..k].iter().chain(&v[v.len() - k..]).sum();
    sum / (2 * k) as f64
}

/// Full width at which `v` crosses `level` on either side of `center`,
/// with linear interpolation. `inside_above` says whether points near the
/// center lie above the level (a peak) or below it (a dip). A one-sided
/// crossing is mirrored.
pub(crate) fn crossing_width(
    freqs: &[f64],
    v: &[f64],
    center: usize,
    level: f64,
    inside_above: bool,
) -> Option<f64> {
    let inside = |x: f64| if inside_above { x > level } else { x < level };
    let cross = |i_in: usize, i_out: usize| {
        let (a, b) = (v[i_in], v[i_out]);
        let t = if b != a { (level - a) / (b - a) } else { 0.5 };
        freqs[i_in] + t * (freqs[i_out] - freqs[i_in])
    };
    let left = (1..=center)
        .rev()
        .find(|&i| !inside(v[i - 1]))
        .map(|i| cross(i, i - 1));
    let right = (center..v.len() - 1)
        .find(|&i| !inside(v[i + 1]))
        .map(|i| cross(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (freqs[center] - l)),
        (None, Some(r)) => Some(2.0 * (r - freqs[center])),
        (None, None) => None,
    }
    .filter(|w| *w > 0.0)
}
