//! Hz ↔ rad/s conversions at the file and CLI boundary.

use std::f64::consts::TAU;

#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

#[inline]
pub fn to_angular(hz: f64) -> f64 {
    hz * TAU
}
