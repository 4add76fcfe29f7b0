//! Frequency-selective Gaussian pulses: only spins within roughly the
//! envelope's Fourier width of the carrier respond, so pulse length trades
//! off directly against selectivity.

use crate::error::{Error, Result};

use super::sequence::PulseEvent;

use std::f64::consts::PI;

/// Builds a Gaussian-envelope pulse on the given species channel at
/// `center_offset_hz` from the species reference, scaled so the
/// on-resonance flip angle (the time integral of the envelope) equals
/// `angle_rad` exactly. A negative angle flips the phase by π.
///
/// The envelope is truncated at ±3σ with σ = duration/6 and sampled at the
/// midpoints of `n_samples` uniform steps.
pub fn gaussian_pulse(
    species: &str,
    center_offset_hz: f64,
    angle_rad: f64,
    duration_s: f64,
    n_samples: usize,
) -> Result<PulseEvent> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pulse duration must be positive and finite, got {duration_s}"
        )));
    }
    if n_samples < 8 {
        return Err(Error::InvalidArgument(format!(
            "need at least 8 envelope samples, got {n_samples}"
        )));
    }
    if !angle_rad.is_finite() || angle_rad == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "flip angle must be finite and nonzero, got {angle_rad}"
        )));
    }
    if !center_offset_hz.is_finite() {
        return Err(Error::InvalidArgument(
            "carrier offset must be finite".into(),
        ));
    }
    let sigma = duration_s / 6.0;
    let dt = duration_s / n_samples as f64;
    let center = duration_s / 2.0;
    let shape: Vec<f64> = (0..n_samples)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            (-((t - center) / sigma).powi(2) / 2.0).exp()
        })
        .collect();
    let area: f64 = shape.iter().map(|e| e * dt).sum();
    let scale = angle_rad.abs() / area;
    Ok(PulseEvent::ShapedPulse {
        species: species.to_string(),
        carrier_offset_hz: center_offset_hz,
        amplitudes_rad_s: shape.iter().map(|e| e * scale).collect(),
        phase_rad: if angle_rad < 0.0 { PI } else { 0.0 },
        duration_s,
    })
}
