//! Pulse-sequence event list: ideal and finite-duration propagators, JSON
//! round-tripping, and a text timing diagram.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    dagger, embed_gates, expm_minus_i, max_abs, rotation_xy, rotation_z_all, Operator,
};
use crate::dynamics::{evolve_controls, Channel, ControlSequence};
use crate::error::{Error, Result};
use crate::system::{build_drift_hamiltonian, CouplingMode, SpinSystem};

use std::f64::consts::PI;

/// One event in a pulse program. Times are seconds, angles and phases
/// radians, envelope amplitudes rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseEvent {
    /// Free evolution under the natural Hamiltonian.
    Delay { tau_s: f64 },
    /// Transverse rotation `R_phase(angle)` on each listed spin. With zero
    /// duration this is the ideal instantaneous rotation; with a finite
    /// duration each listed spin is driven at its own resonance for
    /// `duration_s` while bystanders evolve under the drift.
    HardPulse {
        spins: Vec<usize>,
        phase_rad: f64,
        angle_rad: f64,
        duration_s: f64,
    },
    /// Amplitude-modulated pulse on one transmitter channel.
    ShapedPulse {
        species: String,
        carrier_offset_hz: f64,
        amplitudes_rad_s: Vec<f64>,
        phase_rad: f64,
        duration_s: f64,
    },
    /// Instantaneous, error-free z rotation realized in software.
    VirtualZ { spin: usize, angle_rad: f64 },
}

/// An ordered pulse program plus the per-spin z rotations that have been
/// commuted past its end: the full operation is
/// `R_z(frame_record) · (propagator of events)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub events: Vec<PulseEvent>,
    /// Accumulated z rotation per spin (rad), applied after all events.
    pub frame_record_rad: Vec<f64>,
}

impl PulseSequence {
    /// Empty sequence on a register of `n_spins`.
    pub fn new(n_spins: usize) -> Self {
        PulseSequence {
            events: Vec::new(),
            frame_record_rad: vec![0.0; n_spins],
        }
    }

    pub fn with_events(n_spins: usize, events: Vec<PulseEvent>) -> Result<Self> {
        let seq = PulseSequence {
            events,
            frame_record_rad: vec![0.0; n_spins],
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn n_spins(&self) -> usize {
        self.frame_record_rad.len()
    }

    /// Total wall-clock duration: delays plus finite pulse durations.
    pub fn duration(&self) -> f64 {
        self.events
            .iter()
            .map(|e| match e {
                PulseEvent::Delay { tau_s } => *tau_s,
                PulseEvent::HardPulse { duration_s, .. } => *duration_s,
                PulseEvent::ShapedPulse { duration_s, .. } => *duration_s,
                PulseEvent::VirtualZ { .. } => 0.0,
            })
            .sum()
    }

    /// Structural checks: durations non-negative, angles finite, spin
    /// indices in range, envelopes non-empty with non-negative amplitudes.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_spins();
        let check_spin = |spin: usize| -> Result<()> {
            if spin >= n {
                return Err(Error::SpinIndexOutOfRange {
                    index: spin,
                    n_spins: n,
                });
            }
            Ok(())
        };
        if let Some(bad) = self.frame_record_rad.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSequence(format!(
                "non-finite frame record entry {bad}"
            )));
        }
        for (idx, event) in self.events.iter().enumerate() {
            let fail = |msg: String| Err(Error::InvalidSequence(format!("event {idx}: {msg}")));
            match event {
                PulseEvent::Delay { tau_s } => {
                    if !(*tau_s >= 0.0) || !tau_s.is_finite() {
                        return fail(format!("delay {tau_s} s must be finite and >= 0"));
                    }
                }
                PulseEvent::HardPulse {
                    spins,
                    phase_rad,
                    angle_rad,
                    duration_s,
                } => {
                    if spins.is_empty() {
                        return fail("pulse addresses no spins".into());
                    }
                    for (pos, &s) in spins.iter().enumerate() {
                        check_spin(s)?;
                        if spins[..pos].contains(&s) {
                            return fail(format!("spin {s} listed twice"));
                        }
                    }
                    if !phase_rad.is_finite() || !angle_rad.is_finite() {
                        return fail("phase and angle must be finite".into());
                    }
                    if !(*duration_s >= 0.0) || !duration_s.is_finite() {
                        return fail(format!("duration {duration_s} s must be finite and >= 0"));
                    }
                }
                PulseEvent::ShapedPulse {
                    amplitudes_rad_s,
                    phase_rad,
                    duration_s,
                    carrier_offset_hz,
                    ..
                } => {
                    if amplitudes_rad_s.is_empty() {
                        return fail("empty envelope".into());
                    }
                    if amplitudes_rad_s.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                        return fail("envelope amplitudes must be finite and >= 0".into());
                    }
                    if !phase_rad.is_finite() || !carrier_offset_hz.is_finite() {
                        return fail("phase and carrier offset must be finite".into());
                    }
                    if !(*duration_s > 0.0) || !duration_s.is_finite() {
                        return fail(format!("duration {duration_s} s must be finite and > 0"));
                    }
                }
                PulseEvent::VirtualZ { spin, angle_rad } => {
                    check_spin(*spin)?;
                    if !angle_rad.is_finite() {
                        return fail("angle must be finite".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Idealized propagator of the event list: hard pulses as instantaneous
    /// rotations (durations ignored), delays as free evolution under the
    /// given coupling mode, virtual z as exact z rotations. Shaped pulses
    /// have no closed ideal form and are rejected. The frame record is not
    /// included (see [`PulseSequence::frame_correction`]).
    pub fn ideal_propagator(&self, system: &SpinSystem, mode: CouplingMode) -> Result<Operator> {
        self.check_register(system)?;
        let drift = build_drift_hamiltonian(system, mode);
        let n = system.n_spins();
        let mut u = Array2::<C64>::eye(system.dim());
        for event in &self.events {
            let step = match event {
                PulseEvent::Delay { tau_s } => expm_minus_i(drift.matrix(), *tau_s)?,
                PulseEvent::HardPulse {
                    spins,
                    phase_rad,
                    angle_rad,
                    ..
                } => {
                    let gate = rotation_xy(*phase_rad, *angle_rad);
                    let targets: Vec<(usize, &Array2<C64>)> =
                        spins.iter().map(|&s| (s, &gate)).collect();
                    embed_gates(n, &targets)?
                }
                PulseEvent::ShapedPulse { .. } => {
                    return Err(Error::InvalidSequence(
                        "shaped pulses have no ideal propagator; simulate them instead".into(),
                    ));
                }
                PulseEvent::VirtualZ { spin, angle_rad } => {
                    let mut angles = vec![0.0; n];
                    angles[*spin] = *angle_rad;
                    rotation_z_all(&angles)
                }
            };
            u = step.dot(&u);
        }
        Ok(Operator(u))
    }

    /// The diagonal unitary of the recorded terminal z rotations.
    pub fn frame_correction(&self) -> Operator {
        Operator(rotation_z_all(&self.frame_record_rad))
    }

    /// Finite-duration simulation of the event list: hard pulses with
    /// nonzero duration drive each listed spin at its own resonance while
    /// bystanders evolve under the drift; shaped pulses step through their
    /// envelope. Zero-duration pulses reduce to ideal rotations.
    pub fn simulate_propagator(&self, system: &SpinSystem, mode: CouplingMode) -> Result<Operator> {
        self.check_register(system)?;
        let drift = build_drift_hamiltonian(system, mode);
        let n = system.n_spins();
        let mut u = Array2::<C64>::eye(system.dim());
        for event in &self.events {
            let step = match event {
                PulseEvent::Delay { tau_s } => expm_minus_i(drift.matrix(), *tau_s)?,
                PulseEvent::HardPulse {
                    spins,
                    phase_rad,
                    angle_rad,
                    duration_s,
                } => {
                    if *duration_s == 0.0 {
                        let gate = rotation_xy(*phase_rad, *angle_rad);
                        let targets: Vec<(usize, &Array2<C64>)> =
                            spins.iter().map(|&s| (s, &gate)).collect();
                        embed_gates(n, &targets)?
                    } else {
                        simulate_hard_pulse(
                            system,
                            drift.matrix(),
                            spins,
                            *phase_rad,
                            *angle_rad,
                            *duration_s,
                        )?
                    }
                }
                PulseEvent::ShapedPulse {
                    species,
                    carrier_offset_hz,
                    amplitudes_rad_s,
                    phase_rad,
                    duration_s,
                } => {
                    let dt = duration_s / amplitudes_rad_s.len() as f64;
                    let controls = ControlSequence::new(
                        dt,
                        vec![Channel::with_offset(species.clone(), *carrier_offset_hz)],
                        vec![amplitudes_rad_s.clone()],
                        vec![vec![*phase_rad; amplitudes_rad_s.len()]],
                    )?;
                    evolve_controls(system, &controls, mode)?.into_matrix()
                }
                PulseEvent::VirtualZ { spin, angle_rad } => {
                    let mut angles = vec![0.0; n];
                    angles[*spin] = *angle_rad;
                    rotation_z_all(&angles)
                }
            };
            u = step.dot(&u);
        }
        Ok(Operator(u))
    }

    fn check_register(&self, system: &SpinSystem) -> Result<()> {
        if self.n_spins() != system.n_spins() {
            return Err(Error::DimensionMismatch(format!(
                "sequence is for {} spins but the system has {}",
                self.n_spins(),
                system.n_spins()
            )));
        }
        self.validate()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let seq: PulseSequence = serde_json::from_str(text)?;
        seq.validate()?;
        Ok(seq)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Aligned-text timing diagram: one column per event, one row per spin,
    /// with durations in the header and terminal frame angles in the footer.
    pub fn timing_diagram(&self, system: &SpinSystem) -> Result<String> {
        self.check_register(system)?;
        let n = self.n_spins();
        let deg = |rad: f64| rad * 180.0 / PI;
        // Header cell per event, then one cell per spin row.
        let mut columns: Vec<Vec<String>> = Vec::new();
        for event in &self.events {
            let mut col = Vec::with_capacity(n + 1);
            match event {
                PulseEvent::Delay { tau_s } => {
                    col.push(format!("{:.4}ms", tau_s * 1e3));
                    for _ in 0..n {
                        col.push("~~~~".into());
                    }
                }
                PulseEvent::HardPulse {
                    spins,
                    phase_rad,
                    angle_rad,
                    duration_s,
                } => {
                    col.push(if *duration_s == 0.0 {
                        "pulse".into()
                    } else {
                        format!("{:.4}ms", duration_s * 1e3)
                    });
                    for s in 0..n {
                        col.push(if spins.contains(&s) {
                            format!("{:.0}/{:.0}", deg(*angle_rad), deg(*phase_rad))
                        } else {
                            "....".into()
                        });
                    }
                }
                PulseEvent::ShapedPulse {
                    species,
                    duration_s,
                    amplitudes_rad_s,
                    ..
                } => {
                    col.push(format!("{:.4}ms", duration_s * 1e3));
                    let dt = duration_s / amplitudes_rad_s.len() as f64;
                    let flip: f64 = amplitudes_rad_s.iter().map(|a| a * dt).sum();
                    let members = system.species_indices(species)?;
                    for s in 0..n {
                        col.push(if members.contains(&s) {
                            format!("G{:.0}", deg(flip))
                        } else {
                            "....".into()
                        });
                    }
                }
                PulseEvent::VirtualZ { spin, angle_rad } => {
                    col.push("vz".into());
                    for s in 0..n {
                        col.push(if s == *spin {
                            format!("z{:.0}", deg(*angle_rad))
                        } else {
                            "....".into()
                        });
                    }
                }
            }
            columns.push(col);
        }
        let label_width = system
            .spins()
            .iter()
            .map(|s| s.label.len())
            .max()
            .unwrap_or(0)
            .max("spin".len());
        let widths: Vec<usize> = columns
            .iter()
            .map(|col| col.iter().map(String::len).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let mut push_row = |label: &str, cells: Vec<&str>| {
            out.push_str(&format!("{label:<label_width$}"));
            for (w, cell) in widths.iter().zip(cells) {
                out.push_str(&format!("  {cell:<w$}"));
            }
            while out.ends_with(' ') {
                out.pop();
            }
            out.push('\n');
        };
        push_row("spin", columns.iter().map(|c| c[0].as_str()).collect());
        for (s, spin) in system.spins().iter().enumerate() {
            push_row(
                &spin.label,
                columns.iter().map(|c| c[s + 1].as_str()).collect(),
            );
        }
        for (s, spin) in system.spins().iter().enumerate() {
            if self.frame_record_rad[s] != 0.0 {
                out.push_str(&format!(
                    "frame {}: {:.3} rad\n",
                    spin.label, self.frame_record_rad[s]
                ));
            }
        }
        Ok(out)
    }
}

/// Finite-duration hard pulse: each listed spin is driven exactly on its own
/// resonance, so in the common rotating frame the drive phase on spin `i`
/// ramps as `2π ν_i t + φ` with `t` measured from the pulse start.
///
/// Integration works in the multi-ramp co-rotating frame, where every drive
/// term is static. The transformed Hamiltonian is
/// `H̃(t) = H_drift − Σ_s (ω_s/2) σ_z^s + Σ_s (ω_nut/2)(cos φ σ_x^s + sin φ σ_y^s)
///        + (R_t† ΔH R_t − ΔH)` with `ΔH` the off-diagonal drift part, and the
/// propagator is `U(t_p) = R_{t_p} · W(t_p)`. With a diagonal drift (weak
/// coupling) `H̃` is constant and one matrix exponential is exact; otherwise
/// only the slow ramp conjugation of `ΔH` needs resolving.
fn simulate_hard_pulse(
    system: &SpinSystem,
    drift: &Array2<C64>,
    spins: &[usize],
    phase: f64,
    angle: f64,
    duration: f64,
) -> Result<Array2<C64>> {
    let n = system.n_spins();
    let omega_nut = angle.abs() / duration;
    let phase = if angle < 0.0 { phase + PI } else { phase };
    // Static part of the co-rotating-frame Hamiltonian.
    let mut h_static = drift.clone();
    for &s in spins {
        let sz = crate::algebra::pauli_embed(crate::algebra::PauliAxis::Z, s, n)?;
        let sx = crate::algebra::pauli_embed(crate::algebra::PauliAxis::X, s, n)?;
        let sy = crate::algebra::pauli_embed(crate::algebra::PauliAxis::Y, s, n)?;
        let w = system.offset_rad(s);
        h_static = h_static - sz.matrix().mapv(|v| v * C64::new(w / 2.0, 0.0));
        h_static =
            h_static + sx.matrix().mapv(|v| v * C64::new(omega_nut / 2.0 * phase.cos(), 0.0));
        h_static =
            h_static + sy.matrix().mapv(|v| v * C64::new(omega_nut / 2.0 * phase.sin(), 0.0));
    }
    // Off-diagonal drift does not commute with the ramp and must be
    // conjugated step by step; diagonal drift commutes and is exact.
    let mut off_diagonal = drift.clone();
    for d in 0..system.dim() {
        off_diagonal[[d, d]] = C64::new(0.0, 0.0);
    }
    let ramp_frame = |t: f64| -> Result<Array2<C64>> {
        let mut angles = vec![0.0; n];
        for &s in spins {
            angles[s] = system.offset_rad(s) * t;
        }
        Ok(rotation_z_all(&angles))
    };
    let w_final = if max_abs(&off_diagonal) == 0.0 {
        expm_minus_i(&h_static, duration)?
    } else {
        let base = &h_static - &off_diagonal;
        let max_ramp_hz = spins
            .iter()
            .map(|&s| system.spins()[s].offset_hz.abs())
            .fold(0.0f64, f64::max);
        let mut n_sub = 16usize;
        n_sub = n_sub.max((duration * max_ramp_hz * 200.0).ceil() as usize);
        n_sub = n_sub.max((duration * max_abs(&h_static) / 0.02).ceil() as usize);
        let dt = duration / n_sub as f64;
        let mut w = Array2::<C64>::eye(system.dim());
        for k in 0..n_sub {
            let r = ramp_frame((k as f64 + 0.5) * dt)?;
            let conjugated = dagger(&r).dot(&off_diagonal).dot(&r);
            let h = &base + &conjugated;
            w = expm_minus_i(&h, dt)?.dot(&w);
        }
        w
    };
    Ok(ramp_frame(duration)?.dot(&w_final))
}
