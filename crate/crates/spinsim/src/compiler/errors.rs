//! First-order pulse error estimation and correction.
//!
//! A real (finite-duration) pulse is modeled as the ideal rotation preceded
//! and followed by small diagonal errors,
//! `U_real ≈ E_post · U_ideal · E_pre` with
//! `E = exp(-(i/2)(Σ_i θ_i σ_z^i + Σ_{i<j} β_ij σ_z^i σ_z^j))`.
//! The angles are fitted from one- and two-spin reduced simulations, so the
//! cost scales with the number of coupled pairs rather than the register
//! dimension. Phase errors are cancelled exactly by virtual-z rotations;
//! coupling errors are cancelled to first order by retiming the delays.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::algebra::{embed_gates, max_abs_diff, rotation_xy, Operator};
use crate::error::{Error, Result};
use crate::system::{CouplingMode, SpinSystem};
use crate::tolerances::FIRST_ORDER_RESIDUAL_TOL;

use super::sequence::{PulseEvent, PulseSequence};

use std::f64::consts::PI;

/// Fitted first-order error angles for one pulse (all rad).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    /// Per-spin z-rotation angle θ_i preceding the ideal rotation.
    pub pre_phase: Vec<f64>,
    /// Per-spin z-rotation angle φ_i following the ideal rotation.
    pub post_phase: Vec<f64>,
    /// Per-pair σ_zσ_z angle preceding the ideal rotation (upper triangle).
    pub pre_coupling: Array2<f64>,
    /// Per-pair σ_zσ_z angle following the ideal rotation (upper triangle).
    pub post_coupling: Array2<f64>,
    /// Largest reconstruction residual across the reduced-system fits.
    pub residual: f64,
}

impl ErrorModel {
    pub fn zeros(n_spins: usize) -> Self {
        ErrorModel {
            pre_phase: vec![0.0; n_spins],
            post_phase: vec![0.0; n_spins],
            pre_coupling: Array2::zeros((n_spins, n_spins)),
            post_coupling: Array2::zeros((n_spins, n_spins)),
            residual: 0.0,
        }
    }

    pub fn n_spins(&self) -> usize {
        self.pre_phase.len()
    }

    pub fn is_zero(&self) -> bool {
        self.pre_phase.iter().all(|v| *v == 0.0)
            && self.post_phase.iter().all(|v| *v == 0.0)
            && self.pre_coupling.iter().all(|v| *v == 0.0)
            && self.post_coupling.iter().all(|v| *v == 0.0)
    }
}

/// `σ_zσ_z` coefficient (rad/s) of a pair in the secular drift: J, dipolar,
/// and the longitudinal hyperfine part all contribute.
fn secular_zz_rate(system: &SpinSystem, i: usize, j: usize) -> f64 {
    let mut rate = PI / 2.0 * system.j_hz(i, j) + PI * system.dipolar_hz(i, j);
    for hf in system.hyperfine() {
        if (hf.electron == i && hf.nucleus == j) || (hf.electron == j && hf.nucleus == i) {
            rate += PI / 2.0 * hf.az_hz;
        }
    }
    rate
}

/// Restriction of a pulse event to a subsystem: drives on selected spins
/// survive with remapped indices, drives entirely on other spins become a
/// plain delay of the same length.
fn reduce_pulse(pulse: &PulseEvent, system: &SpinSystem, indices: &[usize]) -> PulseEvent {
    match pulse {
        PulseEvent::HardPulse {
            spins,
            phase_rad,
            angle_rad,
            duration_s,
        } => {
            let kept: Vec<usize> = indices
                .iter()
                .enumerate()
                .filter(|(_, orig)| spins.contains(orig))
                .map(|(local, _)| local)
                .collect();
            if kept.is_empty() {
                PulseEvent::Delay { tau_s: *duration_s }
            } else {
                PulseEvent::HardPulse {
                    spins: kept,
                    phase_rad: *phase_rad,
                    angle_rad: *angle_rad,
                    duration_s: *duration_s,
                }
            }
        }
        PulseEvent::ShapedPulse {
            species,
            duration_s,
            ..
        } => {
            let addressed = indices
                .iter()
                .any(|&orig| system.spins()[orig].species == *species);
            if addressed {
                pulse.clone()
            } else {
                PulseEvent::Delay { tau_s: *duration_s }
            }
        }
        other => other.clone(),
    }
}

/// Nominal single-spin rotation the pulse intends on each spin: the listed
/// rotation for driven spins (hard pulses) or for species spins on
/// resonance with the carrier (shaped pulses), identity for everyone else.
fn nominal_gates(pulse: &PulseEvent, system: &SpinSystem) -> Result<Vec<Array2<C64>>> {
    let n = system.n_spins();
    let eye = Array2::<C64>::eye(2);
    match pulse {
        PulseEvent::HardPulse {
            spins,
            phase_rad,
            angle_rad,
            ..
        } => {
            let gate = rotation_xy(*phase_rad, *angle_rad);
            Ok((0..n)
                .map(|s| if spins.contains(&s) { gate.clone() } else { eye.clone() })
                .collect())
        }
        PulseEvent::ShapedPulse {
            species,
            carrier_offset_hz,
            amplitudes_rad_s,
            phase_rad,
            duration_s,
        } => {
            let dt = duration_s / amplitudes_rad_s.len() as f64;
            let flip: f64 = amplitudes_rad_s.iter().map(|a| a * dt).sum();
            let gate = rotation_xy(*phase_rad, flip);
            Ok(system
                .spins()
                .iter()
                .map(|spin| {
                    let resonant = spin.species == *species
                        && (spin.offset_hz - carrier_offset_hz).abs() < 1e-9;
                    if resonant {
                        gate.clone()
                    } else {
                        eye.clone()
                    }
                })
                .collect())
        }
        other => Err(Error::InvalidArgument(format!(
            "error estimation applies to pulses, not {other:?}"
        ))),
    }
}

/// Least-squares fit of diagonal phase factors: finds `α, γ` minimizing
/// `‖U_sim - diag(e^{iγ}) · U_id · diag(e^{iα})‖` by alternating closed-form
/// phase updates. Returns `(α, γ, residual)`.
fn fit_diagonal_phases(u_id: &Array2<C64>, u_sim: &Array2<C64>) -> (Vec<f64>, Vec<f64>, f64) {
    let dim = u_id.nrows();
    let mut m = Array2::<C64>::zeros((dim, dim));
    for b in 0..dim {
        for a in 0..dim {
            m[[b, a]] = u_id[[b, a]].conj() * u_sim[[b, a]];
        }
    }
    let mut alpha = vec![0.0f64; dim];
    let mut gamma = vec![0.0f64; dim];
    for _ in 0..500 {
        let mut change = 0.0f64;
        for b in 0..dim {
            let s: C64 = (0..dim)
                .map(|a| m[[b, a]] * C64::new(0.0, -alpha[a]).exp())
                .sum();
            if s.norm() > 1e-300 {
                let new = s.arg();
                change = change.max((new - gamma[b]).abs());
                gamma[b] = new;
            }
        }
        for a in 0..dim {
            let s: C64 = (0..dim)
                .map(|b| m[[b, a]] * C64::new(0.0, -gamma[b]).exp())
                .sum();
            if s.norm() > 1e-300 {
                let new = s.arg();
                change = change.max((new - alpha[a]).abs());
                alpha[a] = new;
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    let mut recon = Array2::<C64>::zeros((dim, dim));
    for b in 0..dim {
        for a in 0..dim {
            recon[[b, a]] =
                C64::new(0.0, gamma[b]).exp() * u_id[[b, a]] * C64::new(0.0, alpha[a]).exp();
        }
    }
    (alpha, gamma, max_abs_diff(&recon, u_sim))
}

/// Walsh coefficient of sign pattern `signs` in the diagonal phases:
/// `phases_a = c - (1/2)·Σ_P θ_P·W_P(a)` inverts to
/// `θ_P = -(2/dim)·Σ_a phases_a·W_P(a)`.
fn walsh_angle(phases: &[f64], signs: &[f64]) -> f64 {
    let dim = phases.len() as f64;
    -2.0 / dim
        * phases
            .iter()
            .zip(signs)
            .map(|(p, s)| p * s)
            .sum::<f64>()
}

fn commutes_with_z(u: &Array2<C64>) -> bool {
    // 2×2: commutes with σ_z iff off-diagonal entries vanish.
    u[[0, 1]].norm() < 1e-9 && u[[1, 0]].norm() < 1e-9
}

/// Splits a (pre, post) angle pair symmetrically when the gauge is free
/// (the ideal commutes with the error term).
fn symmetrize(pre: &mut f64, post: &mut f64, free: bool) {
    if free {
        let mean = (*pre + *post) / 2.0;
        *pre = mean;
        *post = mean;
    }
}

/// Estimates the first-order error model of a pulse by one- and two-spin
/// reduced simulations.
///
/// `ideal` is the intended full-register unitary; it must factor as the
/// pulse's nominal single-spin rotations (pulse gates model local rotations,
/// not entangling gates). Per-spin phase errors come from single-spin fits,
/// per-pair coupling errors from coupled-pair fits; errors whose split
/// between pre and post is not determined by the ideal rotation are split
/// symmetrically. Fails with [`Error::FitResidualTooLarge`] when any
/// reduced fit leaves more than [`FIRST_ORDER_RESIDUAL_TOL`], i.e. when the
/// pulse is outside the first-order regime.
pub fn estimate_first_order_errors(
    pulse: &PulseEvent,
    system: &SpinSystem,
    ideal: &Operator,
) -> Result<ErrorModel> {
    let n = system.n_spins();
    let gates = nominal_gates(pulse, system)?;
    let refs: Vec<(usize, &Array2<C64>)> = gates.iter().enumerate().collect();
    let nominal = Operator(embed_gates(n, &refs)?);
    if ideal.dim() != nominal.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ideal is {}-dimensional but the register needs {}",
            ideal.dim(),
            nominal.dim()
        )));
    }
    if !nominal.approx_eq_up_to_phase(ideal, 1e-6) {
        return Err(Error::InvalidArgument(
            "the ideal operator must be the product of the pulse's nominal single-spin \
             rotations; entangling targets cannot be fitted by a pulse error model"
                .into(),
        ));
    }
    let mut model = ErrorModel::zeros(n);
    // Single-spin fits: phase errors.
    for i in 0..n {
        let reduced = system.subsystem(&[i])?;
        let event = reduce_pulse(pulse, system, &[i]);
        let seq = PulseSequence::with_events(1, vec![event])?;
        let u_sim = seq.simulate_propagator(&reduced, CouplingMode::Weak)?;
        let (alpha, gamma, residual) = fit_diagonal_phases(&gates[i], u_sim.matrix());
        model.residual = model.residual.max(residual);
        let signs = [1.0, -1.0];
        let mut pre = walsh_angle(&alpha, &signs);
        let mut post = walsh_angle(&gamma, &signs);
        symmetrize(&mut pre, &mut post, commutes_with_z(&gates[i]));
        model.pre_phase[i] = pre;
        model.post_phase[i] = post;
    }
    // Coupled-pair fits: coupling errors. Uncoupled pairs evolve as exact
    // products and carry none.
    for i in 0..n {
        for j in (i + 1)..n {
            if secular_zz_rate(system, i, j) == 0.0 {
                continue;
            }
            let reduced = system.subsystem(&[i, j])?;
            let event = reduce_pulse(pulse, system, &[i, j]);
            let seq = PulseSequence::with_events(2, vec![event])?;
            let u_sim = seq.simulate_propagator(&reduced, CouplingMode::Weak)?;
            let u_id = crate::algebra::kron(&gates[i], &gates[j]);
            let (alpha, gamma, residual) = fit_diagonal_phases(&u_id, u_sim.matrix());
            model.residual = model.residual.max(residual);
            // Single-spin phase components of the pair fit are discarded:
            // the dedicated single-spin fits above are free of coupling
            // cross-talk.
            let zz = [1.0, -1.0, -1.0, 1.0];
            let mut pre = walsh_angle(&alpha, &zz);
            let mut post = walsh_angle(&gamma, &zz);
            symmetrize(
                &mut pre,
                &mut post,
                commutes_with_z(&gates[i]) && commutes_with_z(&gates[j]),
            );
            model.pre_coupling[[i, j]] = pre;
            model.post_coupling[[i, j]] = post;
        }
    }
    if model.residual > FIRST_ORDER_RESIDUAL_TOL {
        return Err(Error::FitResidualTooLarge {
            residual: model.residual,
            threshold: FIRST_ORDER_RESIDUAL_TOL,
        });
    }
    Ok(model)
}

/// Cancels fitted first-order errors of the modeled pulses in a sequence:
/// phase errors exactly, by virtual-z rotations around each pulse; coupling
/// errors to first order, by retiming the delays (each delay's zz evolution,
/// signed by the refocusing flip state, absorbs the accumulated per-pair
/// error). Offset phases from the retiming are themselves cancelled by
/// virtual-z events after each adjusted delay.
///
/// A zz error commutes past π pulses (picking up a sign) and past events
/// not touching its pair, but a partial rotation on either spin blocks it.
/// Each pair's timeline therefore splits into commutation zones at its
/// blocking pulses, and errors are only absorbed by delays within their own
/// zone. Errors in zones without a delay — before the first excitation
/// pulse, say — are structurally out of reach of retiming and are left in
/// place, as are errors on pairs with no zz coupling to retime against.
///
/// `models` pairs event indices (which must point at pulses) with their
/// fitted error models. Fails with [`Error::InfeasibleCorrection`] if a
/// delay would need a negative duration, and refuses corrections whose
/// zone equations conflict (no exact first-order cancellation exists).
pub fn correct_delays(
    seq: &PulseSequence,
    models: &[(usize, ErrorModel)],
    system: &SpinSystem,
) -> Result<PulseSequence> {
    let n = seq.n_spins();
    if n != system.n_spins() {
        return Err(Error::DimensionMismatch(format!(
            "sequence is for {} spins but the system has {}",
            n,
            system.n_spins()
        )));
    }
    seq.validate()?;
    let mut by_event: Vec<Option<&ErrorModel>> = vec![None; seq.events.len()];
    for (idx, model) in models {
        let event = seq.events.get(*idx).ok_or_else(|| {
            Error::InvalidArgument(format!("model references event {idx}, out of range"))
        })?;
        if !matches!(
            event,
            PulseEvent::HardPulse { .. } | PulseEvent::ShapedPulse { .. }
        ) {
            return Err(Error::InvalidArgument(format!(
                "model references event {idx}, which is not a pulse"
            )));
        }
        if model.n_spins() != n {
            return Err(Error::InvalidArgument(format!(
                "model for event {idx} covers {} spins, sequence has {n}",
                model.n_spins()
            )));
        }
        if by_event[*idx].replace(model).is_some() {
            return Err(Error::InvalidArgument(format!(
                "two models reference event {idx}"
            )));
        }
    }
    // Walk once, tracking per-spin flip state and per-pair commutation
    // zones. Coupling errors accumulate into their (pair, zone) bucket,
    // signed by the flip state where they occur so all terms in a zone
    // aggregate consistently.
    let pair_count = n * (n - 1) / 2;
    let pair_list: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut flip = vec![1.0f64; n];
    let mut zone = vec![0usize; pair_count];
    // (event index, duration, per-pair zone, per-pair sign) per delay.
    let mut delays: Vec<(usize, f64, Vec<usize>, Vec<f64>)> = Vec::new();
    let mut zone_error: std::collections::HashMap<(usize, usize), f64> =
        std::collections::HashMap::new();
    let touch_error = |model: &ErrorModel,
                           which: &dyn Fn(&ErrorModel) -> &Array2<f64>,
                           flip: &[f64],
                           zone: &[usize],
                           zone_error: &mut std::collections::HashMap<(usize, usize), f64>| {
        for (p, &(i, j)) in pair_list.iter().enumerate() {
            let beta = which(model)[[i, j]];
            if beta != 0.0 {
                *zone_error.entry((p, zone[p])).or_insert(0.0) += beta * flip[i] * flip[j];
            }
        }
    };
    for (idx, event) in seq.events.iter().enumerate() {
        match event {
            PulseEvent::Delay { tau_s } => {
                let signs = pair_list.iter().map(|&(i, j)| flip[i] * flip[j]).collect();
                delays.push((idx, *tau_s, zone.clone(), signs));
            }
            PulseEvent::HardPulse { spins, angle_rad, .. } => {
                if let Some(model) = by_event[idx] {
                    touch_error(model, &|m| &m.pre_coupling, &flip, &zone, &mut zone_error);
                }
                let is_pi = (angle_rad.abs() - PI).abs() < 1e-9;
                let is_null = angle_rad.abs() < 1e-12;
                if is_pi {
                    for &s in spins {
                        flip[s] = -flip[s];
                    }
                } else if !is_null {
                    for (p, &(i, j)) in pair_list.iter().enumerate() {
                        if spins.contains(&i) || spins.contains(&j) {
                            zone[p] += 1;
                        }
                    }
                }
                if let Some(model) = by_event[idx] {
                    touch_error(model, &|m| &m.post_coupling, &flip, &zone, &mut zone_error);
                }
            }
            PulseEvent::ShapedPulse { species, .. } => {
                if let Some(model) = by_event[idx] {
                    touch_error(model, &|m| &m.pre_coupling, &flip, &zone, &mut zone_error);
                }
                // A shaped pulse is a partial rotation over its whole
                // duration; conservatively it blocks every pair it touches.
                for (p, &(i, j)) in pair_list.iter().enumerate() {
                    if system.spins()[i].species == *species
                        || system.spins()[j].species == *species
                    {
                        zone[p] += 1;
                    }
                }
                if let Some(model) = by_event[idx] {
                    touch_error(model, &|m| &m.post_coupling, &flip, &zone, &mut zone_error);
                }
            }
            PulseEvent::VirtualZ { .. } => {}
        }
    }
    // One equation per (coupled pair, zone holding at least one delay):
    // the zone's delays must absorb the zone's error and nothing else.
    // Errors in zones without delays (or on uncoupled pairs) are out of
    // retiming's reach and stay in place.
    let kappas: Vec<f64> = pair_list
        .iter()
        .map(|&(i, j)| secular_zz_rate(system, i, j))
        .collect();
    let mut row_keys: Vec<(usize, usize)> = delays
        .iter()
        .flat_map(|(_, _, zones, _)| {
            (0..pair_count)
                .filter(|&p| kappas[p] != 0.0)
                .map(move |p| (p, zones[p]))
        })
        .collect();
    row_keys.sort_unstable();
    row_keys.dedup();
    let mut adjustments = vec![0.0f64; delays.len()];
    if !row_keys.is_empty() {
        let mut a = Array2::<f64>::zeros((row_keys.len(), delays.len()));
        let mut b = Array1::<f64>::zeros(row_keys.len());
        for (row, &(p, z)) in row_keys.iter().enumerate() {
            for (col, (_, _, zones, signs)) in delays.iter().enumerate() {
                if zones[p] == z {
                    a[[row, col]] = 2.0 * kappas[p] * signs[p];
                }
            }
            b[row] = -zone_error.get(&(p, z)).copied().unwrap_or(0.0);
        }
        use ndarray_linalg::LeastSquaresSvd;
        let solution = a
            .least_squares(&b)
            .map_err(|e| Error::Linalg(e.to_string()))?
            .solution;
        let achieved = a.dot(&solution);
        let residual = (0..row_keys.len())
            .map(|r| (achieved[r] - b[r]).abs())
            .fold(0.0f64, f64::max);
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residual > 1e-9 * (1.0 + scale) {
            return Err(Error::InvalidArgument(format!(
                "coupling errors cannot be cancelled exactly by the available delays \
                 (conflicting zone equations, residual {residual:.3e} rad)"
            )));
        }
        adjustments.copy_from_slice(solution.as_slice().unwrap());
    }
    // Rebuild the event list with phase corrections and retimed delays.
    let mut events = Vec::with_capacity(seq.events.len());
    let mut delay_cursor = 0usize;
    for (idx, event) in seq.events.iter().enumerate() {
        match event {
            PulseEvent::Delay { tau_s } => {
                let delta = adjustments[delay_cursor];
                delay_cursor += 1;
                let adjusted = tau_s + delta;
                if adjusted < 0.0 {
                    return Err(Error::InfeasibleCorrection {
                        event: idx,
                        duration_s: adjusted,
                    });
                }
                if delta == 0.0 {
                    events.push(event.clone());
                    continue;
                }
                events.push(PulseEvent::Delay { tau_s: adjusted });
                // The retiming also changes every offset phase; undo it on
                // the spot so only the zz term is affected.
                for i in 0..n {
                    let angle = -system.offset_rad(i) * delta;
                    if angle != 0.0 {
                        events.push(PulseEvent::VirtualZ {
                            spin: i,
                            angle_rad: angle,
                        });
                    }
                }
            }
            pulse @ (PulseEvent::HardPulse { .. } | PulseEvent::ShapedPulse { .. }) => {
                if let Some(model) = by_event[idx] {
                    for (spin, theta) in model.pre_phase.iter().enumerate() {
                        if *theta != 0.0 {
                            events.push(PulseEvent::VirtualZ {
                                spin,
                                angle_rad: -theta,
                            });
                        }
                    }
                    events.push(pulse.clone());
                    for (spin, phi) in model.post_phase.iter().enumerate() {
                        if *phi != 0.0 {
                            events.push(PulseEvent::VirtualZ {
                                spin,
                                angle_rad: -phi,
                            });
                        }
                    }
                } else {
                    events.push(pulse.clone());
                }
            }
            other => events.push(other.clone()),
        }
    }
    let mut corrected = PulseSequence::with_events(n, events)?;
    corrected.frame_record_rad = seq.frame_record_rad.clone();
    Ok(corrected)
}
