//! Sequence synthesis from the natural Hamiltonian: CNOT from the zz
//! coupling, refocusing schedules from orthogonal sign patterns, and
//! virtual-z phase tracking.

use crate::algebra::{pauli_embed, Operator, PauliAxis};
use crate::error::{Error, Result};
use crate::gates;
use crate::system::{CouplingMode, SpinSystem};
use crate::tolerances::CERTIFICATE_FIDELITY;

use super::sequence::{PulseEvent, PulseSequence};
use crate::dynamics::gate_fidelity;

use std::f64::consts::PI;

/// The zz-rotation rate of a coupled pair in the secular Hamiltonian:
/// `(π/2)J + π d` rad/s (coefficient of `σ_z σ_z`).
fn zz_rate(system: &SpinSystem, i: usize, j: usize) -> f64 {
    PI / 2.0 * system.j_hz(i, j) + PI * system.dipolar_hz(i, j)
}

fn check_distinct_pair(system: &SpinSystem, i: usize, j: usize) -> Result<()> {
    system.spin(i)?;
    system.spin(j)?;
    if i == j {
        return Err(Error::InvalidArgument(format!(
            "pair indices must be distinct, got ({i}, {j})"
        )));
    }
    Ok(())
}

/// Compiles a CNOT (control flips target) from the pair's natural zz
/// coupling: a target π/2 rotation, a `1/(2J)`-style delay producing a π/4
/// zz rotation, a second target π/2 rotation, and virtual-z corrections.
///
/// The pulse phases are fixed by construction-time verification: the ideal
/// propagator of the emitted sequence is compared against the exact CNOT on
/// the reduced control/target pair and the compilation fails unless the
/// fidelity reaches [`CERTIFICATE_FIDELITY`]. In registers with more than
/// two spins the certificate covers the pair subsystem; couplings to
/// spectator spins must be refocused separately (see [`refocus_schedule`]).
pub fn compile_cnot(system: &SpinSystem, control: usize, target: usize) -> Result<PulseSequence> {
    check_distinct_pair(system, control, target)?;
    let kappa = zz_rate(system, control, target);
    if kappa == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "spins {control} and {target} are uncoupled; a CNOT needs a zz interaction"
        )));
    }
    if !system.weak_coupling_valid(control, target) {
        let delta_hz =
            (system.spins()[control].offset_hz - system.spins()[target].offset_hz).abs();
        let coupling_hz = system
            .j_hz(control, target)
            .abs()
            .max(system.dipolar_hz(control, target).abs());
        return Err(Error::StrongCouplingPair {
            i: control,
            j: target,
            delta_hz,
            coupling_hz,
        });
    }
    let tau = (PI / 4.0) / kappa.abs();
    // Solved in closed form from R_φ(θ)R_z(β) = R_z(β)R_{φ-β}(θ): for a
    // +π/4 zz rotation the target pulses are R_{-π/2}(π/2) … R_{π}(π/2)
    // with z corrections (-π/2, -π/2); a -π/4 zz rotation mirrors the
    // target phases in z.
    let (phi1, target_z) = if kappa > 0.0 {
        (-PI / 2.0, -PI / 2.0)
    } else {
        (PI / 2.0, PI / 2.0)
    };
    let nu_c = system.spins()[control].offset_hz;
    let nu_t = system.spins()[target].offset_hz;
    let pair_events = |c: usize, t: usize| -> Vec<PulseEvent> {
        vec![
            PulseEvent::HardPulse {
                spins: vec![t],
                phase_rad: phi1,
                angle_rad: PI / 2.0,
                duration_s: 0.0,
            },
            PulseEvent::Delay { tau_s: tau },
            PulseEvent::VirtualZ {
                spin: c,
                angle_rad: -2.0 * PI * nu_c * tau,
            },
            PulseEvent::VirtualZ {
                spin: t,
                angle_rad: -2.0 * PI * nu_t * tau,
            },
            PulseEvent::HardPulse {
                spins: vec![t],
                phase_rad: PI,
                angle_rad: PI / 2.0,
                duration_s: 0.0,
            },
            PulseEvent::VirtualZ {
                spin: c,
                angle_rad: -PI / 2.0,
            },
            PulseEvent::VirtualZ {
                spin: t,
                angle_rad: target_z,
            },
        ]
    };
    // Certificate on the reduced pair: control -> 0, target -> 1.
    let reduced = system.subsystem(&[control, target])?;
    let candidate = PulseSequence::with_events(2, pair_events(0, 1))?;
    let ideal = candidate.ideal_propagator(&reduced, CouplingMode::Weak)?;
    let fidelity = gate_fidelity(&ideal, &gates::cnot(2, 0, 1)?)?;
    if fidelity < CERTIFICATE_FIDELITY {
        return Err(Error::VerificationFailed { fidelity });
    }
    PulseSequence::with_events(system.n_spins(), pair_events(control, target))
}

/// Sign pattern value of Walsh row `r` on segment `s`.
fn walsh_sign(r: usize, s: usize) -> i32 {
    if (r & s).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Builds a refocusing schedule over total time `tau`: π pulses partition
/// the time into `2^q` equal segments so that every coupling except the
/// active pair's averages to zero, and every flipped spin's offset phase
/// cancels. With `active_pair = None` all couplings are refocused and the
/// schedule implements the identity (up to the recorded frame rotations).
///
/// Spins are assigned rows of a Walsh (Hadamard-pattern) sign matrix: the
/// active pair shares row 0 (never pulsed, full coupling preserved) and each
/// decoupled spin gets a distinct row, which makes every other pair's sign
/// product average to zero over the `2^q` segments. Unflipped spins keep
/// their full offset evolution; it is returned in the frame record
/// (`-2πν·τ` to undo it).
pub fn refocus_schedule(
    system: &SpinSystem,
    active_pair: Option<(usize, usize)>,
    tau: f64,
) -> Result<PulseSequence> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "refocusing time must be positive and finite, got {tau}"
        )));
    }
    let n = system.n_spins();
    let mut rows = vec![0usize; n];
    match active_pair {
        Some((i, j)) => {
            check_distinct_pair(system, i, j)?;
            let mut next = 1;
            for (k, row) in rows.iter_mut().enumerate() {
                if k != i && k != j {
                    *row = next;
                    next += 1;
                }
            }
        }
        None => {
            for (k, row) in rows.iter_mut().enumerate() {
                *row = k;
            }
        }
    }
    let max_row = rows.iter().copied().max().unwrap_or(0);
    let q = usize::BITS - max_row.leading_zeros(); // ceil(log2(max_row + 1))
    let segments = 1usize << q;
    let seg_tau = tau / segments as f64;
    let pi_pulse = |spins: Vec<usize>| PulseEvent::HardPulse {
        spins,
        phase_rad: 0.0,
        angle_rad: PI,
        duration_s: 0.0,
    };
    let mut events = vec![PulseEvent::Delay { tau_s: seg_tau }];
    for s in 1..segments {
        let flips: Vec<usize> = (0..n)
            .filter(|&k| walsh_sign(rows[k], s) != walsh_sign(rows[k], s - 1))
            .collect();
        if !flips.is_empty() {
            events.push(pi_pulse(flips));
        }
        events.push(PulseEvent::Delay { tau_s: seg_tau });
    }
    let final_flips: Vec<usize> = (0..n)
        .filter(|&k| walsh_sign(rows[k], segments - 1) < 0)
        .collect();
    if !final_flips.is_empty() {
        events.push(pi_pulse(final_flips));
    }
    let mut seq = PulseSequence::with_events(n, events)?;
    for k in 0..n {
        if rows[k] == 0 {
            seq.frame_record_rad[k] = -system.offset_rad(k) * tau;
        }
    }
    // Certificate: frame-corrected ideal propagator vs the bare coupling
    // term of the active pair (identity when fully decoupling).
    let target = match active_pair {
        Some((i, j)) => {
            let zz = pauli_embed(PauliAxis::Z, i, n)?
                .matrix()
                .dot(pauli_embed(PauliAxis::Z, j, n)?.matrix());
            let kappa = zz_rate(system, i, j);
            Operator(crate::algebra::expm_minus_i(&zz, kappa * tau)?)
        }
        None => Operator::identity(system.dim()),
    };
    let total = &seq.frame_correction() * &seq.ideal_propagator(system, CouplingMode::Weak)?;
    let fidelity = gate_fidelity(&total, &target)?;
    if fidelity < CERTIFICATE_FIDELITY {
        return Err(Error::VerificationFailed { fidelity });
    }
    Ok(seq)
}

/// Commutes every virtual-z rotation rightward past subsequent pulses
/// (`R_φ(θ)R_z(β) = R_z(β)R_{φ-β}(θ)`, i.e. each pulse's phase shifts by the
/// z angle accumulated on its spin) and accumulates the angles into the
/// frame record. The returned sequence has no interior virtual-z events and
/// satisfies `propagator(input) = R_z(Δframe) · propagator(output)`.
pub fn phase_track(seq: &PulseSequence) -> Result<PulseSequence> {
    let n = seq.n_spins();
    seq.validate()?;
    let mut acc = vec![0.0f64; n];
    let mut events = Vec::with_capacity(seq.events.len());
    for event in &seq.events {
        match event {
            PulseEvent::VirtualZ { spin, angle_rad } => acc[*spin] += angle_rad,
            PulseEvent::Delay { .. } => events.push(event.clone()),
            PulseEvent::HardPulse {
                spins,
                phase_rad,
                angle_rad,
                duration_s,
            } => {
                // Spins with equal pending z angles stay in one event;
                // unequal angles force a split into commuting single-spin
                // pulses with individually shifted phases.
                let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
                for &s in spins {
                    match groups.iter_mut().find(|(a, _)| *a == acc[s]) {
                        Some((_, members)) => members.push(s),
                        None => groups.push((acc[s], vec![s])),
                    }
                }
                for (angle, members) in groups {
                    events.push(PulseEvent::HardPulse {
                        spins: members,
                        phase_rad: phase_rad - angle,
                        angle_rad: *angle_rad,
                        duration_s: *duration_s,
                    });
                }
            }
            PulseEvent::ShapedPulse { .. } => {
                return Err(Error::InvalidSequence(
                    "phase tracking is defined for hard-pulse sequences only".into(),
                ));
            }
        }
    }
    let frame_record_rad = seq
        .frame_record_rad
        .iter()
        .zip(&acc)
        .map(|(f, a)| f + a)
        .collect();
    Ok(PulseSequence {
        events,
        frame_record_rad,
    })
}
