//! Single-transition control of an electron-nuclear hyperfine pair.
//!
//! The transverse hyperfine term mixes the nuclear sublevels, so a
//! microwave drive on one electron transition is enough to generate any
//! unitary on the pair. [`single_transition_gate`] first certifies this by
//! a Lie-algebra rank computation with the drift and the electron drive —
//! a phase-modulated channel supplies both quadratures σ_x and σ_y, so
//! those two generators are the controls — refusing with the rank
//! diagnostic when the algebra does not close (transverse coupling zero or
//! a degenerate arrangement); it then runs the gradient optimizer with
//! exactly one control channel parked on the 1-3 transition.
//!
//! Levels are numbered 1..dim in ascending energy of the internal
//! Hamiltonian. The channel's carrier offset is signed so that the
//! circularly polarized drive co-rotates with the chosen transition: the
//! offset equals (E_up − E_down)/2π, where "up" is whichever of the two
//! levels lives in the σ_z = +1 electron manifold.

use serde::{Deserialize, Serialize};

use crate::algebra::{eigh_c, pauli_embed, Operator, PauliAxis};
use crate::dynamics::{free_evolution, gate_fidelity, Channel};
use crate::error::{Error, Result};
use crate::grape::{controllability_rank, grape_optimize, GrapeOutcome, OptimizerConfig};
use crate::system::{build_drift_hamiltonian, CouplingMode, SpinKind, SpinSystem};

/// One line of the transition-frequency table: levels are 1-based and
/// sorted by ascending energy, so `frequency_hz ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    pub frequency_hz: f64,
}

/// All pairwise transition frequencies (eigenvalue differences) of the
/// internal Hamiltonian in the chosen coupling mode.
pub fn transition_table(system: &SpinSystem, mode: CouplingMode) -> Result<Vec<Transition>> {
    let drift = build_drift_hamiltonian(system, mode);
    let (energies, _) = eigh_c(drift.matrix())?;
    let dim = energies.len();
    let mut table = Vec::with_capacity(dim * (dim - 1) / 2);
    for i in 0..dim {
        for j in (i + 1)..dim {
            table.push(Transition {
                lower: i + 1,
                upper: j + 1,
                frequency_hz: (energies[j] - energies[i]) / (2.0 * std::f64::consts::PI),
            });
        }
    }
    Ok(table)
}

/// Compiles `goal` on an electron-nuclear system by driving a single
/// microwave channel parked on the 1-3 transition.
///
/// Refuses with [`Error::NotControllable`] unless the drift plus the
/// channel's two quadrature generators (σ_x and σ_y on the electron — a
/// phase-modulated drive provides both) generate the full traceless
/// algebra (rank dim²−1); with the transverse hyperfine coupling zero the
/// rank stops short and no single-transition drive can realize every
/// unitary. On success, delegates to the gradient optimizer with that one
/// channel and returns its outcome (target reached or best effort, per
/// the termination field). The full coupling mode is always used — the
/// transverse term is the mixing resource, and the secular approximation
/// would discard it.
pub fn single_transition_gate(
    system: &SpinSystem,
    goal: &Operator,
    config: &OptimizerConfig,
) -> Result<GrapeOutcome> {
    let n = system.n_spins();
    let electrons: Vec<usize> = (0..n)
        .filter(|&i| system.spins()[i].kind == SpinKind::Electron)
        .collect();
    let &electron = match electrons.as_slice() {
        [e] => e,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "single-transition control needs exactly one electron spin, found {}",
                electrons.len()
            )))
        }
    };
    if goal.dim() != system.dim() {
        return Err(Error::DimensionMismatch(format!(
            "goal is {}-dimensional but the system has dimension {}",
            goal.dim(),
            system.dim()
        )));
    }

    let drift = build_drift_hamiltonian(system, CouplingMode::Full);
    let controls = [
        pauli_embed(PauliAxis::X, electron, n)?,
        pauli_embed(PauliAxis::Y, electron, n)?,
    ];
    let rank = controllability_rank(&drift, &controls)?;
    let required = system.dim() * system.dim() - 1;
    if rank < required {
        return Err(Error::NotControllable { rank, required });
    }

    let (energies, vectors) = eigh_c(drift.matrix())?;
    let sz_e = pauli_embed(PauliAxis::Z, electron, n)?;
    let manifold = |level: usize| -> f64 {
        let v = vectors.column(level);
        let mut expect = 0.0;
        for r in 0..v.len() {
            for c in 0..v.len() {
                expect += (v[r].conj() * sz_e.matrix()[[r, c]] * v[c]).re;
            }
        }
        expect
    };
    // Levels 1 and 3 in ascending energy order (0-based indices 0 and 2).
    let (lo, hi) = (0usize, 2usize);
    let (m_lo, m_hi) = (manifold(lo), manifold(hi));
    if m_lo * m_hi >= 0.0 {
        return Err(Error::InvalidArgument(
            "levels 1 and 3 lie in the same electron manifold; the 1-3 line is \
             not an electron transition for this arrangement"
                .into(),
        ));
    }
    let (up, down) = if m_lo > 0.0 { (lo, hi) } else { (hi, lo) };
    let offset_hz = (energies[up] - energies[down]) / (2.0 * std::f64::consts::PI);
    let channel = Channel::with_offset(system.spins()[electron].species.clone(), offset_hz);

    grape_optimize(system, goal, &[channel], config, None, CouplingMode::Full)
}

/// Searches an even grid of `n_grid` durations in `(0, max_duration]` for
/// the free-evolution propagator closest to the identity (a drift echo).
/// Returns the best duration and its fidelity to the identity gate.
pub fn drift_echo_duration(
    system: &SpinSystem,
    mode: CouplingMode,
    max_duration: f64,
    n_grid: usize,
) -> Result<(f64, f64)> {
    if !(max_duration > 0.0) || n_grid == 0 {
        return Err(Error::InvalidArgument(format!(
            "echo search needs a positive duration window and at least one \
             grid point (got {max_duration} s, {n_grid} points)"
        )));
    }
    let identity = Operator::identity(system.dim());
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 1..=n_grid {
        let t = k as f64 * max_duration / n_grid as f64;
        let u = free_evolution(system, t, mode)?;
        let f = gate_fidelity(&u, &identity)?;
        if f > best.1 {
            best = (t, f);
        }
    }
    Ok(best)
}
