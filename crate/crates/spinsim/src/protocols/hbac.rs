//! Heat-bath algorithmic cooling on a three-spin register.
//!
//! The register holds three computational spins. One of them (`refresh
//! target` in [`HbacConfig`]) has a controllable contact to a polarized
//! bath; replacing its marginal with the bath thermal state is the only
//! non-unitary resource. A round of cooling pumps bath polarization onto
//! all three spins and then runs a reversible three-bit compression that
//! concentrates polarization on the target qubit, bounded by the 1.5×
//! single-round gain `ε → (3ε − ε³)/2`.
//!
//! Qubit roles are fixed by convention: **spin 1 (the middle spin) is the
//! compression target**; the bath-contact spin is chosen in the config and
//! must differ from the target. The compression unitary is
//! `CNOTNOT · TOFFOLI · CNOTNOT` with the middle spin as the CNOTNOT
//! control and the Toffoli target; in the computational basis it is the
//! permutation that exchanges |010⟩ and |101⟩ and fixes the other six
//! basis states.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::Operator;
use crate::dynamics::{evolve_controls, evolve_state, ControlSequence, DensityState};
use crate::error::{Error, Result};
use crate::gates;
use crate::system::{CouplingMode, SpinSystem};
use crate::tolerances::MAX_SPINS;

/// Index of the compression target qubit (the middle spin).
pub const COMPRESSION_TARGET_SPIN: usize = 1;

/// Bath re-equilibration time of the contact spin, seconds. The refresh
/// operation itself is modeled as instantaneous and perfect; this constant
/// records the physical spin-diffusion timescale as metadata for schedule
/// budgeting only — it never enters the simulation.
pub const BATH_EQUILIBRATION_TIME_S: f64 = 5e-3;

/// Per-spin longitudinal polarizations `ε_i ∈ [−1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolarizationVector {
    values: Vec<f64>,
}

impl PolarizationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "polarization vector must have at least one entry".into(),
            ));
        }
        if values.len() > MAX_SPINS {
            return Err(Error::InvalidArgument(format!(
                "polarization vector of {} spins exceeds the {MAX_SPINS}-spin cap",
                values.len()
            )));
        }
        for (i, &eps) in values.iter().enumerate() {
            if !eps.is_finite() || eps.abs() > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "polarization of spin {i} is {eps}; must lie in [-1, 1]"
                )));
            }
        }
        Ok(Self { values })
    }

    /// `n` spins, all at polarization `eps`.
    pub fn uniform(n: usize, eps: f64) -> Result<Self> {
        Self::new(vec![eps; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<Vec<f64>> for PolarizationVector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<PolarizationVector> for Vec<f64> {
    fn from(pol: PolarizationVector) -> Vec<f64> {
        pol.values
    }
}

/// How protocol gates are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HbacComputeMode {
    /// Exact permutation unitaries, no loss.
    IdealGates,
    /// Compiled control sequences (where supplied) with an optional uniform
    /// per-step polarization-loss channel; also reports the ideal trace for
    /// side-by-side comparison.
    CompiledPulses,
}

/// Configuration of a cooling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbacConfig {
    /// Bath polarization `ε_b ∈ [−1, 1]` installed by each refresh.
    pub bath_polarization: f64,
    /// Number of cooling rounds, at least 1.
    pub n_rounds: usize,
    /// The bath-contact spin that refresh operations act on. Must be a
    /// valid index other than [`COMPRESSION_TARGET_SPIN`].
    pub refresh_target: usize,
    pub compute_mode: HbacComputeMode,
    /// Uniform polarization-loss rate applied to every spin after each
    /// protocol step in compiled mode (`ε → (1−r)·ε` on product states).
    /// Models the average per-step error of imperfect gate implementations.
    #[serde(default)]
    pub loss_per_step: f64,
}

impl HbacConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.bath_polarization.is_finite() || self.bath_polarization.abs() > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "bath polarization {} must lie in [-1, 1]",
                self.bath_polarization
            )));
        }
        if self.n_rounds == 0 {
            return Err(Error::InvalidArgument(
                "cooling needs at least one round (n_rounds >= 1)".into(),
            ));
        }
        if self.refresh_target >= 3 {
            return Err(Error::InvalidArgument(format!(
                "refresh target {} out of range for the 3-spin register",
                self.refresh_target
            )));
        }
        if self.refresh_target == COMPRESSION_TARGET_SPIN {
            return Err(Error::InvalidArgument(format!(
                "refresh target must differ from the compression target \
                 (spin {COMPRESSION_TARGET_SPIN})"
            )));
        }
        if !(0.0..=1.0).contains(&self.loss_per_step) {
            return Err(Error::InvalidArgument(format!(
                "loss per step {} must lie in [0, 1]",
                self.loss_per_step
            )));
        }
        if self.compute_mode == HbacComputeMode::IdealGates && self.loss_per_step != 0.0 {
            return Err(Error::InvalidArgument(
                "loss_per_step requires compiled-pulses mode".into(),
            ));
        }
        Ok(())
    }
}

/// Compiled control sequences for the unitary protocol steps. Any missing
/// entry falls back to the exact gate, so partial sets are usable.
#[derive(Debug, Clone)]
pub struct HbacPulses {
    /// Coupling mode used to simulate the sequences.
    pub mode: CouplingMode,
    /// Pulses implementing the swap between the bath-contact spin and the
    /// keyed spin (used by the distribution steps of the first round).
    pub swap_with_contact: BTreeMap<usize, ControlSequence>,
    /// Pulse implementing the three-bit compression.
    pub compression: Option<ControlSequence>,
}

/// Polarization of one spin after one protocol step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbacStepRecord {
    /// Cooling round, 1-based.
    pub round: usize,
    /// Step within the round, 1-based.
    pub step: usize,
    pub spin: usize,
    pub polarization: f64,
}

/// Per-step polarization trace of a cooling run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HbacTrace {
    rows: Vec<HbacStepRecord>,
}

impl HbacTrace {
    pub fn rows(&self) -> &[HbacStepRecord] {
        &self.rows
    }

    /// Polarization of `spin` after the last executed step.
    pub fn final_polarization(&self, spin: usize) -> Option<f64> {
        self.rows
            .iter()
            .rev()
            .find(|r| r.spin == spin)
            .map(|r| r.polarization)
    }

    /// CSV interchange format: `round,step,spin,polarization`, one row per
    /// (step, spin), directly plottable as per-step polarization bars.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("round,step,spin,polarization\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.round, r.step, r.spin, r.polarization
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        {
            let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?;
            let got: Vec<&str> = headers.iter().collect();
            if got != ["round", "step", "spin", "polarization"] {
                return Err(Error::Csv(format!(
                    "expected header round,step,spin,polarization; got {}",
                    got.join(",")
                )));
            }
        }
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Csv(e.to_string()))?;
            if record.len() != 4 {
                return Err(Error::Csv(format!(
                    "row {}: expected 4 fields, got {}",
                    line + 2,
                    record.len()
                )));
            }
            let index = |idx: usize, what: &str| -> Result<usize> {
                record[idx].parse::<usize>().map_err(|_| {
                    Error::Csv(format!(
                        "row {}: unparseable {what} '{}'",
                        line + 2,
                        &record[idx]
                    ))
                })
            };
            let polarization = record[3].parse::<f64>().map_err(|_| {
                Error::Csv(format!(
                    "row {}: unparseable polarization '{}'",
                    line + 2,
                    &record[3]
                ))
            })?;
            rows.push(HbacStepRecord {
                round: index(0, "round")?,
                step: index(1, "step")?,
                spin: index(2, "spin")?,
                polarization,
            });
        }
        Ok(Self { rows })
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

/// Result of a cooling run.
#[derive(Debug, Clone, PartialEq)]
pub struct HbacOutcome {
    /// Trace with exact gates and no loss (always computed).
    pub ideal_trace: HbacTrace,
    /// Trace with compiled pulses / per-step loss; present exactly in
    /// compiled-pulses mode.
    pub compiled_trace: Option<HbacTrace>,
    /// Final polarization of the target qubit in the operative trace
    /// (compiled when present, ideal otherwise).
    pub final_polarization: f64,
    /// `final_polarization / ε_b`; absent when `ε_b = 0`.
    pub amplification_ratio: Option<f64>,
}

/// Diagonal product state `⊗_i (I + ε_i σ_z)/2`.
pub fn thermal_state(pol: &PolarizationVector) -> Result<DensityState> {
    let n = pol.len();
    let dim = 1usize << n;
    let mut m = Array2::<C64>::zeros((dim, dim));
    for b in 0..dim {
        let mut p = 1.0;
        for (spin, &eps) in pol.values().iter().enumerate() {
            p *= 0.5 * (1.0 + basis_sign(b, spin, n) * eps);
        }
        m[[b, b]] = C64::new(p, 0.0);
    }
    DensityState::from_matrix(m)
}

/// Longitudinal polarization `Tr(ρ σ_z^spin)`.
pub fn measure_polarization(rho: &DensityState, spin: usize) -> Result<f64> {
    let n = n_spins_of_dim(rho.dim())?;
    if spin >= n {
        return Err(Error::SpinIndexOutOfRange {
            index: spin,
            n_spins: n,
        });
    }
    Ok(rho
        .populations()
        .iter()
        .enumerate()
        .map(|(b, &p)| basis_sign(b, spin, n) * p)
        .sum())
}

/// The three-bit compression unitary `CNOTNOT · TOFFOLI · CNOTNOT` on the
/// 3-spin register, with spin 1 as the CNOTNOT control and the Toffoli
/// target. In the computational basis it exchanges |010⟩ ↔ |101⟩ and fixes
/// the other six states; on a uniform-ε thermal input it boosts the target
/// polarization to `(3ε − ε³)/2`.
pub fn compression_gate() -> Operator {
    let target = COMPRESSION_TARGET_SPIN;
    let cnotnot = gates::cnotnot(3, target, 0, 2).expect("static indices");
    let toffoli = gates::toffoli(3, 0, 2, target).expect("static indices");
    Operator(
        cnotnot
            .matrix()
            .dot(toffoli.matrix())
            .dot(cnotnot.matrix()),
    )
}

/// Replaces the marginal of `spin` with the bath thermal state
/// `(I + ε_b σ_z)/2`, discarding its correlations:
/// `ρ → Tr_spin(ρ) ⊗ bath`, reinserted at the spin's tensor slot. This is
/// exactly a swap with a fresh bath spin that is then discarded.
pub fn refresh(rho: &DensityState, spin: usize, eps_b: f64) -> Result<DensityState> {
    if !eps_b.is_finite() || eps_b.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "bath polarization {eps_b} must lie in [-1, 1]"
        )));
    }
    let n = n_spins_of_dim(rho.dim())?;
    if spin >= n {
        return Err(Error::SpinIndexOutOfRange {
            index: spin,
            n_spins: n,
        });
    }
    let dim = rho.dim();
    let half = dim / 2;
    // spin 0 is the most significant tensor factor
    let pos = n - 1 - spin;
    let insert = |rest: usize, value: usize| -> usize {
        ((rest >> pos) << (pos + 1)) | (value << pos) | (rest & ((1 << pos) - 1))
    };
    let m = rho.matrix();
    let mut reduced = Array2::<C64>::zeros((half, half));
    for r1 in 0..half {
        for r2 in 0..half {
            reduced[[r1, r2]] = m[[insert(r1, 0), insert(r2, 0)]] + m[[insert(r1, 1), insert(r2, 1)]];
        }
    }
    let weights = [0.5 * (1.0 + eps_b), 0.5 * (1.0 - eps_b)];
    let mut out = Array2::<C64>::zeros((dim, dim));
    for r1 in 0..half {
        for r2 in 0..half {
            for (v, &w) in weights.iter().enumerate() {
                out[[insert(r1, v), insert(r2, v)]] = reduced[[r1, r2]] * C64::new(w, 0.0);
            }
        }
    }
    DensityState::from_matrix(out)
}

/// Uniform local depolarization: each spin's marginal is mixed toward I/2
/// with weight `rate`, shrinking every single-spin polarization by
/// `(1 − rate)` while preserving trace and positivity. This is the
/// per-step loss channel of compiled-pulses mode.
pub fn apply_polarization_loss(rho: &DensityState, rate: f64) -> Result<DensityState> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "loss rate {rate} must lie in [0, 1]"
        )));
    }
    let n = n_spins_of_dim(rho.dim())?;
    let mut state = rho.clone();
    for spin in 0..n {
        let erased = refresh(&state, spin, 0.0)?;
        let keep = C64::new(1.0 - rate, 0.0);
        let mix = C64::new(rate, 0.0);
        let m = state.matrix().mapv(|v| v * keep) + erased.matrix().mapv(|v| v * mix);
        state = DensityState::from_matrix(m)?;
    }
    Ok(state)
}

/// Average per-step polarization-loss rate implied by an observed
/// amplification ratio: solves `observed = ideal · (1 − r)^n_steps`.
pub fn implied_per_step_error(
    observed_ratio: f64,
    ideal_ratio: f64,
    n_steps: usize,
) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument(
            "per-step accounting needs at least one step".into(),
        ));
    }
    if !(observed_ratio > 0.0) || !(ideal_ratio > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "amplification ratios must be positive (observed {observed_ratio}, ideal {ideal_ratio})"
        )));
    }
    Ok(1.0 - (observed_ratio / ideal_ratio).powf(1.0 / n_steps as f64))
}

/// One protocol step of a cooling round.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ProtocolStep {
    Refresh(usize),
    Swap(usize, usize),
    Compress,
}

/// Step schedule of one round. The first round is the six-step opening
/// sequence — pump the contact spin and distribute bath polarization onto
/// the other two spins by swaps, then compress:
///
/// ```text
/// refresh(b), swap(b, a), refresh(b), swap(b, target), refresh(b), compress
/// ```
///
/// where `b` is the bath-contact spin and `a` the remaining spin. Later
/// rounds keep the target's accumulated polarization and re-pump only the
/// other two spins (refresh, refresh, compress).
fn round_schedule(round: usize, bath: usize) -> Vec<ProtocolStep> {
    let other = 3 - bath - COMPRESSION_TARGET_SPIN;
    if round == 1 {
        vec![
            ProtocolStep::Refresh(bath),
            ProtocolStep::Swap(bath, other),
            ProtocolStep::Refresh(bath),
            ProtocolStep::Swap(bath, COMPRESSION_TARGET_SPIN),
            ProtocolStep::Refresh(bath),
            ProtocolStep::Compress,
        ]
    } else {
        vec![
            ProtocolStep::Refresh(other),
            ProtocolStep::Refresh(bath),
            ProtocolStep::Compress,
        ]
    }
}

/// Runs the cooling protocol on a 3-spin register and returns the per-step
/// polarization trace of every qubit.
///
/// The register starts maximally mixed; the opening round overwrites all
/// three polarizations with bath contacts and swaps, so the starting state
/// does not affect the outcome. In ideal-gates mode every unitary step is
/// an exact permutation gate. In compiled-pulses mode, swaps and the
/// compression use the supplied control sequences where present (exact
/// gates otherwise), every step is followed by the uniform polarization
/// loss of `config.loss_per_step`, and the outcome carries both the ideal
/// and the compiled trace for side-by-side comparison.
pub fn hbac_run(
    system: &SpinSystem,
    config: &HbacConfig,
    pulses: Option<&HbacPulses>,
) -> Result<HbacOutcome> {
    config.validate()?;
    if system.n_spins() != 3 {
        return Err(Error::InvalidArgument(format!(
            "cooling protocol needs exactly 3 computational spins, system has {}",
            system.n_spins()
        )));
    }
    if config.compute_mode == HbacComputeMode::IdealGates && pulses.is_some() {
        return Err(Error::InvalidArgument(
            "compiled pulses supplied but compute_mode is ideal-gates".into(),
        ));
    }

    let ideal_trace = run_leg(system, config, None, false)?;
    let compiled_trace = match config.compute_mode {
        HbacComputeMode::IdealGates => None,
        HbacComputeMode::CompiledPulses => Some(run_leg(system, config, pulses, true)?),
    };

    let operative = compiled_trace.as_ref().unwrap_or(&ideal_trace);
    let final_polarization = operative
        .final_polarization(COMPRESSION_TARGET_SPIN)
        .expect("schedule always records the target spin");
    let amplification_ratio = if config.bath_polarization != 0.0 {
        Some(final_polarization / config.bath_polarization)
    } else {
        None
    };
    Ok(HbacOutcome {
        ideal_trace,
        compiled_trace,
        final_polarization,
        amplification_ratio,
    })
}

fn run_leg(
    system: &SpinSystem,
    config: &HbacConfig,
    pulses: Option<&HbacPulses>,
    lossy: bool,
) -> Result<HbacTrace> {
    let eps_b = config.bath_polarization;
    let compress = compression_gate();
    let mut state = thermal_state(&PolarizationVector::uniform(3, 0.0)?)?;
    let mut rows = Vec::new();
    for round in 1..=config.n_rounds {
        for (k, step) in round_schedule(round, config.refresh_target)
            .iter()
            .enumerate()
        {
            state = match *step {
                ProtocolStep::Refresh(spin) => refresh(&state, spin, eps_b)?,
                ProtocolStep::Swap(bath_spin, k) => {
                    let pulse =
                        pulses.and_then(|p| p.swap_with_contact.get(&k).map(|s| (s, p.mode)));
                    match pulse {
                        Some((seq, mode)) => {
                            evolve_state(&state, &evolve_controls(system, seq, mode)?)?
                        }
                        None => evolve_state(&state, &gates::swap(3, bath_spin, k)?)?,
                    }
                }
                ProtocolStep::Compress => {
                    let pulse = pulses.and_then(|p| p.compression.as_ref().map(|s| (s, p.mode)));
                    match pulse {
                        Some((seq, mode)) => {
                            evolve_state(&state, &evolve_controls(system, seq, mode)?)?
                        }
                        None => evolve_state(&state, &compress)?,
                    }
                }
            };
            if lossy && config.loss_per_step > 0.0 {
                state = apply_polarization_loss(&state, config.loss_per_step)?;
            }
            for spin in 0..3 {
                rows.push(HbacStepRecord {
                    round,
                    step: k + 1,
                    spin,
                    polarization: measure_polarization(&state, spin)?,
                });
            }
        }
    }
    Ok(HbacTrace { rows })
}

/// Sign of σ_z on `spin` in basis state `b` (spin 0 is the most
/// significant tensor factor).
fn basis_sign(b: usize, spin: usize, n: usize) -> f64 {
    if (b >> (n - 1 - spin)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn n_spins_of_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "dimension {dim} is not a power of two; state is not a spin register"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::max_abs_diff;
    use crate::system::{Spin, SpinKind};
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three_spin_system() -> SpinSystem {
        let spins = vec![
            Spin {
                label: "C1".into(),
                species: "13C".into(),
                kind: SpinKind::Nuclear,
                offset_hz: 0.0,
            },
            Spin {
                label: "C2".into(),
                species: "13C".into(),
                kind: SpinKind::Nuclear,
                offset_hz: 12000.0,
            },
            Spin {
                label: "Cm".into(),
                species: "13C".into(),
                kind: SpinKind::Nuclear,
                offset_hz: -8000.0,
            },
        ];
        SpinSystem::new(spins, &[], &[], vec![]).unwrap()
    }

    fn ideal_config(eps_b: f64, n_rounds: usize) -> HbacConfig {
        HbacConfig {
            bath_polarization: eps_b,
            n_rounds,
            refresh_target: 2,
            compute_mode: HbacComputeMode::IdealGates,
            loss_per_step: 0.0,
        }
    }

    // ---- independent 8-entry diagonal-probability oracle ----------------

    /// Probability vector of ⊗(I + ε_i σ_z)/2 over the 8 basis states.
    fn oracle_thermal(eps: [f64; 3]) -> [f64; 8] {
        let mut p = [0.0; 8];
        for (b, slot) in p.iter_mut().enumerate() {
            let mut v = 1.0;
            for (spin, &e) in eps.iter().enumerate() {
                let sign = if (b >> (2 - spin)) & 1 == 0 { 1.0 } else { -1.0 };
                v *= 0.5 * (1.0 + sign * e);
            }
            *slot = v;
        }
        p
    }

    fn oracle_polarization(p: &[f64; 8], spin: usize) -> f64 {
        p.iter()
            .enumerate()
            .map(|(b, &v)| if (b >> (2 - spin)) & 1 == 0 { v } else { -v })
            .sum()
    }

    /// Bit-level replay of CNOTNOT(control 1) · TOFFOLI(target 1) ·
    /// CNOTNOT(control 1) on one basis state.
    fn oracle_compress_image(b: usize) -> usize {
        let (mut b0, mut b1, mut b2) = ((b >> 2) & 1, (b >> 1) & 1, b & 1);
        if b1 == 1 {
            b0 ^= 1;
            b2 ^= 1;
        }
        if b0 == 1 && b2 == 1 {
            b1 ^= 1;
        }
        if b1 == 1 {
            b0 ^= 1;
            b2 ^= 1;
        }
        (b0 << 2) | (b1 << 1) | b2
    }

    fn oracle_compress(p: &[f64; 8]) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (b, &v) in p.iter().enumerate() {
            out[oracle_compress_image(b)] += v;
        }
        out
    }

    fn oracle_refresh(p: &[f64; 8], spin: usize, eps_b: f64) -> [f64; 8] {
        let pos = 2 - spin;
        let mut out = [0.0; 8];
        for b in 0..8 {
            let marginal_sum = p[b & !(1 << pos)] + p[b | (1 << pos)];
            let w = if (b >> pos) & 1 == 0 {
                0.5 * (1.0 + eps_b)
            } else {
                0.5 * (1.0 - eps_b)
            };
            out[b] = w * marginal_sum;
        }
        out
    }

    fn oracle_swap(p: &[f64; 8], a: usize, b_spin: usize) -> [f64; 8] {
        let (pa, pb) = (2 - a, 2 - b_spin);
        let mut out = [0.0; 8];
        for (i, &v) in p.iter().enumerate() {
            let (va, vb) = ((i >> pa) & 1, (i >> pb) & 1);
            let j = (i & !(1 << pa) & !(1 << pb)) | (vb << pa) | (va << pb);
            out[j] = v;
        }
        out
    }

    // ---------------------------------------------------------------------

    #[test]
    fn thermal_state_and_polarization_match_the_product_formula() {
        let mixed = thermal_state(&PolarizationVector::uniform(3, 0.0).unwrap()).unwrap();
        let eye = Array2::<C64>::eye(8).mapv(|v| v / C64::new(8.0, 0.0));
        assert!(max_abs_diff(mixed.matrix(), &eye) < 1e-15);

        let pure = thermal_state(&PolarizationVector::new(vec![1.0]).unwrap()).unwrap();
        assert!((pure.populations()[0] - 1.0).abs() < 1e-15);
        assert!(pure.populations()[1].abs() < 1e-15);

        let warm = thermal_state(&PolarizationVector::uniform(3, 0.1).unwrap()).unwrap();
        assert!((warm.populations()[0] - 0.166375).abs() < 1e-12);

        for (spin, eps) in [(0, 0.3), (1, -0.7), (2, 0.05)] {
            let pol = PolarizationVector::new(vec![0.3, -0.7, 0.05]).unwrap();
            let rho = thermal_state(&pol).unwrap();
            assert!((measure_polarization(&rho, spin).unwrap() - eps).abs() < 1e-14);
        }

        let excited = DensityState::pure_basis(2, 1);
        assert!((measure_polarization(&excited, 0).unwrap() + 1.0).abs() < 1e-15);

        assert!(PolarizationVector::new(vec![1.2]).is_err());
        assert!(PolarizationVector::new(vec![]).is_err());
        assert!(measure_polarization(&excited, 1).is_err());
    }

    #[test]
    fn cnot_on_a_thermal_pair_squares_the_target_polarization() {
        let eps = 0.35;
        let rho = thermal_state(&PolarizationVector::uniform(2, eps).unwrap()).unwrap();
        let after = evolve_state(&rho, &gates::cnot(2, 0, 1).unwrap()).unwrap();
        // Brute force over the four diagonal populations: CNOT exchanges
        // p(10) and p(11), so ⟨σ_z⟩ on the target becomes (q0−q1)² = ε².
        let (q0, q1) = (0.5 * (1.0 + eps), 0.5 * (1.0 - eps));
        let expected = (q0 * q0 + q1 * q1) - 2.0 * q0 * q1;
        let got = measure_polarization(&after, 1).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - eps * eps).abs() < 1e-12);
    }

    #[test]
    fn compression_gate_is_the_expected_permutation() {
        let u = compression_gate();
        assert!(u.is_unitary());
        let m = u.matrix();
        for row in 0..8 {
            for col in 0..8 {
                let expected = match (row, col) {
                    (2, 5) | (5, 2) => 1.0,
                    _ if row == col && row != 2 && row != 5 => 1.0,
                    _ => 0.0,
                };
                assert!(
                    (m[[row, col]] - C64::new(expected, 0.0)).norm() < 1e-15,
                    "entry ({row}, {col})"
                );
            }
        }
    }

    #[test]
    fn compression_matches_the_diagonal_oracle_and_the_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let eps: [f64; 3] = [
                rng.gen_range(-0.9..0.9),
                rng.gen_range(-0.9..0.9),
                rng.gen_range(-0.9..0.9),
            ];
            let rho = thermal_state(&PolarizationVector::new(eps.to_vec()).unwrap()).unwrap();
            let after = evolve_state(&rho, &compression_gate()).unwrap();
            let oracle = oracle_compress(&oracle_thermal(eps));
            for (b, &p) in after.populations().iter().enumerate() {
                assert!((p - oracle[b]).abs() < 1e-12);
            }
            let got = measure_polarization(&after, COMPRESSION_TARGET_SPIN).unwrap();
            let formula = (eps[0] + eps[1] + eps[2] - eps[0] * eps[1] * eps[2]) / 2.0;
            assert!((got - formula).abs() < 1e-12);
        }

        // Uniform input: the (3ε − ε³)/2 boost, never exceeded.
        for _ in 0..10 {
            let eps = rng.gen_range(0.0..1.0);
            let rho = thermal_state(&PolarizationVector::uniform(3, eps).unwrap()).unwrap();
            let after = evolve_state(&rho, &compression_gate()).unwrap();
            let got = measure_polarization(&after, COMPRESSION_TARGET_SPIN).unwrap();
            let bound = (3.0 * eps - eps.powi(3)) / 2.0;
            assert!((got - bound).abs() < 1e-12);
            assert!(got <= bound + 1e-12);
        }

        // A pure input cannot be over-purified by a permutation.
        let pure = thermal_state(&PolarizationVector::uniform(3, 1.0).unwrap()).unwrap();
        let after = evolve_state(&pure, &compression_gate()).unwrap();
        let got = measure_polarization(&after, COMPRESSION_TARGET_SPIN).unwrap();
        assert!((got - 1.0).abs() < 1e-15);
    }

    #[test]
    fn refresh_replaces_exactly_one_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..5 {
            // Random mixed 3-spin state with coherences: a convex mixture of
            // random pure states.
            let dim = 8;
            let mut m = Array2::<C64>::zeros((dim, dim));
            for _ in 0..4 {
                let v = Array1::from_shape_fn(dim, |_| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let v = v.mapv(|z| z / C64::new(norm, 0.0));
                let w = C64::new(0.25, 0.0);
                for i in 0..dim {
                    for j in 0..dim {
                        m[[i, j]] += w * v[i] * v[j].conj();
                    }
                }
            }
            let rho = DensityState::from_matrix(m).unwrap();
            let before: Vec<f64> = (0..3)
                .map(|s| measure_polarization(&rho, s).unwrap())
                .collect();

            let eps_b = 0.4;
            let spin = 1;
            let after = refresh(&rho, spin, eps_b).unwrap();
            assert!((measure_polarization(&after, spin).unwrap() - eps_b).abs() < 1e-12);
            for s in [0, 2] {
                assert!((measure_polarization(&after, s).unwrap() - before[s]).abs() < 1e-12);
            }

            // Idempotence: the state is already of the product form.
            let twice = refresh(&after, spin, eps_b).unwrap();
            assert!(max_abs_diff(twice.matrix(), after.matrix()) < 1e-14);

            // The non-refreshed two-spin reduced matrix is fully preserved,
            // coherences included.
            let reduce = |rho: &DensityState| -> Array2<C64> {
                let m = rho.matrix();
                let mut out = Array2::<C64>::zeros((4, 4));
                for r1 in 0..4 {
                    for r2 in 0..4 {
                        // spin 1 occupies bit position 1
                        let ins = |r: usize, v: usize| ((r >> 1) << 2) | (v << 1) | (r & 1);
                        out[[r1, r2]] =
                            m[[ins(r1, 0), ins(r2, 0)]] + m[[ins(r1, 1), ins(r2, 1)]];
                    }
                }
                out
            };
            assert!(max_abs_diff(&reduce(&rho), &reduce(&after)) < 1e-13);
        }
    }

    #[test]
    fn ideal_round_matches_the_diagonal_probability_oracle() {
        let eps_b = 0.3;
        let outcome = hbac_run(&three_spin_system(), &ideal_config(eps_b, 1), None).unwrap();
        assert!(outcome.compiled_trace.is_none());

        // Replay the six-step schedule on a bare 8-entry probability vector.
        let mut p = oracle_thermal([0.0, 0.0, 0.0]);
        let mut expected_rows = Vec::new();
        let steps: [&dyn Fn(&[f64; 8]) -> [f64; 8]; 6] = [
            &|p| oracle_refresh(p, 2, eps_b),
            &|p| oracle_swap(p, 2, 0),
            &|p| oracle_refresh(p, 2, eps_b),
            &|p| oracle_swap(p, 2, 1),
            &|p| oracle_refresh(p, 2, eps_b),
            &oracle_compress,
        ];
        for (k, apply) in steps.iter().enumerate() {
            p = apply(&p);
            for spin in 0..3 {
                expected_rows.push((1, k + 1, spin, oracle_polarization(&p, spin)));
            }
        }

        let rows = outcome.ideal_trace.rows();
        assert_eq!(rows.len(), expected_rows.len());
        for (row, &(round, step, spin, pol)) in rows.iter().zip(&expected_rows) {
            assert_eq!((row.round, row.step, row.spin), (round, step, spin));
            assert!(
                (row.polarization - pol).abs() < 1e-12,
                "round {round} step {step} spin {spin}: {} vs oracle {pol}",
                row.polarization
            );
        }

        let boost = (3.0 * eps_b - eps_b.powi(3)) / 2.0;
        assert!((outcome.final_polarization - boost).abs() < 1e-12);
        assert!((outcome.amplification_ratio.unwrap() - boost / eps_b).abs() < 1e-12);
    }

    #[test]
    fn amplification_ratio_reaches_the_unitary_limit_at_small_bath_polarization() {
        let outcome = hbac_run(&three_spin_system(), &ideal_config(1e-5, 1), None).unwrap();
        assert!((outcome.amplification_ratio.unwrap() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let system = three_spin_system();
        let run = |cfg: HbacConfig| hbac_run(&system, &cfg, None);

        assert!(run(ideal_config(0.1, 0)).is_err());
        assert!(run(ideal_config(1.5, 1)).is_err());

        let mut bad_target = ideal_config(0.1, 1);
        bad_target.refresh_target = COMPRESSION_TARGET_SPIN;
        assert!(run(bad_target).is_err());
        let mut oob = ideal_config(0.1, 1);
        oob.refresh_target = 3;
        assert!(run(oob).is_err());

        let mut lossy_ideal = ideal_config(0.1, 1);
        lossy_ideal.loss_per_step = 0.01;
        assert!(run(lossy_ideal).is_err());

        // Pulses without compiled mode are a contradiction.
        let pulses = HbacPulses {
            mode: CouplingMode::Weak,
            swap_with_contact: BTreeMap::new(),
            compression: None,
        };
        assert!(hbac_run(&system, &ideal_config(0.1, 1), Some(&pulses)).is_err());

        // Two-spin systems cannot run the three-bit protocol.
        let pair = SpinSystem::new(
            vec![
                Spin {
                    label: "a".into(),
                    species: "1H".into(),
                    kind: SpinKind::Nuclear,
                    offset_hz: 0.0,
                },
                Spin {
                    label: "b".into(),
                    species: "1H".into(),
                    kind: SpinKind::Nuclear,
                    offset_hz: 100.0,
                },
            ],
            &[],
            &[],
            vec![],
        )
        .unwrap();
        assert!(hbac_run(&pair, &ideal_config(0.1, 1), None).is_err());
    }

    #[test]
    fn repeated_rounds_approach_the_bath_limited_fixpoint() {
        let eps_b = 0.1;
        let outcome = hbac_run(&three_spin_system(), &ideal_config(eps_b, 40), None).unwrap();

        // Target polarization never decreases from round to round, each
        // round's gain respects the single-compression bound, and the
        // sequence converges to 2ε_b/(1+ε_b²).
        let target_after_round: Vec<f64> = outcome
            .ideal_trace
            .rows()
            .iter()
            .filter(|r| r.spin == COMPRESSION_TARGET_SPIN)
            .filter(|r| (r.round == 1 && r.step == 6) || (r.round > 1 && r.step == 3))
            .map(|r| r.polarization)
            .collect();
        assert_eq!(target_after_round.len(), 40);
        let mut prev = 0.0;
        for &pol in &target_after_round {
            assert!(pol >= prev - 1e-12);
            let bound = (3.0 * prev - prev.powi(3)) / 2.0;
            let reachable = bound.max((3.0 * eps_b - eps_b.powi(3)) / 2.0);
            assert!(pol <= reachable + 1e-12);
            prev = pol;
        }
        let fixpoint = 2.0 * eps_b / (1.0 + eps_b * eps_b);
        assert!((outcome.final_polarization - fixpoint).abs() < 1e-9);
    }

    #[test]
    fn compiled_mode_loss_matches_the_closed_form_and_the_paper_accounting() {
        let eps_b = 0.01;
        let r = 0.015;
        let config = HbacConfig {
            bath_polarization: eps_b,
            n_rounds: 1,
            refresh_target: 2,
            compute_mode: HbacComputeMode::CompiledPulses,
            loss_per_step: r,
        };
        let outcome = hbac_run(&three_spin_system(), &config, None).unwrap();

        // Both traces are reported; the ideal one is lossless.
        let ideal_ratio = outcome
            .ideal_trace
            .final_polarization(COMPRESSION_TARGET_SPIN)
            .unwrap()
            / eps_b;
        assert!((ideal_ratio - (3.0 - eps_b * eps_b) / 2.0).abs() < 1e-12);

        // Closed form for the lossy leg: polarizations acquired at steps
        // 2, 4 and 5 decay once per subsequent step, so the compression
        // inputs are ε_b·L⁵, ε_b·L³, ε_b·L with L = 1−r, and the output
        // loses one more factor.
        let l = 1.0 - r;
        let (e0, e1, e2) = (eps_b * l.powi(5), eps_b * l.powi(3), eps_b * l);
        let expected = (e0 + e1 + e2 - e0 * e1 * e2) / 2.0 * l / eps_b;
        let got = outcome.amplification_ratio.unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(got < ideal_ratio);

        // The paper-style accounting arithmetic: a final-to-ideal ratio of
        // 1.39/1.5 over five lossy steps corresponds to about 1.5% average
        // error per step.
        let implied = implied_per_step_error(1.39, 1.5, 5).unwrap();
        assert!((implied - 0.01511684793609025).abs() < 1e-12);
        assert!(implied_per_step_error(0.0, 1.5, 5).is_err());
        assert!(implied_per_step_error(1.0, 1.5, 0).is_err());
    }

    #[test]
    fn compiled_mode_simulates_supplied_pulses_and_reports_both_traces() {
        let system = three_spin_system();
        // A deliberately trivial "compression pulse": zero amplitude for a
        // few microseconds, i.e. free evolution instead of the gate. The
        // compiled trace must then diverge from the ideal one.
        let channel = crate::dynamics::Channel::new("13C");
        let idle = ControlSequence::constant(1e-6, 4, channel, 0.0, 0.0).unwrap();
        let pulses = HbacPulses {
            mode: CouplingMode::Weak,
            swap_with_contact: BTreeMap::new(),
            compression: Some(idle),
        };
        let config = HbacConfig {
            bath_polarization: 0.2,
            n_rounds: 1,
            refresh_target: 2,
            compute_mode: HbacComputeMode::CompiledPulses,
            loss_per_step: 0.0,
        };
        let outcome = hbac_run(&system, &config, Some(&pulses)).unwrap();
        let compiled = outcome.compiled_trace.as_ref().unwrap();
        assert_eq!(compiled.rows().len(), outcome.ideal_trace.rows().len());

        let ideal_final = outcome
            .ideal_trace
            .final_polarization(COMPRESSION_TARGET_SPIN)
            .unwrap();
        let compiled_final = compiled.final_polarization(COMPRESSION_TARGET_SPIN).unwrap();
        assert!((ideal_final - (3.0 * 0.2 - 0.2f64.powi(3)) / 2.0).abs() < 1e-12);
        // Free evolution is diagonal, so the swap distribution survives but
        // the compression boost never happens.
        assert!((compiled_final - 0.2).abs() < 1e-9);
        assert!((ideal_final - compiled_final).abs() > 1e-3);

        // The ideal leg is identical to a pure ideal-gates run.
        let pure = hbac_run(&system, &ideal_config(0.2, 1), None).unwrap();
        assert_eq!(pure.ideal_trace.rows(), outcome.ideal_trace.rows());
    }

    #[test]
    fn trace_csv_round_trips_and_config_deserializes_from_kebab_case() {
        let outcome = hbac_run(&three_spin_system(), &ideal_config(0.37, 2), None).unwrap();
        let text = outcome.ideal_trace.to_csv_string();
        assert!(text.starts_with("round,step,spin,polarization\n"));
        let parsed = HbacTrace::from_csv_str(&text).unwrap();
        assert_eq!(parsed.rows(), outcome.ideal_trace.rows());

        let config: HbacConfig = serde_json::from_str(
            r#"{"bath_polarization": 1e-5, "n_rounds": 1, "refresh_target": 2,
                "compute_mode": "ideal-gates"}"#,
        )
        .unwrap();
        assert_eq!(config.compute_mode, HbacComputeMode::IdealGates);
        assert_eq!(config.loss_per_step, 0.0);
        let round_trip: HbacConfig =
            serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(round_trip, config);

        let pol: PolarizationVector = serde_json::from_str("[0.1, -0.2]").unwrap();
        assert_eq!(pol.values(), &[0.1, -0.2]);
        assert!(serde_json::from_str::<PolarizationVector>("[1.4]").is_err());
    }
}
