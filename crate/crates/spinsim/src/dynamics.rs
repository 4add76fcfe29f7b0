//! Time evolution: piecewise-constant propagation under control sequences,
//! density-state evolution, free evolution, and gate-fidelity measures.
//!
//! All simulation happens in per-species rotating frames under the
//! rotating-wave approximation: within each timestep the drive Hamiltonian is
//! frozen at its midpoint value, and a channel's carrier offset appears as a
//! phase ramp `2π·offset·t` added to the programmed phase.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::algebra::{
    self, dagger, eigh_c, expm_minus_i, max_abs, pauli_embed, Operator, PauliAxis,
};
use crate::error::{Error, Result};
use crate::system::{build_drift_hamiltonian, CouplingMode, SpinSystem};
use crate::tolerances::{
    DENSITY_EIGENVALUE_FLOOR, DENSITY_TRACE_TOL, DT_UNIFORMITY, HERMITICITY_TOL, STEP_ANGLE_WARN,
    UNITARITY_TOL,
};

use std::f64::consts::PI;

/// One transmitter channel: a species plus a carrier offset from that
/// species' reference frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub species: String,
    pub carrier_offset_hz: f64,
}

impl Channel {
    pub fn new(species: impl Into<String>) -> Self {
        Channel {
            species: species.into(),
            carrier_offset_hz: 0.0,
        }
    }

    pub fn with_offset(species: impl Into<String>, carrier_offset_hz: f64) -> Self {
        Channel {
            species: species.into(),
            carrier_offset_hz,
        }
    }

    /// File encoding: the species label, with `@offset_hz` appended when the
    /// carrier offset is nonzero.
    pub fn encode(&self) -> String {
        if self.carrier_offset_hz == 0.0 {
            self.species.clone()
        } else {
            format!("{}@{}", self.species, self.carrier_offset_hz)
        }
    }

    pub fn decode(text: &str) -> Result<Self> {
        match text.rsplit_once('@') {
            None => Ok(Channel::new(text)),
            Some((species, offset)) => {
                let carrier_offset_hz: f64 = offset.parse().map_err(|_| {
                    Error::Csv(format!("channel '{text}' has an unparseable carrier offset"))
                })?;
                Ok(Channel::with_offset(species, carrier_offset_hz))
            }
        }
    }
}

/// A piecewise-constant control waveform on a uniform time grid.
///
/// Amplitudes are nutation frequencies in rad/s (file format: Hz) and are
/// non-negative; sign reversals are expressed through the phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    dt: f64,
    channels: Vec<Channel>,
    /// `[channel][step]`, rad/s.
    amplitudes: Vec<Vec<f64>>,
    /// `[channel][step]`, rad.
    phases: Vec<Vec<f64>>,
}

impl ControlSequence {
    pub fn new(
        dt: f64,
        channels: Vec<Channel>,
        amplitudes: Vec<Vec<f64>>,
        phases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidControls(format!(
                "timestep must be positive and finite, got {dt}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::InvalidControls("sequence has no channels".into()));
        }
        if amplitudes.len() != channels.len() || phases.len() != channels.len() {
            return Err(Error::InvalidControls(format!(
                "{} channels but {} amplitude arrays and {} phase arrays",
                channels.len(),
                amplitudes.len(),
                phases.len()
            )));
        }
        let n_steps = amplitudes[0].len();
        if n_steps == 0 {
            return Err(Error::InvalidControls("sequence has zero steps".into()));
        }
        for ch in &channels {
            if ch.species.is_empty() {
                return Err(Error::InvalidControls("empty species label".into()));
            }
            if ch.species.contains('@') {
                return Err(Error::InvalidControls(format!(
                    "species label '{}' may not contain '@' (reserved for carrier offsets)",
                    ch.species
                )));
            }
            if !ch.carrier_offset_hz.is_finite() {
                return Err(Error::InvalidControls(format!(
                    "channel '{}' has a non-finite carrier offset",
                    ch.species
                )));
            }
        }
        for (c, (amp, ph)) in amplitudes.iter().zip(&phases).enumerate() {
            if amp.len() != n_steps || ph.len() != n_steps {
                return Err(Error::InvalidControls(format!(
                    "channel {c} arrays have inconsistent lengths \
                     ({} amplitudes, {} phases, expected {n_steps})",
                    amp.len(),
                    ph.len()
                )));
            }
            for (k, &a) in amp.iter().enumerate() {
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::InvalidControls(format!(
                        "amplitude at channel {c}, step {k} must be finite and \
                         non-negative, got {a}"
                    )));
                }
            }
            if let Some(k) = ph.iter().position(|p| !p.is_finite()) {
                return Err(Error::InvalidControls(format!(
                    "phase at channel {c}, step {k} is not finite"
                )));
            }
        }
        Ok(ControlSequence {
            dt,
            channels,
            amplitudes,
            phases,
        })
    }

    /// Single-channel sequence with constant amplitude and phase.
    pub fn constant(
        dt: f64,
        n_steps: usize,
        channel: Channel,
        amplitude_rad: f64,
        phase_rad: f64,
    ) -> Result<Self> {
        Self::new(
            dt,
            vec![channel],
            vec![vec![amplitude_rad; n_steps]],
            vec![vec![phase_rad; n_steps]],
        )
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.amplitudes[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn amplitudes(&self, channel: usize) -> &[f64] {
        &self.amplitudes[channel]
    }

    pub fn phases(&self, channel: usize) -> &[f64] {
        &self.phases[channel]
    }

    /// Serializes to the CSV interchange format: header
    /// `t_s,channel,amplitude_hz,phase_rad`, one row per (step, channel),
    /// times computed as `k·dt` from the step index.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t_s,channel,amplitude_hz,phase_rad\n");
        let encoded: Vec<String> = self.channels.iter().map(Channel::encode).collect();
        for k in 0..self.n_steps() {
            let t = k as f64 * self.dt;
            for (c, enc) in encoded.iter().enumerate() {
                let amp_hz = self.amplitudes[c][k] / (2.0 * PI);
                out.push_str(&format!("{t},{enc},{amp_hz},{}\n", self.phases[c][k]));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Parses the CSV interchange format. The time grid must be uniform to
    /// [`DT_UNIFORMITY`] and shared by all channels; at least two steps are
    /// required (the grid spacing is inferred from the time column).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        {
            let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?;
            let got: Vec<&str> = headers.iter().collect();
            if got != ["t_s", "channel", "amplitude_hz", "phase_rad"] {
                return Err(Error::Csv(format!(
                    "expected header t_s,channel,amplitude_hz,phase_rad; got {}",
                    got.join(",")
                )));
            }
        }
        struct Row {
            t: f64,
            amp_hz: f64,
            phase: f64,
        }
        let mut channels: Vec<Channel> = Vec::new();
        let mut rows: Vec<Vec<Row>> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Csv(e.to_string()))?;
            if record.len() != 4 {
                return Err(Error::Csv(format!(
                    "row {}: expected 4 fields, got {}",
                    line + 2,
                    record.len()
                )));
            }
            let parse = |idx: usize, what: &str| -> Result<f64> {
                record[idx].parse::<f64>().map_err(|_| {
                    Error::Csv(format!(
                        "row {}: unparseable {what} '{}'",
                        line + 2,
                        &record[idx]
                    ))
                })
            };
            let t = parse(0, "time")?;
            let channel = Channel::decode(&record[1])?;
            let amp_hz = parse(2, "amplitude")?;
            let phase = parse(3, "phase")?;
            let c = match channels.iter().position(|ch| *ch == channel) {
                Some(c) => c,
                None => {
                    channels.push(channel);
                    rows.push(Vec::new());
                    rows.len() - 1
                }
            };
            rows[c].push(Row { t, amp_hz, phase });
        }
        if channels.is_empty() {
            return Err(Error::Csv("file contains no control rows".into()));
        }
        let n_steps = rows[0].len();
        if n_steps < 2 {
            return Err(Error::Csv(
                "need at least two steps to infer the grid spacing".into(),
            ));
        }
        for (c, ch_rows) in rows.iter().enumerate() {
            if ch_rows.len() != n_steps {
                return Err(Error::Csv(format!(
                    "channel '{}' has {} rows but '{}' has {n_steps}",
                    channels[c].encode(),
                    ch_rows.len(),
                    channels[0].encode(),
                )));
            }
        }
        let dt = rows[0][1].t - rows[0][0].t;
        if !(dt > 0.0) {
            return Err(Error::Csv(format!(
                "time column must be strictly increasing, inferred dt = {dt}"
            )));
        }
        for ch_rows in &rows {
            for (k, row) in ch_rows.iter().enumerate() {
                let expect = k as f64 * dt;
                if (row.t - expect).abs() > DT_UNIFORMITY {
                    return Err(Error::Csv(format!(
                        "time grid is not uniform: step {k} at {} s, expected {expect} s \
                         (tolerance {DT_UNIFORMITY} s)",
                        row.t
                    )));
                }
            }
        }
        let amplitudes: Vec<Vec<f64>> = rows
            .iter()
            .map(|ch| ch.iter().map(|r| r.amp_hz * 2.0 * PI).collect())
            .collect();
        let phases: Vec<Vec<f64>> = rows
            .iter()
            .map(|ch| ch.iter().map(|r| r.phase).collect())
            .collect();
        ControlSequence::new(dt, channels, amplitudes, phases)
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }
}

/// A density matrix, validated on construction: unit trace within
/// [`DENSITY_TRACE_TOL`], Hermitian within [`HERMITICITY_TOL`], eigenvalues
/// above [`DENSITY_EIGENVALUE_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState(Array2<C64>);

impl DensityState {
    pub fn from_matrix(m: Array2<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let trace = algebra::trace(&m);
        if (trace.re - 1.0).abs() > DENSITY_TRACE_TOL || trace.im.abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix trace is {trace}, expected 1"
            )));
        }
        let herm = algebra::hermiticity_deviation(&m);
        if herm > HERMITICITY_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let (vals, _) = eigh_c(&m)?;
        if let Some(&bad) = vals.iter().find(|v| **v < DENSITY_EIGENVALUE_FLOOR) {
            return Err(Error::InvalidArgument(format!(
                "density matrix has negative eigenvalue {bad}"
            )));
        }
        Ok(DensityState(m))
    }

    /// `|index⟩⟨index|` on a register of the given dimension.
    pub fn pure_basis(dim: usize, index: usize) -> Self {
        let mut m = Array2::<C64>::zeros((dim, dim));
        m[[index, index]] = C64::new(1.0, 0.0);
        DensityState(m)
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Diagonal populations in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|b| self.0[[b, b]].re).collect()
    }
}

/// `U = exp(−i H dt)` for Hermitian `H`.
pub fn propagator_step(h: &Operator, dt: f64) -> Result<Operator> {
    let deviation = algebra::hermiticity_deviation(h.matrix());
    if deviation > HERMITICITY_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(Operator(expm_minus_i(h.matrix(), dt)?))
}

/// `exp(−i H_nat τ)` under the chosen coupling mode.
pub fn free_evolution(system: &SpinSystem, tau: f64, mode: CouplingMode) -> Result<Operator> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "evolution time must be non-negative, got {tau}"
        )));
    }
    let h = build_drift_hamiltonian(system, mode);
    Ok(Operator(expm_minus_i(h.matrix(), tau)?))
}

/// Hardware distortion applied to a nominal control sequence: a uniform RF
/// amplitude scale and a static field offset (Hz) added to every spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    pub rf_scale: f64,
    pub field_offset_hz: f64,
}

impl Default for Distortion {
    fn default() -> Self {
        Distortion {
            rf_scale: 1.0,
            field_offset_hz: 0.0,
        }
    }
}

/// Diagnostics from a control simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveReport {
    /// Largest `max|H_k| · dt` across steps; above [`STEP_ANGLE_WARN`] the
    /// frozen-Hamiltonian approximation degrades.
    pub max_step_angle: f64,
}

impl EvolveReport {
    pub fn step_angle_exceeded(&self) -> bool {
        self.max_step_angle > STEP_ANGLE_WARN
    }
}

/// Per-channel sums `Σ_i σ_x^i` and `Σ_i σ_y^i` over the spins of the
/// addressed species: the two quadrature generators a phase-modulated
/// transmitter supplies, as used by control simulations and by Lie-algebra
/// controllability checks.
pub fn channel_generators(
    system: &SpinSystem,
    channels: &[Channel],
) -> Result<Vec<(Array2<C64>, Array2<C64>)>> {
    let n = system.n_spins();
    let dim = system.dim();
    let mut out = Vec::with_capacity(channels.len());
    for ch in channels {
        let indices = system.species_indices(&ch.species)?;
        let mut sx = Array2::<C64>::zeros((dim, dim));
        let mut sy = Array2::<C64>::zeros((dim, dim));
        for i in indices {
            sx = sx + pauli_embed(PauliAxis::X, i, n)?.into_matrix();
            sy = sy + pauli_embed(PauliAxis::Y, i, n)?.into_matrix();
        }
        out.push((sx, sy));
    }
    Ok(out)
}

/// Carrier phase ramp for a channel evaluated at the midpoint of step `k`.
pub(crate) fn carrier_angle(channel: &Channel, k: usize, dt: f64) -> f64 {
    2.0 * PI * channel.carrier_offset_hz * (k as f64 + 0.5) * dt
}

/// Drift Hamiltonian with a uniform additional field offset on every spin.
pub(crate) fn drift_with_offset(
    system: &SpinSystem,
    mode: CouplingMode,
    field_offset_hz: f64,
) -> Result<Array2<C64>> {
    let mut drift = build_drift_hamiltonian(system, mode).into_matrix();
    if field_offset_hz != 0.0 {
        let n = system.n_spins();
        for i in 0..n {
            let sz = pauli_embed(PauliAxis::Z, i, n)?;
            drift = drift + sz.matrix().mapv(|v| v * C64::new(PI * field_offset_hz, 0.0));
        }
    }
    Ok(drift)
}

/// The step Hamiltonians `H_k = H_nat + H_rf,k` (rad/s) for a distorted
/// control sequence — shared by the plain simulator and gradient code.
pub(crate) fn step_hamiltonians(
    system: &SpinSystem,
    controls: &ControlSequence,
    mode: CouplingMode,
    distortion: &Distortion,
) -> Result<Vec<Array2<C64>>> {
    let drift = drift_with_offset(system, mode, distortion.field_offset_hz)?;
    let generators = channel_generators(system, controls.channels())?;
    let dt = controls.dt();
    let mut out = Vec::with_capacity(controls.n_steps());
    for k in 0..controls.n_steps() {
        let mut h = drift.clone();
        for (c, (sx, sy)) in generators.iter().enumerate() {
            let a = controls.amplitudes(c)[k] * distortion.rf_scale;
            if a == 0.0 {
                continue;
            }
            let theta = carrier_angle(&controls.channels()[c], k, dt) + controls.phases(c)[k];
            h = h + sx.mapv(|v| v * C64::new(a / 2.0 * theta.cos(), 0.0));
            h = h + sy.mapv(|v| v * C64::new(a / 2.0 * theta.sin(), 0.0));
        }
        out.push(h);
    }
    Ok(out)
}

fn evolve_impl(
    system: &SpinSystem,
    controls: &ControlSequence,
    mode: CouplingMode,
    distortion: &Distortion,
) -> Result<(Operator, EvolveReport)> {
    let dt = controls.dt();
    let mut u = Array2::<C64>::eye(system.dim());
    let mut max_step_angle = 0.0f64;
    for h in step_hamiltonians(system, controls, mode, distortion)? {
        max_step_angle = max_step_angle.max(max_abs(&h) * dt);
        u = expm_minus_i(&h, dt)?.dot(&u);
    }
    Ok((Operator(u), EvolveReport { max_step_angle }))
}

/// Simulates a control sequence: `U_sim = U_K···U_1` with
/// `U_k = exp(−i(H_nat + H_rf,k)dt)`.
pub fn evolve_controls(
    system: &SpinSystem,
    controls: &ControlSequence,
    mode: CouplingMode,
) -> Result<Operator> {
    Ok(evolve_impl(system, controls, mode, &Distortion::default())?.0)
}

/// As [`evolve_controls`], also returning step-angle diagnostics.
pub fn evolve_controls_with_report(
    system: &SpinSystem,
    controls: &ControlSequence,
    mode: CouplingMode,
) -> Result<(Operator, EvolveReport)> {
    evolve_impl(system, controls, mode, &Distortion::default())
}

/// Simulates a control sequence under a hardware distortion (RF miscalibration
/// and static field offset) — the building block for robustness ensembles.
pub fn evolve_controls_distorted(
    system: &SpinSystem,
    controls: &ControlSequence,
    mode: CouplingMode,
    distortion: &Distortion,
) -> Result<Operator> {
    Ok(evolve_impl(system, controls, mode, distortion)?.0)
}

/// `U ρ U†`, preserving trace and spectrum.
pub fn evolve_state(rho: &DensityState, u: &Operator) -> Result<DensityState> {
    if rho.dim() != u.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs propagator dimension {}",
            rho.dim(),
            u.dim()
        )));
    }
    let deviation = algebra::unitarity_deviation(u.matrix());
    if deviation > UNITARITY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    let m = u.matrix().dot(rho.matrix()).dot(&dagger(u.matrix()));
    DensityState::from_matrix(m)
}

fn check_fidelity_args(u_sim: &Operator, u_goal: &Operator) -> Result<()> {
    if u_sim.dim() != u_goal.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            u_sim.dim(),
            u_goal.dim()
        )));
    }
    for u in [u_sim, u_goal] {
        let deviation = algebra::unitarity_deviation(u.matrix());
        if deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
    }
    Ok(())
}

/// Average-gate (state-overlap averaged) fidelity
/// `|Tr(U_sim† U_goal)|² / 4^N`, insensitive to global phase.
pub fn gate_fidelity(u_sim: &Operator, u_goal: &Operator) -> Result<f64> {
    check_fidelity_args(u_sim, u_goal)?;
    let d = u_sim.dim() as f64;
    let tr = algebra::inner(u_sim.matrix(), u_goal.matrix());
    Ok(tr.norm_sqr() / (d * d))
}

/// Minimum over pure input states of `|⟨ψ|U_goal†U_sim|ψ⟩|²`.
///
/// With `W = U_goal†U_sim` unitary, `⟨ψ|W|ψ⟩` ranges over the convex hull of
/// the eigenphase points `e^{iθ_k}`; the worst case is the squared distance
/// from the origin to that hull. Sorting the phases and taking the largest
/// cyclic gap `g`: if the remaining span `2π − g` reaches π the hull contains
/// the origin (fidelity 0), otherwise the nearest hull point lies on the
/// chord across the span, at distance `cos((2π − g)/2)`.
pub fn worst_case_state_fidelity(u_sim: &Operator, u_goal: &Operator) -> Result<f64> {
    check_fidelity_args(u_sim, u_goal)?;
    let w = dagger(u_goal.matrix()).dot(u_sim.matrix());
    let eigs = {
        use ndarray_linalg::EigVals;
        w.eigvals()?
    };
    let mut phases: Vec<f64> = eigs.iter().map(|z| z.arg()).collect();
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = phases.len();
    let mut g_max = phases[0] + 2.0 * PI - phases[k - 1];
    for i in 1..k {
        g_max = g_max.max(phases[i] - phases[i - 1]);
    }
    let span = 2.0 * PI - g_max;
    if span >= PI {
        Ok(0.0)
    } else {
        Ok((span / 2.0).cos().powi(2))
    }
}
