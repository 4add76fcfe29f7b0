//! Spin registers and the Hamiltonians built from them: weak (secular) and
//! full coupling, RF drive, rotating-frame transforms, and electron-nuclear
//! hyperfine terms.
//!
//! Frequencies in files and in `SpinSystem` fields are plain Hz (offsets from
//! a per-species carrier); every Hamiltonian is returned in angular units
//! (rad/s). The Hz → rad/s conversion happens exactly once, inside the
//! builders.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::{self, pauli_embed, Operator, PauliAxis};
use crate::error::{Error, Result};
use crate::tolerances::{MAX_SPINS, WEAK_COUPLING_FACTOR};

use std::f64::consts::PI;

/// Whether a spin is a nucleus or an unpaired electron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinKind {
    Nuclear,
    Electron,
}

/// A species of spins sharing one transmitter channel (e.g. all protons).
///
/// `gyromagnetic_class` is a nominal signed magnitude relative to the proton,
/// used only for documentation and for grouping channels — it never enters a
/// Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSpecies {
    pub name: String,
    pub kind: SpinKind,
    pub gyromagnetic_class: f64,
}

/// Nominal electron-to-proton gyromagnetic ratio used to tag derived
/// electron species; documentation only.
const ELECTRON_GYRO_CLASS: f64 = -658.2;

/// One spin in the register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spin {
    pub label: String,
    pub species: String,
    pub kind: SpinKind,
    /// Offset from the species carrier, Hz.
    pub offset_hz: f64,
}

/// One entry of an upper-triangular coupling list (`i < j` after
/// normalization), value in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Hyperfine coupling between one electron and one nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineCoupling {
    pub electron: usize,
    pub nucleus: usize,
    pub az_hz: f64,
    pub ax_hz: f64,
}

/// Severity of a validation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// Machine-readable validation finding (location, severity, message).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

/// An immutable register of spin-1/2 particles with coupling tables.
///
/// Constructed via [`SpinSystem::new`] (or JSON deserialization), which
/// validates labels, indices, symmetry, and kinds; afterwards the value never
/// mutates and is safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemFile", into = "SystemFile")]
pub struct SpinSystem {
    spins: Vec<Spin>,
    /// Symmetric J-coupling table, Hz, zero diagonal.
    j: Array2<f64>,
    /// Symmetric dipolar-coupling table, Hz, zero diagonal.
    dipolar: Array2<f64>,
    hyperfine: Vec<HyperfineCoupling>,
}

/// On-disk JSON schema for a spin system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    spins: Vec<Spin>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    j_hz: Vec<CouplingEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    dipolar_hz: Vec<CouplingEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    hyperfine: Vec<HyperfineCoupling>,
}

impl TryFrom<SystemFile> for SpinSystem {
    type Error = Error;

    fn try_from(file: SystemFile) -> Result<Self> {
        SpinSystem::new(file.spins, &file.j_hz, &file.dipolar_hz, file.hyperfine)
    }
}

impl From<SpinSystem> for SystemFile {
    fn from(system: SpinSystem) -> Self {
        SystemFile {
            j_hz: table_to_entries(&system.j),
            dipolar_hz: table_to_entries(&system.dipolar),
            spins: system.spins,
            hyperfine: system.hyperfine,
        }
    }
}

fn table_to_entries(table: &Array2<f64>) -> Vec<CouplingEntry> {
    let n = table.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if table[[i, j]] != 0.0 {
                out.push(CouplingEntry {
                    i,
                    j,
                    value: table[[i, j]],
                });
            }
        }
    }
    out
}

/// Builds a symmetric table from an upper-triangular entry list, rejecting
/// diagonal, out-of-range, duplicate, and conflicting (asymmetric) entries.
fn entries_to_table(entries: &[CouplingEntry], n: usize, what: &str) -> Result<Array2<f64>> {
    let mut table = Array2::<f64>::zeros((n, n));
    let mut seen = vec![false; n * n];
    for e in entries {
        if e.i >= n || e.j >= n {
            return Err(Error::SpinIndexOutOfRange {
                index: e.i.max(e.j),
                n_spins: n,
            });
        }
        if e.i == e.j {
            return Err(Error::InvalidSystem(format!(
                "{what} entry ({i}, {i}) is on the diagonal; self-couplings are not allowed",
                i = e.i,
            )));
        }
        if !e.value.is_finite() {
            return Err(Error::InvalidSystem(format!(
                "{what} entry ({}, {}) is not finite",
                e.i, e.j
            )));
        }
        let (a, b) = (e.i.min(e.j), e.i.max(e.j));
        if seen[a * n + b] {
            if table[[a, b]] == e.value {
                return Err(Error::InvalidSystem(format!(
                    "duplicate {what} entry for pair ({a}, {b})"
                )));
            }
            return Err(Error::InvalidSystem(format!(
                "conflicting {what} entries for cells ({a}, {b}) and ({b}, {a}): \
                 {} vs {}",
                table[[a, b]],
                e.value,
            )));
        }
        seen[a * n + b] = true;
        table[[a, b]] = e.value;
        table[[b, a]] = e.value;
    }
    Ok(table)
}

impl SpinSystem {
    /// Validates and builds a system under the default dimension cap
    /// ([`MAX_SPINS`]).
    pub fn new(
        spins: Vec<Spin>,
        j_entries: &[CouplingEntry],
        dipolar_entries: &[CouplingEntry],
        hyperfine: Vec<HyperfineCoupling>,
    ) -> Result<Self> {
        Self::new_with_cap(spins, j_entries, dipolar_entries, hyperfine, MAX_SPINS)
    }

    /// Validates and builds a system under an explicit spin-count cap.
    pub fn new_with_cap(
        spins: Vec<Spin>,
        j_entries: &[CouplingEntry],
        dipolar_entries: &[CouplingEntry],
        hyperfine: Vec<HyperfineCoupling>,
        cap: usize,
    ) -> Result<Self> {
        let n = spins.len();
        if n == 0 {
            return Err(Error::InvalidSystem("system has no spins".into()));
        }
        if n > cap {
            return Err(Error::DimensionCapExceeded {
                requested: n,
                cap,
            });
        }
        for (idx, spin) in spins.iter().enumerate() {
            if spin.label.is_empty() {
                return Err(Error::InvalidSystem(format!("spin {idx} has an empty label")));
            }
            if spin.species.is_empty() {
                return Err(Error::InvalidSystem(format!(
                    "spin '{}' has an empty species name",
                    spin.label
                )));
            }
            if !spin.offset_hz.is_finite() {
                return Err(Error::InvalidSystem(format!(
                    "spin '{}' has a non-finite offset",
                    spin.label
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if spins[i].label == spins[j].label {
                    return Err(Error::InvalidSystem(format!(
                        "duplicate spin label '{}' (spins {i} and {j})",
                        spins[i].label
                    )));
                }
                if spins[i].species == spins[j].species && spins[i].kind != spins[j].kind {
                    return Err(Error::InvalidSystem(format!(
                        "species '{}' is used with inconsistent kinds (spins {i} and {j})",
                        spins[i].species
                    )));
                }
            }
        }

        let j = entries_to_table(j_entries, n, "J-coupling")?;
        let dipolar = entries_to_table(dipolar_entries, n, "dipolar-coupling")?;

        let mut hf_seen = std::collections::HashSet::new();
        for hf in &hyperfine {
            for &(idx, want, role) in &[
                (hf.electron, SpinKind::Electron, "electron"),
                (hf.nucleus, SpinKind::Nuclear, "nucleus"),
            ] {
                if idx >= n {
                    return Err(Error::SpinIndexOutOfRange {
                        index: idx,
                        n_spins: n,
                    });
                }
                if spins[idx].kind != want {
                    return Err(Error::InvalidSystem(format!(
                        "hyperfine {role} index {idx} refers to spin '{}', which is not {role}-kind",
                        spins[idx].label
                    )));
                }
            }
            if !hf.az_hz.is_finite() || !hf.ax_hz.is_finite() {
                return Err(Error::InvalidSystem(format!(
                    "hyperfine entry ({}, {}) has a non-finite coupling",
                    hf.electron, hf.nucleus
                )));
            }
            if !hf_seen.insert((hf.electron, hf.nucleus)) {
                return Err(Error::InvalidSystem(format!(
                    "duplicate hyperfine entry for pair ({}, {})",
                    hf.electron, hf.nucleus
                )));
            }
        }

        Ok(SpinSystem {
            spins,
            j,
            dipolar,
            hyperfine,
        })
    }

    /// Parses the JSON description format under an explicit spin-count cap.
    pub fn from_json_with_cap(text: &str, cap: usize) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)?;
        Self::new_with_cap(file.spins, &file.j_hz, &file.dipolar_hz, file.hyperfine, cap)
    }

    pub fn n_spins(&self) -> usize {
        self.spins.len()
    }

    /// Hilbert-space dimension, `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.spins.len()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn spin(&self, index: usize) -> Result<&Spin> {
        self.spins.get(index).ok_or(Error::SpinIndexOutOfRange {
            index,
            n_spins: self.spins.len(),
        })
    }

    /// J coupling in Hz; indices may be given in either order.
    pub fn j_hz(&self, i: usize, j: usize) -> f64 {
        self.j[[i, j]]
    }

    /// Dipolar coupling in Hz; indices may be given in either order.
    pub fn dipolar_hz(&self, i: usize, j: usize) -> f64 {
        self.dipolar[[i, j]]
    }

    pub fn hyperfine(&self) -> &[HyperfineCoupling] {
        &self.hyperfine
    }

    /// Offset from the species carrier in angular units (rad/s).
    pub fn offset_rad(&self, i: usize) -> f64 {
        2.0 * PI * self.spins[i].offset_hz
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.spins.iter().position(|s| s.label == label)
    }

    /// Indices of all spins belonging to a species (transmitter channel).
    pub fn species_indices(&self, species: &str) -> Result<Vec<usize>> {
        let indices: Vec<usize> = self
            .spins
            .iter()
            .enumerate()
            .filter(|(_, s)| s.species == species)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            return Err(Error::UnknownSpecies(species.to_string()));
        }
        Ok(indices)
    }

    /// The distinct species present, in first-appearance order.
    pub fn species(&self) -> Vec<SpinSpecies> {
        let mut out: Vec<SpinSpecies> = Vec::new();
        for spin in &self.spins {
            if out.iter().all(|s| s.name != spin.species) {
                out.push(SpinSpecies {
                    name: spin.species.clone(),
                    kind: spin.kind,
                    gyromagnetic_class: match spin.kind {
                        SpinKind::Nuclear => 1.0,
                        SpinKind::Electron => ELECTRON_GYRO_CLASS,
                    },
                });
            }
        }
        out
    }

    /// The reduced system containing only the listed spins (in the listed
    /// order) and the couplings among them — the workhorse of pairwise error
    /// estimation. Indices must be distinct and in range.
    pub fn subsystem(&self, indices: &[usize]) -> Result<SpinSystem> {
        for (pos, &i) in indices.iter().enumerate() {
            self.spin(i)?;
            if indices[..pos].contains(&i) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate spin index {i} in subsystem selection"
                )));
            }
        }
        let spins: Vec<Spin> = indices.iter().map(|&i| self.spins[i].clone()).collect();
        let mut j_entries = Vec::new();
        let mut dipolar_entries = Vec::new();
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate().skip(a + 1) {
                if self.j[[i, j]] != 0.0 {
                    j_entries.push(CouplingEntry {
                        i: a,
                        j: b,
                        value: self.j[[i, j]],
                    });
                }
                if self.dipolar[[i, j]] != 0.0 {
                    dipolar_entries.push(CouplingEntry {
                        i: a,
                        j: b,
                        value: self.dipolar[[i, j]],
                    });
                }
            }
        }
        let hyperfine: Vec<HyperfineCoupling> = self
            .hyperfine
            .iter()
            .filter_map(|hf| {
                let e = indices.iter().position(|&i| i == hf.electron)?;
                let n = indices.iter().position(|&i| i == hf.nucleus)?;
                Some(HyperfineCoupling {
                    electron: e,
                    nucleus: n,
                    az_hz: hf.az_hz,
                    ax_hz: hf.ax_hz,
                })
            })
            .collect();
        SpinSystem::new(spins, &j_entries, &dipolar_entries, hyperfine)
    }

    /// Whether the secular (weak-coupling) approximation holds for a pair:
    /// the offset difference must dominate both coupling strengths by
    /// [`WEAK_COUPLING_FACTOR`]. Spins of different species sit on different
    /// carriers, so their separation is effectively unbounded and the pair is
    /// always weak.
    pub fn weak_coupling_valid(&self, i: usize, j: usize) -> bool {
        if self.spins[i].species != self.spins[j].species {
            return true;
        }
        let delta = (self.spins[i].offset_hz - self.spins[j].offset_hz).abs();
        let coupling = self.j[[i, j]].abs().max(self.dipolar[[i, j]].abs());
        delta > WEAK_COUPLING_FACTOR * coupling
    }

    /// Validation findings beyond the hard constructor errors: currently,
    /// warnings for coupled same-species pairs outside the weak regime.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let n = self.n_spins();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let coupled = self.j[[i, j]] != 0.0 || self.dipolar[[i, j]] != 0.0;
                if coupled && !self.weak_coupling_valid(i, j) {
                    let delta = (self.spins[i].offset_hz - self.spins[j].offset_hz).abs();
                    out.push(Diagnostic {
                        severity: Severity::Warning,
                        location: format!("pair ({}, {})", self.spins[i].label, self.spins[j].label),
                        message: format!(
                            "weak-coupling approximation invalid (|Δν| = {delta} Hz, \
                             J = {} Hz, d = {} Hz); use the full Hamiltonian / numerical \
                             pulse design",
                            self.j[[i, j]],
                            self.dipolar[[i, j]],
                        ),
                    });
                }
            }
        }
        out
    }
}

/// Selects which internal Hamiltonian a simulation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// Secular terms only — the diagonal part of the full Hamiltonian.
    Weak,
    /// All coupling terms, including flip-flop and transverse hyperfine.
    Full,
}

/// Internal (drift) Hamiltonian in the chosen mode, rad/s.
pub fn build_drift_hamiltonian(system: &SpinSystem, mode: CouplingMode) -> Operator {
    match mode {
        CouplingMode::Weak => build_weak_hamiltonian(system),
        CouplingMode::Full => build_full_hamiltonian(system),
    }
}

/// Secular internal Hamiltonian (rad/s): Zeeman offsets plus the diagonal
/// part of every coupling,
/// `Σ_i π ν_i σ_z^i + Σ_{i<j} [(π/2) J_ij + π d_ij] σ_z^i σ_z^j
///  + Σ_pairs (π/2) A_z S_zI_z-style terms`.
/// Equals the diagonal of [`build_full_hamiltonian`] entry for entry.
pub fn build_weak_hamiltonian(system: &SpinSystem) -> Operator {
    let n = system.n_spins();
    let dim = system.dim();
    // The Hamiltonian is diagonal; accumulate eigenvalues per basis state.
    let mut diag = vec![0.0f64; dim];
    for b in 0..dim {
        let sign = |spin: usize| -> f64 {
            // spin 0 is the most significant tensor factor
            let bit = n - 1 - spin;
            if (b >> bit) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let mut e = 0.0;
        for i in 0..n {
            e += PI * system.spins[i].offset_hz * sign(i);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let zz = sign(i) * sign(j);
                e += (PI / 2.0) * system.j[[i, j]] * zz;
                e += PI * system.dipolar[[i, j]] * zz;
            }
        }
        for hf in &system.hyperfine {
            // A_z S_z I_z with S = σ/2 ⇒ coefficient A_z/4 on σ_zσ_z.
            e += 2.0 * PI * hf.az_hz / 4.0 * sign(hf.electron) * sign(hf.nucleus);
        }
        diag[b] = e;
    }
    let mut m = Array2::<C64>::zeros((dim, dim));
    for (b, &e) in diag.iter().enumerate() {
        m[[b, b]] = C64::new(e, 0.0);
    }
    Operator(m)
}

/// Full internal Hamiltonian (rad/s): Zeeman offsets, isotropic exchange
/// `(π/2) J (σ_xσ_x + σ_yσ_y + σ_zσ_z)`, secular dipolar
/// `(π/2) d (2σ_zσ_z − σ_xσ_x − σ_yσ_y)`, and hyperfine
/// `ω_e S_z + ω_n I_z + A_z S_zI_z + A_x S_zI_x` contributions (S = σ/2).
pub fn build_full_hamiltonian(system: &SpinSystem) -> Operator {
    let n = system.n_spins();
    let dim = system.dim();
    let mut m = Array2::<C64>::zeros((dim, dim));

    for i in 0..n {
        let sz = pauli_embed(PauliAxis::Z, i, n).expect("validated index");
        m = m + sz.matrix().mapv(|v| v * C64::new(PI * system.spins[i].offset_hz, 0.0));
    }

    let pair_term = |i: usize, j: usize, axis: PauliAxis| -> Array2<C64> {
        let a = pauli_embed(axis, i, n).expect("validated index");
        let b = pauli_embed(axis, j, n).expect("validated index");
        a.matrix().dot(b.matrix())
    };

    for i in 0..n {
        for j in (i + 1)..n {
            let j_hz = system.j[[i, j]];
            if j_hz != 0.0 {
                let sum = pair_term(i, j, PauliAxis::X)
                    + pair_term(i, j, PauliAxis::Y)
                    + pair_term(i, j, PauliAxis::Z);
                m = m + sum.mapv(|v| v * C64::new(PI / 2.0 * j_hz, 0.0));
            }
            let d_hz = system.dipolar[[i, j]];
            if d_hz != 0.0 {
                let form = pair_term(i, j, PauliAxis::Z).mapv(|v| v * C64::new(2.0, 0.0))
                    - pair_term(i, j, PauliAxis::X)
                    - pair_term(i, j, PauliAxis::Y);
                m = m + form.mapv(|v| v * C64::new(PI / 2.0 * d_hz, 0.0));
            }
        }
    }

    for hf in &system.hyperfine {
        // S = σ/2 and I = σ/2 put a factor 1/4 on each σσ product.
        let zz = {
            let a = pauli_embed(PauliAxis::Z, hf.electron, n).expect("validated index");
            let b = pauli_embed(PauliAxis::Z, hf.nucleus, n).expect("validated index");
            a.matrix().dot(b.matrix())
        };
        let zx = {
            let a = pauli_embed(PauliAxis::Z, hf.electron, n).expect("validated index");
            let b = pauli_embed(PauliAxis::X, hf.nucleus, n).expect("validated index");
            a.matrix().dot(b.matrix())
        };
        m = m + zz.mapv(|v| v * C64::new(2.0 * PI * hf.az_hz / 4.0, 0.0));
        m = m + zx.mapv(|v| v * C64::new(2.0 * PI * hf.ax_hz / 4.0, 0.0));
    }

    Operator(m)
}

/// RF drive term at lab time `t` (rad/s):
/// `Σ_{i ∈ species} (ω_nut/2)(cos(ω_rf t + φ) σ_x^i + sin(ω_rf t + φ) σ_y^i)`.
/// Every spin of the addressed species sees the same field. Returns only the
/// drive term; add the internal Hamiltonian separately.
pub fn build_rf_hamiltonian(
    system: &SpinSystem,
    channel: &str,
    amplitude_rad: f64,
    phase_rad: f64,
    frequency_rad: f64,
    t: f64,
) -> Result<Operator> {
    if amplitude_rad < 0.0 || !amplitude_rad.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "RF amplitude must be finite and non-negative, got {amplitude_rad}"
        )));
    }
    let indices = system.species_indices(channel)?;
    let n = system.n_spins();
    let dim = system.dim();
    let mut m = Array2::<C64>::zeros((dim, dim));
    let arg = frequency_rad * t + phase_rad;
    let (cx, cy) = (
        amplitude_rad / 2.0 * arg.cos(),
        amplitude_rad / 2.0 * arg.sin(),
    );
    for i in indices {
        let sx = pauli_embed(PauliAxis::X, i, n).expect("validated index");
        let sy = pauli_embed(PauliAxis::Y, i, n).expect("validated index");
        m = m + sx.matrix().mapv(|v| v * C64::new(cx, 0.0));
        m = m + sy.matrix().mapv(|v| v * C64::new(cy, 0.0));
    }
    Ok(Operator(m))
}

/// Transforms a lab-frame Hamiltonian into per-spin rotating frames at time
/// `t`:
/// `H_r = R_z(−ω t) H R_z(ω t) − Σ_i (ω_i / 2) σ_z^i`,
/// with `R_z(θ) = exp(−i θ σ_z / 2)` applied per spin at its own frame
/// frequency (rad/s).
pub fn rotating_frame_hamiltonian(
    h_lab: &Operator,
    frame_frequencies_rad: &[f64],
    t: f64,
) -> Result<Operator> {
    let n = frame_frequencies_rad.len();
    let dim = h_lab.dim();
    if n == 0 || dim != (1 << n) {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian of dimension {dim} does not match {n} frame frequencies"
        )));
    }
    let angles: Vec<f64> = frame_frequencies_rad.iter().map(|w| w * t).collect();
    // R_z(ω t) as a diagonal; the conjugation is elementwise.
    let g = algebra::rotation_z_all(&angles);
    let mut m = Array2::<C64>::zeros((dim, dim));
    for a in 0..dim {
        for b in 0..dim {
            m[[a, b]] = g[[a, a]].conj() * h_lab.matrix()[[a, b]] * g[[b, b]];
        }
    }
    for (i, &w) in frame_frequencies_rad.iter().enumerate() {
        let sz = pauli_embed(PauliAxis::Z, i, n)?;
        m = m - sz.matrix().mapv(|v| v * C64::new(w / 2.0, 0.0));
    }
    Ok(Operator(m))
}

/// Electron-nuclear pair Hamiltonian (rad/s), electron as the first tensor
/// factor: `ω_e S_z + ω_n I_z + A_z S_z I_z + A_x S_z I_x` with `S = σ/2`,
/// `I = σ/2`.
pub fn build_hyperfine_hamiltonian(
    omega_e_rad: f64,
    omega_n_rad: f64,
    a_z_rad: f64,
    a_x_rad: f64,
) -> Operator {
    let sz_e = pauli_embed(PauliAxis::Z, 0, 2).expect("static index");
    let sz_n = pauli_embed(PauliAxis::Z, 1, 2).expect("static index");
    let sx_n = pauli_embed(PauliAxis::X, 1, 2).expect("static index");
    let m = sz_e.matrix().mapv(|v| v * C64::new(omega_e_rad / 2.0, 0.0))
        + sz_n.matrix().mapv(|v| v * C64::new(omega_n_rad / 2.0, 0.0))
        + sz_e
            .matrix()
            .dot(sz_n.matrix())
            .mapv(|v| v * C64::new(a_z_rad / 4.0, 0.0))
        + sz_e
            .matrix()
            .dot(sx_n.matrix())
            .mapv(|v| v * C64::new(a_x_rad / 4.0, 0.0));
    Operator(m)
}
