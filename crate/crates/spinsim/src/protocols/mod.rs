//! End-to-end protocol demonstrations on the simulator.
//!
//! Two demonstrations live here:
//!
//! * **Heat-bath algorithmic cooling** ([`hbac_run`] and its supporting
//!   operations): thermal product states, polarization measurement, the
//!   three-bit compression unitary, bath refreshes, and the round schedule
//!   that combines them — with an ideal-gates mode, a compiled-pulses mode
//!   carrying a per-step loss model, and a per-step polarization trace as
//!   the artifact.
//! * **Single-transition hyperfine control** ([`single_transition_gate`]):
//!   certifying universality of one microwave drive on an electron-nuclear
//!   pair by a Lie-algebra rank test, then compiling a target gate through
//!   a single channel parked on the 1-3 transition, plus the
//!   transition-frequency table and a drift-echo search.

mod hbac;
mod hyperfine;

pub use hbac::{
    apply_polarization_loss, compression_gate, hbac_run, implied_per_step_error,
    measure_polarization, refresh, thermal_state, HbacComputeMode, HbacConfig, HbacOutcome,
    HbacPulses, HbacStepRecord, HbacTrace, PolarizationVector, BATH_EQUILIBRATION_TIME_S,
    COMPRESSION_TARGET_SPIN,
};
pub use hyperfine::{drift_echo_duration, single_transition_gate, transition_table, Transition};
