//! Simulation and control toolkit for coupled spin systems.
//!
//! The crate models registers of nuclear and electron spins, builds their
//! Hamiltonians in weak- and full-coupling form, simulates piecewise-constant
//! control sequences, compiles idealized pulse sequences (CNOT, refocusing,
//! phase tracking, shaped pulses) with first-order error correction, runs
//! gradient and simplex pulse optimizers with robustness ensembles, and
//! implements heat-bath cooling and hyperfine single-transition control.

pub mod algebra;
pub mod compiler;
pub mod dynamics;
pub mod error;
pub mod gates;
pub mod grape;
pub mod protocols;
pub mod system;
pub mod tolerances;

pub use algebra::{Operator, PauliAxis};
pub use compiler::{
    compile_cnot, correct_delays, estimate_first_order_errors, gaussian_pulse, phase_track,
    refocus_schedule, ErrorModel, PulseEvent, PulseSequence,
};
pub use dynamics::{
    evolve_controls, evolve_controls_distorted, evolve_controls_with_report, evolve_state,
    free_evolution, gate_fidelity, propagator_step, worst_case_state_fidelity, Channel,
    ControlSequence, DensityState, Distortion, EvolveReport,
};
pub use error::{Error, Result};
pub use grape::{
    controllability_rank, ensemble_fitness, fitness, fitness_distorted, fitness_gradient,
    grape_optimize, is_universal, resonant_channels, simplex_optimize, EnsembleMember,
    GradientMode, GrapeOutcome, OptimizeMethod, OptimizerConfig, RobustnessEnsemble, Termination,
};
pub use protocols::{
    apply_polarization_loss, compression_gate, drift_echo_duration, hbac_run,
    implied_per_step_error, measure_polarization, refresh, single_transition_gate, thermal_state,
    transition_table, HbacComputeMode, HbacConfig, HbacOutcome, HbacPulses, HbacStepRecord,
    HbacTrace, PolarizationVector, Transition, BATH_EQUILIBRATION_TIME_S, COMPRESSION_TARGET_SPIN,
};
pub use system::{
    CouplingEntry, CouplingMode, HyperfineCoupling, Spin, SpinKind, SpinSpecies, SpinSystem,
};
