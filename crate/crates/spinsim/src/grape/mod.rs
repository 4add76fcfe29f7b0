//! Numerical optimal control: trace-overlap fitness, exact and
//! finite-difference gradients, gradient-ascent and conjugate-gradient
//! optimization over robustness ensembles, a derivative-free simplex search
//! over constant-drive periods, and a Lie-algebra controllability test.
//!
//! Composition hook: optimizers here treat the whole register as one
//! strongly-coupled block. Hybrid schemes — compiling a circuit between
//! weakly-coupled subsystems while optimizing pulses within each block —
//! can be built on top by calling [`grape_optimize`] per block and stitching
//! the resulting [`ControlSequence`](crate::dynamics::ControlSequence)s with
//! the pulse-compiler tools; no dedicated driver is provided.

mod config;
mod controllability;
pub(crate) mod fitness;
mod optimize;
mod simplex;

pub use config::{
    EnsembleMember, GradientMode, GrapeOutcome, OptimizeMethod, OptimizerConfig,
    RobustnessEnsemble, Termination,
};
pub use controllability::{controllability_rank, is_universal};
pub use fitness::{
    fitness, fitness_and_gradient_distorted, fitness_distorted, fitness_gradient,
};
pub use optimize::{ensemble_fitness, grape_optimize};
pub use simplex::{simplex_optimize, MAX_SIMPLEX_PERIODS};

use crate::dynamics::Channel;
use crate::system::SpinSystem;

/// One resonant channel per species, in first-appearance order — the default
/// drive layout for whole-register optimization.
pub fn resonant_channels(system: &SpinSystem) -> Vec<Channel> {
    let mut seen: Vec<&str> = Vec::new();
    for spin in system.spins() {
        if !seen.contains(&spin.species.as_str()) {
            seen.push(&spin.species);
        }
    }
    seen.into_iter().map(Channel::new).collect()
}
