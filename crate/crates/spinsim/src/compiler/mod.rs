//! Symbolic pulse-sequence construction and analysis: CNOT compilation from
//! the natural coupling, refocusing schedules, virtual-z phase tracking,
//! Gaussian selective pulses, and first-order error estimation/correction.
//!
//! Every synthesis routine verifies its own output: the composed ideal
//! propagator is checked against the target unitary at build time and the
//! routine fails rather than returning an unverified sequence.

mod errors;
mod gaussian;
mod sequence;
mod synthesis;

pub use errors::{correct_delays, estimate_first_order_errors, ErrorModel};
pub use gaussian::gaussian_pulse;
pub use sequence::{PulseEvent, PulseSequence};
pub use synthesis::{compile_cnot, phase_track, refocus_schedule};
