//! Optimizer configuration, robustness ensembles, and run outcomes.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSequence, Distortion};
use crate::error::{Error, Result};

/// How fitness gradients are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GradientMode {
    /// Exact derivative of each step exponential via the eigenbasis
    /// integral (first-order perturbation theory, evaluated exactly).
    ExactFirstOrder,
    /// Central finite differences on the fitness itself; `step_rad_s` is
    /// the probe step applied to one quadrature at a time.
    FiniteDifference { step_rad_s: f64 },
}

impl Default for GradientMode {
    fn default() -> Self {
        GradientMode::ExactFirstOrder
    }
}

/// Search strategy of [`grape_optimize`](super::grape_optimize).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeMethod {
    SteepestAscent,
    ConjugateGradient,
    /// Period-parameterized derivative-free search; handled by
    /// [`simplex_optimize`](super::simplex_optimize), which needs the extra
    /// period count, so [`grape_optimize`](super::grape_optimize) rejects it.
    Simplex,
}

/// Knobs of the numerical pulse search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Number of piecewise-constant steps of the optimized sequence.
    pub n_steps: usize,
    /// Step duration (s); for the simplex method this is the export
    /// resolution instead, and the total duration is free.
    pub dt: f64,
    /// Iteration budget (gradient steps, or simplex evaluations).
    pub max_iterations: usize,
    /// Fitness at which the search declares success.
    pub target_fidelity: f64,
    /// Hard amplitude bound ω_nut,max (rad/s); controls are clipped to it
    /// after every update and the random start draws below 0.2× it.
    pub omega_nut_max: f64,
    /// Optional initial line-search step; `None` derives one from the
    /// first gradient so the first trial moves amplitudes by ~0.1·ω_nut,max.
    pub initial_step: Option<f64>,
    #[serde(default)]
    pub gradient_mode: GradientMode,
    pub method: OptimizeMethod,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.target_fidelity > 0.0 && self.target_fidelity <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target_fidelity must lie in (0, 1], got {}",
                self.target_fidelity
            )));
        }
        if !(self.omega_nut_max > 0.0 && self.omega_nut_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "omega_nut_max must be positive and finite, got {}",
                self.omega_nut_max
            )));
        }
        if let Some(step) = self.initial_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "initial_step must be positive and finite, got {step}"
                )));
            }
        }
        if let GradientMode::FiniteDifference { step_rad_s } = self.gradient_mode {
            if !(step_rad_s > 0.0 && step_rad_s.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "finite-difference step must be positive and finite, got {step_rad_s}"
                )));
            }
        }
        Ok(())
    }
}

/// One simulated spectrometer imperfection: the RF amplitude is scaled by
/// `rf_scale` and every spin is shifted by `field_offset_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub rf_scale: f64,
    pub field_offset_hz: f64,
    pub weight: f64,
}

impl EnsembleMember {
    pub(crate) fn distortion(&self) -> Distortion {
        Distortion {
            rf_scale: self.rf_scale,
            field_offset_hz: self.field_offset_hz,
        }
    }
}

/// Weighted collection of spectrometer imperfections the pulse must work
/// under; the optimization objective is the weighted mean fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EnsembleMember>", into = "Vec<EnsembleMember>")]
pub struct RobustnessEnsemble {
    members: Vec<EnsembleMember>,
}

impl RobustnessEnsemble {
    /// Builds an ensemble, normalizing the weights to sum to 1.
    pub fn new(members: Vec<EnsembleMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument(
                "robustness ensemble must have at least one member".into(),
            ));
        }
        for m in &members {
            if !(m.weight >= 0.0 && m.weight.is_finite())
                || !m.rf_scale.is_finite()
                || !m.field_offset_hz.is_finite()
            {
                return Err(Error::InvalidArgument(format!(
                    "ensemble member {m:?} has a non-finite field or negative weight"
                )));
            }
        }
        let total: f64 = members.iter().map(|m| m.weight).sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument(
                "ensemble weights must sum to a positive value".into(),
            ));
        }
        let members = members
            .into_iter()
            .map(|m| EnsembleMember {
                weight: m.weight / total,
                ..m
            })
            .collect();
        Ok(RobustnessEnsemble { members })
    }

    /// The trivial ensemble: one perfectly calibrated member.
    pub fn nominal() -> Self {
        RobustnessEnsemble {
            members: vec![EnsembleMember {
                rf_scale: 1.0,
                field_offset_hz: 0.0,
                weight: 1.0,
            }],
        }
    }

    /// Uniformly weighted cartesian grid of RF scales × field offsets — the
    /// usual 3×3 training set for inhomogeneity-robust pulses.
    pub fn grid(rf_scales: &[f64], field_offsets_hz: &[f64]) -> Result<Self> {
        let members = rf_scales
            .iter()
            .flat_map(|&s| {
                field_offsets_hz.iter().map(move |&o| EnsembleMember {
                    rf_scale: s,
                    field_offset_hz: o,
                    weight: 1.0,
                })
            })
            .collect();
        Self::new(members)
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }
}

impl TryFrom<Vec<EnsembleMember>> for RobustnessEnsemble {
    type Error = Error;
    fn try_from(members: Vec<EnsembleMember>) -> Result<Self> {
        Self::new(members)
    }
}

impl From<RobustnessEnsemble> for Vec<EnsembleMember> {
    fn from(e: RobustnessEnsemble) -> Self {
        e.members
    }
}

/// Why the search stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetReached,
    MaxIterations,
    Stalled,
}

/// Result of a pulse search: the best controls found, the per-iteration
/// objective trace, and how the run ended. Failing to reach the target is
/// an outcome, not an error.
#[derive(Debug, Clone)]
pub struct GrapeOutcome {
    pub controls: ControlSequence,
    pub trace: Vec<f64>,
    pub termination: Termination,
    /// Ensemble objective of the returned controls.
    pub fitness: f64,
}
