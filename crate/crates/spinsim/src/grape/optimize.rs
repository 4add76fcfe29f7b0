//! Gradient-ascent pulse engineering on piecewise-constant control
//! quadratures.
//!
//! The objective is the ensemble-weighted trace-overlap fitness. Steps are
//! projected onto the amplitude disc `|u| ≤ ω_nut_max` per (channel, step)
//! and accepted under an Armijo sufficient-increase test. Non-convergence is
//! reported through [`Termination`], never as an error.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{channel_generators, Channel, ControlSequence};
use crate::error::{Error, Result};
use crate::grape::fitness::{fitness_and_gradient_distorted, fitness_distorted, from_quadratures};
use crate::grape::{
    EnsembleMember, GrapeOutcome, OptimizeMethod, OptimizerConfig, RobustnessEnsemble,
    Termination,
};
use crate::system::{CouplingMode, SpinSystem};
use crate::tolerances::{STALL_PATIENCE, STALL_REL_IMPROVEMENT};
use crate::Operator;

/// Armijo sufficient-increase coefficient.
const ARMIJO_C1: f64 = 1e-4;
/// Maximum step halvings per line search before declaring failure.
const MAX_BACKTRACKS: usize = 50;
/// Fraction of the amplitude ceiling used for random initial amplitudes.
const INIT_AMPLITUDE_FRACTION: f64 = 0.2;

/// Ensemble-weighted fitness of a control sequence.
pub fn ensemble_fitness(
    controls: &ControlSequence,
    system: &SpinSystem,
    goal: &Operator,
    mode: CouplingMode,
    ensemble: &RobustnessEnsemble,
) -> Result<f64> {
    let values: Vec<f64> = ensemble
        .members()
        .par_iter()
        .map(|m| fitness_distorted(controls, system, goal, mode, &m.distortion()))
        .collect::<Result<Vec<f64>>>()?;
    // Sequential weighted sum in member order keeps the result bitwise
    // reproducible regardless of thread scheduling.
    Ok(weighted_sum(ensemble.members(), &values))
}

fn weighted_sum(members: &[EnsembleMember], values: &[f64]) -> f64 {
    members
        .iter()
        .zip(values)
        .map(|(m, v)| m.weight * v)
        .sum()
}

struct Objective<'a> {
    system: &'a SpinSystem,
    goal: &'a Operator,
    channels: &'a [Channel],
    dt: f64,
    mode: CouplingMode,
    members: &'a [EnsembleMember],
}

impl Objective<'_> {
    fn value(&self, quads: &Array3<f64>) -> Result<f64> {
        let controls = from_quadratures(quads, self.channels, self.dt)?;
        let values: Vec<f64> = self
            .members
            .par_iter()
            .map(|m| {
                fitness_distorted(&controls, self.system, self.goal, self.mode, &m.distortion())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(weighted_sum(self.members, &values))
    }

    fn value_and_gradient(
        &self,
        quads: &Array3<f64>,
        config: &OptimizerConfig,
    ) -> Result<(f64, Array3<f64>)> {
        let controls = from_quadratures(quads, self.channels, self.dt)?;
        let parts: Vec<(f64, Array3<f64>)> = self
            .members
            .par_iter()
            .map(|m| {
                fitness_and_gradient_distorted(
                    &controls,
                    self.system,
                    self.goal,
                    self.mode,
                    config.gradient_mode,
                    &m.distortion(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let value = weighted_sum(
            self.members,
            &parts.iter().map(|(f, _)| *f).collect::<Vec<f64>>(),
        );
        let mut gradient = Array3::zeros(quads.dim());
        for (member, (_, g)) in self.members.iter().zip(&parts) {
            gradient.zip_mut_with(g, |acc, v| *acc += member.weight * v);
        }
        Ok((value, gradient))
    }
}

/// Projects every (channel, step) quadrature pair back onto the disc of
/// radius `omega_nut_max`, preserving phase.
fn clip_to_disc(quads: &mut Array3<f64>, omega_nut_max: f64) {
    let (n_channels, n_steps, _) = quads.dim();
    for c in 0..n_channels {
        for k in 0..n_steps {
            let r = quads[[c, k, 0]].hypot(quads[[c, k, 1]]);
            if r > omega_nut_max {
                let scale = omega_nut_max / r;
                quads[[c, k, 0]] *= scale;
                quads[[c, k, 1]] *= scale;
            }
        }
    }
}

fn dot(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn max_norm(a: &Array3<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// One projected Armijo line search along `direction` from `quads`.
/// Returns the accepted point, fitness, and step size, or `None` when no
/// acceptable step exists within [`MAX_BACKTRACKS`] halvings.
fn line_search(
    objective: &Objective,
    quads: &Array3<f64>,
    f_current: f64,
    gradient: &Array3<f64>,
    direction: &Array3<f64>,
    alpha0: f64,
    omega_nut_max: f64,
) -> Result<Option<(Array3<f64>, f64, f64)>> {
    let mut alpha = alpha0;
    for _ in 0..=MAX_BACKTRACKS {
        let mut trial = quads + &direction.mapv(|v| v * alpha);
        clip_to_disc(&mut trial, omega_nut_max);
        let displacement = &trial - quads;
        let predicted = dot(gradient, &displacement);
        let f_trial = objective.value(&trial)?;
        if f_trial >= f_current + ARMIJO_C1 * predicted {
            return Ok(Some((trial, f_trial, alpha)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// Optimizes a control sequence toward `goal` by projected gradient ascent
/// (steepest or Polak–Ribière conjugate directions per
/// [`OptimizerConfig::method`]).
///
/// `ensemble = None` optimizes the nominal spectrometer only. The returned
/// [`GrapeOutcome`] reports why iteration stopped; failing to reach
/// `target_fidelity` is an outcome, not an error. Runs with the same inputs
/// and seed are bitwise reproducible.
pub fn grape_optimize(
    system: &SpinSystem,
    goal: &Operator,
    channels: &[Channel],
    config: &OptimizerConfig,
    ensemble: Option<&RobustnessEnsemble>,
    mode: CouplingMode,
) -> Result<GrapeOutcome> {
    config.validate()?;
    if config.method == OptimizeMethod::Simplex {
        return Err(Error::InvalidArgument(
            "the simplex method optimizes period-parameterized pulses; use simplex_optimize"
                .into(),
        ));
    }
    if channels.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one control channel is required".into(),
        ));
    }
    if goal.dim() != system.dim() {
        return Err(Error::DimensionMismatch(format!(
            "goal dimension {} vs system dimension {}",
            goal.dim(),
            system.dim()
        )));
    }
    // Fails fast on channels addressing unknown species.
    channel_generators(system, channels)?;

    let nominal = RobustnessEnsemble::nominal();
    let members = ensemble.unwrap_or(&nominal).members();
    let objective = Objective {
        system,
        goal,
        channels,
        dt: config.dt,
        mode,
        members,
    };

    // Random start: amplitudes well inside the disc, uniform phases.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut quads = Array3::zeros((channels.len(), config.n_steps, 2));
    for c in 0..channels.len() {
        for k in 0..config.n_steps {
            let a = rng.gen_range(0.0..INIT_AMPLITUDE_FRACTION * config.omega_nut_max);
            let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            quads[[c, k, 0]] = a * phi.cos();
            quads[[c, k, 1]] = a * phi.sin();
        }
    }

    let (mut f, mut gradient) = objective.value_and_gradient(&quads, config)?;
    let mut trace = vec![f];
    let mut direction = gradient.clone();
    let mut prev_gradient: Option<Array3<f64>> = None;
    let mut alpha = config.initial_step.unwrap_or_else(|| {
        let g = max_norm(&gradient);
        if g > 0.0 {
            0.1 * config.omega_nut_max / g
        } else {
            1.0
        }
    });
    let mut stall_mark = f;
    let mut stalled_iterations = 0usize;

    if f >= config.target_fidelity {
        return finish(objective, quads, trace, Termination::TargetReached, f);
    }

    for _ in 0..config.max_iterations {
        // Direction update.
        direction = match config.method {
            OptimizeMethod::SteepestAscent => gradient.clone(),
            OptimizeMethod::ConjugateGradient => {
                let mut d = match &prev_gradient {
                    Some(prev) => {
                        let denom = dot(prev, prev);
                        let beta = if denom > 0.0 {
                            (dot(&gradient, &(&gradient - prev)) / denom).max(0.0)
                        } else {
                            0.0
                        };
                        &gradient + &direction.mapv(|v| v * beta)
                    }
                    None => gradient.clone(),
                };
                if dot(&d, &gradient) <= 0.0 {
                    d = gradient.clone();
                }
                d
            }
            OptimizeMethod::Simplex => unreachable!("rejected above"),
        };

        let mut step = line_search(
            &objective,
            &quads,
            f,
            &gradient,
            &direction,
            alpha,
            config.omega_nut_max,
        )?;
        if step.is_none() && config.method == OptimizeMethod::ConjugateGradient {
            // Conjugate direction failed: retry once along the raw gradient.
            direction = gradient.clone();
            step = line_search(
                &objective,
                &quads,
                f,
                &gradient,
                &direction,
                alpha,
                config.omega_nut_max,
            )?;
        }
        let Some((next, f_next, accepted_alpha)) = step else {
            return finish(objective, quads, trace, Termination::Stalled, f);
        };

        quads = next;
        f = f_next;
        trace.push(f);
        alpha = accepted_alpha * 2.0;
        prev_gradient = Some(gradient);
        gradient = objective.value_and_gradient(&quads, config)?.1;

        if f >= config.target_fidelity {
            return finish(objective, quads, trace, Termination::TargetReached, f);
        }
        if f > stall_mark * (1.0 + STALL_REL_IMPROVEMENT) {
            stall_mark = f;
            stalled_iterations = 0;
        } else {
            stalled_iterations += 1;
            if stalled_iterations >= STALL_PATIENCE {
                return finish(objective, quads, trace, Termination::Stalled, f);
            }
        }
    }
    finish(objective, quads, trace, Termination::MaxIterations, f)
}

fn finish(
    objective: Objective,
    quads: Array3<f64>,
    trace: Vec<f64>,
    termination: Termination,
    fitness: f64,
) -> Result<GrapeOutcome> {
    let controls = from_quadratures(&quads, objective.channels, objective.dt)?;
    Ok(GrapeOutcome {
        controls,
        trace,
        termination,
        fitness,
    })
}
