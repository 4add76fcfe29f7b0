//! Derivative-free pulse search over a small number of constant-drive
//! periods, for systems with a single species (one resonant channel).
//!
//! Each period holds amplitude, phase, and duration constant, so the
//! Hamiltonian is constant within it: the propagator is a single exact
//! exponential and the objective is smooth in every parameter, which the
//! Nelder–Mead simplex exploits. A drive at an effective frequency offset is
//! still representable because each period carries its own phase — stepping
//! the phase from period to period emulates the carrier ramp.
//!
//! The search runs on continuous durations; exporting snaps each period to
//! the step grid and rescales its amplitude so the drive area `ω_nut·τ` is
//! preserved exactly.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{expm_minus_i, inner};
use crate::dynamics::{channel_generators, Channel, ControlSequence};
use crate::error::{Error, Result};
use crate::grape::fitness::fitness_distorted;
use crate::grape::{GrapeOutcome, OptimizeMethod, OptimizerConfig, Termination};
use crate::system::{build_drift_hamiltonian, CouplingMode, SpinSystem};
use crate::tolerances::{STALL_PATIENCE, STALL_REL_IMPROVEMENT};
use crate::Operator;

/// Largest supported number of constant-drive periods (3 parameters each).
pub const MAX_SIMPLEX_PERIODS: usize = 10;

/// Nelder–Mead coefficients: reflection, expansion, contraction, shrink.
const NM_ALPHA: f64 = 1.0;
const NM_GAMMA: f64 = 2.0;
const NM_RHO: f64 = 0.5;
const NM_SIGMA: f64 = 0.5;
/// Simplex spread below which the search restarts.
const RESTART_SPREAD: f64 = 1e-12;
/// Stall horizon: the derivative-free search crosses flat stretches and
/// fresh restarts before improving, so it gets far more patience than the
/// gradient optimizers.
const SIMPLEX_STALL_PATIENCE: usize = 40 * STALL_PATIENCE;

struct PeriodObjective<'a> {
    drift: Array2<C64>,
    sx: Array2<C64>,
    sy: Array2<C64>,
    goal: &'a Operator,
    dim: usize,
    omega_nut_max: f64,
    dt: f64,
    max_duration: f64,
}

impl PeriodObjective<'_> {
    /// Clamps one period's raw parameters to their feasible ranges.
    fn clamp(&self, amp: f64, phase: f64, duration: f64) -> (f64, f64, f64) {
        (
            amp.clamp(0.0, self.omega_nut_max),
            phase,
            duration.clamp(self.dt, self.max_duration),
        )
    }

    /// Fitness of the period list under exact per-period exponentials.
    fn fitness(&self, params: &[f64]) -> Result<f64> {
        let mut u = Array2::<C64>::eye(self.dim);
        for p in params.chunks_exact(3) {
            let (amp, phase, duration) = self.clamp(p[0], p[1], p[2]);
            let mut h = self.drift.clone();
            let half = 0.5 * amp;
            h = h + self.sx.mapv(|v| v * C64::new(half * phase.cos(), 0.0));
            h = h + self.sy.mapv(|v| v * C64::new(half * phase.sin(), 0.0));
            u = expm_minus_i(&h, duration)?.dot(&u);
        }
        let overlap = inner(self.goal.matrix(), &u);
        Ok(overlap.norm_sqr() / (self.dim * self.dim) as f64)
    }

    /// Converts the period list into a grid-aligned control sequence,
    /// preserving each period's drive area `amp·τ`.
    fn export(&self, params: &[f64], channel: Channel) -> Result<ControlSequence> {
        let mut amplitudes = Vec::new();
        let mut phases = Vec::new();
        for p in params.chunks_exact(3) {
            let (amp, phase, duration) = self.clamp(p[0], p[1], p[2]);
            let n = (duration / self.dt).round().max(1.0) as usize;
            let rescaled = amp * duration / (n as f64 * self.dt);
            amplitudes.extend(std::iter::repeat(rescaled).take(n));
            phases.extend(std::iter::repeat(phase).take(n));
        }
        ControlSequence::new(self.dt, vec![channel], vec![amplitudes], vec![phases])
    }
}

/// Optimizes an `n_periods`-period constant-drive pulse toward `goal` with
/// the Nelder–Mead simplex.
///
/// Requires a system with exactly one species so the single resonant channel
/// leaves each period's Hamiltonian constant. Period durations range over
/// `[dt, n_steps·dt]`; amplitudes over `[0, omega_nut_max]`. The outcome's
/// controls are grid-aligned (area-preserving snap) and its fitness is
/// re-evaluated on that exported sequence.
pub fn simplex_optimize(
    system: &SpinSystem,
    goal: &Operator,
    n_periods: usize,
    config: &OptimizerConfig,
    mode: CouplingMode,
) -> Result<GrapeOutcome> {
    config.validate()?;
    if config.method != OptimizeMethod::Simplex {
        return Err(Error::InvalidArgument(format!(
            "simplex_optimize requires the simplex method, got {:?}",
            config.method
        )));
    }
    if n_periods == 0 || n_periods > MAX_SIMPLEX_PERIODS {
        return Err(Error::InvalidArgument(format!(
            "n_periods must be in 1..={MAX_SIMPLEX_PERIODS}, got {n_periods}"
        )));
    }
    let species: Vec<&str> = {
        let mut names: Vec<&str> = system.spins().iter().map(|s| s.species.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names
    };
    if species.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "simplex search drives one resonant channel and needs a single-species system; \
             found {} species",
            species.len()
        )));
    }
    if goal.dim() != system.dim() {
        return Err(Error::DimensionMismatch(format!(
            "goal dimension {} vs system dimension {}",
            goal.dim(),
            system.dim()
        )));
    }
    let channel = Channel::new(species[0]);
    let (sx, sy) = channel_generators(system, std::slice::from_ref(&channel))?
        .pop()
        .expect("one channel requested");
    let objective = PeriodObjective {
        drift: build_drift_hamiltonian(system, mode).into_matrix(),
        sx,
        sy,
        goal,
        dim: system.dim(),
        omega_nut_max: config.omega_nut_max,
        dt: config.dt,
        max_duration: config.n_steps as f64 * config.dt,
    };

    let n_params = 3 * n_periods;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let random_point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut x = Vec::with_capacity(n_params);
        for _ in 0..n_periods {
            x.push(rng.gen_range(0.1..0.9) * config.omega_nut_max);
            x.push(rng.gen_range(0.0..2.0 * std::f64::consts::PI));
            x.push(rng.gen_range(0.1..0.9) * objective.max_duration);
        }
        x
    };
    // Coordinate scales for building simplex vertices around a point.
    let spread = |coord: usize| -> f64 {
        match coord % 3 {
            0 => 0.1 * config.omega_nut_max,
            1 => 0.3,
            _ => 0.1 * objective.max_duration,
        }
    };

    let build_simplex = |center: &[f64],
                         scale: f64,
                         objective: &PeriodObjective|
     -> Result<Vec<(Vec<f64>, f64)>> {
        let mut vertices = Vec::with_capacity(n_params + 1);
        let f = objective.fitness(center)?;
        vertices.push((center.to_vec(), f));
        for i in 0..n_params {
            let mut v = center.to_vec();
            v[i] += scale * spread(i);
            let f = objective.fitness(&v)?;
            vertices.push((v, f));
        }
        Ok(vertices)
    };

    let start = random_point(&mut rng);
    let mut simplex = build_simplex(&start, 1.0, &objective)?;
    let mut best = simplex
        .iter()
        .cloned()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty simplex");
    let mut trace = vec![best.1];
    let mut termination = Termination::MaxIterations;
    let mut stall_mark = best.1;
    let mut stalled_iterations = 0usize;
    let mut restarts = 0usize;

    if best.1 >= config.target_fidelity {
        termination = Termination::TargetReached;
    } else {
        for _ in 0..config.max_iterations {
            // Sort descending: vertex 0 is best, the last is worst.
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            if simplex[0].1 - simplex[simplex.len() - 1].1 < RESTART_SPREAD {
                // Collapsed: restart, alternating between polishing near the
                // best point found so far and probing a fresh random point
                // (all seeded, so runs stay reproducible).
                let (center, scale) = if restarts % 2 == 0 {
                    let jitter: Vec<f64> = best
                        .0
                        .iter()
                        .enumerate()
                        .map(|(i, x)| x + rng.gen_range(-0.3..0.3) * spread(i))
                        .collect();
                    (jitter, 0.3)
                } else {
                    (random_point(&mut rng), 1.0)
                };
                restarts += 1;
                simplex = build_simplex(&center, scale, &objective)?;
                simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            }
            let worst = simplex.len() - 1;

            let centroid: Vec<f64> = (0..n_params)
                .map(|i| {
                    simplex[..worst].iter().map(|(v, _)| v[i]).sum::<f64>() / worst as f64
                })
                .collect();
            let reflect: Vec<f64> = (0..n_params)
                .map(|i| centroid[i] + NM_ALPHA * (centroid[i] - simplex[worst].0[i]))
                .collect();
            let f_reflect = objective.fitness(&reflect)?;

            if f_reflect > simplex[0].1 {
                // Try to expand past the reflection.
                let expand: Vec<f64> = (0..n_params)
                    .map(|i| centroid[i] + NM_GAMMA * (reflect[i] - centroid[i]))
                    .collect();
                let f_expand = objective.fitness(&expand)?;
                simplex[worst] = if f_expand > f_reflect {
                    (expand, f_expand)
                } else {
                    (reflect, f_reflect)
                };
            } else if f_reflect > simplex[worst - 1].1 {
                simplex[worst] = (reflect, f_reflect);
            } else {
                // Contract toward the centroid (outside or inside).
                let outside = f_reflect > simplex[worst].1;
                let anchor: &[f64] = if outside { &reflect } else { &simplex[worst].0 };
                let f_anchor = if outside { f_reflect } else { simplex[worst].1 };
                let contract: Vec<f64> = (0..n_params)
                    .map(|i| centroid[i] + NM_RHO * (anchor[i] - centroid[i]))
                    .collect();
                let f_contract = objective.fitness(&contract)?;
                if f_contract > f_anchor {
                    simplex[worst] = (contract, f_contract);
                } else {
                    // Shrink everything toward the best vertex.
                    let best_vertex = simplex[0].0.clone();
                    for entry in simplex.iter_mut().skip(1) {
                        for i in 0..n_params {
                            entry.0[i] =
                                best_vertex[i] + NM_SIGMA * (entry.0[i] - best_vertex[i]);
                        }
                        entry.1 = objective.fitness(&entry.0)?;
                    }
                }
            }

            let iter_best = simplex
                .iter()
                .cloned()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty simplex");
            if iter_best.1 > best.1 {
                best = iter_best;
            }
            trace.push(best.1);
            if best.1 >= config.target_fidelity {
                termination = Termination::TargetReached;
                break;
            }
            if best.1 > stall_mark * (1.0 + STALL_REL_IMPROVEMENT) {
                stall_mark = best.1;
                stalled_iterations = 0;
            } else {
                stalled_iterations += 1;
                if stalled_iterations >= SIMPLEX_STALL_PATIENCE {
                    termination = Termination::Stalled;
                    break;
                }
            }
        }
    }

    let controls = objective.export(&best.0, channel)?;
    let fitness = fitness_distorted(
        &controls,
        system,
        goal,
        mode,
        &crate::dynamics::Distortion::default(),
    )?;
    Ok(GrapeOutcome {
        controls,
        trace,
        termination,
        fitness,
    })
}
