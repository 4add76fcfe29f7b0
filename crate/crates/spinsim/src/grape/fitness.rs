//! Trace-overlap fitness and its gradients with respect to the control
//! quadratures.
//!
//! Controls are parameterized per channel and step by the rotating-frame
//! quadratures `u_x = a·cos φ`, `u_y = a·sin φ` (rad/s). With the carrier
//! ramp angle ψ of an off-resonance channel, the step Hamiltonian term is
//! `(1/2)[(u_x cos ψ − u_y sin ψ) Σx + (u_x sin ψ + u_y cos ψ) Σy]`, so the
//! two derivative generators are the ψ-rotated quadrature operators.

use ndarray::{Array2, Array3};
use num_complex::Complex64 as C64;

use crate::algebra::{dagger, inner, propagator_with_derivatives, Operator};
use crate::dynamics::{
    carrier_angle, channel_generators, evolve_controls_distorted, gate_fidelity,
    step_hamiltonians, Channel, ControlSequence, Distortion,
};
use crate::error::Result;
use crate::grape::GradientMode;
use crate::system::{CouplingMode, SpinSystem};

/// Quadrature view of a control sequence: dims (channel, step, 2).
pub(crate) fn to_quadratures(controls: &ControlSequence) -> Array3<f64> {
    let n_channels = controls.channels().len();
    let n_steps = controls.n_steps();
    let mut q = Array3::zeros((n_channels, n_steps, 2));
    for c in 0..n_channels {
        for k in 0..n_steps {
            let a = controls.amplitudes(c)[k];
            let phi = controls.phases(c)[k];
            q[[c, k, 0]] = a * phi.cos();
            q[[c, k, 1]] = a * phi.sin();
        }
    }
    q
}

/// Rebuilds a control sequence (amplitude ≥ 0, phase) from quadratures.
pub(crate) fn from_quadratures(
    quads: &Array3<f64>,
    channels: &[Channel],
    dt: f64,
) -> Result<ControlSequence> {
    let (n_channels, n_steps, _) = quads.dim();
    let mut amplitudes = Vec::with_capacity(n_channels);
    let mut phases = Vec::with_capacity(n_channels);
    for c in 0..n_channels {
        let mut amp = Vec::with_capacity(n_steps);
        let mut phi = Vec::with_capacity(n_steps);
        for k in 0..n_steps {
            let ux = quads[[c, k, 0]];
            let uy = quads[[c, k, 1]];
            amp.push(ux.hypot(uy));
            phi.push(if ux == 0.0 && uy == 0.0 {
                0.0
            } else {
                uy.atan2(ux)
            });
        }
        amplitudes.push(amp);
        phases.push(phi);
    }
    ControlSequence::new(dt, channels.to_vec(), amplitudes, phases)
}

/// Normalized trace-overlap fitness `Φ = |Tr(U_sim† U_goal)|² / d²` of a
/// control sequence against a goal unitary, for one spectrometer
/// distortion.
pub fn fitness_distorted(
    controls: &ControlSequence,
    system: &SpinSystem,
    goal: &Operator,
    mode: CouplingMode,
    distortion: &Distortion,
) -> Result<f64> {
    let u = evolve_controls_distorted(system, controls, mode, distortion)?;
    gate_fidelity(&u, goal)
}

/// [`fitness_distorted`] for a perfectly calibrated spectrometer.
pub fn fitness(
    controls: &ControlSequence,
    system: &SpinSystem,
    goal: &Operator,
    mode: CouplingMode,
) -> Result<f64> {
    fitness_distorted(controls, system, goal, mode, &Distortion::default())
}

/// Fitness and its gradient (∂Φ/∂u per channel, step, quadrature) for one
/// distortion.
pub fn fitness_and_gradient_distorted(
    controls: &ControlSequence,
    system: &SpinSystem,
    goal: &Operator,
    mode: CouplingMode,
    gradient_mode: GradientMode,
    distortion: &Distortion,
) -> Result<(f64, Array3<f64>)> {
    match gradient_mode {
        GradientMode::ExactFirstOrder => {
            exact_gradient(controls, system, goal, mode, distortion)
        }
        GradientMode::FiniteDifference { step_rad_s } => {
            let f = fitness_distorted(controls, system, goal, mode, distortion)?;
            let g =
                finite_difference_gradient(controls, system, goal, mode, distortion, step_rad_s)?;
            Ok((f, g))
        }
    }
}

/// Gradient of the fitness with respect to every control quadrature.
pub fn fitness_gradient(
    controls: &ControlSequence,
    system: &SpinSystem,
    goal: &Operator,
    mode: CouplingMode,
    gradient_mode: GradientMode,
) -> Result<Array3<f64>> {
    fitness_and_gradient_distorted(
        controls,
        system,
        goal,
        mode,
        gradient_mode,
        &Distortion::default(),
    )
    .map(|(_, g)| g)
}

fn trace_product(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    // Tr(A·B) without forming the product.
    let dim = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..dim {
        for k in 0..dim {
            acc += a[[i, k]] * b[[k, i]];
        }
    }
    acc
}

fn exact_gradient(
    controls: &ControlSequence,
    system: &SpinSystem,
    goal: &Operator,
    mode: CouplingMode,
    distortion: &Distortion,
) -> Result<(f64, Array3<f64>)> {
    let dim = system.dim();
    let n_channels = controls.channels().len();
    let n_steps = controls.n_steps();
    let dt = controls.dt();
    let hs = step_hamiltonians(system, controls, mode, distortion)?;
    let generators = channel_generators(system, controls.channels())?;

    // Per step: the propagator and its derivative along each quadrature.
    let mut steps = Vec::with_capacity(n_steps);
    let mut derivs = Vec::with_capacity(n_steps);
    let scale = C64::new(0.5 * distortion.rf_scale, 0.0);
    for k in 0..n_steps {
        let mut directions = Vec::with_capacity(2 * n_channels);
        for (c, (sx, sy)) in generators.iter().enumerate() {
            let psi = carrier_angle(&controls.channels()[c], k, dt);
            let (cos, sin) = (psi.cos(), psi.sin());
            directions.push(sx.mapv(|v| v * scale * cos) + sy.mapv(|v| v * scale * sin));
            directions.push(sx.mapv(|v| v * scale * -sin) + sy.mapv(|v| v * scale * cos));
        }
        let refs: Vec<&Array2<C64>> = directions.iter().collect();
        let (u, du) = propagator_with_derivatives(&hs[k], dt, &refs)?;
        steps.push(u);
        derivs.push(du);
    }

    // Forward prefix products U_before[k] = S_{k-1}···S_0.
    let mut before = Vec::with_capacity(n_steps);
    let mut acc = Array2::<C64>::eye(dim);
    for s in &steps {
        before.push(acc.clone());
        acc = s.dot(&acc);
    }
    let u_total = acc;
    let g_overlap = inner(goal.matrix(), &u_total);
    let d2 = (dim * dim) as f64;
    let fitness = g_overlap.norm_sqr() / d2;

    // Backward pass: ∂Φ/∂u = 2·Re[conj(g)·Tr(U_before·G†·V_after·∂S)]/d².
    let goal_dag = dagger(goal.matrix());
    let mut gradient = Array3::zeros((n_channels, n_steps, 2));
    let mut v_after = Array2::<C64>::eye(dim);
    for k in (0..n_steps).rev() {
        let w = before[k].dot(&goal_dag).dot(&v_after);
        for c in 0..n_channels {
            for q in 0..2 {
                let dg = trace_product(&w, &derivs[k][2 * c + q]);
                gradient[[c, k, q]] = 2.0 * (g_overlap.conj() * dg).re / d2;
            }
        }
        v_after = v_after.dot(&steps[k]);
    }
    Ok((fitness, gradient))
}

fn finite_difference_gradient(
    controls: &ControlSequence,
    system: &SpinSystem,
    goal: &Operator,
    mode: CouplingMode,
    distortion: &Distortion,
    h: f64,
) -> Result<Array3<f64>> {
    let quads = to_quadratures(controls);
    let (n_channels, n_steps, _) = quads.dim();
    let mut gradient = Array3::zeros((n_channels, n_steps, 2));
    for c in 0..n_channels {
        for k in 0..n_steps {
            for q in 0..2 {
                let mut probe = quads.clone();
                probe[[c, k, q]] += h;
                let plus = fitness_distorted(
                    &from_quadratures(&probe, controls.channels(), controls.dt())?,
                    system,
                    goal,
                    mode,
                    distortion,
                )?;
                probe[[c, k, q]] -= 2.0 * h;
                let minus = fitness_distorted(
                    &from_quadratures(&probe, controls.channels(), controls.dt())?,
                    system,
                    goal,
                    mode,
                    distortion,
                )?;
                gradient[[c, k, q]] = (plus - minus) / (2.0 * h);
            }
        }
    }
    Ok(gradient)
}
