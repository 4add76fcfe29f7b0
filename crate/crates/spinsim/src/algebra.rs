//! Dense complex linear algebra: Pauli operators and embeddings, Kronecker
//! products, Hermitian matrix exponentials and their directional derivatives.
//!
//! Conventions used throughout the crate:
//! * spin 0 is the most significant tensor factor, so basis index
//!   `b = b_0 b_1 … b_{N-1}` in binary with `b_0` the leftmost bit;
//! * `σ_z |0⟩ = +|0⟩`;
//! * ladder operators carry no 1/2: `σ_± = σ_x ± i σ_y`.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{EighInto, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tolerances::{HERMITICITY_TOL, MAX_SPINS, UNITARITY_TOL};

/// Dense complex square matrix acting on a register of spins.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(pub Array2<C64>);

impl Operator {
    pub fn identity(dim: usize) -> Self {
        Operator(Array2::eye(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Operator(Array2::zeros((dim, dim)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.0
    }

    pub fn dagger(&self) -> Operator {
        Operator(dagger(&self.0))
    }

    /// Entrywise Hermiticity check, relative to the largest entry.
    pub fn is_hermitian(&self) -> bool {
        hermiticity_deviation(&self.0) <= HERMITICITY_TOL * max_abs(&self.0).max(1.0)
    }

    /// Entrywise check of `U^dag U = I`.
    pub fn is_unitary(&self) -> bool {
        unitarity_deviation(&self.0) <= UNITARITY_TOL
    }

    /// True when `self` and `other` are equal up to a global phase.
    pub fn approx_eq_up_to_phase(&self, other: &Operator, tol: f64) -> bool {
        phase_aligned_distance(&self.0, &other.0) <= tol
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(self.0.dot(&rhs.0))
    }
}

/// Single-spin Pauli axis selector, including the ladder combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    /// `σ_+ = σ_x + i σ_y`
    Plus,
    /// `σ_- = σ_x - i σ_y`
    Minus,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> Array2<C64> {
    ndarray::array![[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]]
}

pub fn pauli_y() -> Array2<C64> {
    ndarray::array![[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]]
}

pub fn pauli_z() -> Array2<C64> {
    ndarray::array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]]
}

pub fn pauli(axis: PauliAxis) -> Array2<C64> {
    match axis {
        PauliAxis::X => pauli_x(),
        PauliAxis::Y => pauli_y(),
        PauliAxis::Z => pauli_z(),
        PauliAxis::Plus => &pauli_x() + &(pauli_y().mapv(|v| v * c(0., 1.))),
        PauliAxis::Minus => &pauli_x() - &(pauli_y().mapv(|v| v * c(0., 1.))),
    }
}

/// Kronecker product of two dense matrices.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ma, na) = a.dim();
    let (mb, nb) = b.dim();
    let mut out = Array2::zeros((ma * mb, na * nb));
    for i in 0..ma {
        for j in 0..na {
            let aij = a[[i, j]];
            if aij != c(0., 0.) {
                out.slice_mut(s![i * mb..(i + 1) * mb, j * nb..(j + 1) * nb])
                    .assign(&b.mapv(|v| v * aij));
            }
        }
    }
    out
}

/// Embed a single-spin Pauli operator at position `spin` of an `n_spins`
/// register (spin 0 = most significant factor).
pub fn pauli_embed(axis: PauliAxis, spin: usize, n_spins: usize) -> Result<Operator> {
    if n_spins == 0 {
        return Err(Error::InvalidArgument("n_spins must be at least 1".into()));
    }
    if n_spins > MAX_SPINS {
        return Err(Error::DimensionCapExceeded {
            requested: n_spins,
            cap: MAX_SPINS,
        });
    }
    if spin >= n_spins {
        return Err(Error::SpinIndexOutOfRange {
            index: spin,
            n_spins,
        });
    }
    let left = Array2::<C64>::eye(1 << spin);
    let right = Array2::<C64>::eye(1 << (n_spins - spin - 1));
    Ok(Operator(kron(&kron(&left, &pauli(axis)), &right)))
}

/// Tensor product of single-spin gates with identities on the remaining
/// slots. Each spin may appear at most once.
pub fn embed_gates(n_spins: usize, gates: &[(usize, &Array2<C64>)]) -> Result<Array2<C64>> {
    if n_spins == 0 || n_spins > MAX_SPINS {
        return Err(Error::InvalidArgument(format!(
            "n_spins {n_spins} outside 1..={MAX_SPINS}"
        )));
    }
    let mut seen = vec![false; n_spins];
    for &(spin, gate) in gates {
        if spin >= n_spins {
            return Err(Error::SpinIndexOutOfRange {
                index: spin,
                n_spins,
            });
        }
        if gate.dim() != (2, 2) {
            return Err(Error::DimensionMismatch(
                "embedded gates must be 2x2".into(),
            ));
        }
        if std::mem::replace(&mut seen[spin], true) {
            return Err(Error::InvalidArgument(format!(
                "spin {spin} listed twice in embed_gates"
            )));
        }
    }
    let eye = Array2::<C64>::eye(2);
    let mut out = Array2::<C64>::eye(1);
    for slot in 0..n_spins {
        let gate = gates
            .iter()
            .find(|(spin, _)| *spin == slot)
            .map(|(_, g)| *g)
            .unwrap_or(&eye);
        out = kron(&out, gate);
    }
    Ok(out)
}

/// Single-qubit rotation about the axis `(cos φ, sin φ, 0)` by `angle`:
/// `R_φ(θ) = exp(-i θ/2 (cos φ σ_x + sin φ σ_y))`.
pub fn rotation_xy(phase: f64, angle: f64) -> Array2<C64> {
    let (half_sin, half_cos) = ((angle / 2.0).sin(), (angle / 2.0).cos());
    let e_minus = c(0.0, -phase).exp();
    let e_plus = c(0.0, phase).exp();
    ndarray::array![
        [c(half_cos, 0.), e_minus * c(0., -half_sin)],
        [e_plus * c(0., -half_sin), c(half_cos, 0.)]
    ]
}

/// `R_z(θ) = exp(-i θ/2 σ_z)`.
pub fn rotation_z(angle: f64) -> Array2<C64> {
    ndarray::array![
        [c(0.0, -angle / 2.0).exp(), c(0., 0.)],
        [c(0., 0.), c(0.0, angle / 2.0).exp()]
    ]
}

/// Diagonal operator applying per-spin z rotations `R_z(angles[i])`.
pub fn rotation_z_all(angles: &[f64]) -> Array2<C64> {
    let n = angles.len();
    let dim = 1usize << n;
    let mut diag = Array1::<C64>::ones(dim);
    for (spin, &angle) in angles.iter().enumerate() {
        let bit = n - spin - 1;
        for (b, v) in diag.iter_mut().enumerate() {
            let sign = if (b >> bit) & 1 == 0 { -1.0 } else { 1.0 };
            *v *= c(0.0, sign * angle / 2.0).exp();
        }
    }
    Array2::from_diag(&diag)
}

/// Eigendecomposition `H = V Λ V^dag` of a complex Hermitian matrix, with
/// eigenvalues ascending and eigenvectors as the columns of `V`.
///
/// ndarray-linalg 0.16 feeds row-major buffers to LAPACK by swapping axes,
/// which hands LAPACK the transpose — for complex Hermitian input that is the
/// conjugate matrix, so the returned eigenvectors come back conjugated.
/// Passing the conjugate (in a fresh row-major copy, pinning the code path)
/// makes LAPACK see `H` itself. `eigh_reconstructs_hermitian_input` guards
/// this against upstream behaviour changes.
pub fn eigh_c(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let conj = h.mapv(|v| v.conj());
    let (vals, vecs) = conj.eigh_into(UPLO::Lower)?;
    Ok((vals, vecs))
}

/// `exp(-i H t)` for Hermitian `H`, via eigendecomposition.
pub fn expm_minus_i(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh_c(h)?;
    let phases = vals.mapv(|v| c(0.0, -v * t).exp());
    let scaled = &vecs * &phases; // scales column k by phases[k]
    Ok(scaled.dot(&dagger(&vecs)))
}

/// Propagator `U = exp(-i H dt)` together with its exact directional
/// derivatives `dU/du` for Hamiltonian perturbations `H + u D_k`.
///
/// Uses the spectral (Daleckii–Krein) formula: with `H = V Λ V^dag`,
/// `dU[D] = V (W ∘ Γ) V^dag` where `W = V^dag D V` and
/// `Γ_ab = -i dt · exp(-i (λ_a+λ_b) dt / 2) · sinc((λ_a-λ_b) dt / 2)`.
pub fn propagator_with_derivatives(
    h: &Array2<C64>,
    dt: f64,
    directions: &[&Array2<C64>],
) -> Result<(Array2<C64>, Vec<Array2<C64>>)> {
    let (vals, vecs) = eigh_c(h)?;
    let vecs_h = dagger(&vecs);
    let phases = vals.mapv(|v| c(0.0, -v * dt).exp());
    let u = (&vecs * &phases).dot(&vecs_h);

    let n = vals.len();
    let mut gamma = Array2::<C64>::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            let mean = 0.5 * (vals[a] + vals[b]) * dt;
            let half_gap = 0.5 * (vals[a] - vals[b]) * dt;
            gamma[[a, b]] = c(0.0, -dt) * c(0.0, -mean).exp() * sinc(half_gap);
        }
    }

    let mut derivs = Vec::with_capacity(directions.len());
    for d in directions {
        let w = vecs_h.dot(*d).dot(&vecs);
        derivs.push(vecs.dot(&(&w * &gamma)).dot(&vecs_h));
    }
    Ok((u, derivs))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|v| v.conj())
}

pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    &a.dot(b) - &b.dot(a)
}

pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn frobenius_norm(m: &Array2<C64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `tr(a^dag b)`.
pub fn inner(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// Remove the trace component: `m - tr(m)/dim * I`.
pub fn traceless(m: &Array2<C64>) -> Array2<C64> {
    let dim = m.nrows();
    let shift = trace(m) / c(dim as f64, 0.0);
    let mut out = m.clone();
    for i in 0..dim {
        out[[i, i]] -= shift;
    }
    out
}

pub fn hermiticity_deviation(m: &Array2<C64>) -> f64 {
    max_abs_diff(m, &dagger(m))
}

pub fn unitarity_deviation(m: &Array2<C64>) -> f64 {
    let gram = dagger(m).dot(m);
    max_abs_diff(&gram, &Array2::eye(m.nrows()))
}

/// Entrywise distance between `a` and `b` after aligning the global phase of
/// `a` to best match `b`.
pub fn phase_aligned_distance(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let overlap = inner(a, b);
    if overlap.norm() < f64::EPSILON {
        return max_abs_diff(a, b);
    }
    let phase = overlap / overlap.norm();
    let aligned = a.mapv(|v| v * phase);
    max_abs_diff(&aligned, b)
}

/// Infinity norm (max absolute row sum); cheap upper bound on the spectral
/// norm used for step-size sanity checks.
pub fn norm_inf(m: &Array2<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for row in m.rows() {
        worst = worst.max(row.iter().map(|v| v.norm()).sum());
    }
    worst
}


/// Seeded dense Hermitian matrix with entries of order 1 — shared test input.
#[cfg(test)]
pub(crate) fn random_hermitian(dim: usize, seed: u64) -> Array2<C64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            m[[i, j]] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let h = &m + &dagger(&m);
    h.mapv(|v| v * C64::new(0.5, 0.0))
}
