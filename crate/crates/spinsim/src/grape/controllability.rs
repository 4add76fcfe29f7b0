//! Lie-algebraic controllability: the dimension of the dynamical algebra
//! generated by the drift and control Hamiltonians.
//!
//! Propagators reachable by modulating the controls form the group
//! `exp(L)`, where `L` is the real Lie algebra generated by
//! `{iH_drift, iH_c...}`. Dimension `4^N − 1` (all of su(2^N), traceless
//! part) means any unitary can be produced given enough bandwidth and time.
//!
//! Internally the algebra is represented by Hermitian matrices (`H` standing
//! for the anti-Hermitian element `iH`), with bracket `(A, B) ↦ i[A, B]`
//! — the Hermitian-preserving image of the commutator — and the real
//! Hilbert–Schmidt inner product `⟨A, B⟩ = Re Tr(A†B)`.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::algebra::{commutator, inner, Operator};
use crate::error::{Error, Result};
use crate::tolerances::RANK_TOL;

/// `i[A, B]`, Hermitian whenever `A` and `B` are.
fn bracket(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    commutator(a, b).mapv(|v| v * C64::new(0.0, 1.0))
}

/// Removes the trace component, leaving the su(d) part.
fn traceless(m: &Array2<C64>) -> Array2<C64> {
    let dim = m.nrows();
    let mean = m.diag().sum() / C64::new(dim as f64, 0.0);
    let mut out = m.clone();
    for i in 0..dim {
        out[[i, i]] -= mean;
    }
    out
}

fn hs_norm(m: &Array2<C64>) -> f64 {
    inner(m, m).re.max(0.0).sqrt()
}

/// Orthogonal projection residual of `candidate` against an orthonormal
/// `basis`, together with the candidate's pre-projection norm.
fn project_out(candidate: &mut Array2<C64>, basis: &[Array2<C64>]) {
    // Two modified Gram–Schmidt sweeps keep orthogonality to machine
    // precision even for nearly dependent candidates.
    for _ in 0..2 {
        for b in basis {
            let coefficient = inner(b, candidate).re;
            if coefficient != 0.0 {
                candidate.zip_mut_with(b, |c, e| *c -= C64::new(coefficient, 0.0) * e);
            }
        }
    }
}

/// Dimension of the real Lie algebra generated by the drift and control
/// Hamiltonians.
///
/// All operators must be Hermitian and share one dimension. The system is
/// fully controllable (any goal unitary reachable up to global phase) when
/// the returned dimension is `dim² − 1`.
pub fn controllability_rank(h_drift: &Operator, h_controls: &[Operator]) -> Result<usize> {
    let dim = h_drift.dim();
    if dim < 2 {
        return Err(Error::InvalidArgument(
            "controllability needs an operator dimension of at least 2".into(),
        ));
    }
    for op in std::iter::once(h_drift).chain(h_controls) {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "operator dimension {} vs {}",
                op.dim(),
                dim
            )));
        }
        if !op.is_hermitian() {
            return Err(Error::NotHermitian {
                deviation: crate::algebra::hermiticity_deviation(op.matrix()),
            });
        }
    }

    // Overall scale for the rank threshold: generators define the unit.
    let scale = std::iter::once(h_drift)
        .chain(h_controls)
        .map(|op| hs_norm(op.matrix()))
        .fold(0.0f64, f64::max)
        .max(1e-300);

    let max_rank = dim * dim - 1;
    let mut basis: Vec<Array2<C64>> = Vec::new();
    let admit = |mut m: Array2<C64>, basis: &mut Vec<Array2<C64>>| -> bool {
        let reference = hs_norm(&m).max(scale);
        project_out(&mut m, basis);
        let residual = hs_norm(&m);
        if residual > RANK_TOL * reference {
            basis.push(m.mapv(|v| v / C64::new(residual, 0.0)));
            true
        } else {
            false
        }
    };

    // Seed with the traceless generators, then close under brackets with the
    // generator set. Right-nested brackets of generators span the full
    // generated algebra, so pairwise brackets among basis elements are not
    // needed.
    let generators: Vec<Array2<C64>> = std::iter::once(h_drift)
        .chain(h_controls)
        .map(|op| traceless(op.matrix()))
        .collect();
    let mut frontier: Vec<Array2<C64>> = Vec::new();
    for g in &generators {
        if admit(g.clone(), &mut basis) {
            frontier.push(basis.last().expect("just pushed").clone());
        }
    }
    while let Some(element) = frontier.pop() {
        if basis.len() >= max_rank {
            break;
        }
        for g in &generators {
            if admit(bracket(&element, g), &mut basis) {
                frontier.push(basis.last().expect("just pushed").clone());
                if basis.len() >= max_rank {
                    break;
                }
            }
        }
    }
    Ok(basis.len())
}

/// True when the algebra spans all of su(dim): every unitary on the register
/// is reachable up to global phase.
pub fn is_universal(rank: usize, dim: usize) -> bool {
    rank >= dim * dim - 1
}
