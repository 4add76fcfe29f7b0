//! Standard multi-spin gates as dense unitaries, addressed by spin index
//! under the crate convention that spin 0 is the most significant tensor
//! factor.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::algebra::Operator;
use crate::error::{Error, Result};

/// Basis-state permutation gate: maps `|b⟩ → |f(b)⟩`. `f` must be a
/// bijection on `0..2^n`.
pub fn permutation_gate(n_spins: usize, f: impl Fn(usize) -> usize) -> Operator {
    let dim = 1usize << n_spins;
    let mut m = Array2::<C64>::zeros((dim, dim));
    for b in 0..dim {
        let target = f(b);
        debug_assert!(target < dim);
        m[[target, b]] = C64::new(1.0, 0.0);
    }
    debug_assert!(
        crate::algebra::unitarity_deviation(&m) < 1e-12,
        "permutation map is not a bijection"
    );
    Operator(m)
}

fn bit(n_spins: usize, spin: usize) -> usize {
    n_spins - 1 - spin
}

fn check_distinct(n_spins: usize, spins: &[usize]) -> Result<()> {
    for (k, &s) in spins.iter().enumerate() {
        if s >= n_spins {
            return Err(Error::SpinIndexOutOfRange {
                index: s,
                n_spins,
            });
        }
        if spins[..k].contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "gate spins must be distinct, got {spins:?}"
            )));
        }
    }
    Ok(())
}

/// CNOT: flips `target` when `control` is |1⟩.
pub fn cnot(n_spins: usize, control: usize, target: usize) -> Result<Operator> {
    check_distinct(n_spins, &[control, target])?;
    let (bc, bt) = (bit(n_spins, control), bit(n_spins, target));
    Ok(permutation_gate(n_spins, |b| {
        if (b >> bc) & 1 == 1 {
            b ^ (1 << bt)
        } else {
            b
        }
    }))
}

/// CNOTNOT: flips both targets when `control` is |1⟩.
pub fn cnotnot(n_spins: usize, control: usize, t1: usize, t2: usize) -> Result<Operator> {
    check_distinct(n_spins, &[control, t1, t2])?;
    let (bc, b1, b2) = (bit(n_spins, control), bit(n_spins, t1), bit(n_spins, t2));
    Ok(permutation_gate(n_spins, |b| {
        if (b >> bc) & 1 == 1 {
            b ^ (1 << b1) ^ (1 << b2)
        } else {
            b
        }
    }))
}

/// Toffoli: flips `target` when both controls are |1⟩.
pub fn toffoli(n_spins: usize, c1: usize, c2: usize, target: usize) -> Result<Operator> {
    check_distinct(n_spins, &[c1, c2, target])?;
    let (b1, b2, bt) = (bit(n_spins, c1), bit(n_spins, c2), bit(n_spins, target));
    Ok(permutation_gate(n_spins, |b| {
        if (b >> b1) & 1 == 1 && (b >> b2) & 1 == 1 {
            b ^ (1 << bt)
        } else {
            b
        }
    }))
}

/// SWAP of two spins.
pub fn swap(n_spins: usize, a: usize, b_spin: usize) -> Result<Operator> {
    check_distinct(n_spins, &[a, b_spin])?;
    let (ba, bb) = (bit(n_spins, a), bit(n_spins, b_spin));
    Ok(permutation_gate(n_spins, |b| {
        let (x, y) = ((b >> ba) & 1, (b >> bb) & 1);
        if x != y {
            b ^ (1 << ba) ^ (1 << bb)
        } else {
            b
        }
    }))
}

/// Controlled-Z: phase −1 on |…1…1…⟩ of the pair. Symmetric in its spins.
pub fn cz(n_spins: usize, a: usize, b_spin: usize) -> Result<Operator> {
    check_distinct(n_spins, &[a, b_spin])?;
    let (ba, bb) = (bit(n_spins, a), bit(n_spins, b_spin));
    let dim = 1usize << n_spins;
    let mut m = Array2::<C64>::eye(dim);
    for idx in 0..dim {
        if (idx >> ba) & 1 == 1 && (idx >> bb) & 1 == 1 {
            m[[idx, idx]] = C64::new(-1.0, 0.0);
        }
    }
    Ok(Operator(m))
}

/// Looks a gate up by name for file-driven workflows. Two-spin names take
/// (control, target) or the symmetric pair; `toffoli`/`cnotnot` take three.
pub fn named_gate(name: &str, n_spins: usize, spins: &[usize]) -> Result<Operator> {
    let want = |k: usize| -> Result<()> {
        if spins.len() != k {
            return Err(Error::InvalidArgument(format!(
                "gate '{name}' takes {k} spin indices, got {}",
                spins.len()
            )));
        }
        Ok(())
    };
    match name {
        "cnot" => {
            want(2)?;
            cnot(n_spins, spins[0], spins[1])
        }
        "cz" => {
            want(2)?;
            cz(n_spins, spins[0], spins[1])
        }
        "swap" => {
            want(2)?;
            swap(n_spins, spins[0], spins[1])
        }
        "toffoli" => {
            want(3)?;
            toffoli(n_spins, spins[0], spins[1], spins[2])
        }
        "cnotnot" => {
            want(3)?;
            cnotnot(n_spins, spins[0], spins[1], spins[2])
        }
        other => Err(Error::InvalidArgument(format!("unknown gate '{other}'"))),
    }
}
