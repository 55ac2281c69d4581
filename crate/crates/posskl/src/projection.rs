//! Closed-form Bregman projections (negative-entropy geometry) onto single
//! constraint atoms.
//!
//! Every projector is scale invariant: projecting `t * z` returns the same
//! point as projecting `z` for any `t > 0`, so callers may feed arbitrarily
//! rescaled positive weights. The conjugate-gradient map `y -> exp(y - 1)` of
//! the underlying algorithm is never materialized; it is folded algebraically
//! into these closed forms.

use crate::error::{Error, Result};
use crate::feasible::ConstraintAtom;
use crate::simplex::{normalize, PosVec, ProbVec};

/// Project onto `{p : sum_{k in A} p_k >= b}` with `b < 1`.
///
/// With `s` the relative weight of `A` in `z`: the normalized `z` is returned
/// unchanged when `s >= b`; otherwise mass is shifted so the constraint holds
/// with equality, scaling `A` by `b/s` and its complement by `(1-b)/(1-s)`.
pub fn project_subset(z: &PosVec, indices: &[usize], bound: f64) -> Result<ProbVec> {
    if !bound.is_finite() || bound >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "subset bound {bound} must be < 1"
        )));
    }
    let n = z.len();
    let mut on_set = vec![false; n];
    for &k in indices {
        if k >= n {
            return Err(Error::IndexOutOfRange(k, n));
        }
        on_set[k] = true;
    }
    let l1 = z.l1_norm();
    let mass_in: f64 = z
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(k, _)| on_set[*k])
        .map(|(_, &zk)| zk)
        .sum();
    // complement mass summed directly: l1 - mass_in cancels catastrophically
    // when the subset carries almost all weight
    let mass_out: f64 = z
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(k, _)| !on_set[*k])
        .map(|(_, &zk)| zk)
        .sum();
    let s = mass_in / l1;
    if s >= bound {
        return normalize(z);
    }
    let scale_in = bound / s;
    let scale_out = (1.0 - bound) / (mass_out / l1);
    let values: Vec<f64> = z
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &zk)| {
            let scale = if on_set[k] { scale_in } else { scale_out };
            scale * zk / l1
        })
        .collect();
    ProbVec::new(values)
}

/// The unique root `E > 1` of `omega (1 - delta) x^2 - u delta x
/// - omega' (1 + delta)`, which solves
/// `(omega x - omega' / x) / (omega x + omega' / x + u) = delta`.
///
/// The root is evaluated with the sign-aware quadratic formula; the branch is
/// chosen so no catastrophic cancellation occurs when `u delta` dominates.
pub fn gap_root(omega: f64, omega_prime: f64, u: f64, delta: f64) -> Result<f64> {
    if !(omega > 0.0 && omega < 1.0 && omega_prime > 0.0 && omega_prime < 1.0) {
        return Err(Error::InvalidParameter(
            "omega and omega' must lie in (0, 1)".into(),
        ));
    }
    if !u.is_finite() || u < 0.0 {
        return Err(Error::InvalidParameter("u must be >= 0".into()));
    }
    if !(delta > -1.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside (-1, 1)"
        )));
    }
    if omega - omega_prime >= delta {
        return Err(Error::InvalidParameter(
            "inactive case: omega - omega' must be < delta".into(),
        ));
    }
    let a = omega * (1.0 - delta);
    let disc = (u * delta).powi(2) + 4.0 * a * omega_prime * (1.0 + delta);
    let sqrt_disc = disc.sqrt();
    let root = if delta > 0.0 {
        (u * delta + sqrt_disc) / (2.0 * a)
    } else {
        2.0 * omega_prime * (1.0 + delta) / (sqrt_disc - u * delta)
    };
    Ok(root)
}

/// Project onto `{p : p_i - p_j >= delta}` with `-1 < delta < 1`.
pub fn project_gap(z: &PosVec, i: usize, j: usize, delta: f64) -> Result<ProbVec> {
    let n = z.len();
    if i == j {
        return Err(Error::InvalidParameter("gap needs two indices".into()));
    }
    if i >= n {
        return Err(Error::IndexOutOfRange(i, n));
    }
    if j >= n {
        return Err(Error::IndexOutOfRange(j, n));
    }
    if !(delta > -1.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside (-1, 1)"
        )));
    }
    let v = z.as_slice();
    let l1 = z.l1_norm();
    let s = (v[i] - v[j]) / l1;
    if s >= delta {
        return normalize(z);
    }
    // sum the bystander mass directly rather than as l1 - v[i] - v[j], which
    // cancels when the pair carries almost all weight
    let u_abs: f64 = v
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i && *k != j)
        .map(|(_, &zk)| zk)
        .sum();
    let e = gap_root(v[i] / l1, v[j] / l1, u_abs / l1, delta)?;
    let d = v[i] * e + v[j] / e + u_abs;
    let values: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(k, &zk)| {
            if k == i {
                e * zk / d
            } else if k == j {
                zk / (e * d)
            } else {
                zk / d
            }
        })
        .collect();
    ProbVec::new(values)
}

/// Project onto a mixed-sign halfspace `{p : <p, v> >= b}` with coefficients
/// in `{-1, 0, 1}`, at least one `+1` and one `-1`.
///
/// Same root equation as [`project_gap`] with the two singleton weights
/// replaced by the total weights of the positive and negative coefficient
/// sets.
fn project_signed_halfspace(z: &PosVec, coeffs: &[f64], bound: f64) -> Result<ProbVec> {
    let v = z.as_slice();
    let l1 = z.l1_norm();
    let w_pos: f64 = v
        .iter()
        .zip(coeffs)
        .filter(|(_, &c)| c == 1.0)
        .map(|(&zk, _)| zk)
        .sum();
    let w_neg: f64 = v
        .iter()
        .zip(coeffs)
        .filter(|(_, &c)| c == -1.0)
        .map(|(&zk, _)| zk)
        .sum();
    let s = (w_pos - w_neg) / l1;
    if s >= bound {
        return normalize(z);
    }
    let w_zero: f64 = v
        .iter()
        .zip(coeffs)
        .filter(|(_, &c)| c == 0.0)
        .map(|(&zk, _)| zk)
        .sum();
    let e = gap_root(w_pos / l1, w_neg / l1, w_zero / l1, bound)?;
    let d = w_pos * e + w_neg / e + w_zero;
    let values: Vec<f64> = v
        .iter()
        .zip(coeffs)
        .map(|(&zk, &c)| {
            if c == 1.0 {
                e * zk / d
            } else if c == -1.0 {
                zk / (e * d)
            } else {
                zk / d
            }
        })
        .collect();
    ProbVec::new(values)
}

/// Whether projecting `z` onto the atom takes the active branch (the
/// normalized point violates the constraint). Mirrors the branch tests of the
/// individual projectors.
pub(crate) fn is_active(z: &PosVec, atom: &ConstraintAtom) -> bool {
    let v = z.as_slice();
    let l1 = z.l1_norm();
    match atom {
        ConstraintAtom::Subset { indices, bound } => {
            indices.iter().map(|&k| v[k]).sum::<f64>() / l1 < *bound
        }
        ConstraintAtom::Gap {
            winner,
            loser,
            delta,
        } => (v[*winner] - v[*loser]) / l1 < *delta,
        ConstraintAtom::Halfspace { coeffs, bound } => {
            coeffs.iter().zip(v).map(|(c, x)| c * x).sum::<f64>() / l1 < *bound
        }
    }
}

/// Dispatch a single-atom projection. Idempotent: projecting the output again
/// returns it unchanged up to normalization.
pub fn project_atom(z: &PosVec, atom: &ConstraintAtom) -> Result<ProbVec> {
    match atom {
        ConstraintAtom::Subset { indices, bound } => project_subset(z, indices, *bound),
        ConstraintAtom::Gap {
            winner,
            loser,
            delta,
        } => project_gap(z, *winner, *loser, *delta),
        ConstraintAtom::Halfspace { coeffs, bound } => {
            if coeffs.len() != z.len() {
                return Err(Error::LengthMismatch(coeffs.len(), z.len()));
            }
            let has_pos = coeffs.contains(&1.0);
            let has_neg = coeffs.contains(&-1.0);
            match (has_pos, has_neg) {
                (true, true) => project_signed_halfspace(z, coeffs, *bound),
                (true, false) => {
                    let indices: Vec<usize> = coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c == 1.0)
                        .map(|(k, _)| k)
                        .collect();
                    project_subset(z, &indices, *bound)
                }
                (false, true) => {
                    // <p, -1_B> >= b is sum over the complement of B >= 1 + b
                    let indices: Vec<usize> = coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c == 0.0)
                        .map(|(k, _)| k)
                        .collect();
                    if indices.is_empty() {
                        // constraint is -1 >= bound: inactive for any valid atom
                        return normalize(z);
                    }
                    project_subset(z, &indices, 1.0 + bound)
                }
                (false, false) => Err(Error::InvalidParameter("all-zero halfspace".into())),
            }
        }
    }
}
