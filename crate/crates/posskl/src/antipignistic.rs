//! The bijective probability-possibility transformation and the induced
//! possibility/necessity set functions.
//!
//! The forward map sends a probability vector `p` to the possibility vector
//! `pi_k = sum_j min(p_j, p_k)`; the reverse map sorts the levels descending
//! and accumulates `(pi_r - pi_{r+1}) / r` suffixes. The two maps are inverse
//! to each other on strictly positive vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::ProbVec;

/// A normalized possibility distribution: entries in `(0, 1]` with the
/// maximum equal to 1 exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PossVec {
    values: Vec<f64>,
}

impl PossVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if values.iter().any(|&v| v <= 0.0) {
            return Err(Error::NotStrictlyPositive);
        }
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max != 1.0 {
            return Err(Error::NotNormalized);
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl TryFrom<Vec<f64>> for PossVec {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<PossVec> for Vec<f64> {
    fn from(pi: PossVec) -> Self {
        pi.values
    }
}

/// Permutation sorting `values` in nonincreasing order, ties broken by
/// ascending original index. `perm[r]` is the original index of rank `r`.
pub fn descending_permutation(values: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..values.len()).collect();
    perm.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("finite values")
            .then(a.cmp(&b))
    });
    perm
}

/// Possibility degrees induced by a probability vector:
/// `pi_k = sum_j min(p_j, p_k)`.
///
/// Zero probabilities map to zero possibilities, so the result is a valid
/// [`PossVec`] only when `p` is strictly positive; the raw values are
/// returned so callers can decide. The entries attaining the maximum of `p`
/// carry the full mass and are snapped to exactly 1.
pub fn prob_to_poss(p: &ProbVec) -> Vec<f64> {
    let v = p.as_slice();
    let pmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<f64> = v
        .iter()
        .map(|&pk| v.iter().map(|&pj| pj.min(pk)).sum())
        .collect();
    for (k, &pk) in v.iter().enumerate() {
        if pk == pmax {
            debug_assert!((pi[k] - 1.0).abs() < 1e-9);
            pi[k] = 1.0;
        }
    }
    pi
}

/// Reverse antipignistic map. After sorting the levels descending,
/// `p_{sigma(r)} = sum_{j=r}^{n} (pi_j - pi_{j+1}) / j` with `pi_{n+1} = 0`.
///
/// The output is strictly positive, sums to one, and `prob_to_poss` maps it
/// back to `pi`.
pub fn poss_to_prob(pi: &PossVec) -> Result<ProbVec> {
    let sigma = descending_permutation(pi.as_slice());
    let n = pi.len();
    let tilde: Vec<f64> = sigma.iter().map(|&k| pi.as_slice()[k]).collect();
    // suffix accumulation, backwards
    let mut sorted_p = vec![0.0; n];
    let mut acc = 0.0;
    for r in (0..n).rev() {
        let next = if r + 1 < n { tilde[r + 1] } else { 0.0 };
        acc += (tilde[r] - next) / (r + 1) as f64;
        sorted_p[r] = acc;
    }
    let mut values = vec![0.0; n];
    for (r, &k) in sigma.iter().enumerate() {
        values[k] = sorted_p[r];
    }
    ProbVec::new(values)
}

fn check_event(n: usize, event: &[usize]) -> Result<()> {
    for &k in event {
        if k >= n {
            return Err(Error::IndexOutOfRange(k, n));
        }
    }
    Ok(())
}

/// `Pi(A) = max over A of pi`, with `Pi(empty) = 0`.
pub fn possibility_of_event(pi: &PossVec, event: &[usize]) -> Result<f64> {
    check_event(pi.len(), event)?;
    Ok(event.iter().map(|&k| pi.as_slice()[k]).fold(0.0, f64::max))
}

/// `N(A) = 1 - Pi(complement of A)`.
pub fn necessity_of_event(pi: &PossVec, event: &[usize]) -> Result<f64> {
    check_event(pi.len(), event)?;
    let mut in_event = vec![false; pi.len()];
    for &k in event {
        in_event[k] = true;
    }
    let complement: Vec<usize> = (0..pi.len()).filter(|&k| !in_event[k]).collect();
    Ok(1.0 - possibility_of_event(pi, &complement)?)
}
