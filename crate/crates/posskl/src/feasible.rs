//! Construction of the admissible convex set induced by a possibility
//! distribution: nested dominance constraints, adjacent gap bounds in the
//! possibility order, the stacked linear system, and the violation metric.
//!
//! Generic constraint families (subset inequalities and pairwise gaps not
//! derived from a possibility distribution) are supported through
//! [`build_generic_set`], certified non-empty by an explicit witness.

use serde::{Deserialize, Serialize};

use crate::antipignistic::{descending_permutation, poss_to_prob, PossVec};
use crate::error::{Error, Result};
use crate::simplex::ProbVec;

/// A point is reported feasible when its maximal violation does not exceed
/// this threshold; separates floating-point noise from genuine violation.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Slack accepted when validating caller-supplied gap bounds against the
/// reference gaps, so that bounds computed by an equivalent route pass.
const BOUND_SLACK: f64 = 1e-12;

/// One closed halfspace over the simplex, with closed-form projector
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintAtom {
    /// `sum_{k in indices} p_k >= bound`
    Subset { indices: Vec<usize>, bound: f64 },
    /// `p_winner - p_loser >= delta`
    Gap {
        winner: usize,
        loser: usize,
        delta: f64,
    },
    /// `<p, coeffs> >= bound` with coefficients in `{-1, 0, 1}`
    Halfspace { coeffs: Vec<f64>, bound: f64 },
}

impl ConstraintAtom {
    /// Check internal consistency against a class count `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ConstraintAtom::Subset { indices, bound } => {
                if indices.is_empty() || indices.len() >= n {
                    return Err(Error::InvalidParameter(
                        "subset atom needs a non-empty proper subset".into(),
                    ));
                }
                let mut seen = vec![false; n];
                for &k in indices {
                    if k >= n {
                        return Err(Error::IndexOutOfRange(k, n));
                    }
                    if seen[k] {
                        return Err(Error::InvalidParameter("duplicate subset index".into()));
                    }
                    seen[k] = true;
                }
                if !bound.is_finite() || *bound < 0.0 || *bound >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "subset bound {bound} outside [0, 1)"
                    )));
                }
            }
            ConstraintAtom::Gap {
                winner,
                loser,
                delta,
            } => {
                if winner == loser {
                    return Err(Error::InvalidParameter("gap atom needs two indices".into()));
                }
                if *winner >= n {
                    return Err(Error::IndexOutOfRange(*winner, n));
                }
                if *loser >= n {
                    return Err(Error::IndexOutOfRange(*loser, n));
                }
                if !delta.is_finite() || *delta <= -1.0 || *delta >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "gap threshold {delta} outside (-1, 1)"
                    )));
                }
            }
            ConstraintAtom::Halfspace { coeffs, bound } => {
                if coeffs.len() != n {
                    return Err(Error::LengthMismatch(coeffs.len(), n));
                }
                if coeffs.iter().any(|&c| c != -1.0 && c != 0.0 && c != 1.0) {
                    return Err(Error::InvalidParameter(
                        "halfspace coefficients must lie in {-1, 0, 1}".into(),
                    ));
                }
                if coeffs.iter().all(|&c| c == 0.0) {
                    return Err(Error::InvalidParameter("all-zero halfspace".into()));
                }
                if !bound.is_finite() || *bound >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "halfspace bound {bound} must be finite and < 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `<a, p> - b`; negative means violated by that amount.
    pub fn margin(&self, p: &[f64]) -> f64 {
        match self {
            ConstraintAtom::Subset { indices, bound } => {
                indices.iter().map(|&k| p[k]).sum::<f64>() - bound
            }
            ConstraintAtom::Gap {
                winner,
                loser,
                delta,
            } => p[*winner] - p[*loser] - delta,
            ConstraintAtom::Halfspace { coeffs, bound } => {
                coeffs.iter().zip(p).map(|(c, x)| c * x).sum::<f64>() - bound
            }
        }
    }

    /// The atom written as one row `<a, p> >= b` of a linear system.
    pub fn row(&self, n: usize) -> (Vec<f64>, f64) {
        match self {
            ConstraintAtom::Subset { indices, bound } => {
                let mut a = vec![0.0; n];
                for &k in indices {
                    a[k] = 1.0;
                }
                (a, *bound)
            }
            ConstraintAtom::Gap {
                winner,
                loser,
                delta,
            } => {
                let mut a = vec![0.0; n];
                a[*winner] = 1.0;
                a[*loser] = -1.0;
                (a, *delta)
            }
            ConstraintAtom::Halfspace { coeffs, bound } => (coeffs.clone(), *bound),
        }
    }
}

/// Sort permutation, sorted levels, gap bounds and rank classification of a
/// possibility-derived set. Absent for generic constraint sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PossibilityStructure {
    /// `sigma[r]` = original index of rank `r` (levels nonincreasing).
    pub sigma: Vec<usize>,
    /// Sorted levels, `tilde_pi[0] = 1`.
    pub tilde_pi: Vec<f64>,
    /// Adjacent reference gaps `(tilde_pi[r] - tilde_pi[r+1]) / (r+1)`.
    pub gaps_dot: Vec<f64>,
    /// Ranks (0-based) where two consecutive levels are tied.
    pub r_equal: Vec<usize>,
    /// Ranks where a strict decrease occurs.
    pub r_strict: Vec<usize>,
    pub delta_lower: Vec<f64>,
    pub delta_upper: Vec<f64>,
    pub epsilon: f64,
    /// Original (unsorted) possibility values, used by the shape check.
    pub pi: Vec<f64>,
    pub tie_tol: f64,
}

/// The admissible set: an ordered list of constraint atoms over the simplex
/// together with a strictly positive witness point contained in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    n: usize,
    atoms: Vec<ConstraintAtom>,
    witness: ProbVec,
    structure: Option<PossibilityStructure>,
}

/// Rule for deriving the per-rank gap bounds from the possibility levels:
/// `eps = min(eps_cap, g_min, 1 - g_max)` over the strict ranks, then
/// `(eps, 1 - eps)` on strict ranks and `(0, 0)` on tied ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPolicy {
    pub eps_cap: f64,
    /// Two adjacent sorted levels are treated as tied when they differ by at
    /// most this amount. Zero means exact equality.
    pub tie_tol: f64,
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self {
            eps_cap: 1e-9,
            tie_tol: 0.0,
        }
    }
}

/// The stacked linear system `A p >= b` of a feasible set, row order matching
/// the atom order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub rows: Vec<Vec<f64>>,
    pub bounds: Vec<f64>,
    pub labels: Vec<String>,
}

struct SortedLevels {
    sigma: Vec<usize>,
    /// Levels after collapsing tie-runs onto the first level of each run, so
    /// that declared ties are exact and the reference point stays feasible.
    tilde: Vec<f64>,
    gaps_dot: Vec<f64>,
    r_equal: Vec<usize>,
    r_strict: Vec<usize>,
}

fn sort_and_classify(pi: &PossVec, tie_tol: f64) -> SortedLevels {
    let n = pi.len();
    let sigma = descending_permutation(pi.as_slice());
    let raw: Vec<f64> = sigma.iter().map(|&k| pi.as_slice()[k]).collect();
    let mut tilde = raw.clone();
    let mut r_equal = Vec::new();
    let mut r_strict = Vec::new();
    for r in 0..n.saturating_sub(1) {
        if (raw[r] - raw[r + 1]).abs() <= tie_tol {
            tilde[r + 1] = tilde[r];
            r_equal.push(r);
        } else {
            r_strict.push(r);
        }
    }
    let gaps_dot: Vec<f64> = (0..n.saturating_sub(1))
        .map(|r| (tilde[r] - tilde[r + 1]) / (r + 1) as f64)
        .collect();
    SortedLevels {
        sigma,
        tilde,
        gaps_dot,
        r_equal,
        r_strict,
    }
}

fn assemble(
    pi: &PossVec,
    levels: SortedLevels,
    delta_lower: Vec<f64>,
    delta_upper: Vec<f64>,
    epsilon: f64,
    tie_tol: f64,
) -> Result<FeasibleSet> {
    let n = pi.len();
    let SortedLevels {
        sigma,
        tilde,
        gaps_dot,
        r_equal,
        r_strict,
    } = levels;

    let mut collapsed = vec![0.0; n];
    for (r, &k) in sigma.iter().enumerate() {
        collapsed[k] = tilde[r];
    }
    let witness = poss_to_prob(&PossVec::new(collapsed)?)?;

    let mut atoms = Vec::with_capacity(3 * n.saturating_sub(1));
    for r in 0..n.saturating_sub(1) {
        atoms.push(ConstraintAtom::Subset {
            indices: sigma[..=r].to_vec(),
            bound: (1.0 - tilde[r + 1]).max(0.0),
        });
    }
    for r in 0..n.saturating_sub(1) {
        atoms.push(ConstraintAtom::Gap {
            winner: sigma[r],
            loser: sigma[r + 1],
            delta: delta_lower[r],
        });
    }
    for r in 0..n.saturating_sub(1) {
        atoms.push(ConstraintAtom::Gap {
            winner: sigma[r + 1],
            loser: sigma[r],
            delta: -delta_upper[r],
        });
    }
    for atom in &atoms {
        atom.validate(n)?;
    }

    Ok(FeasibleSet {
        n,
        atoms,
        witness,
        structure: Some(PossibilityStructure {
            sigma,
            tilde_pi: tilde,
            gaps_dot,
            r_equal,
            r_strict,
            delta_lower,
            delta_upper,
            epsilon,
            pi: pi.as_slice().to_vec(),
            tie_tol,
        }),
    })
}

/// Build the admissible set with the benchmark gap rule.
pub fn build_feasible_set(pi: &PossVec, policy: &GapPolicy) -> Result<FeasibleSet> {
    if !(policy.eps_cap > 0.0 && policy.eps_cap < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps_cap {} outside (0, 1)",
            policy.eps_cap
        )));
    }
    if !policy.tie_tol.is_finite() || policy.tie_tol < 0.0 {
        return Err(Error::InvalidParameter("tie_tol must be >= 0".into()));
    }
    let levels = sort_and_classify(pi, policy.tie_tol);
    let n = pi.len();
    let epsilon = if levels.r_strict.is_empty() {
        0.0
    } else {
        let g_min = levels
            .r_strict
            .iter()
            .map(|&r| levels.gaps_dot[r])
            .fold(f64::INFINITY, f64::min);
        let g_max = levels
            .r_strict
            .iter()
            .map(|&r| levels.gaps_dot[r])
            .fold(f64::NEG_INFINITY, f64::max);
        policy.eps_cap.min(g_min).min(1.0 - g_max)
    };
    let mut delta_lower = vec![0.0; n.saturating_sub(1)];
    let mut delta_upper = vec![0.0; n.saturating_sub(1)];
    for &r in &levels.r_strict {
        delta_lower[r] = epsilon;
        delta_upper[r] = 1.0 - epsilon;
    }
    assemble(
        pi,
        levels,
        delta_lower,
        delta_upper,
        epsilon,
        policy.tie_tol,
    )
}

/// Build the admissible set with caller-chosen per-rank gap bounds.
///
/// Bounds must satisfy `0 < lower_r <= g_r <= upper_r < 1` on strict ranks
/// and be zero on tied ranks; anything else would exclude the antipignistic
/// reference point and void the non-emptiness guarantee.
pub fn build_feasible_set_custom(
    pi: &PossVec,
    delta_lower: &[f64],
    delta_upper: &[f64],
    tie_tol: f64,
) -> Result<FeasibleSet> {
    let n = pi.len();
    if delta_lower.len() != n.saturating_sub(1) {
        return Err(Error::LengthMismatch(delta_lower.len(), n - 1));
    }
    if delta_upper.len() != n.saturating_sub(1) {
        return Err(Error::LengthMismatch(delta_upper.len(), n - 1));
    }
    let levels = sort_and_classify(pi, tie_tol);
    for r in 0..n.saturating_sub(1) {
        let (lo, up, g) = (delta_lower[r], delta_upper[r], levels.gaps_dot[r]);
        if !lo.is_finite() || !up.is_finite() {
            return Err(Error::NonFinite);
        }
        if levels.r_equal.contains(&r) {
            if lo != 0.0 || up != 0.0 {
                return Err(Error::Infeasible(format!(
                    "rank {r} is tied; its gap bounds must both be 0"
                )));
            }
        } else {
            if !(lo > 0.0 && lo <= g + BOUND_SLACK) {
                return Err(Error::Infeasible(format!(
                    "lower gap {lo} at rank {r} outside (0, {g}]"
                )));
            }
            if !(up + BOUND_SLACK >= g && up < 1.0) {
                return Err(Error::Infeasible(format!(
                    "upper gap {up} at rank {r} outside [{g}, 1)"
                )));
            }
        }
    }
    assemble(
        pi,
        levels,
        delta_lower.to_vec(),
        delta_upper.to_vec(),
        0.0,
        tie_tol,
    )
}

/// Build a projectable set from arbitrary atoms, certified non-empty by a
/// strictly positive witness that satisfies every atom.
pub fn build_generic_set(atoms: Vec<ConstraintAtom>, witness: &ProbVec) -> Result<FeasibleSet> {
    let n = witness.len();
    for atom in &atoms {
        atom.validate(n)?;
    }
    if !witness.strictly_positive() {
        return Err(Error::NotStrictlyPositive);
    }
    for atom in &atoms {
        let margin = atom.margin(witness.as_slice());
        if margin < -FEASIBILITY_TOL {
            return Err(Error::Infeasible(format!(
                "witness violates {atom:?} by {}",
                -margin
            )));
        }
    }
    Ok(FeasibleSet {
        n,
        atoms,
        witness: witness.clone(),
        structure: None,
    })
}

impl FeasibleSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[ConstraintAtom] {
        &self.atoms
    }

    /// The antipignistic reference point for possibility-derived sets, or
    /// the caller-provided witness for generic sets. Always feasible.
    pub fn witness(&self) -> &ProbVec {
        &self.witness
    }

    pub fn structure(&self) -> Option<&PossibilityStructure> {
        self.structure.as_ref()
    }

    /// Maximal constraint violation `max_i (b_i - <a_i, p>)_+`.
    pub fn max_violation(&self, p: &ProbVec) -> Result<f64> {
        if p.len() != self.n {
            return Err(Error::LengthMismatch(p.len(), self.n));
        }
        Ok(self
            .atoms
            .iter()
            .map(|atom| (-atom.margin(p.as_slice())).max(0.0))
            .fold(0.0, f64::max))
    }

    /// Feasibility predicate at the [`FEASIBILITY_TOL`] threshold.
    pub fn is_feasible(&self, p: &ProbVec) -> Result<bool> {
        Ok(self.max_violation(p)? <= FEASIBILITY_TOL)
    }

    /// True iff the probability ordering of `p` matches the possibility
    /// ordering pairwise: ties in the levels demand exactly tied
    /// probabilities, strict level drops demand strict probability drops.
    pub fn shape_check(&self, p: &ProbVec) -> Result<bool> {
        let st = self
            .structure
            .as_ref()
            .ok_or(Error::NoPossibilityStructure)?;
        if p.len() != self.n {
            return Err(Error::LengthMismatch(p.len(), self.n));
        }
        let pi = &st.pi;
        let pv = p.as_slice();
        for k in 0..self.n {
            for k2 in (k + 1)..self.n {
                let pi_cmp = if (pi[k] - pi[k2]).abs() <= st.tie_tol {
                    std::cmp::Ordering::Equal
                } else if pi[k] > pi[k2] {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Less
                };
                let p_cmp = pv[k].partial_cmp(&pv[k2]).expect("finite");
                if pi_cmp != p_cmp {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Evaluate the nested dominance block alone: violation of the subset
    /// rows only.
    pub fn pref_block_violation(&self, p: &ProbVec) -> Result<f64> {
        if p.len() != self.n {
            return Err(Error::LengthMismatch(p.len(), self.n));
        }
        Ok(self
            .atoms
            .iter()
            .filter(|a| matches!(a, ConstraintAtom::Subset { .. }))
            .map(|atom| (-atom.margin(p.as_slice())).max(0.0))
            .fold(0.0, f64::max))
    }

    /// The dominance constraints in reversed cumulative form: partial sums of
    /// the reversed probabilities bounded by the reversed levels. Equivalent
    /// to the subset block; evaluated independently for cross-checking.
    pub fn reversed_dominance_holds(&self, p: &ProbVec, tol: f64) -> Result<bool> {
        let st = self
            .structure
            .as_ref()
            .ok_or(Error::NoPossibilityStructure)?;
        if p.len() != self.n {
            return Err(Error::LengthMismatch(p.len(), self.n));
        }
        let n = self.n;
        let mut partial = 0.0;
        for i in 1..=n {
            let check_pi = st.tilde_pi[n - i];
            partial += p.as_slice()[st.sigma[n - i]];
            if partial > check_pi + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The stacked linear system; row order matches the atom order.
    pub fn linear_system(&self) -> LinearSystem {
        let m = self.atoms.len();
        let mut rows = Vec::with_capacity(m);
        let mut bounds = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        let block = self.n.saturating_sub(1);
        for (i, atom) in self.atoms.iter().enumerate() {
            let (a, b) = atom.row(self.n);
            rows.push(a);
            bounds.push(b);
            let label = if self.structure.is_some() {
                if i < block {
                    "pref"
                } else if i < 2 * block {
                    "low"
                } else {
                    "up"
                }
            } else {
                match atom {
                    ConstraintAtom::Subset { .. } => "subset",
                    ConstraintAtom::Gap { .. } => "gap",
                    ConstraintAtom::Halfspace { .. } => "halfspace",
                }
            };
            labels.push(label.to_string());
        }
        LinearSystem {
            rows,
            bounds,
            labels,
        }
    }
}

impl LinearSystem {
    /// `max_i (b_i - <a_i, p>)_+` evaluated from the stacked rows.
    pub fn max_violation(&self, p: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.bounds)
            .map(|(row, b)| (b - row.iter().zip(p).map(|(a, x)| a * x).sum::<f64>()).max(0.0))
            .fold(0.0, f64::max)
    }
}
