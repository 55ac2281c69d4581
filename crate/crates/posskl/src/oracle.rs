//! Independent brute-force verifiers: event-enumeration dominance checks,
//! simplex-grid KL minimization, and the closed-form unrolled Dykstra
//! recursion. These live in the shipped library so the CLI can expose a
//! `verify` command; they deliberately avoid the incremental code paths they
//! are used to check.

use crate::antipignistic::{necessity_of_event, possibility_of_event, PossVec};
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::projection::project_atom;
use crate::simplex::{kl_divergence, PosVec, ProbVec};

/// Largest class count accepted by the exhaustive event enumeration.
pub const MAX_BRUTE_CLASSES: usize = 20;

/// Check `N(A) <= P(A) <= Pi(A)` over all `2^n` events by direct evaluation
/// of the max/complement definitions.
pub fn dominance_brute(pi: &PossVec, p: &ProbVec, tol: f64) -> Result<bool> {
    let n = pi.len();
    if p.len() != n {
        return Err(Error::LengthMismatch(p.len(), n));
    }
    if n > MAX_BRUTE_CLASSES {
        return Err(Error::BudgetExceeded(format!(
            "{n} classes exceed the 2^n enumeration limit of {MAX_BRUTE_CLASSES}"
        )));
    }
    for mask in 0u64..(1 << n) {
        let event: Vec<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
        let prob: f64 = event.iter().map(|&k| p.as_slice()[k]).sum();
        let poss = possibility_of_event(pi, &event)?;
        let nec = necessity_of_event(pi, &event)?;
        if nec > prob + tol || prob > poss + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Enumerate the lattice of the 2-simplex at `step` and return the feasible
/// KL minimizer against `q`. Lattice feasibility is relaxed to a violation of
/// at most `step`, since exact feasibility can be empty on a discrete grid.
pub fn grid_kl_oracle(q: &ProbVec, fs: &FeasibleSet, step: f64) -> Result<ProbVec> {
    if fs.n() != 3 || q.len() != 3 {
        return Err(Error::BudgetExceeded(
            "the grid oracle enumerates the 2-simplex only (n = 3)".into(),
        ));
    }
    if !(1e-4..=1e-2).contains(&step) {
        return Err(Error::InvalidParameter(format!(
            "grid step {step} outside [1e-4, 1e-2]"
        )));
    }
    let m = (1.0 / step).round() as usize;
    let mut best: Option<(f64, ProbVec)> = None;
    for a in 0..=m {
        for b in 0..=(m - a) {
            let c = m - a - b;
            let p = ProbVec::new(vec![
                a as f64 / m as f64,
                b as f64 / m as f64,
                c as f64 / m as f64,
            ])?;
            // fp slack: lattice coordinates land within an ulp of the step
            if fs.max_violation(&p)? > step + 1e-12 {
                continue;
            }
            let kl = kl_divergence(&p, q)?;
            if best.as_ref().is_none_or(|(k, _)| kl < *k) {
                best = Some((kl, p));
            }
        }
    }
    best.map(|(_, p)| p).ok_or(Error::NoFeasibleGridPoint)
}

/// One step of the unrolled recursion: the product-form `u`, the projected
/// iterate, and the product-form correction.
#[derive(Debug, Clone)]
pub struct UnrolledStep {
    pub u: Vec<f64>,
    pub z: ProbVec,
    pub d: Vec<f64>,
}

/// Evaluate the closed product formulas for every step of `cycles` cycles,
/// with no incremental correction state: for `t = (j-1) m + h`,
///
/// ```text
/// u(t) = z(t-1) . prod_{l=0}^{j-2} z(l m + h - 1) / z(l m + h)
/// z(t) = Proj_h(u(t))
/// d(t) = log prod_{l=0}^{j-1} z(l m + h - 1) / z(l m + h)
/// ```
pub fn dykstra_unrolled(q: &ProbVec, fs: &FeasibleSet, cycles: usize) -> Result<Vec<UnrolledStep>> {
    if fs.n() > 5 || cycles > 5 {
        return Err(Error::BudgetExceeded(
            "unrolled recursion is limited to n <= 5 and 5 cycles".into(),
        ));
    }
    if q.len() != fs.n() {
        return Err(Error::LengthMismatch(q.len(), fs.n()));
    }
    if !q.strictly_positive() {
        return Err(Error::NotStrictlyPositive);
    }
    let m = fs.atoms().len();
    let n = fs.n();
    let mut iterates: Vec<Vec<f64>> = vec![q.as_slice().to_vec()];
    let mut steps = Vec::with_capacity(cycles * m);
    for t in 1..=cycles * m {
        let j = (t - 1) / m + 1;
        let h = (t - 1) % m + 1;
        let mut u = iterates[t - 1].clone();
        for l in 0..j.saturating_sub(1) {
            for k in 0..n {
                u[k] *= iterates[l * m + h - 1][k] / iterates[l * m + h][k];
            }
        }
        let z = project_atom(&PosVec::new(u.clone())?, &fs.atoms()[h - 1])?;
        iterates.push(z.as_slice().to_vec());
        let mut d = vec![0.0; n];
        for l in 0..j {
            for k in 0..n {
                d[k] += (iterates[l * m + h - 1][k] / iterates[l * m + h][k]).ln();
            }
        }
        steps.push(UnrolledStep { u, z, d });
    }
    Ok(steps)
}
