//! Vector types on the probability simplex and the divergence functionals
//! consumed by every other module.
//!
//! All types are immutable values after construction; none of the operations
//! mutates its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipping floor applied to probabilities whenever logarithms are evaluated
/// and when restricting a prediction to a possibility support.
pub const CLIP_FLOOR: f64 = 1e-15;

/// Absolute tolerance on the entry sum accepted when constructing a
/// [`ProbVec`]; smaller drift is absorbed by renormalizing.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Threshold of the strict-positivity predicate on probability vectors.
pub const STRICT_POS_MIN: f64 = 1e-15;

/// `ln(max(x, CLIP_FLOOR))`.
#[inline]
pub(crate) fn safe_ln(x: f64) -> f64 {
    x.max(CLIP_FLOOR).ln()
}

/// Rescale `values` in place so that the left-to-right sum is exactly 1.0.
///
/// Division by the current sum brings the vector within a few ulps of the
/// simplex. The residual is then pushed into the last entry (which makes any
/// subsequent left-to-right summation land on 1.0 exactly) when that entry is
/// large enough to absorb it without noticeable relative change; otherwise
/// the largest entry is nudged instead.
fn renormalize_exact(values: &mut [f64]) {
    for _ in 0..4 {
        let sum: f64 = values.iter().sum();
        if sum == 1.0 {
            return;
        }
        for v in values.iter_mut() {
            *v /= sum;
        }
    }
    for _ in 0..32 {
        let sum: f64 = values.iter().sum();
        if sum == 1.0 {
            return;
        }
        if let Some((last, head)) = values.split_last_mut() {
            let partial: f64 = head.iter().sum();
            let fixed = 1.0 - partial;
            if partial < 1.0 && fixed > 0.0 && (fixed - *last).abs() <= 1e-9 * last.abs() {
                *last = fixed;
                continue;
            }
        }
        let imax = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
            .map(|(k, _)| k)
            .expect("non-empty");
        let nudged = values[imax] + (1.0 - sum);
        if nudged > 0.0 && nudged != values[imax] {
            values[imax] = nudged;
        } else {
            break;
        }
    }
}

/// A point of the probability simplex: nonnegative entries with unit sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVec {
    values: Vec<f64>,
}

impl ProbVec {
    /// Validates nonnegativity and a unit sum within [`SIMPLEX_TOL`], then
    /// absorbs the remaining drift by exact renormalization.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::NotOnSimplex(values.iter().sum()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotOnSimplex(sum));
        }
        let mut values = values;
        renormalize_exact(&mut values);
        Ok(Self { values })
    }

    /// The uniform distribution on `n` classes.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut values = vec![1.0 / n as f64; n];
        renormalize_exact(&mut values);
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

    /// True iff every entry is at least [`STRICT_POS_MIN`].
    pub fn strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v >= STRICT_POS_MIN)
    }

    /// Clip entries below `floor`, then renormalize. Used to make a model
    /// prediction strictly positive before projecting.
    pub fn clipped(&self, floor: f64) -> Result<Self> {
        let clipped: Vec<f64> = self.values.iter().map(|&v| v.max(floor)).collect();
        normalize(&PosVec::new(clipped)?)
    }
}

impl TryFrom<Vec<f64>> for ProbVec {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ProbVec> for Vec<f64> {
    fn from(p: ProbVec) -> Self {
        p.values
    }
}

/// Unnormalized positive weights: every entry finite and strictly `> 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PosVec {
    values: Vec<f64>,
}

impl PosVec {
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

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for PosVec {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<PosVec> for Vec<f64> {
    fn from(z: PosVec) -> Self {
        z.values
    }
}

impl From<ProbVec> for PosVec {
    /// A strictly positive probability vector is in particular a positive
    /// weight vector. Entries equal to zero are lifted to [`CLIP_FLOOR`].
    fn from(p: ProbVec) -> Self {
        Self {
            values: p.values.into_iter().map(|v| v.max(CLIP_FLOOR)).collect(),
        }
    }
}

/// Log-space correction terms carried across Dykstra cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CorrectionVec {
    values: Vec<f64>,
}

impl CorrectionVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
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
}

impl TryFrom<Vec<f64>> for CorrectionVec {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<CorrectionVec> for Vec<f64> {
    fn from(d: CorrectionVec) -> Self {
        d.values
    }
}

/// Kullback-Leibler divergence in nats, with the convention `0 ln(0/t) = 0`.
///
/// Requires `q` strictly positive so all logarithms are finite.
pub fn kl_divergence(p: &ProbVec, q: &ProbVec) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    if !q.strictly_positive() {
        return Err(Error::NotStrictlyPositive);
    }
    let mut acc = 0.0;
    for (&pk, &qk) in p.as_slice().iter().zip(q.as_slice()) {
        if pk > 0.0 {
            acc += pk * (pk / qk).ln();
        }
    }
    Ok(acc)
}

/// Bregman distance of the negative entropy:
/// `sum x ln(x/y) - sum x + sum y`. Coincides with [`kl_divergence`] when `y`
/// sums to one.
pub fn bregman_distance(x: &ProbVec, y: &PosVec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let mut cross = 0.0;
    for (&xk, &yk) in x.as_slice().iter().zip(y.as_slice()) {
        if xk > 0.0 {
            cross += xk * (xk / yk).ln();
        }
    }
    let sx: f64 = x.as_slice().iter().sum();
    let sy: f64 = y.l1_norm();
    Ok(cross - sx + sy)
}

/// Divide by the l1 norm. Idempotent: once a vector sums to exactly one,
/// further passes return it unchanged.
pub fn normalize(z: &PosVec) -> Result<ProbVec> {
    let mut values = z.as_slice().to_vec();
    renormalize_exact(&mut values);
    Ok(ProbVec { values })
}

/// Restriction of a prediction to the support of a full possibility vector.
///
/// Drops the coordinates where `pi_full` is zero, clips the surviving
/// prediction entries at [`CLIP_FLOOR`], renormalizes, and returns the support
/// index map used to re-embed results over the full class set.
pub fn restrict_to_support(
    pi_full: &[f64],
    q_full: &ProbVec,
) -> Result<(crate::antipignistic::PossVec, ProbVec, Vec<usize>)> {
    if pi_full.len() != q_full.len() {
        return Err(Error::LengthMismatch(pi_full.len(), q_full.len()));
    }
    if pi_full.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if pi_full.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::NotNormalized);
    }
    let max = pi_full.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max != 1.0 {
        return Err(Error::NotNormalized);
    }
    let support: Vec<usize> = (0..pi_full.len()).filter(|&k| pi_full[k] > 0.0).collect();
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let pi_restricted: Vec<f64> = support.iter().map(|&k| pi_full[k]).collect();
    let q_restricted: Vec<f64> = support
        .iter()
        .map(|&k| q_full.as_slice()[k].max(CLIP_FLOOR))
        .collect();
    let pi = crate::antipignistic::PossVec::new(pi_restricted)?;
    let mut values = normalize(&PosVec::new(q_restricted)?)?.into_vec();
    // renormalization can pull a clipped entry a few ulps under the floor;
    // snap such entries back so the result passes the strict-positivity
    // predicate (the sub-1e-21 total drift is far inside the simplex
    // tolerance)
    for v in values.iter_mut() {
        if *v < CLIP_FLOOR {
            *v = CLIP_FLOOR;
        }
    }
    let q = ProbVec { values };
    Ok((pi, q, support))
}

/// Re-embed values computed on a support into the full class set, placing
/// exact zeros outside the support.
pub fn embed_on_support(values: &[f64], support: &[usize], full_len: usize) -> Result<Vec<f64>> {
    if values.len() != support.len() {
        return Err(Error::LengthMismatch(values.len(), support.len()));
    }
    let mut full = vec![0.0; full_len];
    for (&v, &k) in values.iter().zip(support) {
        if k >= full_len {
            return Err(Error::IndexOutOfRange(k, full_len));
        }
        full[k] = v;
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prob(values: &[f64]) -> ProbVec {
        ProbVec::new(values.to_vec()).unwrap()
    }

    #[test]
    fn kl_identity_is_zero() {
        let p = prob(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_half_vs_quarter() {
        // 0.5 ln 2 + 0.5 ln(2/3), evaluated independently.
        let expected = 0.5 * 2.0_f64.ln() + 0.5 * (2.0 / 3.0_f64).ln();
        assert!((expected - 0.143841).abs() < 1e-6);
        let p = prob(&[0.5, 0.5]);
        let q = prob(&[0.25, 0.75]);
        assert!((kl_divergence(&p, &q).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn kl_with_zero_coordinate_uses_convention() {
        let p = prob(&[1.0, 0.0]);
        let q = prob(&[0.5, 0.5]);
        let d = kl_divergence(&p, &q).unwrap();
        assert!((d - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_rejects_non_positive_reference() {
        let p = prob(&[0.5, 0.5]);
        let q = prob(&[1.0, 0.0]);
        assert!(kl_divergence(&p, &q).is_err());
    }

    #[test]
    fn kl_rejects_length_mismatch() {
        let p = prob(&[0.5, 0.5]);
        let q = prob(&[0.4, 0.3, 0.3]);
        assert!(kl_divergence(&p, &q).is_err());
    }

    #[test]
    fn bregman_matches_kl_on_simplex() {
        let x = prob(&[0.5, 0.5]);
        let y = PosVec::new(vec![0.25, 0.75]).unwrap();
        let d = bregman_distance(&x, &y).unwrap();
        assert!((d - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn bregman_identity_is_zero() {
        let x = prob(&[0.5, 0.5]);
        let y = PosVec::new(vec![0.5, 0.5]).unwrap();
        assert!(bregman_distance(&x, &y).unwrap().abs() < 1e-15);
    }

    #[test]
    fn bregman_scaled_reference() {
        // D(x, t*y) = D(x, y) + t - ln t - 1 with t = 2 and y = x.
        let x = prob(&[0.5, 0.5]);
        let y = PosVec::new(vec![1.0, 1.0]).unwrap();
        let d = bregman_distance(&x, &y).unwrap();
        let expected = 0.5_f64.ln() + 1.0;
        assert!((d - expected).abs() < 1e-12);
        assert!((expected - 0.306853).abs() < 1e-6);
    }

    #[test]
    fn normalize_basic() {
        let z = PosVec::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(normalize(&z).unwrap().as_slice(), &[0.5, 0.5]);
        let z = PosVec::new(vec![1.0, 2.0, 3.0]).unwrap();
        let p = normalize(&z).unwrap();
        for (a, b) in p.as_slice().iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_keeps_already_normalized_vector() {
        let z = PosVec::new(vec![0.48, 0.261, 0.259]).unwrap();
        let p = normalize(&z).unwrap();
        for (a, b) in p.as_slice().iter().zip(z.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn probvec_rejects_bad_sum() {
        assert!(ProbVec::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVec::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbVec::new(vec![]).is_err());
    }

    #[test]
    fn restrict_drops_zero_possibility_classes() {
        let q = prob(&[0.6, 0.3, 0.1]);
        let (pi, qr, support) = restrict_to_support(&[1.0, 0.5, 0.0], &q).unwrap();
        assert_eq!(support, vec![0, 1]);
        assert_eq!(pi.as_slice(), &[1.0, 0.5]);
        assert!((qr.as_slice()[0] - 0.6 / 0.9).abs() < 1e-12);
        assert!((qr.as_slice()[1] - 0.3 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn restrict_full_support_is_identity() {
        let q = ProbVec::uniform(3).unwrap();
        let (pi, qr, support) = restrict_to_support(&[1.0, 1.0, 1.0], &q).unwrap();
        assert_eq!(support, vec![0, 1, 2]);
        assert_eq!(pi.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(qr.as_slice(), q.as_slice());
    }

    #[test]
    fn restrict_clips_tiny_entries() {
        let q = ProbVec::new(vec![1.0 - 1e-20, 1e-20, 0.0]).unwrap();
        let (_, qr, support) = restrict_to_support(&[1.0, 0.2, 0.0], &q).unwrap();
        assert_eq!(support, vec![0, 1]);
        // clip-then-normalize of (1 - 1e-20, 1e-15)
        let s = (1.0 - 1e-20) + 1e-15;
        assert!((qr.as_slice()[1] - 1e-15 / s).abs() < 1e-18);
    }

    #[test]
    fn restrict_rejects_unnormalized_possibility() {
        let q = ProbVec::uniform(2).unwrap();
        assert!(restrict_to_support(&[0.9, 0.5], &q).is_err());
    }

    #[test]
    fn embed_places_exact_zeros() {
        let full = embed_on_support(&[0.7, 0.3], &[0, 2], 4).unwrap();
        assert_eq!(full, vec![0.7, 0.0, 0.3, 0.0]);
        assert_eq!(full[1].to_bits(), 0.0_f64.to_bits());
    }

    proptest! {
        #[test]
        fn normalize_is_exactly_idempotent(values in proptest::collection::vec(1e-6..1e6_f64, 1..40)) {
            let z = PosVec::new(values).unwrap();
            let once = normalize(&z).unwrap();
            let twice = normalize(&PosVec::new(once.as_slice().to_vec()).unwrap()).unwrap();
            prop_assert_eq!(once.as_slice(), twice.as_slice());
            let sum: f64 = once.as_slice().iter().sum();
            prop_assert_eq!(sum, 1.0);
        }

        #[test]
        fn kl_is_nonnegative(
            a in proptest::collection::vec(1e-3..1.0_f64, 2..12),
            b in proptest::collection::vec(1e-3..1.0_f64, 2..12),
        ) {
            let n = a.len().min(b.len());
            let p = normalize(&PosVec::new(a[..n].to_vec()).unwrap()).unwrap();
            let q = normalize(&PosVec::new(b[..n].to_vec()).unwrap()).unwrap();
            prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-15);
        }

        #[test]
        fn bregman_scaling_identity(
            a in proptest::collection::vec(1e-3..1.0_f64, 2..10),
            b in proptest::collection::vec(1e-3..1.0_f64, 2..10),
            t in 1e-3..1e3_f64,
        ) {
            // the identity requires the reference point on the simplex
            let n = a.len().min(b.len());
            let x = normalize(&PosVec::new(a[..n].to_vec()).unwrap()).unwrap();
            let y = PosVec::new(
                normalize(&PosVec::new(b[..n].to_vec()).unwrap())
                    .unwrap()
                    .into_vec(),
            )
            .unwrap();
            let ty = PosVec::new(y.as_slice().iter().map(|v| t * v).collect()).unwrap();
            let lhs = bregman_distance(&x, &ty).unwrap() - bregman_distance(&x, &y).unwrap();
            let rhs = t - t.ln() - 1.0;
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn restrict_then_embed_keeps_off_support_zero(
            mask in proptest::collection::vec(prop::bool::ANY, 2..10),
        ) {
            let n = mask.len();
            let mut pi_full = vec![0.0; n];
            for (k, &m) in mask.iter().enumerate() {
                pi_full[k] = if m { 0.5 } else { 0.0 };
            }
            pi_full[0] = 1.0;
            let q = ProbVec::uniform(n).unwrap();
            let (_, qr, support) = restrict_to_support(&pi_full, &q).unwrap();
            let full = embed_on_support(qr.as_slice(), &support, n).unwrap();
            for (k, &v) in full.iter().enumerate() {
                if pi_full[k] == 0.0 {
                    prop_assert_eq!(v.to_bits(), 0.0_f64.to_bits());
                }
            }
        }
    }
}
