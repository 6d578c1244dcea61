//! Exact finite-support pricing primitives.
//!
//! A buyer type is a vector `theta` in `[0,1]^d`; facing a unit context `u` it
//! values the item at `<theta, u>`. A [`TypeDistribution`] projected along a
//! context yields a [`ValueDistribution`], on which demand, revenue, best
//! response and gap are evaluated exactly (all distributions are finite).
//!
//! Demand is inclusive at atoms: a buyer with valuation `v` purchases at price
//! `p` iff `v >= p`.

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};

/// Tolerance on weight sums at construction.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Revenues within this distance of the maximum count as ties (smallest price wins).
pub const TIE_TOL: f64 = 1e-12;
/// Tolerance on projected valuations leaving `[0,1]`.
pub const VALUE_TOL: f64 = 1e-9;
/// Projected valuations closer than this are merged into one atom.
pub const MERGE_TOL: f64 = 1e-12;
/// Atoms of a type distribution closer than this (max-norm) are duplicates.
pub const ATOM_TOL: f64 = 1e-12;
/// Tolerance on the Euclidean norm of a context.
pub const UNIT_TOL: f64 = 1e-9;
/// Default accuracy of [`levy_distance`].
pub const LEVY_TOL: f64 = 1e-9;

fn check_price(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(PricingError::PriceOutOfRange(p))
    }
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w.is_finite() && w > 0.0) {
            return Err(PricingError::InvalidDistribution(format!(
                "weight {w} is not strictly positive"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(PricingError::InvalidDistribution(format!(
            "weights sum to {total}"
        )));
    }
    Ok(())
}

/// A unit vector describing the item on sale in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Context {
    u: Vec<f64>,
}

impl Context {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(PricingError::InvalidParameter("empty context".into()));
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(PricingError::NotUnitContext { norm });
        }
        Ok(Context { u })
    }

    /// The standard basis vector `e_axis` in dimension `dim`.
    pub fn basis(dim: usize, axis: usize) -> Result<Self> {
        if axis >= dim {
            return Err(PricingError::InvalidParameter(format!(
                "basis axis {axis} out of range for dimension {dim}"
            )));
        }
        let mut u = vec![0.0; dim];
        u[axis] = 1.0;
        Ok(Context { u })
    }

    /// The trivial context `u = 1` of the non-contextual problem.
    pub fn scalar() -> Self {
        Context { u: vec![1.0] }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.u.iter().zip(theta).map(|(a, b)| a * b).sum()
    }
}

impl TryFrom<Vec<f64>> for Context {
    type Error = PricingError;
    fn try_from(u: Vec<f64>) -> Result<Self> {
        Context::new(u)
    }
}

impl From<Context> for Vec<f64> {
    fn from(c: Context) -> Vec<f64> {
        c.u
    }
}

/// One support point of a [`TypeDistribution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeAtom {
    pub theta: Vec<f64>,
    pub w: f64,
}

#[derive(Deserialize)]
struct TypeDistributionRepr {
    dim: usize,
    atoms: Vec<TypeAtom>,
}

/// Finite-support distribution over buyer types in `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TypeDistributionRepr")]
pub struct TypeDistribution {
    dim: usize,
    atoms: Vec<TypeAtom>,
}

impl TryFrom<TypeDistributionRepr> for TypeDistribution {
    type Error = PricingError;
    fn try_from(r: TypeDistributionRepr) -> Result<Self> {
        TypeDistribution::new(r.dim, r.atoms)
    }
}

impl TypeDistribution {
    pub fn new(dim: usize, atoms: Vec<TypeAtom>) -> Result<Self> {
        if dim == 0 {
            return Err(PricingError::InvalidParameter(
                "dimension must be positive".into(),
            ));
        }
        if atoms.is_empty() {
            return Err(PricingError::InvalidDistribution("no atoms".into()));
        }
        for a in &atoms {
            if a.theta.len() != dim {
                return Err(PricingError::DimensionMismatch {
                    expected: dim,
                    got: a.theta.len(),
                });
            }
            if let Some(x) = a.theta.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(PricingError::InvalidDistribution(format!(
                    "type coordinate {x} outside [0, 1]"
                )));
            }
        }
        check_weights(atoms.iter().map(|a| a.w))?;
        for (i, a) in atoms.iter().enumerate() {
            for b in &atoms[i + 1..] {
                let gap = a
                    .theta
                    .iter()
                    .zip(&b.theta)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if gap <= ATOM_TOL {
                    return Err(PricingError::InvalidDistribution(format!(
                        "duplicate atom {:?}",
                        a.theta
                    )));
                }
            }
        }
        Ok(TypeDistribution { dim, atoms })
    }

    /// Convenience constructor from `(theta, weight)` pairs.
    pub fn from_pairs(dim: usize, pairs: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        TypeDistribution::new(
            dim,
            pairs
                .into_iter()
                .map(|(theta, w)| TypeAtom { theta, w })
                .collect(),
        )
    }

    /// Lift a valuation distribution to a one-dimensional type distribution.
    pub fn from_values(q: &ValueDistribution) -> Self {
        TypeDistribution {
            dim: 1,
            atoms: q
                .atoms()
                .map(|(v, w)| TypeAtom { theta: vec![v], w })
                .collect(),
        }
    }

    pub fn point_mass(theta: Vec<f64>) -> Result<Self> {
        let dim = theta.len();
        TypeDistribution::new(dim, vec![TypeAtom { theta, w: 1.0 }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[TypeAtom] {
        &self.atoms
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    fn check_dim(&self, u: &Context) -> Result<()> {
        if u.dim() != self.dim {
            return Err(PricingError::DimensionMismatch {
                expected: self.dim,
                got: u.dim(),
            });
        }
        Ok(())
    }

    /// Law of `<u, theta>` for `theta ~ self`.
    ///
    /// Fails when a projected valuation leaves `[0,1]` by more than
    /// [`VALUE_TOL`]; values within the tolerance are clamped.
    pub fn project(&self, u: &Context) -> Result<ValueDistribution> {
        self.check_dim(u)?;
        let mut pairs = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let v = u.dot(&a.theta);
            if !(-VALUE_TOL..=1.0 + VALUE_TOL).contains(&v) {
                return Err(PricingError::ValuationOutOfRange { value: v });
            }
            pairs.push((v.clamp(0.0, 1.0), a.w));
        }
        ValueDistribution::from_unsorted(pairs)
    }

    /// Projection for hypothesis models, which may have valuations above 1
    /// along some contexts. Valuations are clamped to `[0,1]`, which leaves
    /// the demand curve on `(0,1]` unchanged.
    pub fn project_clamped(&self, u: &Context) -> Result<ValueDistribution> {
        self.check_dim(u)?;
        let pairs = self
            .atoms
            .iter()
            .map(|a| (u.dot(&a.theta).clamp(0.0, 1.0), a.w))
            .collect();
        ValueDistribution::from_unsorted(pairs)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct ValueAtom {
    v: f64,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct ValueDistributionRepr {
    atoms: Vec<ValueAtom>,
}

/// Finite-support distribution over valuations in `[0,1]`, atoms sorted
/// strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValueDistributionRepr", into = "ValueDistributionRepr")]
pub struct ValueDistribution {
    values: Vec<f64>,
    weights: Vec<f64>,
    // tail[i] = sum of weights[i..]; head[i] = sum of weights[..i]
    tail: Vec<f64>,
    head: Vec<f64>,
    best_price: f64,
    best_revenue: f64,
}

impl TryFrom<ValueDistributionRepr> for ValueDistribution {
    type Error = PricingError;
    fn try_from(r: ValueDistributionRepr) -> Result<Self> {
        ValueDistribution::new(r.atoms.into_iter().map(|a| (a.v, a.w)).collect())
    }
}

impl From<ValueDistribution> for ValueDistributionRepr {
    fn from(q: ValueDistribution) -> Self {
        ValueDistributionRepr {
            atoms: q.atoms().map(|(v, w)| ValueAtom { v, w }).collect(),
        }
    }
}

impl ValueDistribution {
    /// Builds from `(value, weight)` pairs that are already strictly increasing.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(PricingError::InvalidDistribution("no atoms".into()));
        }
        for (i, &(v, _)) in atoms.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(PricingError::ValuationOutOfRange { value: v });
            }
            if i > 0 && atoms[i - 1].0 >= v {
                return Err(PricingError::InvalidDistribution(
                    "values are not strictly increasing".into(),
                ));
            }
        }
        check_weights(atoms.iter().map(|a| a.1))?;
        let (values, weights): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        Ok(Self::assemble(values, weights))
    }

    /// Sorts the pairs and merges values closer than [`MERGE_TOL`].
    pub fn from_unsorted(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.iter().any(|p| !p.0.is_finite()) {
            return Err(PricingError::InvalidDistribution("non-finite value".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            match merged.last_mut() {
                Some(last) if v - last.0 <= MERGE_TOL => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        ValueDistribution::new(merged)
    }

    pub fn point_mass(v: f64) -> Result<Self> {
        ValueDistribution::new(vec![(v, 1.0)])
    }

    fn assemble(values: Vec<f64>, weights: Vec<f64>) -> Self {
        let k = values.len();
        let mut tail = vec![0.0; k + 1];
        for i in (0..k).rev() {
            tail[i] = tail[i + 1] + weights[i];
        }
        let mut head = vec![0.0; k + 1];
        for i in 0..k {
            head[i + 1] = head[i] + weights[i];
        }
        // Revenue on [0,1] peaks at an atom: demand is flat between atoms.
        let revenues: Vec<f64> = (0..k).map(|i| values[i] * tail[i]).collect();
        let best_revenue = revenues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best = revenues
            .iter()
            .position(|&r| r >= best_revenue - TIE_TOL)
            .expect("nonempty support");
        ValueDistribution {
            best_price: values[best],
            best_revenue,
            values,
            weights,
            tail,
            head,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    /// `P[v >= p]` without range checking.
    #[inline]
    pub fn dem(&self, p: f64) -> f64 {
        self.tail[self.values.partition_point(|&v| v < p)]
    }

    /// `P[v <= x]`, right-continuous.
    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        self.head[self.values.partition_point(|&v| v <= x)]
    }

    /// `P[v >= p]`.
    pub fn demand(&self, p: f64) -> Result<f64> {
        check_price(p)?;
        Ok(self.dem(p))
    }

    #[inline]
    pub fn rev(&self, p: f64) -> f64 {
        p * self.dem(p)
    }

    /// `p * P[v >= p]`.
    pub fn revenue(&self, p: f64) -> Result<f64> {
        check_price(p)?;
        Ok(self.rev(p))
    }

    /// The smallest revenue-maximizing price (ties within [`TIE_TOL`]).
    pub fn best_response(&self) -> f64 {
        self.best_price
    }

    /// `max_p rev(p)`.
    pub fn best_revenue(&self) -> f64 {
        self.best_revenue
    }

    #[inline]
    pub fn gap_unchecked(&self, p: f64) -> f64 {
        (self.best_revenue - self.rev(p)).max(0.0)
    }

    /// Revenue shortfall of `p` against the best response; never negative.
    pub fn gap(&self, p: f64) -> Result<f64> {
        check_price(p)?;
        Ok(self.gap_unchecked(p))
    }

    /// Smoothed demand without range checks; `eps` must be positive.
    #[inline]
    pub fn sdem(&self, eps: f64, p: f64) -> f64 {
        // Atoms at or above p are bought for every perturbation.
        let first = self.values.partition_point(|&v| v < p);
        let mut total = self.tail[first];
        // Atoms in (p - eps, p) are bought with probability (v - p + eps)/eps.
        for i in (0..first).rev() {
            let v = self.values[i];
            let frac = (v - p + eps) / eps;
            if frac <= 0.0 {
                break;
            }
            total += self.weights[i] * frac.min(1.0);
        }
        total
    }

    /// Demand averaged over a downward price perturbation `delta ~ Unif[0, eps]`.
    pub fn smoothed_demand(&self, eps: f64, p: f64) -> Result<f64> {
        check_smoothing(eps)?;
        check_price(p)?;
        Ok(self.sdem(eps, p))
    }

    pub fn smoothed_revenue(&self, eps: f64, p: f64) -> Result<f64> {
        Ok(p * self.smoothed_demand(eps, p)?)
    }
}

fn check_smoothing(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(PricingError::InvalidParameter(format!(
            "smoothing width {eps} outside (0, 1)"
        )))
    }
}

/// Price discretization `P_eps = {0, eps, 2 eps, ...} ∩ [0,1]`; `eps = 0`
/// denotes the continuous price set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    eps: f64,
    #[serde(skip)]
    last: usize,
}

impl SmoothingParams {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(PricingError::InvalidParameter(format!(
                "discretization {eps} outside [0, 1)"
            )));
        }
        let last = if eps == 0.0 {
            0
        } else {
            (1.0 / eps + 1e-9).floor() as usize
        };
        Ok(SmoothingParams { eps, last })
    }

    pub fn continuous() -> Self {
        SmoothingParams { eps: 0.0, last: 0 }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn is_continuous(&self) -> bool {
        self.eps == 0.0
    }

    /// Number of grid points (0 for the continuous set).
    pub fn grid_len(&self) -> usize {
        if self.is_continuous() {
            0
        } else {
            self.last + 1
        }
    }

    #[inline]
    pub fn grid_point(&self, i: usize) -> f64 {
        (i as f64 * self.eps).min(1.0)
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.grid_len()).map(|i| self.grid_point(i)).collect()
    }

    /// Index of the grid point within 1e-12 of `p`, if any.
    pub fn snap(&self, p: f64) -> Option<usize> {
        if self.is_continuous() {
            return None;
        }
        let i = (p / self.eps).round();
        if i < 0.0 || i as usize > self.last {
            return None;
        }
        let i = i as usize;
        ((self.grid_point(i) - p).abs() <= 1e-12).then_some(i)
    }
}

/// Grid price maximizing smoothed revenue, with its revenue.
///
/// Only a candidate subset of the grid is scanned: every grid point within one
/// step of a knot `v_j` or `v_j + eps`, plus both ends of the grid. Away from
/// knots the smoothed demand is constant, so revenue rises to the right end of
/// such a span; spans where a ramp is active are no longer than one step.
pub fn discretized_best(q: &ValueDistribution, params: &SmoothingParams) -> Result<(f64, f64)> {
    if params.is_continuous() {
        return Err(PricingError::InvalidParameter(
            "discretized best response needs eps > 0".into(),
        ));
    }
    let eps = params.eps();
    let last = params.grid_len() - 1;
    let mut cand: Vec<usize> = Vec::with_capacity(8 * q.len() + 2);
    cand.push(0);
    cand.push(last);
    for &v in q.values() {
        for knot in [v, v + eps] {
            let base = (knot / eps).floor() as i64;
            for i in base - 1..=base + 2 {
                if i >= 0 && (i as usize) <= last {
                    cand.push(i as usize);
                }
            }
        }
    }
    cand.sort_unstable();
    cand.dedup();
    let revs: Vec<(f64, f64)> = cand
        .iter()
        .map(|&i| {
            let p = params.grid_point(i);
            (p, p * q.sdem(eps, p))
        })
        .collect();
    let best = revs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let &(p, _) = revs
        .iter()
        .find(|r| r.1 >= best - TIE_TOL)
        .expect("candidate set is nonempty");
    Ok((p, best))
}

/// `argmax_{p in P_eps} p * dem^eps(p)`, smallest on ties.
pub fn discretized_best_response(q: &ValueDistribution, params: &SmoothingParams) -> Result<f64> {
    discretized_best(q, params).map(|(p, _)| p)
}

/// Levy distance between two valuation distributions, to within `tol`.
///
/// Bisection on the side length; for a candidate `eps` the sandwich
/// `F_P(x - eps) - eps <= F_Q(x) <= F_P(x + eps) + eps` is checked only at the
/// breakpoints of both sides, which suffices for step CDFs.
pub fn levy_distance(p: &ValueDistribution, q: &ValueDistribution, tol: f64) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(PricingError::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    if levy_feasible(p, q, 0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if levy_feasible(p, q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn levy_feasible(p: &ValueDistribution, q: &ValueDistribution, eps: f64) -> bool {
    // Lower side: F_P(x - eps) - eps <= F_Q(x).
    for (i, &a) in p.values.iter().enumerate() {
        if p.head[i + 1] - eps > q.cdf(a + eps) {
            return false;
        }
    }
    for (j, &b) in q.values.iter().enumerate() {
        if p.cdf(b - eps) - eps > q.head[j + 1] {
            return false;
        }
    }
    // Upper side: F_Q(x) <= F_P(x + eps) + eps.
    for (j, &b) in q.values.iter().enumerate() {
        if q.head[j + 1] > p.cdf(b + eps) + eps {
            return false;
        }
    }
    for (i, &a) in p.values.iter().enumerate() {
        if q.cdf(a - eps) > p.head[i + 1] + eps {
            return false;
        }
    }
    true
}

/// Price `max(br_D(u) - eps, 0)`.
pub fn conservative_policy(d: &TypeDistribution, u: &Context, eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(PricingError::InvalidParameter(format!(
            "eps {eps} outside [0, 1]"
        )));
    }
    Ok((d.project(u)?.best_response() - eps).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q0_k4() -> ValueDistribution {
        ValueDistribution::new(vec![
            (0.5, 1.0 / 6.0),
            (0.6, 1.0 / 6.0),
            (0.75, 1.0 / 6.0),
            (1.0, 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn project_single_atom_picks_coordinate() {
        let d = TypeDistribution::point_mass(vec![0.6, 0.8]).unwrap();
        let q = d.project(&Context::basis(2, 0).unwrap()).unwrap();
        assert_eq!(q.values(), &[0.6]);
        assert_eq!(q.weights(), &[1.0]);
    }

    #[test]
    fn near_duplicate_atoms_rejected() {
        let r = TypeDistribution::from_pairs(
            2,
            vec![(vec![0.5, 0.5], 0.5), (vec![0.5, 0.5 + 1e-15], 0.5)],
        );
        assert!(matches!(r, Err(PricingError::InvalidDistribution(_))));
    }

    #[test]
    fn project_merges_equal_valuations() {
        let d = TypeDistribution::from_pairs(2, vec![(vec![0.3, 0.4], 0.5), (vec![0.4, 0.3], 0.5)])
            .unwrap();
        let s = 1.0 / 2f64.sqrt();
        let q = d.project(&Context::new(vec![s, s]).unwrap()).unwrap();
        assert_eq!(q.len(), 1);
        assert_abs_diff_eq!(q.values()[0], 0.7 / 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.values()[0], 0.494975, epsilon = 1e-6);
        assert_abs_diff_eq!(q.weights()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn project_errors() {
        let d = TypeDistribution::point_mass(vec![0.6, 0.8]).unwrap();
        assert!(matches!(
            d.project(&Context::scalar()),
            Err(PricingError::DimensionMismatch { .. })
        ));
        let d = TypeDistribution::point_mass(vec![0.9, 0.9]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(matches!(
            d.project(&Context::new(vec![s, s]).unwrap()),
            Err(PricingError::ValuationOutOfRange { .. })
        ));
        // the lenient projection clamps
        let q = d
            .project_clamped(&Context::new(vec![s, s]).unwrap())
            .unwrap();
        assert_eq!(q.values(), &[1.0]);
    }

    #[test]
    fn context_must_be_unit() {
        assert!(Context::new(vec![1.0, 1.0]).is_err());
        assert!(Context::new(vec![0.6, 0.8]).is_ok());
    }

    #[test]
    fn demand_on_q0() {
        let q = q0_k4();
        let expected = [1.0, 5.0 / 6.0, 2.0 / 3.0, 0.5];
        for (i, &v) in q.values().iter().enumerate() {
            assert_abs_diff_eq!(q.demand(v).unwrap(), expected[i], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(q.demand(0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.demand(0.7).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert!(q.demand(1.5).is_err());
        assert!(q.demand(-0.1).is_err());
    }

    #[test]
    fn revenue_on_q0() {
        let q = q0_k4();
        for &v in q.values() {
            assert_abs_diff_eq!(q.revenue(v).unwrap(), 0.5, epsilon = 1e-12);
        }
        assert_eq!(q.revenue(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(q.revenue(0.7).unwrap(), 7.0 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn best_response_tie_break_smallest() {
        assert_eq!(q0_k4().best_response(), 0.5);
        assert_eq!(
            ValueDistribution::point_mass(0.37).unwrap().best_response(),
            0.37
        );
        let q = ValueDistribution::new(vec![(0.25, 0.5), (0.5, 0.5)]).unwrap();
        assert_eq!(q.best_response(), 0.25);
    }

    #[test]
    fn gap_examples() {
        let q = q0_k4();
        assert_abs_diff_eq!(q.gap(0.5).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.gap(0.7).unwrap(), 1.0 / 30.0, epsilon = 1e-12);
        let pm = ValueDistribution::point_mass(0.4).unwrap();
        assert_abs_diff_eq!(pm.gap(0.41).unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn levy_examples() {
        let a = ValueDistribution::point_mass(0.3).unwrap();
        let b = ValueDistribution::point_mass(0.5).unwrap();
        assert_eq!(levy_distance(&a, &a, 1e-9).unwrap(), 0.0);
        assert_abs_diff_eq!(levy_distance(&a, &b, 1e-9).unwrap(), 0.2, epsilon = 2e-9);
        assert_abs_diff_eq!(levy_distance(&b, &a, 1e-9).unwrap(), 0.2, epsilon = 2e-9);
        let c = ValueDistribution::new(vec![(0.5, 0.9), (1.0, 0.1)]).unwrap();
        assert_abs_diff_eq!(levy_distance(&b, &c, 1e-9).unwrap(), 0.1, epsilon = 2e-9);
        assert!(levy_distance(&a, &b, 0.0).is_err());
    }

    #[test]
    fn smoothed_examples() {
        let pm = ValueDistribution::point_mass(0.5).unwrap();
        assert_abs_diff_eq!(pm.smoothed_demand(0.1, 0.55).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            pm.smoothed_revenue(0.1, 0.55).unwrap(),
            0.275,
            epsilon = 1e-12
        );
        let q = q0_k4();
        assert_abs_diff_eq!(q.smoothed_demand(0.1, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            q.smoothed_demand(0.1, 0.55).unwrap(),
            11.0 / 12.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(q.smoothed_revenue(0.1, 0.5).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(q.smoothed_revenue(0.1, 0.0).unwrap(), 0.0);
        assert!(q.smoothed_demand(0.0, 0.5).is_err());
        assert!(q.smoothed_demand(1.0, 0.5).is_err());
    }

    fn brute_grid_argmax(q: &ValueDistribution, eps: f64) -> f64 {
        let params = SmoothingParams::new(eps).unwrap();
        let grid = params.grid();
        let revs: Vec<f64> = grid
            .iter()
            .map(|&p| {
                // independent evaluation of the smoothing integral by midpoint quadrature
                let n = 4000;
                let avg: f64 = (0..n)
                    .map(|k| {
                        let delta = eps * (k as f64 + 0.5) / n as f64;
                        q.atoms()
                            .filter(|&(v, _)| v >= p - delta)
                            .map(|a| a.1)
                            .sum::<f64>()
                    })
                    .sum::<f64>()
                    / n as f64;
                p * avg
            })
            .collect();
        let best = revs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        grid[revs.iter().position(|&r| r >= best - 1e-6).unwrap()]
    }

    #[test]
    fn discretized_best_response_examples() {
        let pm = ValueDistribution::point_mass(0.5).unwrap();
        let params = SmoothingParams::new(0.25).unwrap();
        assert_eq!(params.grid(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(discretized_best_response(&pm, &params).unwrap(), 0.5);
        let top = ValueDistribution::point_mass(1.0).unwrap();
        assert_eq!(discretized_best_response(&top, &params).unwrap(), 1.0);
        let q = q0_k4();
        let p05 = SmoothingParams::new(0.05).unwrap();
        assert_eq!(p05.grid_len(), 21);
        let got = discretized_best_response(&q, &p05).unwrap();
        assert_abs_diff_eq!(got, brute_grid_argmax(&q, 0.05), epsilon = 1e-12);
        assert!(discretized_best_response(&q, &SmoothingParams::continuous()).is_err());
    }

    #[test]
    fn smoothing_grid_snap() {
        let p = SmoothingParams::new(0.02).unwrap();
        assert_eq!(p.grid_len(), 51);
        assert_eq!(p.grid_point(50), 1.0);
        assert_eq!(p.snap(0.34), Some(17));
        assert_eq!(p.snap(0.341), None);
        assert!(SmoothingParams::new(1.0).is_err());
    }

    #[test]
    fn conservative_policy_examples() {
        let d = TypeDistribution::point_mass(vec![0.5]).unwrap();
        assert_abs_diff_eq!(
            conservative_policy(&d, &Context::scalar(), 0.1).unwrap(),
            0.4,
            epsilon = 1e-12
        );
        let d = TypeDistribution::point_mass(vec![0.05]).unwrap();
        assert_eq!(
            conservative_policy(&d, &Context::scalar(), 0.1).unwrap(),
            0.0
        );
        let d = TypeDistribution::point_mass(vec![0.75]).unwrap();
        assert_abs_diff_eq!(
            conservative_policy(&d, &Context::scalar(), 0.25).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn json_shapes() {
        let d =
            TypeDistribution::from_pairs(2, vec![(vec![0.1, 0.2], 0.25), (vec![0.3, 0.4], 0.75)])
                .unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(
            s,
            r#"{"dim":2,"atoms":[{"theta":[0.1,0.2],"w":0.25},{"theta":[0.3,0.4],"w":0.75}]}"#
        );
        let back: TypeDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let q = q0_k4();
        let s = serde_json::to_string(&q).unwrap();
        assert!(s.starts_with(r#"{"atoms":[{"v":0.5,"w":"#));
        let back: ValueDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        let bad = r#"{"atoms":[{"v":0.5,"w":0.4}]}"#;
        assert!(serde_json::from_str::<ValueDistribution>(bad).is_err());
    }
}
