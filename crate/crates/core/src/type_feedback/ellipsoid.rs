//! Ellipsoid-method localization of a single type vector from threshold
//! feedback `y = 1{<u, theta> >= p}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{PricingError, Result};
use crate::pricing::Context;

/// Cuts are skipped once the ellipsoid is thinner than this along `u`.
pub const WIDTH_FLOOR: f64 = 1e-9;
/// Relative inflation applied after every cut to absorb rounding.
const INFLATE: f64 = 1e-10;

/// What a cut did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutOutcome {
    /// The ellipsoid shrank.
    Cut,
    /// The halfspace already contains (almost) all of the ellipsoid, or the
    /// ellipsoid is already thinner than [`WIDTH_FLOOR`] along `u`.
    Skipped,
    /// The halfspace misses the ellipsoid; nothing changed.
    Missed,
    /// The updated shape was not positive definite; nothing changed.
    NumericalFailure,
}

/// `{theta : (theta - c)^T P^{-1} (theta - c) <= 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidState {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    missed: u64,
    failures: u64,
}

impl EllipsoidState {
    /// The ball around `(1/2, ..., 1/2)` of radius `sqrt(d)/2`, which
    /// contains `[0,1]^d`.
    pub fn unit_cube(dim: usize) -> Self {
        EllipsoidState {
            center: DVector::from_element(dim, 0.5),
            shape: DMatrix::identity(dim, dim) * (dim as f64 / 4.0),
            missed: 0,
            failures: 0,
        }
    }

    pub fn from_parts(center: Vec<f64>, shape: Vec<f64>) -> Result<Self> {
        let d = center.len();
        if shape.len() != d * d {
            return Err(PricingError::DimensionMismatch {
                expected: d * d,
                got: shape.len(),
            });
        }
        let shape = DMatrix::from_row_slice(d, d, &shape);
        if (&shape - shape.transpose()).amax() > 1e-12 || shape.clone().cholesky().is_none() {
            return Err(PricingError::Numerical(
                "shape is not symmetric positive definite".into(),
            ));
        }
        Ok(EllipsoidState {
            center: DVector::from_vec(center),
            shape,
            missed: 0,
            failures: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        self.center.as_slice()
    }

    /// Cuts that missed the ellipsoid so far.
    pub fn missed_cuts(&self) -> u64 {
        self.missed
    }

    /// Cuts rejected for losing positive definiteness so far.
    pub fn numerical_failures(&self) -> u64 {
        self.failures
    }

    fn dir(&self, u: &Context) -> Result<DVector<f64>> {
        if u.dim() != self.dim() {
            return Err(PricingError::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        Ok(DVector::from_column_slice(u.as_slice()))
    }

    fn half_width(&self, a: &DVector<f64>) -> f64 {
        (a.dot(&(&self.shape * a))).max(0.0).sqrt()
    }

    /// `clamp(<c, u>, 0, 1)`.
    pub fn price(&self, u: &Context) -> Result<f64> {
        let a = self.dir(u)?;
        Ok(self.center.dot(&a).clamp(0.0, 1.0))
    }

    /// Length `2 sqrt(u^T P u)` of the ellipsoid's projection on `u`.
    pub fn width(&self, u: &Context) -> Result<f64> {
        let a = self.dir(u)?;
        Ok(2.0 * self.half_width(&a))
    }

    /// `sqrt(det P)`, proportional to the volume.
    pub fn volume_factor(&self) -> f64 {
        self.shape.determinant().max(0.0).sqrt()
    }

    /// Whether `theta` lies in the ellipsoid up to a relative slack.
    pub fn contains(&self, theta: &[f64], slack: f64) -> bool {
        let diff = DVector::from_column_slice(theta) - &self.center;
        match self.shape.clone().cholesky() {
            Some(ch) => diff.dot(&ch.solve(&diff)) <= 1.0 + slack,
            None => false,
        }
    }

    /// Keeps `{<u, theta> >= p}` if `y`, else `{<u, theta> < p}`.
    pub fn update(&mut self, u: &Context, p: f64, y: bool) -> Result<CutOutcome> {
        let a = self.dir(u)?;
        // keep {h^T theta <= beta}
        let (h, beta) = if y { (-a, -p) } else { (a, p) };
        let s = self.half_width(&h);
        if 2.0 * s < WIDTH_FLOOR {
            return Ok(CutOutcome::Skipped);
        }
        let d = self.dim();
        let alpha = (h.dot(&self.center) - beta) / s;
        if alpha > 1.0 {
            self.missed += 1;
            return Ok(CutOutcome::Missed);
        }
        if d == 1 {
            return Ok(self.cut_interval(&h, beta, alpha));
        }
        let df = d as f64;
        if alpha <= -1.0 / df {
            return Ok(CutOutcome::Skipped);
        }
        let g = &self.shape * &h / s;
        let center = &self.center - &g * ((1.0 + df * alpha) / (df + 1.0));
        let coef = 2.0 * (1.0 + df * alpha) / ((df + 1.0) * (1.0 + alpha));
        let scale = df * df * (1.0 - alpha * alpha) / (df * df - 1.0) * (1.0 + INFLATE);
        let mut shape = (&self.shape - &g * g.transpose() * coef) * scale;
        shape = (&shape + shape.transpose()) * 0.5;
        if shape.clone().cholesky().is_none() {
            self.failures += 1;
            return Ok(CutOutcome::NumericalFailure);
        }
        self.center = center;
        self.shape = shape;
        Ok(CutOutcome::Cut)
    }

    /// Exact interval intersection in one dimension.
    fn cut_interval(&mut self, h: &DVector<f64>, beta: f64, alpha: f64) -> CutOutcome {
        if alpha <= -1.0 {
            return CutOutcome::Skipped;
        }
        let c = self.center[0];
        let r = self.shape[(0, 0)].sqrt();
        let (mut lo, mut hi) = (c - r, c + r);
        let bound = beta / h[0];
        if h[0] > 0.0 {
            hi = hi.min(bound);
        } else {
            lo = lo.max(bound);
        }
        let half = 0.5 * (hi - lo);
        self.center[0] = 0.5 * (lo + hi);
        self.shape[(0, 0)] = half * half;
        CutOutcome::Cut
    }
}
