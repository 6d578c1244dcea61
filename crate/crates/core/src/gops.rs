//! Optimistic posterior sampling over a finite model class.
//!
//! The posterior is an exponential-weights distribution whose loss combines
//! a squared prediction error on the purchase bit with an optimism bonus
//! proportional to the model's best achievable revenue. With `eps = 0` the
//! learner posts the sampled model's exact best response (OPS); with
//! `eps > 0` it works on the price grid with smoothed demand and posts a
//! uniformly perturbed-down grid price (POPS).

use rand::Rng;
use rayon::prelude::*;

use crate::error::{PricingError, Result};
use crate::learner::{Feedback, Learner, LearnerRng, Quote};
use crate::model_space::ModelClass;
use crate::pricing::{discretized_best, Context, SmoothingParams, ValueDistribution};

/// Model counts above this are evaluated in parallel.
const PAR_THRESHOLD: usize = 2048;
/// Distinct contexts whose per-model evaluations are cached.
const CACHE_CONTEXTS: usize = 64;

/// `(y - dem_Q(p))^2 - lambda * rev_Q(br_Q)`.
pub fn ops_loss(lambda: f64, q: &ValueDistribution, p: f64, y: bool) -> Result<f64> {
    check_lambda(lambda)?;
    let f = q.demand(p)?;
    Ok(sq(y, f) - lambda * q.best_revenue())
}

/// `(dem^eps_Q(p̂) - y)^2 - lambda * rev^eps_Q(br^eps_Q)`, with `p̂` on the grid.
pub fn pops_loss(
    lambda: f64,
    params: &SmoothingParams,
    q: &ValueDistribution,
    hat_p: f64,
    y: bool,
) -> Result<f64> {
    check_lambda(lambda)?;
    if params.snap(hat_p).is_none() {
        return Err(PricingError::OffGrid {
            price: hat_p,
            step: params.eps(),
        });
    }
    let (_, opt) = discretized_best(q, params)?;
    Ok(sq(y, q.sdem(params.eps(), hat_p)) - lambda * opt)
}

#[inline]
fn sq(y: bool, f: f64) -> f64 {
    let r = if y { 1.0 } else { 0.0 } - f;
    r * r
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(PricingError::InvalidParameter(format!(
            "optimism strength {lambda} must be positive"
        )))
    }
}

/// `sqrt(ln|D| / (K T))`.
pub fn ops_lambda(class_size: usize, k: usize, horizon: u64) -> f64 {
    ((class_size as f64).ln() / (k as f64 * horizon as f64)).sqrt()
}

/// `sqrt(d / T)`.
pub fn pops_lambda(dim: usize, horizon: u64) -> f64 {
    (dim as f64 / horizon as f64).sqrt()
}

/// One round's decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GopsDecision {
    pub sampled_model_index: usize,
    pub hat_price: f64,
    pub posted_price: f64,
    pub perturbation: f64,
}

/// Per-model quantities at one context.
#[derive(Clone, Debug)]
struct ModelEval {
    q: ValueDistribution,
    hat: f64,
    opt: f64,
}

/// Posterior over a finite class of demand models.
#[derive(Clone, Debug)]
pub struct PosteriorState {
    class: ModelClass,
    log_weights: Vec<f64>,
    lambda: f64,
    smoothing: SmoothingParams,
    round: u64,
    cache: Vec<(Vec<u64>, Vec<ModelEval>)>,
    cache_next: usize,
}

impl PosteriorState {
    /// Posterior initialized at the class prior.
    pub fn new(class: ModelClass, lambda: f64, smoothing: SmoothingParams) -> Result<Self> {
        check_lambda(lambda)?;
        let log_weights = class.prior().iter().map(|p| p.ln()).collect();
        Ok(PosteriorState {
            class,
            log_weights,
            lambda,
            smoothing,
            round: 0,
            cache: Vec::new(),
            cache_next: 0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn smoothing(&self) -> &SmoothingParams {
        &self.smoothing
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn class(&self) -> &ModelClass {
        &self.class
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// The posterior as probabilities.
    pub fn posterior(&self) -> Vec<f64> {
        let m = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    fn evaluate(&self, u: &Context) -> Result<Vec<ModelEval>> {
        let smoothing = self.smoothing;
        let eval = |m: &crate::pricing::TypeDistribution| -> Result<ModelEval> {
            let q = m.project_clamped(u)?;
            let (hat, opt) = if smoothing.is_continuous() {
                (q.best_response(), q.best_revenue())
            } else {
                discretized_best(&q, &smoothing)?
            };
            Ok(ModelEval { q, hat, opt })
        };
        let models = self.class.models();
        if models.len() >= PAR_THRESHOLD {
            models.par_iter().map(eval).collect()
        } else {
            models.iter().map(eval).collect()
        }
    }

    fn evals(&mut self, u: &Context) -> Result<usize> {
        let key: Vec<u64> = u.as_slice().iter().map(|x| x.to_bits()).collect();
        if let Some(pos) = self.cache.iter().position(|(k, _)| *k == key) {
            return Ok(pos);
        }
        let e = self.evaluate(u)?;
        if self.cache.len() < CACHE_CONTEXTS {
            self.cache.push((key, e));
            Ok(self.cache.len() - 1)
        } else {
            let slot = self.cache_next;
            self.cache[slot] = (key, e);
            self.cache_next = (slot + 1) % CACHE_CONTEXTS;
            Ok(slot)
        }
    }

    /// Samples a model from the posterior, then a perturbation when smoothing
    /// is active (in that order on `rng`).
    pub fn select<R: Rng + ?Sized>(&mut self, u: &Context, rng: &mut R) -> Result<GopsDecision> {
        let slot = self.evals(u)?;
        let m = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(PricingError::DegenerateWeights);
        }
        let total: f64 = self.log_weights.iter().map(|l| (l - m).exp()).sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut idx = self.log_weights.len() - 1;
        for (i, l) in self.log_weights.iter().enumerate() {
            acc += (l - m).exp();
            if target < acc {
                idx = i;
                break;
            }
        }
        let hat = self.cache[slot].1[idx].hat;
        let perturbation = if self.smoothing.is_continuous() {
            0.0
        } else {
            rng.random::<f64>() * self.smoothing.eps()
        };
        Ok(GopsDecision {
            sampled_model_index: idx,
            hat_price: hat,
            posted_price: (hat - perturbation).max(0.0),
            perturbation,
        })
    }

    /// Exponential-weights update with the loss evaluated at `hat_p`.
    pub fn update(&mut self, u: &Context, hat_p: f64, y: bool) -> Result<()> {
        if !(0.0..=1.0).contains(&hat_p) {
            return Err(PricingError::PriceOutOfRange(hat_p));
        }
        let slot = self.evals(u)?;
        let evals = &self.cache[slot].1;
        let eps = self.smoothing.eps();
        let continuous = self.smoothing.is_continuous();
        let losses: Vec<f64> = evals
            .iter()
            .map(|e| {
                let f = if continuous {
                    e.q.dem(hat_p)
                } else {
                    e.q.sdem(eps, hat_p)
                };
                sq(y, f) - self.lambda * e.opt
            })
            .collect();
        self.apply_losses(&losses);
        Ok(())
    }

    /// `log mu(i) -= loss[i]`, then renormalize.
    pub(crate) fn apply_losses(&mut self, losses: &[f64]) {
        for (lw, l) in self.log_weights.iter_mut().zip(losses) {
            *lw -= l;
        }
        // log-sum-exp with a max shift
        let m = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = m + self
            .log_weights
            .iter()
            .map(|l| (l - m).exp())
            .sum::<f64>()
            .ln();
        for lw in &mut self.log_weights {
            *lw -= lse;
        }
        self.round += 1;
    }
}

/// OPS / POPS as a [`Learner`].
#[derive(Clone, Debug)]
pub struct Gops {
    name: String,
    state: PosteriorState,
    last: Option<GopsDecision>,
}

impl Gops {
    pub fn new(name: impl Into<String>, state: PosteriorState) -> Self {
        Gops {
            name: name.into(),
            state,
            last: None,
        }
    }

    pub fn state(&self) -> &PosteriorState {
        &self.state
    }

    pub fn last_decision(&self) -> Option<&GopsDecision> {
        self.last.as_ref()
    }
}

/// OPS: uniform prior, continuous prices, `lambda = sqrt(ln|D| / (K T))`.
pub fn make_ops(class: ModelClass, k: usize, horizon: u64) -> Result<Gops> {
    make_ops_with(class, k, horizon, None)
}

/// OPS with an optional explicit optimism strength.
pub fn make_ops_with(
    class: ModelClass,
    k: usize,
    horizon: u64,
    lambda: Option<f64>,
) -> Result<Gops> {
    if k == 0 || horizon == 0 {
        return Err(PricingError::InvalidParameter(
            "K and T must be positive".into(),
        ));
    }
    let n = class.len();
    let uniform = ModelClass::uniform(class.models().to_vec())?;
    let mut lambda = lambda.unwrap_or_else(|| ops_lambda(n, k, horizon));
    if n == 1 && lambda == 0.0 {
        // a single model never moves; any positive strength is equivalent
        lambda = 1.0;
    }
    Ok(Gops::new(
        "ops",
        PosteriorState::new(uniform, lambda, SmoothingParams::continuous())?,
    ))
}

/// POPS: class prior kept, grid prices of step `eps`, perturbed posting.
pub fn make_pops(class: ModelClass, eps: f64, lambda: f64) -> Result<Gops> {
    if eps == 0.0 {
        return Err(PricingError::InvalidParameter(
            "POPS needs eps > 0; use OPS for continuous prices".into(),
        ));
    }
    let smoothing = SmoothingParams::new(eps)?;
    Ok(Gops::new(
        "pops",
        PosteriorState::new(class, lambda, smoothing)?,
    ))
}

impl Learner for Gops {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, u: &Context, rng: &mut LearnerRng) -> Result<Quote> {
        let d = self.state.select(u, rng)?;
        self.last = Some(d);
        let hat_price = (!self.state.smoothing.is_continuous()).then_some(d.hat_price);
        Ok(Quote {
            price: d.posted_price,
            hat_price,
        })
    }

    fn observe(&mut self, fb: &Feedback<'_>) -> Result<()> {
        let hat = fb.hat_price.unwrap_or(fb.price);
        self.state.update(fb.context, hat, fb.purchase)
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        let total: f64 = self.state.log_weights.iter().map(|l| l.exp()).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("posterior sums to {total}"));
        }
        if let Some(d) = &self.last {
            let eps = self.state.smoothing.eps();
            if !(0.0..=eps).contains(&d.perturbation)
                || d.posted_price != (d.hat_price - d.perturbation).max(0.0)
            {
                return Err(format!("inconsistent decision {d:?}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::lb_base;
    use crate::pricing::TypeDistribution;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn pm(v: f64) -> TypeDistribution {
        TypeDistribution::point_mass(vec![v]).unwrap()
    }

    #[test]
    fn ops_loss_examples() {
        // dem 0.8 at p = 0.5, best revenue 0.5
        let q = ValueDistribution::new(vec![(0.25, 0.2), (0.625, 0.8)]).unwrap();
        assert_abs_diff_eq!(q.best_revenue(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            ops_loss(0.1, &q, 0.5, true).unwrap(),
            -0.01,
            epsilon = 1e-12
        );
        let q0 = lb_base(4).unwrap();
        assert_abs_diff_eq!(
            ops_loss(0.05, &q0, 0.7, false).unwrap(),
            4.0 / 9.0 - 0.025,
            epsilon = 1e-12
        );
        assert!(ops_loss(0.0, &q0, 0.7, false).is_err());
    }

    #[test]
    fn pops_loss_examples() {
        let q = ValueDistribution::point_mass(0.5).unwrap();
        let params = SmoothingParams::new(0.25).unwrap();
        assert_abs_diff_eq!(
            pops_loss(0.1, &params, &q, 0.5, true).unwrap(),
            -0.05,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            pops_loss(0.1, &params, &q, 0.75, true).unwrap(),
            0.95,
            epsilon = 1e-12
        );
        assert!(matches!(
            pops_loss(0.1, &params, &q, 0.6, true),
            Err(PricingError::OffGrid { .. })
        ));
    }

    #[test]
    fn lambda_formulas() {
        assert_abs_diff_eq!(
            ops_lambda(16, 2, 1000),
            (16f64.ln() / 2000.0).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(ops_lambda(16, 2, 1000), 0.037233, epsilon = 1e-6);
        assert_abs_diff_eq!(pops_lambda(1, 10_000), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn singleton_class_posts_best_response() {
        let class = ModelClass::uniform(vec![pm(0.4)]).unwrap();
        let mut l = make_ops(class, 1, 100).unwrap();
        let mut rng = LearnerRng::seed_from_u64(3);
        for _ in 0..5 {
            let q = l.select(&Context::scalar(), &mut rng).unwrap();
            assert_eq!(q.price, 0.4);
            assert_eq!(q.hat_price, None);
        }
    }

    #[test]
    fn sampling_frequencies() {
        let class = ModelClass::uniform(vec![pm(0.4), pm(0.8)]).unwrap();
        let mut s = PosteriorState::new(class, 0.1, SmoothingParams::continuous()).unwrap();
        let mut rng = LearnerRng::seed_from_u64(11);
        let n = 100_000;
        let first = (0..n)
            .filter(|_| {
                s.select(&Context::scalar(), &mut rng)
                    .unwrap()
                    .sampled_model_index
                    == 0
            })
            .count();
        assert_abs_diff_eq!(first as f64 / n as f64, 0.5, epsilon = 0.01);
    }

    #[test]
    fn update_matches_exponential_weights() {
        // equal optimism terms: losses differ only through the demand fit
        let class = ModelClass::uniform(vec![pm(0.5), pm(1.0)]).unwrap();
        let mut s = PosteriorState::new(class, 0.1, SmoothingParams::continuous()).unwrap();
        let u = Context::scalar();
        // at p = 0.75, y = 1: model 0.5 predicts 0, model 1.0 predicts 1
        s.update(&u, 0.75, true).unwrap();
        let post = s.posterior();
        let l0: f64 = 1.0 - 0.1 * 0.5;
        let l1: f64 = 0.0 - 0.1 * 1.0;
        let w0 = (-l0).exp();
        let w1 = (-l1).exp();
        assert_abs_diff_eq!(post[0], w0 / (w0 + w1), epsilon = 1e-12);
        let total: f64 = s.log_weights().iter().map(|l| l.exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_to_one_posterior() {
        let class = ModelClass::uniform(vec![pm(0.3), pm(0.6)]).unwrap();
        let mut s = PosteriorState::new(class, 0.1, SmoothingParams::continuous()).unwrap();
        s.apply_losses(&[0.0, 2f64.ln()]);
        let post = s.posterior();
        assert_abs_diff_eq!(post[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_losses_leave_posterior() {
        let class = ModelClass::new(vec![pm(0.3), pm(0.6)], vec![0.25, 0.75], None).unwrap();
        let mut s = PosteriorState::new(class, 0.2, SmoothingParams::continuous()).unwrap();
        let before = s.posterior();
        s.apply_losses(&[1.7, 1.7]);
        for (a, b) in before.iter().zip(&s.posterior()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(s.round(), 1);
    }

    #[test]
    fn single_model_weight_stays_one() {
        let class = ModelClass::uniform(vec![pm(0.3)]).unwrap();
        let mut s = PosteriorState::new(class, 0.2, SmoothingParams::continuous()).unwrap();
        for i in 0..50 {
            s.update(&Context::scalar(), 0.5, i % 2 == 0).unwrap();
        }
        assert_abs_diff_eq!(s.posterior()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.log_weights()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pops_perturbs_down_from_grid() {
        let class = ModelClass::uniform(vec![pm(0.5), pm(0.9)]).unwrap();
        let mut l = make_pops(class, 0.1, 0.05).unwrap();
        let params = SmoothingParams::new(0.1).unwrap();
        let mut rng = LearnerRng::seed_from_u64(5);
        for _ in 0..200 {
            let q = l.select(&Context::scalar(), &mut rng).unwrap();
            let hat = q.hat_price.unwrap();
            assert!(params.snap(hat).is_some());
            assert!(q.price <= hat && q.price >= (hat - 0.1).max(0.0));
            l.check_invariants().unwrap();
        }
        assert!(make_pops(ModelClass::uniform(vec![pm(0.5)]).unwrap(), 0.0, 0.1).is_err());
    }

    #[test]
    fn uniform_prior_for_ops() {
        let class = ModelClass::new(vec![pm(0.3), pm(0.6)], vec![0.9, 0.1], None).unwrap();
        let l = make_ops(class, 1, 100).unwrap();
        assert_eq!(l.state().posterior(), vec![0.5, 0.5]);
    }
}
