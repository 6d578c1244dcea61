//! Plug-in learner for full type feedback: post the best response of the
//! empirical type distribution.

use std::collections::BTreeMap;

use crate::error::{PricingError, Result};
use crate::learner::{Feedback, FeedbackKind, Learner, LearnerRng, Quote};
use crate::pricing::{Context, ValueDistribution};

/// Arrival counts of observed type vectors, keyed bit-exactly.
#[derive(Clone, Debug, Default)]
pub struct PluginState {
    counts: BTreeMap<Vec<u64>, (Vec<f64>, u64)>,
    total: u64,
}

impl PluginState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Projection of the empirical distribution along `u`, or `None` before
    /// any observation.
    pub fn empirical(&self, u: &Context) -> Result<Option<ValueDistribution>> {
        if self.total == 0 {
            return Ok(None);
        }
        let n = self.total as f64;
        let pairs = self
            .counts
            .values()
            .map(|(theta, c)| (u.dot(theta).clamp(0.0, 1.0), *c as f64 / n))
            .collect();
        ValueDistribution::from_unsorted(pairs).map(Some)
    }

    /// `1/2` before any observation, else the empirical best response.
    pub fn select(&self, u: &Context) -> Result<f64> {
        Ok(match self.empirical(u)? {
            None => 0.5,
            Some(q) => q.best_response(),
        })
    }

    pub fn update(&mut self, theta: &[f64]) -> Result<()> {
        if let Some(x) = theta.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(PricingError::InvalidParameter(format!(
                "type coordinate {x} outside [0, 1]"
            )));
        }
        let key = theta.iter().map(|x| x.to_bits()).collect();
        self.counts
            .entry(key)
            .or_insert_with(|| (theta.to_vec(), 0))
            .1 += 1;
        self.total += 1;
        Ok(())
    }
}

/// The plug-in learner.
#[derive(Clone, Debug, Default)]
pub struct Plugin {
    state: PluginState,
}

impl Plugin {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> &PluginState {
        &self.state
    }
}

impl Learner for Plugin {
    fn name(&self) -> &str {
        "plugin"
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::TypeVector
    }

    fn select(&mut self, u: &Context, _rng: &mut LearnerRng) -> Result<Quote> {
        Ok(Quote::plain(self.state.select(u)?))
    }

    fn observe(&mut self, fb: &Feedback<'_>) -> Result<()> {
        let theta = fb.theta.ok_or_else(|| {
            PricingError::InvalidParameter("plug-in learner needs the type vector".into())
        })?;
        self.state.update(theta)
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        let sum: u64 = self.state.counts.values().map(|c| c.1).sum();
        if sum != self.state.total {
            return Err(format!("counts sum to {sum}, total {}", self.state.total));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_price_is_half() {
        assert_eq!(PluginState::new().select(&Context::scalar()).unwrap(), 0.5);
    }

    #[test]
    fn singleton_empirical() {
        let mut s = PluginState::new();
        s.update(&[0.6, 0.8]).unwrap();
        assert_eq!(s.select(&Context::basis(2, 0).unwrap()).unwrap(), 0.6);
    }

    #[test]
    fn empirical_best_response() {
        let mut s = PluginState::new();
        s.update(&[0.25]).unwrap();
        s.update(&[0.25]).unwrap();
        s.update(&[0.5]).unwrap();
        assert_eq!(s.select(&Context::scalar()).unwrap(), 0.25);
        assert_eq!(s.distinct(), 2);
        assert!(s.update(&[1.5]).is_err());
    }
}
