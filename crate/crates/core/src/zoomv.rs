//! Variance-aware zooming for non-contextual pricing.
//!
//! Arms are prices. Each arm keeps Welford statistics of its revenue samples
//! `p * y`; its index is `mean + 2 r` with the Bernstein-style radius
//! `r = sqrt(c_v V ln T / n) + c_b ln T / (n - 1)`. A price `p` is covered by
//! the largest active arm `q <= p` when `p <= q + r(q)`; after each pull the
//! gap to the next arm is checked and a midpoint arm activated if needed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::learner::{Feedback, Learner, LearnerRng, Quote};
use crate::pricing::Context;

fn default_const_var() -> f64 {
    10.0
}

fn default_const_bias() -> f64 {
    12.0
}

/// Radius constants and the variance ablation switch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomConfig {
    #[serde(default = "default_const_var")]
    pub const_var: f64,
    #[serde(default = "default_const_bias")]
    pub const_bias: f64,
    /// Replace the empirical variance by 1 in the radius.
    #[serde(default)]
    pub variance_blind: bool,
}

impl Default for ZoomConfig {
    fn default() -> Self {
        ZoomConfig {
            const_var: default_const_var(),
            const_bias: default_const_bias(),
            variance_blind: false,
        }
    }
}

/// Pull statistics of one price.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmStats {
    pub price: f64,
    pub n: u64,
    pub sum: f64,
    mean: f64,
    pub m2: f64,
}

impl ArmStats {
    pub fn new(price: f64) -> Self {
        ArmStats {
            price,
            n: 0,
            sum: 0.0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    /// Statistics after the given revenue samples.
    pub fn from_samples(price: f64, samples: &[f64]) -> Self {
        let mut s = ArmStats::new(price);
        for &x in samples {
            s.push(x);
        }
        s
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.mean
        }
    }

    /// Sample variance: 0 before any pull, infinite after one.
    pub fn variance(&self) -> f64 {
        match self.n {
            0 => 0.0,
            1 => f64::INFINITY,
            n => self.m2 / (n - 1) as f64,
        }
    }
}

/// `sqrt(c_v V ln T / n) + c_b ln T / (n - 1)`, infinite for `n <= 1`.
pub fn confidence_radius(stats: &ArmStats, horizon: u64, cfg: &ZoomConfig) -> f64 {
    if stats.n <= 1 {
        return f64::INFINITY;
    }
    let ln_t = (horizon as f64).ln();
    let n = stats.n as f64;
    let v = if cfg.variance_blind {
        1.0
    } else {
        stats.variance()
    };
    (cfg.const_var * v * ln_t / n).sqrt() + cfg.const_bias * ln_t / (n - 1.0)
}

/// `mean + 2 r`.
pub fn index(stats: &ArmStats, horizon: u64, cfg: &ZoomConfig) -> f64 {
    stats.mean() + 2.0 * confidence_radius(stats, horizon, cfg)
}

/// Ordering key: larger index first, then smaller price.
#[derive(Clone, Copy, Debug)]
struct IndexKey {
    index: f64,
    price: f64,
}

impl PartialEq for IndexKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for IndexKey {}

impl PartialOrd for IndexKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for IndexKey {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .index
            .total_cmp(&self.index)
            .then(self.price.total_cmp(&other.price))
    }
}

/// Initial arms `{2^i / T : i = 0..=floor(log2 T)} ∪ {1}`.
pub fn dyadic_seeds(horizon: u64) -> Vec<f64> {
    let top = 63 - horizon.max(1).leading_zeros() as u64;
    let mut seeds: Vec<f64> = (0..=top)
        .map(|i| (1u64 << i) as f64 / horizon as f64)
        .collect();
    if seeds.last() != Some(&1.0) {
        seeds.push(1.0);
    }
    seeds
}

/// Active arms and their statistics.
#[derive(Clone, Debug)]
pub struct ZoomState {
    arms: BTreeMap<u64, ArmStats>,
    order: BTreeSet<IndexKey>,
    horizon: u64,
    round: u64,
    cfg: ZoomConfig,
    insertions: u64,
    initial: usize,
}

impl ZoomState {
    pub fn new(horizon: u64, cfg: ZoomConfig) -> Result<Self> {
        if horizon < 2 {
            return Err(PricingError::InvalidParameter(format!(
                "zooming needs T >= 2, got {horizon}"
            )));
        }
        let mut s = ZoomState {
            arms: BTreeMap::new(),
            order: BTreeSet::new(),
            horizon,
            round: 0,
            cfg,
            insertions: 0,
            initial: 0,
        };
        for p in dyadic_seeds(horizon) {
            s.insert_arm(ArmStats::new(p));
        }
        s.initial = s.arms.len();
        Ok(s)
    }

    fn insert_arm(&mut self, arm: ArmStats) {
        self.order.insert(self.key(&arm));
        self.arms.insert(arm.price.to_bits(), arm);
    }

    fn key(&self, arm: &ArmStats) -> IndexKey {
        IndexKey {
            index: index(arm, self.horizon, &self.cfg),
            price: arm.price,
        }
    }

    /// Replaces the statistics of an existing arm.
    pub fn set_stats(&mut self, arm: ArmStats) -> Result<()> {
        let old = *self
            .arms
            .get(&arm.price.to_bits())
            .ok_or(PricingError::InactiveArm(arm.price))?;
        self.order.remove(&self.key(&old));
        self.insert_arm(arm);
        Ok(())
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn config(&self) -> &ZoomConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    pub fn initial_arms(&self) -> usize {
        self.initial
    }

    pub fn arm(&self, price: f64) -> Option<&ArmStats> {
        self.arms.get(&price.to_bits())
    }

    /// Active arms in increasing price order.
    pub fn arms(&self) -> impl Iterator<Item = &ArmStats> {
        self.arms.values()
    }

    pub fn radius(&self, arm: &ArmStats) -> f64 {
        confidence_radius(arm, self.horizon, &self.cfg)
    }

    /// Smallest active price with the largest index.
    pub fn select_price(&self) -> f64 {
        self.order.first().expect("active set is never empty").price
    }

    /// Records a revenue sample `p * y` for the active arm `p`.
    pub fn update(&mut self, p: f64, y: bool) -> Result<()> {
        let mut arm = *self
            .arms
            .get(&p.to_bits())
            .ok_or(PricingError::InactiveArm(p))?;
        self.order.remove(&self.key(&arm));
        arm.push(if y { p } else { 0.0 });
        self.insert_arm(arm);
        self.round += 1;
        Ok(())
    }

    /// If prices between `p + r(p)` and the next active arm are uncovered,
    /// activates the midpoint between `p` and that arm and returns it.
    pub fn activate_if_uncovered(&mut self, p: f64) -> Result<Option<f64>> {
        let arm = *self
            .arms
            .get(&p.to_bits())
            .ok_or(PricingError::InactiveArm(p))?;
        let next = match self.arms.range(p.to_bits() + 1..).next() {
            Some((_, a)) => a.price,
            None => return Ok(None),
        };
        let reach = p + self.radius(&arm);
        let floor = 1.0 / self.horizon as f64;
        if reach >= next || next <= floor {
            return Ok(None);
        }
        let mid = 0.5 * (p + next);
        if !(mid > p && mid < next) {
            return Ok(None);
        }
        self.insert_arm(ArmStats::new(mid));
        self.insertions += 1;
        Ok(Some(mid))
    }

    /// First consecutive pair `(q, next)` with `q + r(q) < next`, if any.
    pub fn uncovered_gap(&self) -> Option<(f64, f64)> {
        let floor = 1.0 / self.horizon as f64;
        let mut it = self.arms.values();
        let mut prev = it.next()?;
        if prev.price > floor + 1e-15 {
            return Some((floor, prev.price));
        }
        for a in it {
            if prev.price + self.radius(prev) < a.price {
                return Some((prev.price, a.price));
            }
            prev = a;
        }
        if prev.price < 1.0 && prev.price + self.radius(prev) < 1.0 {
            return Some((prev.price, 1.0));
        }
        None
    }

    /// Number of active arms with finite radius whose empirical mean is
    /// farther than the radius from the true revenue, and the number checked.
    pub fn clean_event_audit(&self, rev: impl Fn(f64) -> f64) -> (u64, u64) {
        let mut bad = 0;
        let mut checked = 0;
        for a in self.arms.values() {
            let r = self.radius(a);
            if r.is_finite() {
                checked += 1;
                if (a.mean() - rev(a.price)).abs() > r {
                    bad += 1;
                }
            }
        }
        (bad, checked)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let prices: Vec<f64> = self.arms.values().map(|a| a.price).collect();
        if prices.windows(2).any(|w| w[0] >= w[1]) {
            return Err("active prices not strictly increasing".into());
        }
        if self.arm(1.0).is_none() {
            return Err("price 1 is not active".into());
        }
        if self.arms.len() as u64 != self.initial as u64 + self.insertions {
            return Err("active set size does not match insertions".into());
        }
        if let Some((a, b)) = self.uncovered_gap() {
            return Err(format!("prices between {a} and {b} are uncovered"));
        }
        Ok(())
    }
}

/// The zooming learner.
#[derive(Clone, Debug)]
pub struct ZoomV {
    state: ZoomState,
}

impl ZoomV {
    pub fn new(horizon: u64, cfg: ZoomConfig) -> Result<Self> {
        Ok(ZoomV {
            state: ZoomState::new(horizon, cfg)?,
        })
    }

    pub fn state(&self) -> &ZoomState {
        &self.state
    }
}

impl Learner for ZoomV {
    fn name(&self) -> &str {
        if self.state.cfg.variance_blind {
            "zoomv_blind"
        } else {
            "zoomv"
        }
    }

    fn select(&mut self, _u: &Context, _rng: &mut LearnerRng) -> Result<Quote> {
        Ok(Quote::plain(self.state.select_price()))
    }

    fn observe(&mut self, fb: &Feedback<'_>) -> Result<()> {
        self.state.update(fb.price, fb.purchase)?;
        while self.state.activate_if_uncovered(fb.price)?.is_some() {}
        Ok(())
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        self.state.check()
    }
}
