//! Fixed-grid UCB1 over prices, the naive-discretization baseline.

use crate::error::{PricingError, Result};
use crate::learner::{Feedback, Learner, LearnerRng, Quote};
use crate::pricing::{Context, SmoothingParams};

#[derive(Clone, Debug)]
pub struct GridUcb {
    prices: Vec<f64>,
    pulls: Vec<u64>,
    sums: Vec<f64>,
    ln_t: f64,
    last: usize,
}

impl GridUcb {
    /// UCB1 over `{0, step, 2 step, ...} ∩ [0,1]`.
    pub fn new(grid_step: f64, horizon: u64) -> Result<Self> {
        if !(grid_step > 0.0 && grid_step < 1.0) {
            return Err(PricingError::InvalidParameter(format!(
                "grid step {grid_step} outside (0, 1)"
            )));
        }
        GridUcb::with_prices(SmoothingParams::new(grid_step)?.grid(), horizon)
    }

    pub fn with_prices(prices: Vec<f64>, horizon: u64) -> Result<Self> {
        if prices.is_empty() {
            return Err(PricingError::InvalidParameter("empty price grid".into()));
        }
        if let Some(p) = prices.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(PricingError::PriceOutOfRange(*p));
        }
        let n = prices.len();
        Ok(GridUcb {
            prices,
            pulls: vec![0; n],
            sums: vec![0.0; n],
            ln_t: (horizon.max(1) as f64).ln(),
            last: 0,
        })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    fn choose(&self) -> usize {
        if let Some(i) = self.pulls.iter().position(|&n| n == 0) {
            return i;
        }
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for (i, (&n, &s)) in self.pulls.iter().zip(&self.sums).enumerate() {
            let n = n as f64;
            let idx = s / n + (2.0 * self.ln_t / n).sqrt();
            if idx > best_index {
                best_index = idx;
                best = i;
            }
        }
        best
    }
}

impl Learner for GridUcb {
    fn name(&self) -> &str {
        "grid_ucb"
    }

    fn select(&mut self, _u: &Context, _rng: &mut LearnerRng) -> Result<Quote> {
        self.last = self.choose();
        Ok(Quote::plain(self.prices[self.last]))
    }

    fn observe(&mut self, fb: &Feedback<'_>) -> Result<()> {
        let i = self.last;
        if self.prices[i] != fb.price {
            return Err(PricingError::InactiveArm(fb.price));
        }
        self.pulls[i] += 1;
        if fb.purchase {
            self.sums[i] += fb.price;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn feed(l: &mut GridUcb, price: f64, y: bool) {
        let u = Context::scalar();
        l.observe(&Feedback {
            context: &u,
            price,
            hat_price: None,
            purchase: y,
            type_id: None,
            theta: None,
        })
        .unwrap();
    }

    #[test]
    fn single_arm() {
        let mut l = GridUcb::with_prices(vec![0.4], 100).unwrap();
        let mut rng = LearnerRng::seed_from_u64(0);
        for i in 0..10 {
            let q = l.select(&Context::scalar(), &mut rng).unwrap();
            assert_eq!(q.price, 0.4);
            feed(&mut l, q.price, i % 2 == 0);
        }
    }

    #[test]
    fn unpulled_first_in_order() {
        let mut l = GridUcb::new(0.25, 100).unwrap();
        let mut rng = LearnerRng::seed_from_u64(0);
        let mut seen = Vec::new();
        for _ in 0..5 {
            let q = l.select(&Context::scalar(), &mut rng).unwrap();
            seen.push(q.price);
            feed(&mut l, q.price, false);
        }
        assert_eq!(seen, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
