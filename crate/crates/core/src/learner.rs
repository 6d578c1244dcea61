//! The interface every pricing learner implements.
//!
//! Learners see only the context, their own prices, the purchase bit and,
//! for the type-feedback learners, the realized type identifier or vector.
//! The true instance never crosses this boundary.

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::pricing::Context;

/// Random source handed to learners (the episode's learner substream).
pub type LearnerRng = ChaCha8Rng;

/// Extra feedback a learner consumes beyond the purchase bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackKind {
    Purchase,
    TypeId,
    TypeVector,
}

/// A posted price, plus the pre-perturbation grid price for learners that
/// perturb.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quote {
    pub price: f64,
    pub hat_price: Option<f64>,
}

impl Quote {
    pub fn plain(price: f64) -> Self {
        Quote {
            price,
            hat_price: None,
        }
    }
}

/// End-of-round observation.
#[derive(Clone, Debug)]
pub struct Feedback<'a> {
    pub context: &'a Context,
    pub price: f64,
    pub hat_price: Option<f64>,
    pub purchase: bool,
    pub type_id: Option<usize>,
    pub theta: Option<&'a [f64]>,
}

pub trait Learner: Send {
    fn name(&self) -> &str;

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Purchase
    }

    fn select(&mut self, u: &Context, rng: &mut LearnerRng) -> Result<Quote>;

    fn observe(&mut self, fb: &Feedback<'_>) -> Result<()>;

    /// Internal consistency checks, run every round when invariant checking
    /// is enabled. Returns a description of the first violation.
    fn check_invariants(&self) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// Posts the same price every round.
#[derive(Clone, Debug)]
pub struct FixedPrice {
    price: f64,
}

impl FixedPrice {
    pub fn new(price: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&price) {
            return Err(crate::PricingError::PriceOutOfRange(price));
        }
        Ok(FixedPrice { price })
    }
}

impl Learner for FixedPrice {
    fn name(&self) -> &str {
        "fixed"
    }

    fn select(&mut self, _u: &Context, _rng: &mut LearnerRng) -> Result<Quote> {
        Ok(Quote::plain(self.price))
    }

    fn observe(&mut self, _fb: &Feedback<'_>) -> Result<()> {
        Ok(())
    }
}
