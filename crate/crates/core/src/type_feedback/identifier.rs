//! Learner for type-identifier feedback: one ellipsoid per observed type,
//! budgeted exploration, and a conservative exploit price chosen from the
//! types already localized along the current context.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ellipsoid::EllipsoidState;
use crate::error::{PricingError, Result};
use crate::learner::{Feedback, FeedbackKind, Learner, LearnerRng, Quote};
use crate::pricing::Context;

fn default_divisor() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifierConfig {
    /// Exploration budget per type is `eps * T / budget_divisor`.
    #[serde(default = "default_divisor")]
    pub budget_divisor: f64,
}

impl Default for IdentifierConfig {
    fn default() -> Self {
        IdentifierConfig {
            budget_divisor: default_divisor(),
        }
    }
}

/// Per-type knowledge.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeRecord {
    pub ellipsoid: EllipsoidState,
    /// Rounds in which this type arrived.
    pub n: u64,
    /// Rounds spent exploring this type.
    pub m: u64,
}

/// The decision of one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Explore(usize),
    /// `None` when no observed type is localized along the context.
    Exploit(Option<usize>),
}

#[derive(Clone, Debug)]
pub struct IdentifierState {
    dim: usize,
    types: BTreeMap<usize, TypeRecord>,
    eps: f64,
    horizon: u64,
    budget: f64,
    round: u64,
    last: Option<(Mode, f64)>,
}

/// `sqrt(d ln T / T)`.
pub fn identifier_eps(dim: usize, horizon: u64) -> f64 {
    let t = horizon as f64;
    (dim as f64 * t.ln() / t).sqrt()
}

impl IdentifierState {
    pub fn new(dim: usize, horizon: u64, cfg: IdentifierConfig) -> Result<Self> {
        if dim == 0 || horizon < 2 {
            return Err(PricingError::InvalidParameter(
                "identifier learner needs d >= 1 and T >= 2".into(),
            ));
        }
        if cfg.budget_divisor.is_nan() || cfg.budget_divisor <= 0.0 {
            return Err(PricingError::InvalidParameter(
                "budget divisor must be positive".into(),
            ));
        }
        let eps = identifier_eps(dim, horizon);
        Ok(IdentifierState {
            dim,
            types: BTreeMap::new(),
            eps,
            horizon,
            budget: eps * horizon as f64 / cfg.budget_divisor,
            round: 0,
            last: None,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Exploration cap `eps T / divisor`; a type explores while `m` is below it.
    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn types(&self) -> &BTreeMap<usize, TypeRecord> {
        &self.types
    }

    pub fn last_mode(&self) -> Option<Mode> {
        self.last.map(|l| l.0)
    }

    /// Price and mode for context `u`.
    pub fn select(&mut self, u: &Context) -> Result<(f64, Mode)> {
        let t = self.round + 1;
        let mut localized: Vec<(usize, f64, u64)> = Vec::new();
        for (&id, rec) in &self.types {
            let w = rec.ellipsoid.width(u)?;
            let price = rec.ellipsoid.price(u)?;
            if w > self.eps {
                if (rec.m as f64) < self.budget {
                    let choice = (price, Mode::Explore(id));
                    self.last = Some((choice.1, choice.0));
                    return Ok(choice);
                }
            } else {
                localized.push((id, price, rec.n));
            }
        }
        let choice = match exploit_choice(&localized, t) {
            Some((id, price)) => ((price - self.eps).max(0.0), Mode::Exploit(Some(id))),
            None => (0.0, Mode::Exploit(None)),
        };
        self.last = Some((choice.1, choice.0));
        Ok(choice)
    }

    /// Records the round's feedback; `z` is the realized type identifier.
    pub fn update(&mut self, u: &Context, p: f64, y: bool, z: usize) -> Result<()> {
        if let Some((Mode::Explore(i), _)) = self.last {
            let rec = self.types.get_mut(&i).expect("explored type is observed");
            rec.m += 1;
            if z == i {
                rec.ellipsoid.update(u, p, y)?;
            }
        }
        let dim = self.dim;
        self.types
            .entry(z)
            .or_insert_with(|| TypeRecord {
                ellipsoid: EllipsoidState::unit_cube(dim),
                n: 0,
                m: 0,
            })
            .n += 1;
        self.round += 1;
        self.last = None;
        Ok(())
    }
}

/// Among localized types `(id, price, n)` at round `t`, the one maximizing
/// `F(i) * price_i` with `F(i) = sum_j n_j/(t-1) 1{price_j >= price_i}`;
/// lowest id on ties.
pub fn exploit_choice(localized: &[(usize, f64, u64)], t: u64) -> Option<(usize, f64)> {
    if localized.is_empty() || t < 2 {
        return None;
    }
    let denom = (t - 1) as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    for &(id, price, _) in localized {
        let f: f64 = localized
            .iter()
            .filter(|&&(_, pj, _)| pj >= price)
            .map(|&(_, _, nj)| nj as f64 / denom)
            .sum();
        let score = f * price;
        if best.is_none_or(|b| score > b.2) {
            best = Some((id, price, score));
        }
    }
    best.map(|b| (b.0, b.1))
}

/// The identifier-feedback learner.
#[derive(Clone, Debug)]
pub struct Identifier {
    state: IdentifierState,
}

impl Identifier {
    pub fn new(dim: usize, horizon: u64, cfg: IdentifierConfig) -> Result<Self> {
        Ok(Identifier {
            state: IdentifierState::new(dim, horizon, cfg)?,
        })
    }

    pub fn state(&self) -> &IdentifierState {
        &self.state
    }
}

impl Learner for Identifier {
    fn name(&self) -> &str {
        "identifier"
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::TypeId
    }

    fn select(&mut self, u: &Context, _rng: &mut LearnerRng) -> Result<Quote> {
        Ok(Quote::plain(self.state.select(u)?.0))
    }

    fn observe(&mut self, fb: &Feedback<'_>) -> Result<()> {
        let z = fb.type_id.ok_or_else(|| {
            PricingError::InvalidParameter("identifier learner needs the type identifier".into())
        })?;
        self.state.update(fb.context, fb.price, fb.purchase, z)
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        let cap = self.state.budget.ceil() as u64;
        for (id, rec) in &self.state.types {
            if rec.m > cap {
                return Err(format!("type {id} explored {} times, cap {cap}", rec.m));
            }
        }
        let total: u64 = self.state.types.values().map(|r| r.n).sum();
        if total != self.state.round {
            return Err(format!(
                "arrival counts sum to {total} after {} rounds",
                self.state.round
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_round_posts_zero() {
        let mut s = IdentifierState::new(2, 1000, IdentifierConfig::default()).unwrap();
        let (p, mode) = s.select(&Context::basis(2, 0).unwrap()).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(mode, Mode::Exploit(None));
    }

    #[test]
    fn explores_unlocalized_type() {
        let mut s = IdentifierState::new(1, 1000, IdentifierConfig::default()).unwrap();
        let u = Context::scalar();
        s.select(&u).unwrap();
        s.update(&u, 0.0, true, 1).unwrap();
        assert_eq!(s.types()[&1].n, 1);
        let (p, mode) = s.select(&u).unwrap();
        assert_eq!(mode, Mode::Explore(1));
        assert_eq!(p, 0.5);
        // another type arrives: A_1 untouched, m(1) and n(2) advance
        s.update(&u, p, false, 2).unwrap();
        assert_eq!(s.types()[&1].m, 1);
        assert_eq!(s.types()[&1].ellipsoid.center(), &[0.5]);
        assert_eq!(s.types()[&2].n, 1);
        // the explored type arrives: interval bisected
        let (p, mode) = s.select(&u).unwrap();
        assert_eq!(mode, Mode::Explore(1));
        s.update(&u, p, true, 1).unwrap();
        assert_eq!(s.types()[&1].ellipsoid.center(), &[0.75]);
        assert_eq!(s.types()[&1].m, 2);
    }

    #[test]
    fn exploit_score_example() {
        // n/(t-1) = (0.6, 0.4) with t - 1 = 10
        let localized = [(1, 0.5, 6), (2, 0.8, 4)];
        assert_eq!(exploit_choice(&localized, 11), Some((1, 0.5)));
        assert_eq!(exploit_choice(&[], 11), None);
    }

    #[test]
    fn eps_formula() {
        assert_abs_diff_eq!(
            identifier_eps(2, 50_000),
            (2.0 * 50_000f64.ln() / 50_000.0).sqrt(),
            epsilon = 1e-15
        );
    }
}
