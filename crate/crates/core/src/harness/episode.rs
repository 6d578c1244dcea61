//! The round loop: adversary context, learner price, type draw, purchase,
//! learner update, and exact regret accounting against the true instance.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{LearnerFactory, RunConfig};
use super::output::RoundRecord;
use crate::error::{PricingError, Result};
use crate::instances::{AdversarySpec, TypeSampler};
use crate::learner::{Feedback, FeedbackKind, Learner, LearnerRng};
use crate::pricing::{Context, TypeDistribution, ValueDistribution};

/// Substream indices derived from one seed.
pub const CONTEXT_STREAM: u64 = 0;
pub const TYPE_STREAM: u64 = 1;
pub const LEARNER_STREAM: u64 = 2;

/// Largest number of distinct contexts whose projections are memoized.
const PROJECTION_CACHE: usize = 4096;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Memoized projections of the true instance.
struct Benchmark<'a> {
    instance: &'a TypeDistribution,
    cache: HashMap<Vec<u64>, ValueDistribution>,
}

impl<'a> Benchmark<'a> {
    fn new(instance: &'a TypeDistribution) -> Self {
        Benchmark {
            instance,
            cache: HashMap::new(),
        }
    }

    fn gap(&mut self, u: &Context, p: f64) -> Result<f64> {
        let key: Vec<u64> = u.as_slice().iter().map(|x| x.to_bits()).collect();
        if let Some(q) = self.cache.get(&key) {
            return Ok(q.gap_unchecked(p));
        }
        let q = self.instance.project(u)?;
        let g = q.gap_unchecked(p);
        if self.cache.len() < PROJECTION_CACHE {
            self.cache.insert(key, q);
        }
        Ok(g)
    }
}

fn check_compat(instance: &TypeDistribution, adversary: &AdversarySpec) -> Result<()> {
    let probe = match adversary {
        AdversarySpec::Fixed { u } => Some(u.dim()),
        AdversarySpec::RoundRobin { contexts } | AdversarySpec::Scripted { contexts, .. } => {
            contexts.first().map(|u| u.dim())
        }
        AdversarySpec::IidBasis | AdversarySpec::IidSphere => None,
    };
    if let Some(got) = probe {
        if got != instance.dim() {
            return Err(PricingError::DimensionMismatch {
                expected: instance.dim(),
                got,
            });
        }
    }
    adversary.check_against(instance)
}

/// Runs `learner` for `horizon` rounds, calling `hook` after each round's
/// update with the round record and the learner.
pub fn run_with_learner<L, H>(
    instance: &TypeDistribution,
    adversary: &AdversarySpec,
    learner: &mut L,
    horizon: u64,
    seed: u64,
    check_invariants: bool,
    mut hook: H,
) -> Result<Vec<RoundRecord>>
where
    L: Learner + ?Sized,
    H: FnMut(&RoundRecord, &L),
{
    check_compat(instance, adversary)?;
    let dim = instance.dim();
    let mut ctx_rng = substream(seed, CONTEXT_STREAM);
    let mut type_rng = substream(seed, TYPE_STREAM);
    let mut learner_rng: LearnerRng = substream(seed, LEARNER_STREAM);
    let sampler = TypeSampler::new(instance);
    let mut bench = Benchmark::new(instance);
    let kind = learner.feedback_kind();

    let mut records = Vec::with_capacity(horizon.min(1 << 22) as usize);
    let mut cum = 0.0;
    for t in 1..=horizon {
        let (u, context_id) = adversary.next_context(dim, t, &mut ctx_rng)?;
        let quote = learner.select(&u, &mut learner_rng)?;
        if !(0.0..=1.0).contains(&quote.price) {
            return Err(PricingError::PriceOutOfRange(quote.price));
        }
        let z = sampler.sample(&mut type_rng);
        let theta = &instance.atoms()[z].theta;
        let purchase = u.dot(theta).clamp(0.0, 1.0) >= quote.price;

        let fb = Feedback {
            context: &u,
            price: quote.price,
            hat_price: quote.hat_price,
            purchase,
            type_id: (kind == FeedbackKind::TypeId).then_some(z),
            theta: (kind == FeedbackKind::TypeVector).then_some(theta.as_slice()),
        };
        learner.observe(&fb)?;
        if check_invariants {
            learner
                .check_invariants()
                .map_err(|what| PricingError::InvariantViolated { round: t, what })?;
        }

        let gap = bench.gap(&u, quote.price)?;
        cum += gap;
        let rec = RoundRecord {
            t,
            context_id,
            price: quote.price,
            hat_price: quote.hat_price,
            purchase,
            gap,
            cum_regret: cum,
        };
        hook(&rec, learner);
        records.push(rec);
    }
    Ok(records)
}

/// A validated configuration with its instance and learner factory built.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub instance: TypeDistribution,
    pub factory: LearnerFactory,
}

impl Prepared {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let instance = config.instance.build()?;
        check_compat(&instance, &config.adversary)?;
        let factory = LearnerFactory::new(&config.learner, config.horizon, &instance)?;
        Ok(Prepared {
            config,
            instance,
            factory,
        })
    }

    pub fn run_seed(&self, seed: u64) -> Result<Vec<RoundRecord>> {
        let mut learner = self.factory.build()?;
        run_with_learner(
            &self.instance,
            &self.config.adversary,
            learner.as_mut(),
            self.config.horizon,
            seed,
            self.config.invariant_checks,
            |_, _| {},
        )
    }

    /// All configured seeds, episodes in parallel, results in seed order.
    pub fn run_all(&self) -> Result<Vec<(u64, Vec<RoundRecord>)>> {
        self.run_seeds(&self.config.seeds)
    }

    pub fn run_seeds(&self, seeds: &[u64]) -> Result<Vec<(u64, Vec<RoundRecord>)>> {
        seeds
            .par_iter()
            .map(|&s| self.run_seed(s).map(|r| (s, r)))
            .collect()
    }
}

pub fn run_episode(config: &RunConfig, seed: u64) -> Result<Vec<RoundRecord>> {
    Prepared::new(config.clone())?.run_seed(seed)
}

/// Outcome of a coupled run in two worlds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoupledOutcome {
    /// First round whose purchase bits differ between the worlds.
    pub diverged_at: Option<u64>,
}

/// Runs a perturbing learner against world `a` while tracking world `b`
/// under a shared uniform per round: the purchase bit in a world is
/// `U < sdem(hat_p)` for that world's smoothed demand, so both worlds
/// produce the same trajectory until their bits first differ.
pub fn run_coupled<L: Learner + ?Sized>(
    world_a: &TypeDistribution,
    world_b: &TypeDistribution,
    adversary: &AdversarySpec,
    learner: &mut L,
    eps: f64,
    horizon: u64,
    seed: u64,
) -> Result<CoupledOutcome> {
    check_compat(world_a, adversary)?;
    check_compat(world_b, adversary)?;
    let dim = world_a.dim();
    let mut ctx_rng = substream(seed, CONTEXT_STREAM);
    let mut coin_rng = substream(seed, TYPE_STREAM);
    let mut learner_rng: LearnerRng = substream(seed, LEARNER_STREAM);
    for t in 1..=horizon {
        let (u, _) = adversary.next_context(dim, t, &mut ctx_rng)?;
        let quote = learner.select(&u, &mut learner_rng)?;
        let hat = quote.hat_price.unwrap_or(quote.price);
        let coin: f64 = coin_rng.random();
        let ya = coin < world_a.project(&u)?.sdem(eps, hat);
        let yb = coin < world_b.project(&u)?.sdem(eps, hat);
        if ya != yb {
            return Ok(CoupledOutcome {
                diverged_at: Some(t),
            });
        }
        learner.observe(&Feedback {
            context: &u,
            price: quote.price,
            hat_price: quote.hat_price,
            purchase: ya,
            type_id: None,
            theta: None,
        })?;
    }
    Ok(CoupledOutcome { diverged_at: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::LearnerConfig;
    use crate::instances::InstanceSpec;
    use crate::learner::FixedPrice;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_round_point_mass() {
        let d = TypeDistribution::point_mass(vec![0.5]).unwrap();
        let mut l = FixedPrice::new(0.5).unwrap();
        let recs =
            run_with_learner(&d, &AdversarySpec::scalar(), &mut l, 1, 7, true, |_, _| {}).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].purchase);
        assert_eq!(recs[0].gap, 0.0);
        assert_eq!(recs[0].price * recs[0].purchase as u8 as f64, 0.5);
    }

    #[test]
    fn base_instance_benchmark_is_half() {
        let d = InstanceSpec::LbBase { k: 4 }.build().unwrap();
        for price in [0.0, 0.3, 0.7, 1.0] {
            let mut l = FixedPrice::new(price).unwrap();
            let recs =
                run_with_learner(&d, &AdversarySpec::scalar(), &mut l, 5, 0, false, |_, _| {})
                    .unwrap();
            let q = d.project(&Context::scalar()).unwrap();
            for r in &recs {
                assert_abs_diff_eq!(r.gap + q.rev(price), 0.5, epsilon = 1e-12);
            }
        }
    }

    fn zoom_config(t: u64) -> RunConfig {
        RunConfig {
            instance: InstanceSpec::LbBase { k: 4 },
            adversary: AdversarySpec::scalar(),
            learner: LearnerConfig::Zoomv {
                const_var: 10.0,
                const_bias: 12.0,
                variance_blind: false,
            },
            horizon: t,
            seeds: vec![3],
            output: Default::default(),
            invariant_checks: true,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = zoom_config(300);
        let a = run_episode(&cfg, 3).unwrap();
        let b = run_episode(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = run_episode(&cfg, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut cfg = zoom_config(10);
        cfg.instance = InstanceSpec::LbTensor {
            k: 4,
            j: vec![2, 3],
            eps: 0.1,
        };
        let err = Prepared::new(cfg).unwrap_err();
        assert!(
            matches!(err, PricingError::DimensionMismatch { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn same_world_never_diverges() {
        let d = InstanceSpec::LbBase { k: 4 }.build().unwrap();
        let mut l = FixedPrice::new(0.4).unwrap();
        let out = run_coupled(&d, &d, &AdversarySpec::scalar(), &mut l, 0.02, 200, 1).unwrap();
        assert_eq!(out.diverged_at, None);
    }
}
