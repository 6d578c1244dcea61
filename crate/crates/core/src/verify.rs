//! Randomized property suites over the pricing primitives, used as a quick
//! self-check from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::pricing::{
    conservative_policy, discretized_best, levy_distance, Context, SmoothingParams,
    TypeDistribution, ValueDistribution, LEVY_TOL,
};
use crate::type_feedback::EllipsoidState;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest amount by which any checked inequality was exceeded.
    pub worst_excess: f64,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport {
            name: name.to_string(),
            cases: 0,
            failures: 0,
            worst_excess: 0.0,
        }
    }

    /// Records `lhs <= rhs`.
    fn check(&mut self, lhs: f64, rhs: f64) {
        let excess = lhs - rhs;
        if excess > 0.0 {
            self.failures += 1;
            self.worst_excess = self.worst_excess.max(excess);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

/// A random distribution with 1..=`max_atoms` atoms; half the time values
/// snap to a coarse grid so ties and shared breakpoints appear.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, max_atoms: usize) -> ValueDistribution {
    let k = rng.random_range(1..=max_atoms);
    let snap = rng.random_bool(0.5);
    let pairs = (0..k)
        .map(|_| {
            let v: f64 = rng.random();
            let v = if snap { (v * 8.0).round() / 8.0 } else { v };
            (v, rng.random::<f64>() + 0.05)
        })
        .collect::<Vec<_>>();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    ValueDistribution::from_unsorted(pairs.into_iter().map(|(v, w)| (v, w / total)).collect())
        .expect("random atoms are valid")
}

/// A nearby distribution: each atom moves by at most `shift` and a fraction
/// `mix` of mass is spread to fresh atoms inside the same shift band.
pub fn perturb<R: Rng + ?Sized>(
    rng: &mut R,
    q: &ValueDistribution,
    shift: f64,
    mix: f64,
) -> ValueDistribution {
    let mut pairs = Vec::new();
    for (v, w) in q.atoms() {
        let nv = (v + rng.random_range(-shift..=shift)).clamp(0.0, 1.0);
        pairs.push((nv, w * (1.0 - mix)));
        if mix > 0.0 {
            let extra = (v + rng.random_range(-shift..=shift)).clamp(0.0, 1.0);
            pairs.push((extra, w * mix));
        }
    }
    ValueDistribution::from_unsorted(pairs).expect("perturbed atoms are valid")
}

pub fn one_sided_lipschitz(cases: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("one-sided Lipschitz revenue");
    for _ in 0..cases {
        let q = random_distribution(&mut rng, 8);
        let mut p: f64 = rng.random();
        let mut p2: f64 = rng.random();
        if rng.random_bool(0.3) {
            // land exactly on an atom
            let vals = q.values();
            p = vals[rng.random_range(0..vals.len())];
        }
        if p > p2 {
            std::mem::swap(&mut p, &mut p2);
        }
        if p == p2 {
            continue;
        }
        rep.cases += 1;
        rep.check(q.rev(p2) - q.rev(p), q.dem(p) * (p2 - p) + 1e-12);
    }
    rep
}

pub fn conservative_policy_bounds(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("conservative policy under Levy closeness");
    let u = Context::scalar();
    while rep.cases < cases {
        let eps = rng.random_range(0.01..0.2);
        let q = random_distribution(&mut rng, 6);
        let mix = rng.random_range(0.0..eps * 0.6);
        let q2 = perturb(&mut rng, &q, eps * 0.6, mix);
        if levy_distance(&q, &q2, LEVY_TOL)? >= eps {
            continue;
        }
        rep.cases += 1;
        let d = TypeDistribution::from_values(&q);
        let pi = conservative_policy(&d, &u, eps)?;
        rep.check(q.best_revenue() - eps - 1e-9, q.rev(pi));
        rep.check(q2.best_revenue() - 3.0 * eps - 1e-9, q2.rev(pi));
    }
    Ok(rep)
}

pub fn smoothed_demand_stability(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("smoothed demand under Levy closeness");
    while rep.cases < cases {
        let eps = rng.random_range(0.05..0.3);
        let budget = eps * eps / 2.0;
        let q = random_distribution(&mut rng, 6);
        let mix = rng.random_range(0.0..budget * 0.7);
        let q2 = perturb(&mut rng, &q, budget * 0.7, mix);
        if levy_distance(&q, &q2, LEVY_TOL)? > budget {
            continue;
        }
        rep.cases += 1;
        let params = SmoothingParams::new(eps)?;
        let worst = params
            .grid()
            .into_iter()
            .map(|p| (q.sdem(eps, p) - q2.sdem(eps, p)).abs())
            .fold(0.0, f64::max);
        rep.check(worst, eps + 1e-9);
    }
    Ok(rep)
}

/// Candidate-set discretized best response against a full scan of the grid.
pub fn discretized_best_matches_scan(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("discretized best response vs grid scan");
    for _ in 0..cases {
        let eps = rng.random_range(0.01..=0.25);
        let q = random_distribution(&mut rng, 8);
        let params = SmoothingParams::new(eps)?;
        let (_, rev) = discretized_best(&q, &params)?;
        let scan = params
            .grid()
            .into_iter()
            .map(|p| p * q.sdem(eps, p))
            .fold(f64::NEG_INFINITY, f64::max);
        rep.cases += 1;
        rep.check((scan - rev).abs(), 1e-12);
    }
    Ok(rep)
}

/// Noiseless ellipsoid updates never exclude the true parameter.
pub fn ellipsoid_membership(updates: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("ellipsoid keeps the true parameter");
    let mut done = 0;
    while done < updates {
        let dim = rng.random_range(1..=3);
        let theta: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
        let mut e = EllipsoidState::unit_cube(dim);
        for _ in 0..200.min(updates - done) {
            let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 1e-3).collect();
            let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u = Context::new(raw.into_iter().map(|x| x / n).collect())?;
            let p = e.price(&u)?.clamp(0.0, 1.0);
            let y = u.dot(&theta) >= p;
            e.update(&u, p, y)?;
            done += 1;
            rep.cases += 1;
            if !e.contains(&theta, 1e-7) {
                rep.failures += 1;
            }
        }
    }
    Ok(rep)
}

/// Every suite at its default size.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        one_sided_lipschitz(10_000, seed),
        conservative_policy_bounds(1_000, seed)?,
        smoothed_demand_stability(500, seed)?,
        discretized_best_matches_scan(1_000, seed)?,
        ellipsoid_membership(20_000, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(one_sided_lipschitz(500, 1).passed());
        assert!(conservative_policy_bounds(50, 1).unwrap().passed());
        assert!(smoothed_demand_stability(30, 1).unwrap().passed());
        assert!(discretized_best_matches_scan(50, 1).unwrap().passed());
        assert!(ellipsoid_membership(500, 1).unwrap().passed());
    }
}
