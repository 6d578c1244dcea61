//! Instance and context generators: the lower-bound families (base,
//! perturbed, small-K, tensored), custom instances, and adversaries.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::pricing::{Context, TypeAtom, TypeDistribution, ValueDistribution};

/// Mass placed at valuation 0 in the three-type small instance.
pub const NEGLIGIBLE_MASS: f64 = 1e-9;

fn check_k(k: usize) -> Result<()> {
    if k < 4 {
        return Err(PricingError::InvalidParameter(format!(
            "lower-bound family needs K >= 4, got {k}"
        )));
    }
    Ok(())
}

fn check_perturbation(k: usize, j: usize, eps: f64) -> Result<()> {
    check_k(k)?;
    if !(2..k).contains(&j) {
        return Err(PricingError::InvalidParameter(format!(
            "perturbed index {j} outside [2, {}]",
            k - 1
        )));
    }
    let max = 1.0 / (2 * k - 2) as f64;
    if !(0.0..=max).contains(&eps) {
        return Err(PricingError::InvalidParameter(format!(
            "perturbation {eps} outside [0, {max}]"
        )));
    }
    Ok(())
}

/// Valuations `v_i = 1/2 + (i-1)/(4K - 2i - 2)`, `i = 1..=K`.
pub fn lb_values(k: usize) -> Result<Vec<f64>> {
    check_k(k)?;
    Ok((1..=k)
        .map(|i| 0.5 + (i - 1) as f64 / (4 * k - 2 * i - 2) as f64)
        .collect())
}

fn base_weights(k: usize) -> Vec<f64> {
    let mut w = vec![1.0 / (2 * k - 2) as f64; k];
    w[k - 1] = 0.5;
    w
}

/// Equal-revenue base instance: every atom earns revenue exactly 1/2.
pub fn lb_base(k: usize) -> Result<ValueDistribution> {
    let v = lb_values(k)?;
    ValueDistribution::new(v.into_iter().zip(base_weights(k)).collect())
}

/// Base instance with `eps` mass moved from `v_{j-1}` to `v_j`, making `v_j`
/// the unique best response with revenue `1/2 + eps * v_j`.
pub fn lb_perturbed(k: usize, j: usize, eps: f64) -> Result<ValueDistribution> {
    check_perturbation(k, j, eps)?;
    let v = lb_values(k)?;
    let mut w = base_weights(k);
    w[j - 2] -= eps;
    w[j - 1] += eps;
    ValueDistribution::new(v.into_iter().zip(w).filter(|a| a.1 > 0.0).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

/// Two-point instance on `{1/4, 1/2}` with weights `1/2 ∓ eps`, `1/2 ± eps`;
/// `k = 3` adds a negligible atom at 0.
pub fn lb_small(k: usize, sign: Sign, eps: f64) -> Result<ValueDistribution> {
    if !(0.0..0.5).contains(&eps) {
        return Err(PricingError::InvalidParameter(format!(
            "perturbation {eps} outside [0, 1/2)"
        )));
    }
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let pair = [(0.25, 0.5 - s * eps), (0.5, 0.5 + s * eps)];
    match k {
        2 => ValueDistribution::new(pair.to_vec()),
        3 => {
            let scale = 1.0 - NEGLIGIBLE_MASS;
            let mut atoms = vec![(0.0, NEGLIGIBLE_MASS)];
            atoms.extend(pair.iter().map(|&(v, w)| (v, w * scale)));
            ValueDistribution::new(atoms)
        }
        _ => Err(PricingError::InvalidParameter(format!(
            "small instance needs K in {{2, 3}}, got {k}"
        ))),
    }
}

/// Value index (0-based) assigned to atom `i` (0-based) along a coordinate
/// perturbed at `j`: atom 1 goes to `v_{j-1}`, atom 2 to `v_j`, atom K stays.
fn coordinate_map(k: usize, j: usize) -> Vec<usize> {
    let mut map: Vec<usize> = (0..k).collect();
    match j {
        2 => {}
        3 => {
            map[0] = 1;
            map[1] = 2;
            map[2] = 0;
        }
        _ => {
            map.swap(0, j - 2);
            map.swap(1, j - 1);
        }
    }
    map
}

/// Tensored instance in `d = j.len()` dimensions whose marginal along
/// coordinate `l` is `lb_perturbed(k, j[l], eps)`.
pub fn lb_tensor(k: usize, j: &[usize], eps: f64) -> Result<TypeDistribution> {
    if j.is_empty() {
        return Err(PricingError::InvalidParameter("empty index vector".into()));
    }
    for &jl in j {
        check_perturbation(k, jl, eps)?;
    }
    let v = lb_values(k)?;
    let mut w = base_weights(k);
    w[0] -= eps;
    w[1] += eps;
    let maps: Vec<Vec<usize>> = j.iter().map(|&jl| coordinate_map(k, jl)).collect();
    let atoms = (0..k)
        .filter(|&i| w[i] > 0.0)
        .map(|i| TypeAtom {
            theta: maps.iter().map(|m| v[m[i]]).collect(),
            w: w[i],
        })
        .collect();
    TypeDistribution::new(j.len(), atoms)
}

/// Declarative description of a true instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Custom {
        dist: TypeDistribution,
    },
    LbBase {
        #[serde(rename = "K")]
        k: usize,
    },
    LbPerturbed {
        #[serde(rename = "K")]
        k: usize,
        j: usize,
        eps: f64,
    },
    LbTensor {
        #[serde(rename = "K")]
        k: usize,
        j: Vec<usize>,
        eps: f64,
    },
    LbSmall {
        #[serde(rename = "K")]
        k: usize,
        sign: Sign,
        eps: f64,
    },
}

impl InstanceSpec {
    pub fn build(&self) -> Result<TypeDistribution> {
        let lift = |q: ValueDistribution| TypeDistribution::from_values(&q);
        match self {
            InstanceSpec::Custom { dist } => Ok(dist.clone()),
            InstanceSpec::LbBase { k } => lb_base(*k).map(lift),
            InstanceSpec::LbPerturbed { k, j, eps } => lb_perturbed(*k, *j, *eps).map(lift),
            InstanceSpec::LbTensor { k, j, eps } => lb_tensor(*k, j, *eps),
            InstanceSpec::LbSmall { k, sign, eps } => lb_small(*k, *sign, *eps).map(lift),
        }
    }
}

/// Context process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversarySpec {
    Fixed {
        u: Context,
    },
    IidBasis,
    IidSphere,
    RoundRobin {
        contexts: Vec<Context>,
    },
    Scripted {
        contexts: Vec<Context>,
        #[serde(default)]
        wrap: bool,
    },
}

impl AdversarySpec {
    /// The non-contextual process `u_t = 1`.
    pub fn scalar() -> Self {
        AdversarySpec::Fixed {
            u: Context::scalar(),
        }
    }

    /// Verifies that every context this process can produce keeps all
    /// valuations of `d` inside `[0,1]`.
    pub fn check_against(&self, d: &TypeDistribution) -> Result<()> {
        let check_list = |list: &[Context]| -> Result<()> {
            if list.is_empty() {
                return Err(PricingError::InvalidParameter("empty context list".into()));
            }
            for u in list {
                d.project(u)?;
            }
            Ok(())
        };
        match self {
            AdversarySpec::Fixed { u } => check_list(std::slice::from_ref(u)),
            AdversarySpec::RoundRobin { contexts } | AdversarySpec::Scripted { contexts, .. } => {
                check_list(contexts)
            }
            // all atoms lie in [0,1]^d, so basis contexts are safe
            AdversarySpec::IidBasis => Ok(()),
            AdversarySpec::IidSphere => {
                // positive-orthant contexts give 0 <= <theta,u> <= |theta|
                for a in d.atoms() {
                    let norm = a.theta.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1.0 + 1e-9 {
                        return Err(PricingError::InvalidParameter(format!(
                            "atom {:?} has norm {norm} > 1; sphere contexts may value it above 1",
                            a.theta
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Context for round `t` (1-based) and its identifier (`-1` for
    /// continuous processes).
    pub fn next_context<R: Rng + ?Sized>(
        &self,
        dim: usize,
        t: u64,
        rng: &mut R,
    ) -> Result<(Context, i64)> {
        match self {
            AdversarySpec::Fixed { u } => Ok((u.clone(), 0)),
            AdversarySpec::IidBasis => {
                let l = rng.random_range(0..dim);
                Ok((Context::basis(dim, l)?, l as i64))
            }
            AdversarySpec::IidSphere => {
                let u = loop {
                    let g: Vec<f64> = (0..dim)
                        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
                        .collect();
                    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        break g.into_iter().map(|x| x / norm).collect::<Vec<_>>();
                    }
                };
                Ok((Context::new(u)?, -1))
            }
            AdversarySpec::RoundRobin { contexts } => {
                let i = ((t - 1) % contexts.len() as u64) as usize;
                Ok((contexts[i].clone(), i as i64))
            }
            AdversarySpec::Scripted { contexts, wrap } => {
                let idx = (t - 1) as usize;
                if idx < contexts.len() {
                    Ok((contexts[idx].clone(), idx as i64))
                } else if *wrap && !contexts.is_empty() {
                    let i = idx % contexts.len();
                    Ok((contexts[i].clone(), i as i64))
                } else {
                    Err(PricingError::ContextsExhausted(t))
                }
            }
        }
    }
}

/// Inverse-CDF sampler over the atoms of a type distribution.
#[derive(Clone, Debug)]
pub struct TypeSampler {
    cumulative: Vec<f64>,
}

impl TypeSampler {
    pub fn new(d: &TypeDistribution) -> Self {
        let mut acc = 0.0;
        let cumulative = d
            .atoms()
            .iter()
            .map(|a| {
                acc += a.w;
                acc
            })
            .collect();
        TypeSampler { cumulative }
    }

    /// Index of the sampled atom; one uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

/// Draws one atom index of `d`.
pub fn sample_type<R: Rng + ?Sized>(d: &TypeDistribution, rng: &mut R) -> usize {
    TypeSampler::new(d).sample(rng)
}
