//! Finite model classes over type distributions: cube-partition Lévy covers,
//! the layered class with its non-uniform prior, and a sampled-context
//! diagnostic for the contextual Lévy distance.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::pricing::{levy_distance, Context, TypeAtom, TypeDistribution, WEIGHT_TOL};

/// Default bound on the number of models a cover may enumerate.
pub const DEFAULT_SIZE_CAP: usize = 200_000;

/// Axis-aligned box `prod_l [lo_l, hi_l]` inside `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ThetaBox {
    pub fn unit(dim: usize) -> Self {
        ThetaBox {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return Err(PricingError::DimensionMismatch {
                expected: dim,
                got: self.lo.len().max(self.hi.len()),
            });
        }
        for (l, h) in self.lo.iter().zip(&self.hi) {
            if !(0.0 <= *l && l <= h && *h <= 1.0) {
                return Err(PricingError::InvalidParameter(format!(
                    "box side [{l}, {h}] is not inside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

fn default_cap() -> usize {
    DEFAULT_SIZE_CAP
}

/// Parameters of a cube-partition cover of `Δ_K(Θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub dim: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    #[serde(default)]
    pub theta_box: Option<ThetaBox>,
    #[serde(default = "default_cap")]
    pub size_cap: usize,
}

impl CoverSpec {
    pub fn new(dim: usize, k: usize, eps: f64) -> Self {
        CoverSpec {
            dim,
            k,
            eps,
            theta_box: None,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }

    fn validate(&self) -> Result<ThetaBox> {
        if self.dim == 0 {
            return Err(PricingError::InvalidParameter(
                "dimension must be positive".into(),
            ));
        }
        if self.k == 0 {
            return Err(PricingError::InvalidParameter(
                "K must be at least 1".into(),
            ));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(PricingError::InvalidParameter(format!(
                "cover accuracy {} outside (0, 1]",
                self.eps
            )));
        }
        if self.size_cap == 0 {
            return Err(PricingError::InvalidParameter(
                "size cap must be positive".into(),
            ));
        }
        let b = self
            .theta_box
            .clone()
            .unwrap_or_else(|| ThetaBox::unit(self.dim));
        b.validate(self.dim)?;
        Ok(b)
    }

    /// Smallest vertex of every cube of side `eps/sqrt(d)` meeting the box,
    /// in lexicographic order.
    pub fn cube_vertices(&self) -> Result<Vec<Vec<f64>>> {
        let b = self.validate()?;
        let side = self.eps / (self.dim as f64).sqrt();
        let axes: Vec<Vec<f64>> = (0..self.dim)
            .map(|l| axis_vertices(b.lo[l], b.hi[l], side))
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for prefix in &out {
                for &x in axis {
                    let mut v = prefix.clone();
                    v.push(x);
                    next.push(v);
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Weights are multiples of `1/units`; `units = ceil(K/eps)` so that the
    /// unit is at most `eps/K` and divides 1.
    pub fn weight_units(&self) -> u64 {
        (self.k as f64 / self.eps - 1e-9).ceil().max(1.0) as u64
    }

    /// Number of models the cover enumerates (saturating).
    pub fn model_count(&self) -> Result<u128> {
        let n = self.cube_vertices()?.len() as u64;
        Ok(cover_count(n, self.k as u64, self.weight_units()))
    }
}

fn axis_vertices(lo: f64, hi: f64, side: f64) -> Vec<f64> {
    let first = (lo / side + 1e-9).floor() as i64;
    let last = ((hi / side - 1e-9).ceil() as i64 - 1).max(first);
    (first..=last).map(|k| (k as f64 * side).max(lo)).collect()
}

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `sum_{s=1}^{min(K,n)} C(n,s) * C(units-1, s-1)`.
pub fn cover_count(n: u64, k: u64, units: u64) -> u128 {
    let mut total: u128 = 0;
    for s in 1..=k.min(n).min(units) {
        let term = binom(n, s).saturating_mul(binom(units - 1, s - 1));
        total = total.saturating_add(term);
    }
    total
}

/// A finite model class with a prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelClassRepr")]
pub struct ModelClass {
    models: Vec<TypeDistribution>,
    prior: Vec<f64>,
    #[serde(default)]
    layer_of: Option<Vec<usize>>,
}

#[derive(Deserialize)]
struct ModelClassRepr {
    models: Vec<TypeDistribution>,
    prior: Vec<f64>,
    #[serde(default)]
    layer_of: Option<Vec<usize>>,
}

impl TryFrom<ModelClassRepr> for ModelClass {
    type Error = PricingError;
    fn try_from(r: ModelClassRepr) -> Result<Self> {
        ModelClass::new(r.models, r.prior, r.layer_of)
    }
}

/// Canonical key of a model: atoms sorted, coordinates quantized at 1e-12.
fn model_key(d: &TypeDistribution) -> Vec<i64> {
    let q = |x: f64| (x * 1e12).round() as i64;
    let mut atoms: Vec<Vec<i64>> = d
        .atoms()
        .iter()
        .map(|a| {
            let mut k: Vec<i64> = a.theta.iter().map(|&x| q(x)).collect();
            k.push(q(a.w));
            k
        })
        .collect();
    atoms.sort();
    let mut key = vec![d.dim() as i64];
    key.extend(atoms.into_iter().flatten());
    key
}

impl ModelClass {
    pub fn new(
        models: Vec<TypeDistribution>,
        prior: Vec<f64>,
        layer_of: Option<Vec<usize>>,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(PricingError::InvalidParameter("empty model class".into()));
        }
        if prior.len() != models.len() {
            return Err(PricingError::InvalidParameter(format!(
                "{} prior entries for {} models",
                prior.len(),
                models.len()
            )));
        }
        if let Some(l) = &layer_of {
            if l.len() != models.len() {
                return Err(PricingError::InvalidParameter(
                    "layer list misaligned".into(),
                ));
            }
        }
        let mut total = 0.0;
        for &p in &prior {
            if !(p.is_finite() && p > 0.0) {
                return Err(PricingError::InvalidParameter(format!(
                    "prior entry {p} is not strictly positive"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(PricingError::InvalidParameter(format!(
                "prior sums to {total}"
            )));
        }
        let dim = models[0].dim();
        let mut seen = HashMap::with_capacity(models.len());
        for (i, m) in models.iter().enumerate() {
            if m.dim() != dim {
                return Err(PricingError::DimensionMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
            if let Some(j) = seen.insert(model_key(m), i) {
                return Err(PricingError::InvalidParameter(format!(
                    "models {j} and {i} coincide"
                )));
            }
        }
        Ok(ModelClass {
            models,
            prior,
            layer_of,
        })
    }

    pub fn uniform(models: Vec<TypeDistribution>) -> Result<Self> {
        let n = models.len().max(1);
        ModelClass::new(models, vec![1.0 / n as f64; n], None)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn models(&self) -> &[TypeDistribution] {
        &self.models
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn layer_of(&self) -> Option<&[usize]> {
        self.layer_of.as_deref()
    }

    /// Largest support size among the models.
    pub fn max_support(&self) -> usize {
        self.models
            .iter()
            .map(|m| m.support_size())
            .max()
            .unwrap_or(0)
    }

    /// Index of the model equal to `d` (atomwise at 1e-12), if present.
    pub fn position(&self, d: &TypeDistribution) -> Option<usize> {
        let key = model_key(d);
        self.models.iter().position(|m| model_key(m) == key)
    }
}

/// Cube-partition cover: every distribution in `Δ_K(Θ)` lies within Lévy
/// distance `eps` of some member. Uniform prior.
pub fn build_cube_cover(spec: &CoverSpec) -> Result<ModelClass> {
    let models = cover_models(spec)?;
    ModelClass::uniform(models)
}

fn cover_models(spec: &CoverSpec) -> Result<Vec<TypeDistribution>> {
    let cells = spec.cube_vertices()?;
    let units = spec.weight_units();
    let required = cover_count(cells.len() as u64, spec.k as u64, units);
    if required > spec.size_cap as u128 {
        return Err(PricingError::CoverTooLarge {
            required,
            cap: spec.size_cap,
        });
    }
    let mut models = Vec::with_capacity(required as usize);
    let n = cells.len();
    for s in 1..=spec.k.min(n).min(units as usize) {
        let mut comps = Vec::new();
        compositions(units, s, &mut Vec::with_capacity(s), &mut comps);
        for subset in Combinations::new(n, s) {
            for comp in &comps {
                let atoms = subset
                    .iter()
                    .zip(comp)
                    .map(|(&c, &part)| TypeAtom {
                        theta: cells[c].clone(),
                        w: part as f64 / units as f64,
                    })
                    .collect();
                models.push(TypeDistribution::new(spec.dim, atoms)?);
            }
        }
    }
    Ok(models)
}

/// All ordered ways to write `total` as a sum of `parts` positive integers.
fn compositions(total: u64, parts: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    let used = parts as u64 - 1;
    for first in 1..=total - used {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Lexicographic `s`-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, s: usize) -> Self {
        Combinations {
            n,
            idx: (0..s).collect(),
            done: s > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let s = self.idx.len();
        let mut i = s;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - s + i {
                self.idx[i] += 1;
                for j in i + 1..s {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Layered class: layer `i = 1..=M` covers `Δ_{2^i}(Θ)` at accuracy `eps²/2`;
/// prior `∝ 1/(2^i |D_i|)` within layer `i`.
pub fn build_layered_class(
    dim: usize,
    eps: f64,
    layers: usize,
    theta_box: Option<ThetaBox>,
    size_cap: usize,
) -> Result<ModelClass> {
    if layers == 0 {
        return Err(PricingError::InvalidParameter(
            "need at least one layer".into(),
        ));
    }
    if layers >= 63 {
        return Err(PricingError::InvalidParameter(format!(
            "{layers} layers is too many"
        )));
    }
    let mut built = Vec::with_capacity(layers);
    for i in 1..=layers {
        let spec = CoverSpec {
            dim,
            k: 1 << i,
            eps: eps * eps / 2.0,
            theta_box: theta_box.clone(),
            size_cap,
        };
        built.push(cover_models(&spec)?);
    }
    layered_from(built)
}

/// Number of layers `ceil(ln T)` used when none is configured (at least 1).
pub fn default_layers(horizon: u64) -> usize {
    ((horizon.max(1) as f64).ln().ceil() as usize).max(1)
}

/// Combines given layers (layer `i` is `layers[i-1]`, support size up to
/// `2^i`) into one class, deduplicating and keeping the larger prior weight.
pub fn layered_from(layers: Vec<Vec<TypeDistribution>>) -> Result<ModelClass> {
    let mut models: Vec<TypeDistribution> = Vec::new();
    let mut raw: Vec<f64> = Vec::new();
    let mut layer_of: Vec<usize> = Vec::new();
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    for (li, layer) in layers.into_iter().enumerate() {
        if layer.is_empty() {
            continue;
        }
        let i = li + 1;
        let w = 1.0 / ((1u64 << i) as f64 * layer.len() as f64);
        for m in layer {
            match index.get(&model_key(&m)) {
                Some(&pos) => {
                    if w > raw[pos] {
                        raw[pos] = w;
                        layer_of[pos] = i;
                    }
                }
                None => {
                    index.insert(model_key(&m), models.len());
                    models.push(m);
                    raw.push(w);
                    layer_of.push(i);
                }
            }
        }
    }
    let z: f64 = raw.iter().sum();
    let prior = raw.iter().map(|w| w / z).collect();
    ModelClass::new(models, prior, Some(layer_of))
}

/// Max over the given contexts of the projected Lévy distance: a lower bound
/// on the sup over all contexts.
pub fn levy_contextual_estimate(
    d: &TypeDistribution,
    d2: &TypeDistribution,
    contexts: &[Context],
    tol: f64,
) -> Result<f64> {
    if contexts.is_empty() {
        return Err(PricingError::InvalidParameter(
            "no contexts supplied".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for u in contexts {
        best = best.max(levy_distance(&d.project(u)?, &d2.project(u)?, tol)?);
    }
    Ok(best)
}

/// Index and projected Lévy distance of the class member closest to `d` at `u`.
pub fn nearest_model(
    class: &ModelClass,
    d: &TypeDistribution,
    u: &Context,
    tol: f64,
) -> Result<(usize, f64)> {
    let target = d.project(u)?;
    let mut best = (0, f64::INFINITY);
    for (i, m) in class.models().iter().enumerate() {
        let dist = levy_distance(&m.project(u)?, &target, tol)?;
        if dist < best.1 {
            best = (i, dist);
        }
    }
    Ok(best)
}
