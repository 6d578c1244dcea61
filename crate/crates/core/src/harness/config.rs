//! Run configuration and learner construction.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::baseline::GridUcb;
use crate::error::{PricingError, Result};
use crate::gops::{make_ops_with, make_pops, pops_lambda};
use crate::instances::{AdversarySpec, InstanceSpec};
use crate::learner::{FixedPrice, Learner};
use crate::model_space::{
    build_cube_cover, build_layered_class, default_layers, CoverSpec, ModelClass, ThetaBox,
    DEFAULT_SIZE_CAP,
};
use crate::pricing::TypeDistribution;
use crate::type_feedback::{Identifier, IdentifierConfig, Plugin};
use crate::zoomv::{ZoomConfig, ZoomV};

/// Default price step for POPS at desk scale.
pub const DEFAULT_POPS_EPS: f64 = 0.02;

fn default_cap() -> usize {
    DEFAULT_SIZE_CAP
}

/// Where a learner's model class comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoverSource {
    Cube(CoverSpec),
    Layered {
        dim: usize,
        eps: f64,
        /// Defaults to `ceil(ln T)`.
        #[serde(default)]
        layers: Option<usize>,
        #[serde(default)]
        theta_box: Option<ThetaBox>,
        #[serde(default = "default_cap")]
        size_cap: usize,
    },
    File {
        path: PathBuf,
    },
    Explicit {
        class: ModelClass,
    },
}

impl CoverSource {
    pub fn build(&self, horizon: u64) -> Result<ModelClass> {
        match self {
            CoverSource::Cube(spec) => build_cube_cover(spec),
            CoverSource::Layered {
                dim,
                eps,
                layers,
                theta_box,
                size_cap,
            } => build_layered_class(
                *dim,
                *eps,
                layers.unwrap_or_else(|| default_layers(horizon)),
                theta_box.clone(),
                *size_cap,
            ),
            CoverSource::File { path } => {
                let text = std::fs::read_to_string(path)?;
                Ok(serde_json::from_str(&text)?)
            }
            CoverSource::Explicit { class } => Ok(class.clone()),
        }
    }
}

fn default_const_var() -> f64 {
    10.0
}

fn default_const_bias() -> f64 {
    12.0
}

fn default_divisor() -> f64 {
    1.0
}

/// Learner block of a run configuration, tagged by `"learner"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum LearnerConfig {
    Ops {
        #[serde(rename = "K")]
        k: usize,
        #[serde(default)]
        lambda: Option<f64>,
        cover: CoverSource,
    },
    Pops {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        eps: Option<f64>,
        cover: CoverSource,
    },
    Zoomv {
        #[serde(default = "default_const_var")]
        const_var: f64,
        #[serde(default = "default_const_bias")]
        const_bias: f64,
        #[serde(default)]
        variance_blind: bool,
    },
    Identifier {
        #[serde(default = "default_divisor")]
        budget_divisor: f64,
    },
    Plugin,
    GridUcb {
        grid_step: f64,
    },
    Fixed {
        price: f64,
    },
}

impl LearnerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerConfig::Ops { .. } => "ops",
            LearnerConfig::Pops { .. } => "pops",
            LearnerConfig::Zoomv {
                variance_blind: true,
                ..
            } => "zoomv_blind",
            LearnerConfig::Zoomv { .. } => "zoomv",
            LearnerConfig::Identifier { .. } => "identifier",
            LearnerConfig::Plugin => "plugin",
            LearnerConfig::GridUcb { .. } => "grid_ucb",
            LearnerConfig::Fixed { .. } => "fixed",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Directory for per-seed CSV traces and the summary; nothing is written
    /// when absent.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn default_adversary() -> AdversarySpec {
    AdversarySpec::scalar()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: InstanceSpec,
    #[serde(default = "default_adversary")]
    pub adversary: AdversarySpec,
    #[serde(flatten)]
    pub learner: LearnerConfig,
    #[serde(rename = "T")]
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub invariant_checks: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(PricingError::InvalidParameter(
                "T must be at least 1".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(PricingError::InvalidParameter("no seeds configured".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Builds learners for one configuration, constructing any model class once.
#[derive(Clone, Debug)]
pub struct LearnerFactory {
    config: LearnerConfig,
    horizon: u64,
    dim: usize,
    class: Option<ModelClass>,
}

impl LearnerFactory {
    pub fn new(config: &LearnerConfig, horizon: u64, instance: &TypeDistribution) -> Result<Self> {
        let class = match config {
            LearnerConfig::Ops { cover, .. } | LearnerConfig::Pops { cover, .. } => {
                let class = cover.build(horizon)?;
                if class.dim() != instance.dim() {
                    return Err(PricingError::DimensionMismatch {
                        expected: instance.dim(),
                        got: class.dim(),
                    });
                }
                Some(class)
            }
            _ => None,
        };
        Ok(LearnerFactory {
            config: config.clone(),
            horizon,
            dim: instance.dim(),
            class,
        })
    }

    pub fn class(&self) -> Option<&ModelClass> {
        self.class.as_ref()
    }

    pub fn build(&self) -> Result<Box<dyn Learner>> {
        let class = || {
            self.class
                .clone()
                .expect("class built for posterior learners")
        };
        Ok(match &self.config {
            LearnerConfig::Ops { k, lambda, .. } => {
                Box::new(make_ops_with(class(), *k, self.horizon, *lambda)?)
            }
            LearnerConfig::Pops { lambda, eps, .. } => Box::new(make_pops(
                class(),
                eps.unwrap_or(DEFAULT_POPS_EPS),
                lambda.unwrap_or_else(|| pops_lambda(self.dim, self.horizon)),
            )?),
            LearnerConfig::Zoomv {
                const_var,
                const_bias,
                variance_blind,
            } => {
                if self.dim != 1 {
                    return Err(PricingError::InvalidParameter(
                        "zooming is non-contextual; use a one-dimensional instance".into(),
                    ));
                }
                Box::new(ZoomV::new(
                    self.horizon,
                    ZoomConfig {
                        const_var: *const_var,
                        const_bias: *const_bias,
                        variance_blind: *variance_blind,
                    },
                )?)
            }
            LearnerConfig::Identifier { budget_divisor } => Box::new(Identifier::new(
                self.dim,
                self.horizon,
                IdentifierConfig {
                    budget_divisor: *budget_divisor,
                },
            )?),
            LearnerConfig::Plugin => Box::new(Plugin::new()),
            LearnerConfig::GridUcb { grid_step } => {
                Box::new(GridUcb::new(*grid_step, self.horizon)?)
            }
            LearnerConfig::Fixed { price } => Box::new(FixedPrice::new(*price)?),
        })
    }
}
