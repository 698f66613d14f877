//! Model configuration: a JSON document describing observations, noise
//! families, branch-partitioned nonlinearities, priors and experiment
//! parameters. Shipped example configurations live under `configs/`.

use std::sync::Arc;

use serde::Deserialize;

use garsamp::extended::{Extended, Interval};
use garsamp::model::{MarginalPotential, NonlinearBranch, Nonlinearity, ObservationModel, Prior};
use garsamp::samplers::RandomSource;
use garsamp::{Error, Result};

use crate::expr::Expression;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Additive constant of the joint potential (`-sum log k_i`).
    #[serde(default)]
    pub constant: f64,
    pub observations: Vec<ObservationConfig>,
    #[serde(default)]
    pub prior: Option<PriorConfig>,
    /// Inverse transform `R^{-1}(v)` for the transform bound method.
    #[serde(default)]
    pub transform: Option<TransformConfig>,
    /// Exponent of the `sum |theta|^p` joint potential for the lp bound.
    #[serde(default)]
    pub lp: Option<LpConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub experiment: Option<ExperimentConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    /// Raw observation value.
    pub y: f64,
    /// Recentering shift added to `y` (non-centered noise, e.g. gamma).
    #[serde(default)]
    pub shift: f64,
    pub nonlinearity: NonlinearityConfig,
    pub noise: NoiseConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub expr: String,
    pub branches: Vec<BranchConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    /// Lower endpoint; `null` means unbounded.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Declared monotone sign on the branch: `1` or `-1`.
    pub monotone: i8,
    /// Declared curvature sign: `1` convex, `-1` concave.
    pub curvature: i8,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseConfig {
    Gaussian {
        variance: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    Lp {
        p: f64,
    },
    Cosh,
    Custom {
        potential: String,
        convex: bool,
        #[serde(default)]
        support_lo: Option<f64>,
    },
}

impl NoiseConfig {
    pub fn build(&self) -> Result<MarginalPotential> {
        match self {
            NoiseConfig::Gaussian { variance } => MarginalPotential::gaussian(*variance),
            NoiseConfig::Gamma { shape, rate } => MarginalPotential::gamma_shifted(*shape, *rate),
            NoiseConfig::Lp { p } => MarginalPotential::lp(*p),
            NoiseConfig::Cosh => MarginalPotential::cosh(),
            NoiseConfig::Custom {
                potential,
                convex,
                support_lo,
            } => {
                let e = Arc::new(
                    Expression::parse(potential)
                        .map_err(|e| Error::Model(format!("noise potential: {e}")))?,
                );
                let e2 = Arc::clone(&e);
                MarginalPotential::with_support(
                    move |t| e.eval(t),
                    move |t| e2.d1(t),
                    *convex,
                    0.0,
                    support_lo.unwrap_or(f64::NEG_INFINITY),
                )
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct PriorConfig {
    #[serde(flatten)]
    pub noise: NoiseConfig,
    pub mode: f64,
}

impl PriorConfig {
    pub fn build(&self) -> Result<Prior> {
        Ok(Prior {
            potential: self.noise.build()?,
            mode: self.mode,
        })
    }

    /// A sampler drawing from the prior density, for rejection sampling from
    /// the prior. Only closed-form families are samplable.
    pub fn sampler(&self) -> Result<impl Fn(&mut RandomSource) -> f64 + Send + Sync + use<>> {
        match self.noise {
            NoiseConfig::Gaussian { variance } => {
                let mode = self.mode;
                let std = variance.sqrt();
                Ok(move |rng: &mut RandomSource| rng.gaussian(mode, std))
            }
            _ => Err(Error::Parameter(
                "prior sampling is only available for the gaussian family".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub r_inverse: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpConfig {
    pub p: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    100_001
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Samples per run.
    #[serde(default)]
    pub n: Option<usize>,
    /// Independent seeded runs for rate estimation.
    #[serde(default)]
    pub seeds: Option<u64>,
    #[serde(default)]
    pub base_seed: Option<u64>,
    /// Replications for per-sample-index acceptance curves.
    #[serde(default)]
    pub replications: Option<u64>,
    /// `[lo, hi, count]` grid of the prior scale parameter.
    #[serde(default)]
    pub alpha_grid: Option<[f64; 3]>,
    /// Anchor positions for the planar range-measurement experiment.
    #[serde(default)]
    pub sensors: Option<[[f64; 2]; 2]>,
    /// Reference note: initialization used by the cited comparison baseline;
    /// parsed but unused.
    #[serde(default)]
    pub arms_init: Option<serde_json::Value>,
}

impl ModelConfig {
    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Model(format!("config parse error: {e}")))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Model(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    /// Shifted observation values actually used by the model.
    pub fn shifted_observations(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.y + o.shift).collect()
    }

    /// Builds the observation model, verifying all declared metadata.
    pub fn build(&self) -> Result<ObservationModel> {
        let mut nonlinearities = Vec::with_capacity(self.observations.len());
        let mut potentials = Vec::with_capacity(self.observations.len());
        for obs in &self.observations {
            nonlinearities.push(Arc::new(build_nonlinearity(&obs.nonlinearity)?));
            potentials.push(obs.noise.build()?);
        }
        let prior = self.prior.as_ref().map(|p| p.build()).transpose()?;
        ObservationModel::new(
            self.shifted_observations(),
            nonlinearities,
            potentials,
            prior,
            self.constant,
        )
    }

    /// The inverse transform as a callable, when configured.
    pub fn r_inverse(&self) -> Result<Option<impl Fn(f64) -> f64 + use<>>> {
        match &self.transform {
            None => Ok(None),
            Some(t) => {
                let e = Expression::parse(&t.r_inverse)
                    .map_err(|e| Error::Model(format!("transform: {e}")))?;
                Ok(Some(move |v: f64| e.eval(v)))
            }
        }
    }
}

pub fn build_nonlinearity(cfg: &NonlinearityConfig) -> Result<Nonlinearity> {
    let e = Arc::new(
        Expression::parse(&cfg.expr).map_err(|e| Error::Model(format!("nonlinearity: {e}")))?,
    );
    if cfg.branches.is_empty() {
        return Err(Error::Model(
            "nonlinearity needs at least one branch".into(),
        ));
    }
    let mut branches = Vec::with_capacity(cfg.branches.len());
    for b in &cfg.branches {
        let domain = Interval::new(
            b.lo.map_or(Extended::NegInf, Extended::Finite),
            b.hi.map_or(Extended::PosInf, Extended::Finite),
        );
        let (e0, e1, e2) = (Arc::clone(&e), Arc::clone(&e), Arc::clone(&e));
        branches.push(NonlinearBranch::new(
            domain,
            move |x| e0.eval(x),
            move |x| e1.d1(x),
            move |x| e2.d2(x),
            b.monotone,
            b.curvature,
        )?);
    }
    Nonlinearity::new(branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn example1_config_builds_and_matches_closed_form() {
        let cfg = ModelConfig::from_str(include_str!("../configs/example1.json")).unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.len(), 2);
        // Shift applied: the second observation recenters from 6 to 5.
        assert_abs_diff_eq!(m.observations()[1], 5.0);
        // System potential matches the closed form at scattered points.
        for &x in &[-1.3_f64, -0.4, 0.2, 0.6] {
            let expect =
                (2.0 - x.exp()).powi(2) - (5.0 - (-x).exp() + 1.0).ln() + (5.0 - (-x).exp()) + 1.0;
            assert_abs_diff_eq!(m.observation_potential(x).unwrap(), expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn example2_config_builds_bimodal_model() {
        let cfg = ModelConfig::from_str(include_str!("../configs/example2.json")).unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.prior().is_none());
        for &x in &[-2.5_f64, -0.5, 1.0, 2.4] {
            let alpha = 0.2;
            let expect = (5.0 - x * x).cosh() + alpha * (10.0 - x.abs().exp()).powi(2);
            assert_abs_diff_eq!(m.system_potential(x).unwrap(), expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn example3_config_builds_with_prior() {
        let cfg = ModelConfig::from_str(include_str!("../configs/example3.json")).unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.prior().is_some());
        assert!(cfg.experiment.as_ref().unwrap().sensors.is_some());
        assert_eq!(m.region_count(), 3);
    }

    #[test]
    fn inverted_flag_fails_model_load() {
        let text = r#"{
            "name": "bad",
            "observations": [{
                "y": 1.0,
                "nonlinearity": {"expr": "exp(x)", "branches": [{"lo": null, "hi": null, "monotone": 1, "curvature": -1}]},
                "noise": {"family": "gaussian", "variance": 0.5}
            }]
        }"#;
        let cfg = ModelConfig::from_str(text).unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let text = r#"{"name": "x", "observations": [], "typo_field": 1}"#;
        assert!(ModelConfig::from_str(text).is_err());
    }
}
