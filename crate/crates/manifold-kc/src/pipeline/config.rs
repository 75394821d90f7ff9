//! Run configuration: one versioned TOML file drives the whole pipeline.
//! Unknown keys are rejected, every parameter-range invariant is
//! re-validated at parse time, and the resolved config (defaults filled
//! in) is echoed into the run manifest so runs are self-describing.

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::fields::{CovarianceFamily, CovarianceModel};
use crate::manifold::Manifold;
use crate::verify::{RateFunctions, RateVariant};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub manifold: Manifold,
    pub atlas: AtlasSection,
    pub grid: GridSection,
    pub model: ModelSection,
    pub rates: RateSection,
    pub run: RunSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasSection {
    /// Number of charts in the cover.
    pub charts: usize,
    /// Seed for coverage test points.
    pub seed: u64,
    /// Pairs per chart for the sandwich check.
    #[serde(default = "default_sandwich_pairs")]
    pub sandwich_pairs: usize,
    /// Exhaustive separability levels (transitions up to k_max).
    #[serde(default = "default_separability_k_max")]
    pub separability_k_max: u32,
    /// Levels summed in the summability report.
    #[serde(default = "default_summability_k_max")]
    pub summability_k_max: u32,
}

fn default_sandwich_pairs() -> usize {
    10_000
}
fn default_separability_k_max() -> u32 {
    5
}
fn default_summability_k_max() -> u32 {
    30
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Which chart of the atlas carries the grids.
    #[serde(default)]
    pub chart: usize,
    pub k0: u32,
    pub k1: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: CovarianceFamily,
    pub scale: f64,
    pub eta: f64,
    #[serde(default)]
    pub nugget: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub variant: RateVariant,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// The constant K of the probability bound q.
    pub bound_scale: f64,
    pub k_gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub replicates: usize,
    pub seed: u64,
    /// 0 = library default thread count.
    #[serde(default)]
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Analytic predicate grid: h = 2^{-1} .. 2^{-h_min_exp}.
    #[serde(default = "default_h_min_exp")]
    pub predicate_h_min_exp: u32,
    #[serde(default = "default_chaining_probes")]
    pub chaining_probes: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            bins: default_bins(),
            predicate_h_min_exp: default_h_min_exp(),
            chaining_probes: default_chaining_probes(),
        }
    }
}

fn default_bins() -> usize {
    12
}
fn default_h_min_exp() -> u32 {
    20
}
fn default_chaining_probes() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; overridden by the --out flag.
    pub dir: Option<String>,
}

/// Typed, invariant-checked view of a parsed config.
pub struct Validated {
    pub manifold: Manifold,
    pub model: CovarianceModel,
    pub rates: RateFunctions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(PipelineError::Config(format!(
                "unsupported config schema version {} (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Re-run every referenced type's invariants and build the typed
    /// objects commands work with.
    pub fn validate(&self) -> Result<Validated, PipelineError> {
        let manifold = match &self.manifold {
            Manifold::Sphere { dim } => Manifold::sphere(*dim),
            Manifold::FlatTorus { periods } => Manifold::flat_torus(periods.clone()),
            Manifold::Box { extents } => Manifold::euclidean_box(extents.clone()),
        }
        .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.atlas.charts == 0 {
            return Err(PipelineError::Config("atlas.charts must be >= 1".into()));
        }
        if self.grid.k0 < 1 || self.grid.k1 < self.grid.k0 {
            return Err(PipelineError::Config(format!(
                "grid levels must satisfy 1 <= k0 <= k1, got {}..{}",
                self.grid.k0, self.grid.k1
            )));
        }
        if self.verify.bins == 0 {
            return Err(PipelineError::Config("verify.bins must be >= 1".into()));
        }
        let model =
            CovarianceModel::new(self.model.family, self.model.scale, self.model.eta, self.model.nugget)?;
        let rates = RateFunctions::new(
            self.rates.variant,
            self.rates.rho,
            self.rates.alpha,
            self.rates.beta,
            self.rates.gamma,
            self.rates.bound_scale,
            self.rates.k_gamma,
            manifold.dim(),
        )?;
        Ok(Validated { manifold, model, rates })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_toml() -> String {
        r#"
schema_version = 1

[manifold]
kind = "sphere"
dim = 2

[atlas]
charts = 280
seed = 7

[grid]
chart = 0
k0 = 1
k1 = 4

[model]
family = "powered-exponential-variogram"
scale = 1.0
eta = 1.0

[rates]
variant = "power"
rho = 1.0
alpha = 2.0
beta = 2.0
gamma = 0.3
bound_scale = 65536.0
k_gamma = 1.0

[run]
replicates = 500
seed = 42
"#
        .to_string()
    }

    #[test]
    fn parses_and_validates() {
        let cfg = RunConfig::from_toml(&sample_toml()).unwrap();
        assert_eq!(cfg.atlas.sandwich_pairs, 10_000);
        assert_eq!(cfg.verify.bins, 12);
        let v = cfg.validate().unwrap();
        assert_eq!(v.manifold.dim(), 2);
        assert_eq!(v.rates.gamma(), 0.3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = sample_toml().replace("[run]", "[run]\nbogus_key = 3\n");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn schema_version_is_enforced() {
        let bad = sample_toml().replace("schema_version = 1", "schema_version = 9");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn eta_above_one_surfaces_model_rejection() {
        let bad = sample_toml().replace("eta = 1.0", "eta = 1.5");
        let cfg = RunConfig::from_toml(&bad).unwrap();
        match cfg.validate() {
            Err(PipelineError::Field(crate::fields::FieldError::ModelRejection { .. })) => {}
            Err(other) => panic!("expected model rejection, got {other:?}"),
            Ok(_) => panic!("expected model rejection, got Ok"),
        }
    }

    #[test]
    fn bad_levels_are_config_errors() {
        let bad = sample_toml().replace("k0 = 1", "k0 = 3").replace("k1 = 4", "k1 = 2");
        let cfg = RunConfig::from_toml(&bad).unwrap();
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
    }
}
