//! Flat TOML experiment configuration.
//!
//! ```toml
//! experiment_id = "ma-half"
//! model = "ma"            # iid | ma | garch11sq | stochvol | isolated
//! alpha = 0.5
//! p = 1.0
//! coefficients = [0.25, 0.25]
//! n = 10000
//! replicates = 1000
//! seed = 1
//! ```
//!
//! Unknown keys are rejected. `CLUSTERFLT_SEED` overrides `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{MarginalSpec, ModelSpec, DEFAULT_CENTERING_DRAWS};
use crate::tailproc::LevyTriple;

pub const SEED_ENV: &str = "CLUSTERFLT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub model: String,
    pub alpha: Option<f64>,
    pub p: f64,
    pub scale: f64,
    pub coefficients: Option<Vec<f64>>,
    pub alpha0: Option<f64>,
    pub alpha1: Option<f64>,
    pub beta1: Option<f64>,
    pub phi: Option<f64>,
    pub vol_scale: Option<f64>,
    pub n: usize,
    pub replicates: usize,
    /// Limit draws per comparison time; defaults to `replicates`.
    pub limit_draws: Option<usize>,
    pub u_grid: Vec<f64>,
    pub scheme_exponent: f64,
    pub seed: u64,
    pub comparison_times: Vec<f64>,
    pub out: PathBuf,
    pub u_trunc: Option<f64>,
    pub grid: usize,
    pub centering_draws: usize,
    pub small_step_delta: f64,
    pub tail_reps: usize,
    pub garch_reps: usize,
    pub garch_truncation: usize,
    pub c_plus: Option<f64>,
    pub c_minus: Option<f64>,
    pub b: Option<f64>,
    pub formats: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment_id: "flt".into(),
            model: "iid".into(),
            alpha: None,
            p: 1.0,
            scale: 1.0,
            coefficients: None,
            alpha0: None,
            alpha1: None,
            beta1: None,
            phi: None,
            vol_scale: None,
            n: 10_000,
            replicates: 1000,
            limit_draws: None,
            u_grid: vec![0.1, 0.03, 0.01],
            scheme_exponent: crate::estimators::DEFAULT_SCHEME_EXPONENT,
            seed: 1,
            comparison_times: vec![0.25, 0.5, 1.0],
            out: PathBuf::from("out"),
            u_trunc: None,
            grid: crate::limits::DEFAULT_GRID,
            centering_draws: DEFAULT_CENTERING_DRAWS,
            small_step_delta: 0.1,
            tail_reps: 100_000,
            garch_reps: 100_000,
            garch_truncation: 1000,
            c_plus: None,
            c_minus: None,
            b: None,
            formats: vec!["json".into(), "csv".into(), "svg".into()],
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Applies `CLUSTERFLT_SEED` if set and returns the value used.
    pub fn apply_env_seed(&mut self) -> Result<Option<u64>> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let seed = v.trim().parse().map_err(|_| config_err(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
                self.seed = seed;
                Ok(Some(seed))
            }
            Err(_) => Ok(None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(config_err("n must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(config_err("replicates must be at least 1"));
        }
        if self.comparison_times.is_empty() || self.comparison_times.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(config_err("comparison_times must be nonempty and lie in (0, 1]"));
        }
        if self.u_grid.iter().any(|u| !(*u > 0.0)) {
            return Err(config_err("u_grid entries must be positive"));
        }
        if self.grid == 0 {
            return Err(config_err("grid must be at least 1"));
        }
        for f in &self.formats {
            if !matches!(f.as_str(), "json" | "csv" | "svg") {
                return Err(config_err(format!("unknown format {f:?}")));
            }
        }
        let overrides = [self.c_plus, self.c_minus, self.b].iter().filter(|v| v.is_some()).count();
        if overrides != 0 && overrides != 3 {
            return Err(config_err("c_plus, c_minus and b must be given together"));
        }
        self.model_spec().map(|_| ())
    }

    fn marginal(&self) -> Result<MarginalSpec> {
        let alpha = self.alpha.ok_or_else(|| config_err(format!("model {} needs alpha", self.model)))?;
        MarginalSpec::new(alpha, self.p, self.scale)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| config_err(format!("model {} needs {key}", self.model)));
        match self.model.as_str() {
            "iid" => Ok(ModelSpec::iid(self.marginal()?)),
            "ma" => {
                let c = self.coefficients.as_ref().ok_or_else(|| config_err("model ma needs coefficients"))?;
                ModelSpec::moving_average(self.marginal()?, c)
            }
            "garch11sq" => ModelSpec::garch11_squared(need(self.alpha0, "alpha0")?, need(self.alpha1, "alpha1")?, need(self.beta1, "beta1")?),
            "stochvol" => ModelSpec::stoch_vol(self.marginal()?, need(self.phi, "phi")?, need(self.vol_scale, "vol_scale")?),
            "isolated" => ModelSpec::isolated_extremes(self.marginal()?, need(self.phi, "phi")?),
            other => Err(config_err(format!("unknown model {other:?}"))),
        }
    }

    pub fn triple_override(&self, alpha: f64) -> Result<Option<LevyTriple>> {
        match (self.c_plus, self.c_minus, self.b) {
            (Some(cp), Some(cm), Some(b)) => Ok(Some(LevyTriple::new(alpha, cp, cm, b)?)),
            _ => Ok(None),
        }
    }

    pub fn limit_draws(&self) -> usize {
        self.limit_draws.unwrap_or(self.replicates)
    }

    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment_id = \"ma-half\"\nmodel = \"ma\"\nalpha = 0.5\np = 1.0\ncoefficients = [0.25, 0.25]\nn = 10000\nreplicates = 1000\nseed = 1\n",
        )
        .unwrap();
        assert_eq!(cfg.model_spec().unwrap().name(), "ma");
        assert_eq!(cfg.comparison_times, vec![0.25, 0.5, 1.0]);
        assert_eq!(cfg.limit_draws(), 1000);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(ExperimentConfig::from_toml_str("modle = \"iid\"\nalpha = 1.0"), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml_str("model = \"ma\"\nalpha = 1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("model = \"iid\"").is_err());
        assert!(ExperimentConfig::from_toml_str("model = \"iid\"\nalpha = 1.0\nc_plus = 1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("model = \"iid\"\nalpha = 1.0\ncomparison_times = [1.5]").is_err());
        assert!(ExperimentConfig::from_toml_str("model = \"garch11sq\"\nalpha0 = 0.1\nalpha1 = 1.0\nbeta1 = 0.0").is_ok());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig { alpha: Some(0.8), ..Default::default() };
        cfg.coefficients = None;
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
