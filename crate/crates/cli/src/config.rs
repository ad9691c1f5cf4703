//! Run configuration: a flat key-value file mapped onto a [`Scenario`].

use std::path::Path;

use serde::Deserialize;

use levelset_core::{Grid, ObservationHistory, PriorModel, RewardSpec, Scenario};

fn default_interval_end() -> f64 {
    1.0
}

fn default_reward() -> String {
    "indicator".to_string()
}

/// Raw configuration as written in the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// "brownian" or "cpp".
    pub prior: String,
    /// Jump rate per unit length (compound Poisson only).
    pub mu: Option<f64>,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_interval_end")]
    pub b: f64,
    /// Initial observed values at the endpoints.
    #[serde(default)]
    pub ya: f64,
    #[serde(default)]
    pub yb: f64,
    /// Number of x-steps.
    pub m: usize,
    /// Number of value-grid points.
    pub n: usize,
    /// Half-width of the value grid around the threshold; default is six
    /// process standard deviations over the interval.
    pub yrange: Option<f64>,
    /// "indicator" or "clipped".
    #[serde(default = "default_reward")]
    pub reward: String,
    /// Classification threshold.
    #[serde(default)]
    pub k: f64,
    /// Clip bound for the clipped-linear reward.
    #[serde(rename = "C")]
    pub clip: Option<f64>,
    /// Cost per sample.
    pub c: f64,
}

/// Configuration errors exit with status 2; the message names the field.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| bad(format!("invalid config: {e}")))
    }

    pub fn prior(&self) -> Result<PriorModel, ConfigError> {
        match self.prior.as_str() {
            "brownian" => Ok(PriorModel::BrownianMotion),
            "cpp" => {
                let rate = self.mu.ok_or_else(|| bad("mu is required for the cpp prior"))?;
                if !(rate > 0.0) {
                    return Err(bad("mu must be positive"));
                }
                Ok(PriorModel::CompoundPoisson { rate })
            }
            other => Err(bad(format!("prior must be \"brownian\" or \"cpp\", got \"{other}\""))),
        }
    }

    pub fn reward(&self) -> Result<RewardSpec, ConfigError> {
        match self.reward.as_str() {
            "indicator" => Ok(RewardSpec::Indicator { threshold: self.k }),
            "clipped" => {
                let clip = self.clip.ok_or_else(|| bad("C is required for the clipped reward"))?;
                if !(clip > 0.0) {
                    return Err(bad("C must be positive"));
                }
                Ok(RewardSpec::ClippedLinear { threshold: self.k, clip })
            }
            other => {
                Err(bad(format!("reward must be \"indicator\" or \"clipped\", got \"{other}\"")))
            }
        }
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        if !(self.c > 0.0) {
            return Err(bad("cost must be positive"));
        }
        if self.m < 1 {
            return Err(bad("m must be at least 1"));
        }
        if self.n < 3 {
            return Err(bad("n must be at least 3"));
        }
        if !(self.a < self.b) || self.a < 0.0 {
            return Err(bad(format!(
                "interval must satisfy 0 <= a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if let Some(w) = self.yrange {
            if !(w > 0.0) {
                return Err(bad("yrange must be positive"));
            }
        }
        let prior = self.prior()?;
        let reward = self.reward()?;
        let len = self.b - self.a;
        let grid = match self.yrange {
            Some(w) => Grid::new(len, self.m, self.n, self.k, w),
            None => Grid::with_default_range(len, self.m, self.n, self.k, &prior),
        }
        .map_err(|e| bad(e.to_string()))?;
        let initial = ObservationHistory::from_endpoints(self.a, self.b, self.ya, self.yb)
            .map_err(|e| bad(e.to_string()))?;
        grid.y_index(self.ya).map_err(|_| bad("ya must lie on the value grid"))?;
        grid.y_index(self.yb).map_err(|_| bad("yb must lie on the value grid"))?;
        Ok(Scenario { prior, grid, reward, cost: self.c, initial })
    }
}
