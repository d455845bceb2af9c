//! Run configuration: every tunable of the pipeline, with defaults materialized.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use svcal::bs_iv::IvConfig;
use svcal::calibrate::MarketGrid;
use svcal::cos::CosConfig;
use svcal::datagen::SamplingRange;
use svcal::de::DeConfig;
use svcal::models::ModelKind;
use svcal::nnet::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkShape {
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            hidden_layers: 4,
            hidden_width: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Seed for sampling and splitting; training and DE carry their own.
    pub seed: u64,
    pub cos: CosConfig,
    pub iv: IvConfig,
    pub train: TrainConfig,
    pub network: NetworkShape,
    /// DE settings; bounds come from the calibration problem.
    pub de: DeConfig,
    /// Population size as a multiple of the free-parameter count, when set.
    pub pop_multiplier: Option<usize>,
    pub grid: MarketGrid,
    /// Sampling ranges for `gen`; the model's defaults when absent.
    pub ranges: Option<SamplingRange>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            cos: CosConfig::default(),
            iv: IvConfig::default(),
            train: TrainConfig::default(),
            network: NetworkShape::default(),
            de: DeConfig::default(),
            pop_multiplier: None,
            grid: MarketGrid::default(),
            ranges: None,
        }
    }
}

impl RunConfig {
    /// Defaults, a config file, or the config recorded in a run manifest.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        // a run manifest carries its resolved config
        if value.get("subcommand").is_some() {
            value = value["config"].take();
        }
        serde_json::from_value(value).with_context(|| format!("parsing config {}", path.display()))
    }

    /// A `--seed` flag overrides every seed in the file.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = s;
            self.train.seed = s;
            self.de.seed = s;
        }
    }

    pub fn ranges_for(&self, model: ModelKind) -> SamplingRange {
        self.ranges
            .clone()
            .unwrap_or_else(|| SamplingRange::for_model(model))
    }
}
