//! Calibration problem files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use svcal::calibrate::{default_lambda_bar, Backend, CalibrationProblem, FreeParam, WeightSpec};
use svcal::models::{ModelKind, ParamName};
use svcal::nnet::Network;

use crate::config::RunConfig;
use crate::io::{read_json, read_surface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Cos,
    Surrogate,
}

/// `{model, backend, weights_file?, surface_file, free: {name: [lo, hi]},
/// fixed: {name: value}, lambda_bar?, weights?}`. Relative paths resolve
/// against the problem file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub model: ModelKind,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub weights_file: Option<PathBuf>,
    pub surface_file: PathBuf,
    pub free: BTreeMap<ParamName, (f64, f64)>,
    #[serde(default)]
    pub fixed: BTreeMap<ParamName, f64>,
    #[serde(default)]
    pub lambda_bar: Option<f64>,
    /// Overrides the surface file's weight column when present.
    #[serde(default)]
    pub weights: Option<WeightSpec>,
}

pub struct LoadedProblem {
    pub problem: CalibrationProblem,
    pub inputs: Vec<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_problem(path: &Path, config: &RunConfig) -> Result<LoadedProblem> {
    let file: ProblemFile = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let surface_path = resolve(base, &file.surface_file);
    let mut surface = read_surface(&surface_path)?;
    let mut inputs = vec![path.to_path_buf(), surface_path];
    if let Some(w) = &file.weights {
        surface.weights = w.resolve(&surface.quotes)?;
    }
    let backend = match file.backend {
        BackendKind::Cos => Backend::CosBrent {
            cos: config.cos,
            iv: config.iv,
        },
        BackendKind::Surrogate => {
            let Some(w) = &file.weights_file else {
                bail!("backend \"surrogate\" needs weights_file");
            };
            let w = resolve(base, w);
            let net = Network::load(&w)?;
            inputs.push(w);
            Backend::Surrogate(Arc::new(net))
        }
    };
    let free: Vec<FreeParam> = file
        .free
        .iter()
        .map(|(&n, &b)| FreeParam::new(n, b))
        .collect();
    let lambda_bar = file.lambda_bar.unwrap_or(default_lambda_bar(free.len()));
    let fixed = file.fixed.into_iter().collect();
    let problem = CalibrationProblem::new(surface, file.model, free, fixed, backend)?
        .with_lambda_bar(lambda_bar)?;
    Ok(LoadedProblem { problem, inputs })
}
