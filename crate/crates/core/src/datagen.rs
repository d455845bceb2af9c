//! Supervised training data: Latin-hypercube inputs, COS put prices and their
//! Black-Scholes implied volatilities.
//!
//! Inputs are ordered `m, tau, r, rho, kappa, gamma, nu_bar, nu0` followed by
//! `lambda_j, mu_j, nu_j_sq` for Bates. Datasets persist as CSV with a JSON
//! sidecar `<name>.meta.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bs_iv::{implied_vol, IvConfig};
use crate::cos::{cos_price_detailed, CosConfig};
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelParams, OptionKind, Quote};
use crate::sampling::{latin_hypercube, seeded};

/// Admissible output envelope of a retained row.
pub const PRICE_RANGE: (f64, f64) = (0.0, 0.6);
pub const IV_RANGE: (f64, f64) = (0.0, 0.76);

/// Relative inset applied to an open bound.
const OPEN_INSET: f64 = 1e-6;

pub const QUOTE_COLUMNS: [&str; 3] = ["m", "tau", "r"];

pub fn input_columns(kind: ModelKind) -> Vec<String> {
    QUOTE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(kind.params().iter().map(|p| p.as_str().to_string()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeDim {
    pub name: String,
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub low_open: bool,
    #[serde(default)]
    pub high_open: bool,
}

impl RangeDim {
    fn closed(name: &str, low: f64, high: f64) -> Self {
        RangeDim {
            name: name.into(),
            low,
            high,
            low_open: false,
            high_open: false,
        }
    }

    fn open_low(name: &str, low: f64, high: f64) -> Self {
        RangeDim {
            low_open: true,
            ..Self::closed(name, low, high)
        }
    }

    /// Interval actually sampled: open ends are pulled in by `1e-6·(high − low)`.
    pub fn sampled_bounds(&self) -> (f64, f64) {
        let inset = OPEN_INSET * (self.high - self.low);
        let lo = if self.low_open {
            self.low + inset
        } else {
            self.low
        };
        let hi = if self.high_open {
            self.high - inset
        } else {
            self.high
        };
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRange {
    pub dims: Vec<RangeDim>,
}

impl SamplingRange {
    pub fn heston() -> Self {
        SamplingRange {
            dims: vec![
                RangeDim::closed("m", 0.6, 1.4),
                RangeDim::closed("tau", 0.05, 3.0),
                RangeDim::closed("r", 0.0, 0.05),
                RangeDim::closed("rho", -0.9, 0.0),
                RangeDim::open_low("kappa", 0.0, 3.0),
                RangeDim::open_low("gamma", 0.01, 0.8),
                RangeDim::open_low("nu_bar", 0.01, 0.5),
                RangeDim::open_low("nu0", 0.05, 0.5),
            ],
        }
    }

    pub fn bates() -> Self {
        let mut r = Self::heston();
        r.dims.extend([
            RangeDim::closed("lambda_j", 0.0, 3.0),
            RangeDim::closed("mu_j", 0.0, 0.4),
            RangeDim::closed("nu_j_sq", 0.0, 0.3),
        ]);
        r
    }

    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Heston => Self::heston(),
            ModelKind::Bates => Self::bates(),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.dims.iter().map(|d| d.name.clone()).collect()
    }

    /// Nominal `(low, high)` per dimension.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.dims.iter().map(|d| (d.low, d.high)).collect()
    }

    pub fn get(&self, name: &str) -> Option<&RangeDim> {
        self.dims.iter().find(|d| d.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut RangeDim> {
        self.dims.iter_mut().find(|d| d.name == name)
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        let want = input_columns(kind);
        if self.names() != want {
            return Err(Error::config(format!(
                "ranges for {kind} must list {} in order, got {}",
                want.join(","),
                self.names().join(",")
            )));
        }
        for d in &self.dims {
            if !(d.low.is_finite() && d.high.is_finite() && d.low < d.high) {
                return Err(Error::config(format!("range {} needs low < high", d.name)));
            }
        }
        Ok(())
    }
}

/// Splits a Table-order input vector into the quote and the model parameters.
pub fn split_inputs(kind: ModelKind, inputs: &[f64]) -> Result<(Quote, ModelParams)> {
    let need = 3 + kind.params().len();
    if inputs.len() != need {
        return Err(Error::DimensionMismatch {
            expected: need,
            got: inputs.len(),
        });
    }
    let quote = Quote::new(inputs[0], inputs[1], inputs[2], OptionKind::Put)?;
    let params = ModelParams::from_values(kind, &inputs[3..])?;
    Ok((quote, params))
}

/// Put price and implied volatility for one input vector.
pub fn label_row(
    kind: ModelKind,
    inputs: &[f64],
    cos: &CosConfig,
    iv: &IvConfig,
) -> Result<(f64, f64, bool)> {
    let (quote, params) = split_inputs(kind, inputs)?;
    let priced = cos_price_detailed(&params, &quote, cos)?;
    let vol = implied_vol(priced.value, &quote, iv)?;
    Ok((priced.value, vol, priced.clamped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub inputs: Vec<f64>,
    pub price: f64,
    pub iv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub model: ModelKind,
    pub columns: Vec<String>,
    pub ranges: SamplingRange,
    pub seed: u64,
    pub cos: CosConfig,
    pub iv: IvConfig,
    /// Points drawn before filtering.
    pub requested: usize,
    pub dropped: usize,
    /// Retained rows whose series came out negative and was clamped to zero.
    pub clamped: usize,
    pub rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub rows: Vec<DataRow>,
}

pub fn lhs_sample(ranges: &SamplingRange, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let bounds: Vec<(f64, f64)> = ranges.dims.iter().map(RangeDim::sampled_bounds).collect();
    latin_hypercube(&bounds, n, &mut seeded(seed))
}

fn in_open(v: f64, (lo, hi): (f64, f64)) -> bool {
    v > lo && v < hi
}

/// Draws `n` points, prices each with COS and inverts with Brent. Rows that
/// fail or leave the output envelope are dropped and counted; more than half
/// dropped means the ranges are degenerate.
pub fn build_dataset(
    model: ModelKind,
    ranges: &SamplingRange,
    n: usize,
    seed: u64,
    cos: &CosConfig,
    iv: &IvConfig,
) -> Result<Dataset> {
    ranges.validate(model)?;
    cos.validate()?;
    iv.validate()?;
    if n == 0 {
        return Err(Error::config("dataset size must be at least 1"));
    }
    let points = lhs_sample(ranges, n, seed);
    let labelled: Vec<Option<(DataRow, bool)>> = points
        .into_par_iter()
        .map(|inputs| match label_row(model, &inputs, cos, iv) {
            Ok((price, vol, clamped)) if in_open(price, PRICE_RANGE) && in_open(vol, IV_RANGE) => {
                Some((
                    DataRow {
                        inputs,
                        price,
                        iv: vol,
                    },
                    clamped,
                ))
            }
            _ => None,
        })
        .collect();
    let mut rows = Vec::with_capacity(labelled.len());
    let mut clamped = 0;
    for (row, c) in labelled.into_iter().flatten() {
        clamped += usize::from(c);
        rows.push(row);
    }
    let dropped = n - rows.len();
    if 2 * dropped > n {
        return Err(Error::DegenerateRanges {
            dropped,
            requested: n,
        });
    }
    Ok(Dataset {
        meta: DatasetMeta {
            model,
            columns: input_columns(model),
            ranges: ranges.clone(),
            seed,
            cos: *cos,
            iv: *iv,
            requested: n,
            dropped,
            clamped,
            rows: rows.len(),
            split: None,
        },
        rows,
    })
}

/// Sidecar path: `data.csv` → `data.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.meta.columns.len()
    }

    /// Row-major input matrix.
    pub fn inputs_flat(&self) -> Vec<f64> {
        self.rows
            .iter()
            .flat_map(|r| r.inputs.iter().copied())
            .collect()
    }

    pub fn ivs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iv).collect()
    }

    fn with_rows(&self, rows: Vec<DataRow>, split: &str) -> Dataset {
        let mut meta = self.meta.clone();
        meta.rows = rows.len();
        meta.split = Some(split.to_string());
        Dataset { meta, rows }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let mut header = self.meta.columns.clone();
        header.extend(["price".to_string(), "iv".to_string()]);
        w.write_record(&header)?;
        for row in &self.rows {
            let fields = row
                .inputs
                .iter()
                .chain([&row.price, &row.iv])
                .map(|v| v.to_string());
            w.write_record(fields)?;
        }
        w.flush()?;
        let mut meta = BufWriter::new(File::create(meta_path(path))?);
        serde_json::to_writer_pretty(&mut meta, &self.meta)?;
        meta.write_all(b"\n")?;
        meta.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let meta_file = meta_path(path);
        let meta: DatasetMeta = serde_json::from_reader(File::open(&meta_file).map_err(|e| {
            Error::malformed("dataset metadata", format!("{}: {e}", meta_file.display()))
        })?)?;
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut want = meta.columns.clone();
        want.extend(["price".to_string(), "iv".to_string()]);
        if header != want {
            return Err(Error::malformed("dataset header", header.join(",")));
        }
        let d = meta.columns.len();
        let mut rows = Vec::with_capacity(meta.rows);
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::malformed("dataset row", format!("row {i}: {e}")))?;
            if vals.len() != d + 2 {
                return Err(Error::malformed(
                    "dataset row",
                    format!("row {i} has {} fields", vals.len()),
                ));
            }
            rows.push(DataRow {
                inputs: vals[..d].to_vec(),
                price: vals[d],
                iv: vals[d + 1],
            });
        }
        if rows.len() != meta.rows {
            return Err(Error::malformed(
                "dataset",
                format!("metadata says {} rows, file has {}", meta.rows, rows.len()),
            ));
        }
        Ok(Dataset { meta, rows })
    }
}

/// Disjoint train/validation/test partition by seeded shuffle. Sizes are the
/// rounded fractions of the row count; the last split takes the remainder.
pub fn split_dataset(
    ds: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fs) = fractions;
    if !(ft > 0.0 && fv > 0.0 && fs > 0.0) || ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split fractions {ft}, {fv}, {fs} must be positive and sum to 1"
        )));
    }
    let n = ds.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let n_train = ((ft * n as f64).round() as usize).min(n);
    let n_val = ((fv * n as f64).round() as usize).min(n - n_train);
    let pick = |ids: &[usize]| ids.iter().map(|&i| ds.rows[i].clone()).collect::<Vec<_>>();
    Ok((
        ds.with_rows(pick(&idx[..n_train]), "train"),
        ds.with_rows(pick(&idx[n_train..n_train + n_val]), "val"),
        ds.with_rows(pick(&idx[n_train + n_val..]), "test"),
    ))
}
