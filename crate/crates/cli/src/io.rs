//! CSV and JSON files exchanged between subcommands.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use svcal::models::{OptionKind, Quote, QuoteSurface, ValueKind};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One row of a quotes, prices or surface CSV. Columns beyond
/// `m, tau, r, kind` are optional on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuoteRow {
    pub m: f64,
    pub tau: f64,
    pub r: f64,
    pub kind: OptionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl QuoteRow {
    pub fn of(q: &Quote) -> QuoteRow {
        QuoteRow {
            m: q.moneyness,
            tau: q.tau,
            r: q.rate,
            kind: q.kind,
            price: None,
            iv: None,
            observed: None,
            weight: None,
        }
    }

    pub fn quote(&self) -> svcal::Result<Quote> {
        Quote::new(self.m, self.tau, self.r, self.kind)
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<QuoteRow>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = rd
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("{} row {}", path.display(), i + 1)))
        .collect::<Result<Vec<QuoteRow>>>()?;
    if rows.is_empty() {
        bail!("{} has no rows", path.display());
    }
    Ok(rows)
}

pub fn write_rows(path: &Path, rows: &[QuoteRow]) -> Result<()> {
    let mut wr = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_quotes(path: &Path) -> Result<Vec<Quote>> {
    read_rows(path)?
        .iter()
        .enumerate()
        .map(|(i, r)| r.quote().map_err(|e| e.at_quote(i).into()))
        .collect()
}

/// Implied-volatility surface with columns `m, tau, r, kind, observed, weight`;
/// a missing weight is 1.
pub fn read_surface(path: &Path) -> Result<QuoteSurface> {
    let rows = read_rows(path)?;
    let mut quotes = Vec::with_capacity(rows.len());
    let mut observed = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        quotes.push(r.quote().map_err(|e| e.at_quote(i))?);
        let Some(v) = r.observed else {
            bail!("{} row {}: missing observed value", path.display(), i + 1);
        };
        observed.push(v);
        weights.push(r.weight.unwrap_or(1.0));
    }
    Ok(QuoteSurface::new(quotes, observed, ValueKind::ImpliedVol, weights)?)
}

pub fn write_surface(path: &Path, surface: &QuoteSurface) -> Result<()> {
    let rows: Vec<QuoteRow> = surface
        .quotes
        .iter()
        .zip(&surface.observed)
        .zip(&surface.weights)
        .map(|((q, &v), &w)| QuoteRow {
            observed: Some(v),
            weight: Some(w),
            ..QuoteRow::of(q)
        })
        .collect();
    write_rows(path, &rows)
}
