//! Calibration: weighted implied-volatility objective over a quote surface,
//! evaluated by COS+Brent or by a trained surrogate, minimised with DE.
//! Also synthetic market surfaces, finite-difference Hessians and
//! two-parameter landscape scans.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bs_iv::{implied_vol, IvConfig};
use crate::cos::{price_surface, CosConfig};
use crate::de::{de_minimize, DeConfig, TraceRow};
use crate::error::{Error, Result};
use crate::models::{
    ModelKind, ModelParams, OptionKind, ParamName, Quote, QuoteSurface, ValueKind,
};
use crate::nnet::Network;

/// Regularization used when more than three parameters are free.
pub const DEFAULT_LAMBDA_BAR: f64 = 1e-6;

/// Implied-volatility envelope a synthetic surface is expected to respect.
pub const IV_ENVELOPE: (f64, f64) = (0.2, 0.5);

/// Relative finite-difference step: `h_i = STEP_FRACTION · (box width)`.
pub const STEP_FRACTION: f64 = 1e-3;

pub fn default_lambda_bar(n_free: usize) -> f64 {
    if n_free > 3 {
        DEFAULT_LAMBDA_BAR
    } else {
        0.0
    }
}

/// Search box of each Heston parameter for calibration.
pub fn heston_search_box(name: ParamName) -> Option<(f64, f64)> {
    Some(match name {
        ParamName::Rho => (-0.85, -0.05),
        ParamName::NuBar => (0.05, 0.45),
        ParamName::Gamma => (0.05, 0.75),
        ParamName::Nu0 => (0.05, 0.45),
        ParamName::Kappa => (0.1, 2.0),
        _ => return None,
    })
}

/// Range the synthetic Heston truths are drawn from.
pub fn heston_truth_box(name: ParamName) -> Option<(f64, f64)> {
    Some(match name {
        ParamName::Rho => (-0.75, -0.25),
        ParamName::NuBar => (0.15, 0.35),
        ParamName::Gamma => (0.3, 0.5),
        ParamName::Nu0 => (0.15, 0.35),
        ParamName::Kappa => (0.5, 1.0),
        _ => return None,
    })
}

/// Search box of each Bates parameter (also used for Heston fits to Bates data).
pub fn bates_search_box(name: ParamName) -> (f64, f64) {
    match name {
        ParamName::Rho => (-0.9, 0.0),
        ParamName::Kappa => (0.1, 3.0),
        ParamName::Gamma => (0.01, 0.8),
        ParamName::NuBar => (0.01, 0.5),
        ParamName::Nu0 => (0.01, 0.5),
        ParamName::LambdaJ => (0.0, 3.0),
        ParamName::MuJ => (0.0, 0.4),
        ParamName::NuJSq => (0.0, 0.3),
    }
}

/// How model implied volatilities are produced.
#[derive(Debug, Clone)]
pub enum Backend {
    CosBrent {
        cos: CosConfig,
        iv: IvConfig,
    },
    /// Network over inputs `(m, tau, r, params…)`. It is trained on puts; a
    /// call shares the put's implied volatility, so the kind is ignored.
    Surrogate(Arc<Network>),
}

impl Backend {
    pub fn cos_brent() -> Self {
        Backend::CosBrent {
            cos: CosConfig::default(),
            iv: IvConfig::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::CosBrent { .. } => "cos",
            Backend::Surrogate(_) => "surrogate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeParam {
    pub name: ParamName,
    pub low: f64,
    pub high: f64,
}

impl FreeParam {
    pub fn new(name: ParamName, (low, high): (f64, f64)) -> Self {
        FreeParam { name, low, high }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    pub surface: QuoteSurface,
    pub model: ModelKind,
    pub free: Vec<FreeParam>,
    pub fixed: Vec<(ParamName, f64)>,
    pub backend: Backend,
    pub lambda_bar: f64,
}

/// Residuals `model − observed` (or `+∞` on failure) for one candidate.
type Residuals = Result<Vec<f64>>;

impl CalibrationProblem {
    /// Problem with the default regularization for the number of free parameters.
    pub fn new(
        surface: QuoteSurface,
        model: ModelKind,
        free: Vec<FreeParam>,
        fixed: Vec<(ParamName, f64)>,
        backend: Backend,
    ) -> Result<Self> {
        let lambda_bar = default_lambda_bar(free.len());
        let p = CalibrationProblem {
            surface,
            model,
            free,
            fixed,
            backend,
            lambda_bar,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda_bar(mut self, lambda_bar: f64) -> Result<Self> {
        self.lambda_bar = lambda_bar;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.surface.validate()?;
        if !(self.lambda_bar.is_finite() && self.lambda_bar >= 0.0) {
            return Err(Error::config("lambda_bar must be finite and non-negative"));
        }
        if self.free.is_empty() {
            return Err(Error::config("no free parameters"));
        }
        let mut seen = Vec::new();
        for name in self
            .free
            .iter()
            .map(|f| f.name)
            .chain(self.fixed.iter().map(|f| f.0))
        {
            if !self.model.params().contains(&name) {
                return Err(Error::config(format!(
                    "{name} is not a {} parameter",
                    self.model
                )));
            }
            if seen.contains(&name) {
                return Err(Error::config(format!("{name} listed more than once")));
            }
            seen.push(name);
        }
        if seen.len() != self.model.params().len() {
            let missing: Vec<&str> = self
                .model
                .params()
                .iter()
                .filter(|p| !seen.contains(p))
                .map(|p| p.as_str())
                .collect();
            return Err(Error::config(format!(
                "parameters neither free nor fixed: {}",
                missing.join(", ")
            )));
        }
        for f in &self.free {
            if !(f.low.is_finite() && f.high.is_finite() && f.low < f.high) {
                return Err(Error::config(format!(
                    "search box of {} is degenerate",
                    f.name
                )));
            }
        }
        if let Some(&(name, v)) = self.fixed.iter().find(|f| !f.1.is_finite()) {
            return Err(Error::config(format!("fixed {name} = {v} is not finite")));
        }
        if let Backend::Surrogate(net) = &self.backend {
            let want = 3 + self.model.params().len();
            if net.input_dim() != want {
                return Err(Error::DimensionMismatch {
                    expected: want,
                    got: net.input_dim(),
                });
            }
            if self.surface.value_kind != ValueKind::ImpliedVol {
                return Err(Error::config(
                    "the surrogate backend produces implied volatilities only",
                ));
            }
            for f in &self.free {
                let r = net.input_ranges[3 + f.name.index()];
                if f.low < r.low || f.high > r.high {
                    return Err(Error::config(format!(
                        "search box of {} [{}, {}] exceeds the network's training range [{}, {}]",
                        f.name, f.low, f.high, r.low, r.high
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.free.iter().map(|f| (f.low, f.high)).collect()
    }

    pub fn free_names(&self) -> Vec<ParamName> {
        self.free.iter().map(|f| f.name).collect()
    }

    /// Full parameter set from a free-parameter vector.
    pub fn assemble(&self, x: &[f64]) -> Result<ModelParams> {
        if x.len() != self.free.len() {
            return Err(Error::DimensionMismatch {
                expected: self.free.len(),
                got: x.len(),
            });
        }
        let mut values = [0.0; 8];
        for &(name, v) in &self.fixed {
            values[name.index()] = v;
        }
        for (f, &v) in self.free.iter().zip(x) {
            values[f.name.index()] = v;
        }
        ModelParams::from_values(self.model, &values)
    }

    /// Model values (implied vols, or prices for a price surface) from COS.
    fn cos_values(&self, params: &ModelParams, cos: &CosConfig, iv: &IvConfig) -> Result<Vec<f64>> {
        let prices = price_surface(params, &self.surface.quotes, cos)?;
        match self.surface.value_kind {
            ValueKind::Price => Ok(prices),
            ValueKind::ImpliedVol => prices
                .iter()
                .zip(&self.surface.quotes)
                .enumerate()
                .map(|(i, (&p, q))| implied_vol(p, q, iv).map_err(|e| e.at_quote(i)))
                .collect(),
        }
    }

    fn surrogate_rows(&self, params: &ModelParams, out: &mut Vec<f64>) {
        let values = params.to_array();
        let np = self.model.params().len();
        for q in &self.surface.quotes {
            out.extend([q.moneyness, q.tau, q.rate]);
            out.extend_from_slice(&values[..np]);
        }
    }

    fn residuals_of(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.surface.observed)
            .map(|(m, o)| m - o)
            .collect()
    }

    /// Residuals `model − observed` for each candidate, as one batch over
    /// the candidate × quote grid.
    fn batch_residuals(&self, candidates: &[Vec<f64>]) -> Vec<Residuals> {
        match &self.backend {
            Backend::CosBrent { cos, iv } => candidates
                .par_iter()
                .map(|x| {
                    let params = self.assemble(x)?;
                    Ok(self.residuals_of(&self.cos_values(&params, cos, iv)?))
                })
                .collect(),
            Backend::Surrogate(net) => {
                let params: Vec<Result<ModelParams>> =
                    candidates.iter().map(|x| self.assemble(x)).collect();
                let n_q = self.surface.len();
                let mut rows = Vec::with_capacity(candidates.len() * n_q * net.input_dim());
                for p in params.iter().flatten() {
                    self.surrogate_rows(p, &mut rows);
                }
                let out = match net.forward(&rows) {
                    Ok(out) => out,
                    Err(e) => {
                        let msg = e.to_string();
                        return candidates
                            .iter()
                            .map(|_| Err(Error::malformed("surrogate batch", msg.clone())))
                            .collect();
                    }
                };
                let mut chunks = out.chunks(n_q);
                params
                    .into_iter()
                    .map(|p| {
                        p?;
                        Ok(
                            self.residuals_of(
                                chunks.next().expect("one chunk per valid candidate"),
                            ),
                        )
                    })
                    .collect()
            }
        }
    }

    pub fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.batch_residuals(std::slice::from_ref(&x.to_vec()))
            .pop()
            .expect("one candidate")
    }

    /// `Σ ω r² + λ̄ ‖x‖₂` from residuals.
    pub fn energy(&self, residuals: &[f64], x: &[f64], lambda_bar: f64) -> f64 {
        let fit: f64 = residuals
            .iter()
            .zip(&self.surface.weights)
            .map(|(r, w)| w * r * r)
            .sum();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        fit + lambda_bar * norm
    }

    /// Objective for every candidate row; failures score `+∞`.
    pub fn objective_with(&self, candidates: &[Vec<f64>], lambda_bar: f64) -> Vec<f64> {
        self.batch_residuals(candidates)
            .into_iter()
            .zip(candidates)
            .map(|(r, x)| match r {
                Ok(r) => {
                    let e = self.energy(&r, x, lambda_bar);
                    if e.is_finite() {
                        e
                    } else {
                        f64::INFINITY
                    }
                }
                Err(_) => f64::INFINITY,
            })
            .collect()
    }

    pub fn objective(&self, candidates: &[Vec<f64>]) -> Vec<f64> {
        self.objective_with(candidates, self.lambda_bar)
    }
}

/// Moneyness × maturity grid at one rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketGrid {
    pub moneyness: Vec<f64>,
    pub maturities: Vec<f64>,
    pub rate: f64,
}

impl Default for MarketGrid {
    fn default() -> Self {
        MarketGrid {
            moneyness: linspace(0.85, 1.15, 5),
            maturities: vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
            rate: 0.03,
        }
    }
}

impl MarketGrid {
    /// Out-of-the-money convention: calls below the money, puts at and above.
    pub fn quotes(&self) -> Result<Vec<Quote>> {
        let mut quotes = Vec::with_capacity(self.moneyness.len() * self.maturities.len());
        for &tau in &self.maturities {
            for &m in &self.moneyness {
                let kind = if m < 1.0 {
                    OptionKind::Call
                } else {
                    OptionKind::Put
                };
                quotes.push(Quote::new(m, tau, self.rate, kind)?);
            }
        }
        Ok(quotes)
    }
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Quote weights: one value for all, an explicit list, or a separate weight
/// for at-the-money quotes (others get 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Uniform(f64),
    PerQuote(Vec<f64>),
    Atm { atm: f64 },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Uniform(1.0)
    }
}

impl WeightSpec {
    pub fn resolve(&self, quotes: &[Quote]) -> Result<Vec<f64>> {
        match self {
            WeightSpec::Uniform(w) => Ok(vec![*w; quotes.len()]),
            WeightSpec::PerQuote(w) if w.len() == quotes.len() => Ok(w.clone()),
            WeightSpec::PerQuote(w) => Err(Error::DimensionMismatch {
                expected: quotes.len(),
                got: w.len(),
            }),
            WeightSpec::Atm { atm } => Ok(quotes
                .iter()
                .map(|q| {
                    if (q.moneyness - 1.0).abs() < 1e-12 {
                        *atm
                    } else {
                        1.0
                    }
                })
                .collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub surface: QuoteSurface,
    /// Quotes whose implied volatility falls outside [`IV_ENVELOPE`].
    pub envelope_violations: Vec<usize>,
}

/// Implied-volatility surface of `truth` on `grid`, by COS prices and Brent.
pub fn synth_market(
    truth: &ModelParams,
    grid: &MarketGrid,
    weights: &WeightSpec,
    cos: &CosConfig,
    iv: &IvConfig,
) -> Result<SyntheticMarket> {
    truth.validate()?;
    let quotes = grid.quotes()?;
    let prices = price_surface(truth, &quotes, cos)?;
    let observed = prices
        .iter()
        .zip(&quotes)
        .enumerate()
        .map(|(i, (&p, q))| implied_vol(p, q, iv).map_err(|e| e.at_quote(i)))
        .collect::<Result<Vec<f64>>>()?;
    let envelope_violations = observed
        .iter()
        .enumerate()
        .filter(|(_, &v)| !(v > IV_ENVELOPE.0 && v < IV_ENVELOPE.1))
        .map(|(i, _)| i)
        .collect();
    let weights = weights.resolve(&quotes)?;
    Ok(SyntheticMarket {
        surface: QuoteSurface::new(quotes, observed, ValueKind::ImpliedVol, weights)?,
        envelope_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: ModelKind,
    pub backend: String,
    pub free: Vec<ParamName>,
    /// Recovered free-parameter vector.
    pub x: Vec<f64>,
    pub params: ModelParams,
    pub objective: f64,
    /// Objective divided by the number of quotes.
    pub mean_objective: f64,
    pub lambda_bar: f64,
    pub residuals: Vec<f64>,
    pub weights: Vec<f64>,
    /// Unweighted `Σ (σ_COS(Θ̂) − σ*)²`, when COS+Brent can reprice `Θ̂`.
    pub ground_error: Option<f64>,
    pub evaluations: usize,
    pub generations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub trace: Vec<TraceRow>,
}

impl CalibrationResult {
    /// Objective rebuilt from the stored residuals and weights.
    pub fn recomputed_objective(&self) -> f64 {
        let fit: f64 = self
            .residuals
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| w * r * r)
            .sum();
        fit + self.lambda_bar * self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Unweighted squared implied-volatility error of `params` against the
/// surface, repriced with COS and Brent.
pub fn ground_error(
    surface: &QuoteSurface,
    params: &ModelParams,
    cos: &CosConfig,
    iv: &IvConfig,
) -> Result<f64> {
    let prices = price_surface(params, &surface.quotes, cos)?;
    let mut total = 0.0;
    for (i, ((&p, q), &obs)) in prices
        .iter()
        .zip(&surface.quotes)
        .zip(&surface.observed)
        .enumerate()
    {
        let v = match surface.value_kind {
            ValueKind::ImpliedVol => implied_vol(p, q, iv).map_err(|e| e.at_quote(i))?,
            ValueKind::Price => p,
        };
        total += (v - obs) * (v - obs);
    }
    Ok(total)
}

/// Minimises the problem's objective with DE over the free-parameter boxes
/// (`de.bounds` is replaced by them).
pub fn calibrate(problem: &CalibrationProblem, de: &DeConfig) -> Result<CalibrationResult> {
    problem.validate()?;
    let start = Instant::now();
    let cfg = DeConfig {
        bounds: problem.bounds(),
        ..de.clone()
    };
    let out = de_minimize(|c: &[Vec<f64>]| problem.objective(c), &cfg)?;
    let params = problem.assemble(&out.best)?;
    let residuals = problem.residuals(&out.best)?;
    let objective = problem.energy(&residuals, &out.best, problem.lambda_bar);
    let (cos, iv) = match &problem.backend {
        Backend::CosBrent { cos, iv } => (*cos, *iv),
        Backend::Surrogate(_) => (CosConfig::default(), IvConfig::default()),
    };
    Ok(CalibrationResult {
        model: problem.model,
        backend: problem.backend.name().to_string(),
        free: problem.free_names(),
        x: out.best,
        params,
        objective,
        mean_objective: objective / problem.surface.len() as f64,
        lambda_bar: problem.lambda_bar,
        residuals,
        weights: problem.surface.weights.clone(),
        ground_error: ground_error(&problem.surface, &params, &cos, &iv).ok(),
        evaluations: out.evaluations,
        generations: out.generations,
        converged: out.converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        trace: out.trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub names: Vec<ParamName>,
    pub point: Vec<f64>,
    pub steps: Vec<f64>,
    /// Symmetrized Hessian, row-major.
    pub hessian: Vec<Vec<f64>>,
    /// `‖H − Hᵀ‖_∞` before symmetrization.
    pub asymmetry: f64,
    pub diagonal: Vec<f64>,
    /// Largest over smallest absolute diagonal entry.
    pub diagonal_ratio: f64,
    pub argmax_diagonal: usize,
    pub argmin_diagonal: usize,
}

/// Central-difference Hessian of a batched scalar function at `x`. Every
/// stencil point `x ± h_i e_i ± h_j e_j` is evaluated in one batch and must
/// lie in `bounds` and score finite.
pub fn fd_hessian<F>(
    f: F,
    x: &[f64],
    steps: &[f64],
    bounds: &[(f64, f64)],
) -> Result<(Vec<Vec<f64>>, f64)>
where
    F: Fn(&[Vec<f64>]) -> Vec<f64>,
{
    let n = x.len();
    if steps.len() != n || bounds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: steps.len().min(bounds.len()),
        });
    }
    for i in 0..n {
        let (lo, hi) = bounds[i];
        if !(steps[i] > 0.0) || x[i] - steps[i] < lo || x[i] + steps[i] > hi {
            return Err(Error::InfeasibleStencil(format!(
                "coordinate {i}: {} ± {} leaves [{lo}, {hi}]",
                x[i], steps[i]
            )));
        }
    }
    let shifted = |moves: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in moves {
            p[i] += s * steps[i];
        }
        p
    };
    let mut points = vec![x.to_vec()];
    for i in 0..n {
        points.push(shifted(&[(i, 1.0)]));
        points.push(shifted(&[(i, -1.0)]));
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                points.push(shifted(&[(i, si), (j, sj)]));
            }
        }
    }
    let e = f(&points);
    if e.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: e.len(),
        });
    }
    if let Some(k) = e.iter().position(|v| !v.is_finite()) {
        return Err(Error::InfeasibleStencil(format!(
            "objective not finite at {:?}",
            points[k]
        )));
    }
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        h[i][i] = (e[1 + 2 * i] - 2.0 * e[0] + e[2 + 2 * i]) / (steps[i] * steps[i]);
    }
    let base = 1 + 2 * n;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let v = &e[base + 4 * k..base + 4 * k + 4];
        let hij = (v[0] - v[1] - v[2] + v[3]) / (4.0 * steps[i] * steps[j]);
        h[i][j] = hij;
        h[j][i] = hij;
    }
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((h[i][j] - h[j][i]).abs());
        }
    }
    let sym = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (h[i][j] + h[j][i])).collect())
        .collect();
    Ok((sym, asym))
}

/// Hessian of the unregularized objective over the free parameters at
/// `point`; steps default to a fixed fraction of each box width.
pub fn hessian(
    problem: &CalibrationProblem,
    point: &[f64],
    steps: Option<&[f64]>,
) -> Result<SensitivityReport> {
    problem.validate()?;
    let steps: Vec<f64> = match steps {
        Some(s) => s.to_vec(),
        None => problem
            .free
            .iter()
            .map(|f| STEP_FRACTION * f.width())
            .collect(),
    };
    let (h, asymmetry) = fd_hessian(
        |c: &[Vec<f64>]| problem.objective_with(c, 0.0),
        point,
        &steps,
        &problem.bounds(),
    )?;
    let diagonal: Vec<f64> = (0..h.len()).map(|i| h[i][i]).collect();
    let abs: Vec<f64> = diagonal.iter().map(|d| d.abs()).collect();
    let argmax = (0..abs.len()).fold(0, |b, i| if abs[i] > abs[b] { i } else { b });
    let argmin = (0..abs.len()).fold(0, |b, i| if abs[i] < abs[b] { i } else { b });
    Ok(SensitivityReport {
        names: problem.free_names(),
        point: point.to_vec(),
        steps,
        diagonal_ratio: abs[argmax] / abs[argmin],
        hessian: h,
        asymmetry,
        diagonal,
        argmax_diagonal: argmax,
        argmin_diagonal: argmin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub x: f64,
    pub y: f64,
    pub objective: f64,
    pub log10_objective: f64,
}

/// Objective (λ̄ = 0) over the product grid `xs × ys` of two parameters,
/// the others held at `truth`. Rows run over `ys` fastest.
pub fn landscape(
    truth: &ModelParams,
    surface: &QuoteSurface,
    (px, xs): (ParamName, &[f64]),
    (py, ys): (ParamName, &[f64]),
    backend: Backend,
) -> Result<Vec<LandscapePoint>> {
    let model = truth.kind();
    if px == py {
        return Err(Error::config("landscape needs two distinct parameters"));
    }
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::config("landscape grids must be non-empty"));
    }
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let fixed = model
        .params()
        .iter()
        .filter(|&&p| p != px && p != py)
        .map(|&p| (p, truth.get(p)))
        .collect();
    let problem = CalibrationProblem {
        surface: surface.clone(),
        model,
        free: vec![FreeParam::new(px, span(xs)), FreeParam::new(py, span(ys))],
        fixed,
        backend,
        lambda_bar: 0.0,
    };
    problem.validate()?;
    let grid: Vec<Vec<f64>> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| vec![x, y]))
        .collect();
    let energies = problem.objective_with(&grid, 0.0);
    Ok(grid
        .iter()
        .zip(energies)
        .map(|(p, e)| LandscapePoint {
            x: p[0],
            y: p[1],
            objective: e,
            log10_objective: e.log10(),
        })
        .collect())
}
