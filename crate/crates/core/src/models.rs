//! Model parameters, option quotes and the characteristic functions of the
//! log-return under the Heston and Bates models.
//!
//! Characteristic functions are for the log-return `ln(S_T / S_0)` and include
//! the risk-neutral drift `r·τ`. The pricing layer shifts them by the
//! log-moneyness `ln(S_0 / K)` with the strike normalized to one.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Heston,
    Bates,
}

impl ModelKind {
    /// Calibratable parameters of the model in canonical order.
    pub fn params(self) -> &'static [ParamName] {
        match self {
            ModelKind::Heston => &ParamName::ALL[..5],
            ModelKind::Bates => &ParamName::ALL,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Heston => "heston",
            ModelKind::Bates => "bates",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heston" => Ok(ModelKind::Heston),
            "bates" => Ok(ModelKind::Bates),
            other => Err(Error::config(format!("unknown model '{other}'"))),
        }
    }
}

/// Names of the model parameters, ordered as `(ρ, κ, γ, ν̄, ν0, λ_J, μ_J, ν_J²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Rho,
    Kappa,
    Gamma,
    NuBar,
    Nu0,
    LambdaJ,
    MuJ,
    NuJSq,
}

impl ParamName {
    pub const ALL: [ParamName; 8] = [
        ParamName::Rho,
        ParamName::Kappa,
        ParamName::Gamma,
        ParamName::NuBar,
        ParamName::Nu0,
        ParamName::LambdaJ,
        ParamName::MuJ,
        ParamName::NuJSq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Rho => "rho",
            ParamName::Kappa => "kappa",
            ParamName::Gamma => "gamma",
            ParamName::NuBar => "nu_bar",
            ParamName::Nu0 => "nu0",
            ParamName::LambdaJ => "lambda_j",
            ParamName::MuJ => "mu_j",
            ParamName::NuJSq => "nu_j_sq",
        }
    }

    /// Position in the canonical 8-vector.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_jump(self) -> bool {
        self.index() >= 5
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamName::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown parameter name '{s}'")))
    }
}

fn invalid(name: ParamName, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.as_str().to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub rho: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub nu_bar: f64,
    pub nu0: f64,
}

impl HestonParams {
    pub fn new(rho: f64, kappa: f64, gamma: f64, nu_bar: f64, nu0: f64) -> Result<Self> {
        let p = HestonParams {
            rho,
            kappa,
            gamma,
            nu_bar,
            nu0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && (-1.0..=1.0).contains(&self.rho)) {
            return Err(invalid(
                ParamName::Rho,
                format!("{} not in [-1, 1]", self.rho),
            ));
        }
        for (name, v) in [
            (ParamName::Kappa, self.kappa),
            (ParamName::Gamma, self.gamma),
            (ParamName::NuBar, self.nu_bar),
            (ParamName::Nu0, self.nu0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatesParams {
    #[serde(flatten)]
    pub heston: HestonParams,
    pub lambda_j: f64,
    pub mu_j: f64,
    pub nu_j_sq: f64,
}

impl BatesParams {
    pub fn new(heston: HestonParams, lambda_j: f64, mu_j: f64, nu_j_sq: f64) -> Result<Self> {
        let p = BatesParams {
            heston,
            lambda_j,
            mu_j,
            nu_j_sq,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.heston.validate()?;
        if !(self.lambda_j.is_finite() && self.lambda_j >= 0.0) {
            return Err(invalid(
                ParamName::LambdaJ,
                format!("{} must be >= 0", self.lambda_j),
            ));
        }
        if !self.mu_j.is_finite() {
            return Err(invalid(ParamName::MuJ, "not finite"));
        }
        if !(self.nu_j_sq.is_finite() && self.nu_j_sq >= 0.0) {
            return Err(invalid(
                ParamName::NuJSq,
                format!("{} must be >= 0", self.nu_j_sq),
            ));
        }
        Ok(())
    }
}

/// Flat JSON record: Heston keys required, jump keys optional.
#[derive(Serialize, Deserialize)]
struct ParamRecord {
    rho: f64,
    kappa: f64,
    gamma: f64,
    nu_bar: f64,
    nu0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu_j_sq: Option<f64>,
}

/// Parameters of either model. Serializes as a flat object keyed by
/// [`ParamName::as_str`]; an object carrying any jump key reads as Bates with
/// the missing jump keys defaulting to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamRecord", into = "ParamRecord")]
pub enum ModelParams {
    Heston(HestonParams),
    Bates(BatesParams),
}

impl TryFrom<ParamRecord> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamRecord) -> Result<Self> {
        let heston = HestonParams::new(r.rho, r.kappa, r.gamma, r.nu_bar, r.nu0)?;
        if r.lambda_j.is_none() && r.mu_j.is_none() && r.nu_j_sq.is_none() {
            return Ok(ModelParams::Heston(heston));
        }
        Ok(ModelParams::Bates(BatesParams::new(
            heston,
            r.lambda_j.unwrap_or(0.0),
            r.mu_j.unwrap_or(0.0),
            r.nu_j_sq.unwrap_or(0.0),
        )?))
    }
}

impl From<ModelParams> for ParamRecord {
    fn from(p: ModelParams) -> Self {
        let h = p.heston();
        let (lambda_j, mu_j, nu_j_sq) = match p {
            ModelParams::Heston(_) => (None, None, None),
            ModelParams::Bates(b) => (Some(b.lambda_j), Some(b.mu_j), Some(b.nu_j_sq)),
        };
        ParamRecord {
            rho: h.rho,
            kappa: h.kappa,
            gamma: h.gamma,
            nu_bar: h.nu_bar,
            nu0: h.nu0,
            lambda_j,
            mu_j,
            nu_j_sq,
        }
    }
}

impl From<HestonParams> for ModelParams {
    fn from(p: HestonParams) -> Self {
        ModelParams::Heston(p)
    }
}

impl From<BatesParams> for ModelParams {
    fn from(p: BatesParams) -> Self {
        ModelParams::Bates(p)
    }
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Heston(_) => ModelKind::Heston,
            ModelParams::Bates(_) => ModelKind::Bates,
        }
    }

    pub fn heston(&self) -> &HestonParams {
        match self {
            ModelParams::Heston(h) => h,
            ModelParams::Bates(b) => &b.heston,
        }
    }

    /// Canonical 8-vector; Heston reports zero jump parameters.
    pub fn to_array(&self) -> [f64; 8] {
        let h = self.heston();
        let (l, m, v) = match self {
            ModelParams::Heston(_) => (0.0, 0.0, 0.0),
            ModelParams::Bates(b) => (b.lambda_j, b.mu_j, b.nu_j_sq),
        };
        [h.rho, h.kappa, h.gamma, h.nu_bar, h.nu0, l, m, v]
    }

    /// Builds parameters of `kind` from the leading entries of a canonical vector.
    pub fn from_values(kind: ModelKind, values: &[f64]) -> Result<Self> {
        let need = kind.params().len();
        if values.len() < need {
            return Err(Error::DimensionMismatch {
                expected: need,
                got: values.len(),
            });
        }
        let heston = HestonParams::new(values[0], values[1], values[2], values[3], values[4])?;
        Ok(match kind {
            ModelKind::Heston => ModelParams::Heston(heston),
            ModelKind::Bates => {
                ModelParams::Bates(BatesParams::new(heston, values[5], values[6], values[7])?)
            }
        })
    }

    pub fn get(&self, name: ParamName) -> f64 {
        self.to_array()[name.index()]
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Heston(h) => h.validate(),
            ModelParams::Bates(b) => b.validate(),
        }
    }

    /// Characteristic function of `ln(S_T/S_0)` at frequency `u`.
    pub fn cf(&self, rate: f64, tau: f64, u: Complex64) -> Complex64 {
        match self {
            ModelParams::Heston(h) => heston_cf(h, rate, tau, u),
            ModelParams::Bates(b) => bates_cf(b, rate, tau, u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        })
    }
}

impl FromStr for OptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "call" | "c" => Ok(OptionKind::Call),
            "put" | "p" => Ok(OptionKind::Put),
            other => Err(Error::malformed("option kind", other)),
        }
    }
}

/// A European option on a unit strike: `moneyness = S_0/K`, maturity `tau` in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub moneyness: f64,
    pub tau: f64,
    pub rate: f64,
    pub kind: OptionKind,
}

impl Quote {
    pub fn new(moneyness: f64, tau: f64, rate: f64, kind: OptionKind) -> Result<Self> {
        let q = Quote {
            moneyness,
            tau,
            rate,
            kind,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.moneyness.is_finite() && self.moneyness > 0.0) {
            return Err(Error::config(format!(
                "moneyness {} must be positive",
                self.moneyness
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config(format!(
                "maturity {} must be positive",
                self.tau
            )));
        }
        if !self.rate.is_finite() {
            return Err(Error::config("rate must be finite"));
        }
        Ok(())
    }

    pub fn log_moneyness(&self) -> f64 {
        self.moneyness.ln()
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.tau).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Price,
    ImpliedVol,
}

/// Observed market values over a set of quotes, with per-quote weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteSurface {
    pub quotes: Vec<Quote>,
    pub observed: Vec<f64>,
    pub value_kind: ValueKind,
    pub weights: Vec<f64>,
}

impl QuoteSurface {
    pub fn new(
        quotes: Vec<Quote>,
        observed: Vec<f64>,
        value_kind: ValueKind,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let s = QuoteSurface {
            quotes,
            observed,
            value_kind,
            weights,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.quotes.len();
        if n == 0 {
            return Err(Error::config("quote surface is empty"));
        }
        if self.observed.len() != n || self.weights.len() != n {
            return Err(Error::config(format!(
                "surface lengths differ: {} quotes, {} observed, {} weights",
                n,
                self.observed.len(),
                self.weights.len()
            )));
        }
        for q in &self.quotes {
            q.validate()?;
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("weights must be finite and non-negative"));
        }
        if !self.weights.iter().any(|w| *w > 0.0) {
            return Err(Error::config("at least one weight must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }
}

/// `ln(1 + z)` without cancellation for small `|z|`.
fn complex_ln_1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.re * z.re + z.im * z.im).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    Complex64::new(re, im)
}

/// `exp(z) − 1` without cancellation for small `|z|`.
fn complex_exp_m1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// Heston characteristic function of `ln(S_T/S_0)`.
///
/// Uses the formulation whose complex logarithm stays on the principal branch
/// for long maturities. Every `(κ − ργiu − d)/γ²` factor is rewritten through
/// `d² − β² = γ²(iu + u²)`, so the expression stays accurate as `γ → 0`.
pub fn heston_cf(p: &HestonParams, rate: f64, tau: f64, u: Complex64) -> Complex64 {
    let iu = Complex64::i() * u;
    let g2 = p.gamma * p.gamma;
    let beta = p.kappa - p.rho * p.gamma * iu;
    let q = iu + u * u;
    let d = (beta * beta + g2 * q).sqrt();
    let beta_plus_d = beta + d;
    // (β − d)/γ²
    let diff_over_g2 = -q / beta_plus_d;
    let g = g2 * diff_over_g2 / beta_plus_d;
    let one_minus_e = -complex_exp_m1(-d * tau);
    let e = 1.0 - one_minus_e;
    let d_term = diff_over_g2 * one_minus_e / (1.0 - g * e);
    let log_ratio = complex_ln_1p(g * one_minus_e / (1.0 - g));
    let c_term =
        iu * (rate * tau) + p.kappa * p.nu_bar * (diff_over_g2 * tau - 2.0 * log_ratio / g2);
    (c_term + d_term * p.nu0).exp()
}

/// Bates characteristic function: Heston times the compensated compound-Poisson
/// factor of normally distributed log-jumps.
pub fn bates_cf(p: &BatesParams, rate: f64, tau: f64, u: Complex64) -> Complex64 {
    let heston = heston_cf(&p.heston, rate, tau, u);
    if p.lambda_j == 0.0 {
        return heston;
    }
    let iu = Complex64::i() * u;
    let lt = p.lambda_j * tau;
    let jump = complex_exp_m1(iu * p.mu_j + 0.5 * iu * iu * p.nu_j_sq) * lt
        - iu * lt * (p.mu_j + 0.5 * p.nu_j_sq).exp_m1();
    heston * jump.exp()
}
