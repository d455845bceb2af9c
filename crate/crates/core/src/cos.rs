//! European option pricing by Fourier-cosine expansion of the risk-neutral
//! density of `y = ln(S_T/K)`, strike normalized to one.
//!
//! The truncation interval `[a, b]` is centred on the first cumulant with
//! half-width `L·sqrt(|c2| + sqrt|c4|)` and is widened when it fails to
//! straddle zero, the kink of the payoff. Puts are expanded directly; calls
//! come from put-call parity, since the call payoff grows like `e^b` and the
//! cosine coefficients on a wide interval would cancel catastrophically.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelParams, OptionKind, Quote};

/// Once the characteristic function stays below this modulus for
/// [`CUTOFF_RUN`] consecutive terms, the remaining terms cannot move the
/// price at double precision and the series stops early.
const CF_CUTOFF: f64 = 1e-20;
const CUTOFF_RUN: usize = 4;

/// `κτ` below which the variance cumulant is evaluated at `κτ = KAPPA_TAU_FLOOR`.
/// The closed form divides by `κ²` and cancels catastrophically as `κ → 0`; the
/// interval only needs the order of magnitude.
const KAPPA_TAU_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CosConfig {
    pub n_terms: usize,
    pub l_scale: f64,
    pub max_widenings: u32,
}

impl Default for CosConfig {
    fn default() -> Self {
        CosConfig {
            n_terms: 1500,
            l_scale: 50.0,
            max_widenings: 10,
        }
    }
}

impl CosConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_terms < 16 {
            return Err(Error::config(format!("n_terms {} < 16", self.n_terms)));
        }
        if !(self.l_scale.is_finite() && self.l_scale > 0.0) {
            return Err(Error::config(format!(
                "l_scale {} must be positive",
                self.l_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationInterval {
    pub a: f64,
    pub b: f64,
}

impl TruncationInterval {
    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn straddles_zero(&self) -> bool {
        self.a < 0.0 && self.b > 0.0
    }
}

/// First, second and fourth cumulants of a log-price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub c1: f64,
    pub c2: f64,
    pub c4: f64,
}

/// Cumulants of the log-return `ln(S_T/S_0)`.
///
/// Heston contributes `c1` and `c2` (its `c4` is taken as zero); Bates adds the
/// compound-Poisson cumulants `λτ·E[J^n]` and the drift compensator.
pub fn log_return_cumulants(params: &ModelParams, rate: f64, tau: f64) -> Cumulants {
    let h = params.heston();
    let (rho, gamma, nu_bar, nu0) = (h.rho, h.gamma, h.nu_bar, h.nu0);

    let kt = h.kappa * tau;
    let c1 = rate * tau + (-(-kt).exp_m1()) * (nu_bar - nu0) / (2.0 * h.kappa) - 0.5 * nu_bar * tau;

    let k = if kt < KAPPA_TAU_FLOOR {
        KAPPA_TAU_FLOOR / tau
    } else {
        h.kappa
    };
    // Var ln S_T = ∫ m(s) (1 − (ργ/κ) B(s) + (γ/2κ)² B(s)²) ds with mean
    // variance m(s) = ν̄ + (ν0 − ν̄) e^{−κs} and B(s) = 1 − e^{−κ(τ−s)}.
    let d = nu0 - nu_bar;
    let e = (-k * tau).exp();
    let one_minus_e = -(-k * tau).exp_m1();
    let one_minus_e2 = -(-2.0 * k * tau).exp_m1();
    let a0 = nu_bar * tau + d * one_minus_e / k;
    let tail = nu_bar * one_minus_e / k + d * tau * e;
    let a1 = a0 - tail;
    let a2 = a0 - 2.0 * tail + nu_bar * one_minus_e2 / (2.0 * k) + d * e * one_minus_e / k;
    let c2 = a0 - rho * gamma / k * a1 + (gamma / (2.0 * k)).powi(2) * a2;

    let mut cum = Cumulants { c1, c2, c4: 0.0 };
    if let ModelParams::Bates(b) = params {
        let lt = b.lambda_j * tau;
        let (mu, v) = (b.mu_j, b.nu_j_sq);
        cum.c1 += lt * mu - lt * (mu + 0.5 * v).exp_m1();
        cum.c2 += lt * (mu * mu + v);
        cum.c4 += lt * (mu.powi(4) + 6.0 * mu * mu * v + 3.0 * v * v);
    }
    cum
}

/// Cumulants of `ln(S_T/K)` for the quote: the log-return shifted by `ln m`.
pub fn quote_cumulants(params: &ModelParams, quote: &Quote) -> Cumulants {
    let mut c = log_return_cumulants(params, quote.rate, quote.tau);
    c.c1 += quote.log_moneyness();
    c
}

fn half_width(c: &Cumulants, cfg: &CosConfig) -> Result<f64> {
    let w = cfg.l_scale * (c.c2.abs() + c.c4.abs().sqrt()).sqrt();
    if !c.c1.is_finite() || !w.is_finite() {
        return Err(Error::CumulantOverflow);
    }
    Ok(w)
}

/// Truncation interval `[c1 − L·s, c1 + L·s]`, `s = sqrt(|c2| + sqrt|c4|)`,
/// before any widening.
pub fn cumulant_interval(
    params: &ModelParams,
    quote: &Quote,
    cfg: &CosConfig,
) -> Result<TruncationInterval> {
    let c = quote_cumulants(params, quote);
    let w = half_width(&c, cfg)?;
    Ok(TruncationInterval {
        a: c.c1 - w,
        b: c.c1 + w,
    })
}

/// Doubles `half` about `center` until the interval straddles zero.
/// Returns the final half-width and the number of doublings.
fn widen_half_width(center: f64, mut half: f64, cfg: &CosConfig) -> Result<(f64, u32)> {
    let mut n = 0;
    while !(center - half < 0.0 && center + half > 0.0) {
        if n == cfg.max_widenings {
            return Err(Error::IntervalAdaptation(n));
        }
        half *= 2.0;
        n += 1;
    }
    Ok((half, n))
}

/// Widens `iv` about its centre by repeated doubling until `a < 0 < b`.
/// An interval that already straddles zero is returned unchanged.
pub fn widen_interval(iv: TruncationInterval, cfg: &CosConfig) -> Result<TruncationInterval> {
    if iv.straddles_zero() {
        return Ok(iv);
    }
    let center = iv.center();
    let (half, _) = widen_half_width(center, 0.5 * iv.width(), cfg)?;
    Ok(TruncationInterval {
        a: center - half,
        b: center + half,
    })
}

/// `∫_c^d e^y cos(kπ(y−a)/W) dy`.
fn chi(k: usize, a: f64, width: f64, c: f64, d: f64) -> f64 {
    let w = k as f64 * PI / width;
    let (sd, cd) = (w * (d - a)).sin_cos();
    let (sc, cc) = (w * (c - a)).sin_cos();
    let (ed, ec) = (d.exp(), c.exp());
    (cd * ed - cc * ec + w * sd * ed - w * sc * ec) / (1.0 + w * w)
}

/// `∫_c^d cos(kπ(y−a)/W) dy`.
fn psi(k: usize, a: f64, width: f64, c: f64, d: f64) -> f64 {
    if k == 0 {
        return d - c;
    }
    let w = k as f64 * PI / width;
    ((w * (d - a)).sin() - (w * (c - a)).sin()) / w
}

fn cosine_payoff(kind: OptionKind, a: f64, b: f64, width: f64, k: usize) -> f64 {
    let scale = 2.0 / width;
    match kind {
        OptionKind::Put => {
            let d = b.min(0.0);
            if d <= a {
                return 0.0;
            }
            scale * (psi(k, a, width, a, d) - chi(k, a, width, a, d))
        }
        OptionKind::Call => {
            let c = a.max(0.0);
            if b <= c {
                return 0.0;
            }
            scale * (chi(k, a, width, c, b) - psi(k, a, width, c, b))
        }
    }
}

/// Cosine coefficient `H_k = 2/(b−a) ∫_a^b v(y) cos(kπ(y−a)/(b−a)) dy` of the
/// unit-strike payoff `v(y) = (1 − e^y)⁺` (put) or `(e^y − 1)⁺` (call).
pub fn payoff_coefficients(kind: OptionKind, iv: &TruncationInterval, k: usize) -> f64 {
    cosine_payoff(kind, iv.a, iv.b, iv.width(), k)
}

/// Result of a single expansion, with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosPrice {
    /// Price normalized by the strike, clamped at zero.
    pub value: f64,
    /// Unclamped put series value.
    pub raw_put: f64,
    pub interval: TruncationInterval,
    pub widenings: u32,
    /// Series terms actually summed.
    pub terms: usize,
    /// The series came out negative and was clamped.
    pub clamped: bool,
}

/// Interval layout shared by quotes with equal maturity, rate and width:
/// the density phase depends on the quote only through `ln m`, which cancels.
struct Layout {
    c1: f64,
    half: f64,
    widenings: u32,
    /// `x0 − a = half − c1_return`
    shift: f64,
}

fn layout(params: &ModelParams, quote: &Quote, cfg: &CosConfig) -> Result<Layout> {
    let ret = log_return_cumulants(params, quote.rate, quote.tau);
    let w = half_width(&ret, cfg)?;
    let c1 = ret.c1 + quote.log_moneyness();
    let (half, widenings) = widen_half_width(c1, w, cfg)?;
    Ok(Layout {
        c1,
        half,
        widenings,
        shift: half - ret.c1,
    })
}

/// `Re(φ(ω_k) e^{iω_k(x0−a)})` for every term, first term halved, truncated
/// once the characteristic function is negligible.
fn density_terms(params: &ModelParams, rate: f64, tau: f64, lay: &Layout, n: usize) -> Vec<f64> {
    let width = 2.0 * lay.half;
    let mut out = Vec::with_capacity(n);
    let mut quiet = 0;
    for k in 0..n {
        let w = k as f64 * PI / width;
        let phi = params.cf(rate, tau, Complex64::new(w, 0.0));
        let phase = Complex64::new(0.0, w * lay.shift).exp();
        let mut f = (phi * phase).re;
        if k == 0 {
            f *= 0.5;
        }
        out.push(f);
        if phi.norm() < CF_CUTOFF {
            quiet += 1;
            if quiet == CUTOFF_RUN {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    out
}

/// Terms between exact re-evaluations of the rotating phase in
/// [`put_series_sum`]; bounds the recurrence drift to a few ulps per block.
const ROTATION_ANCHOR: usize = 64;

/// `Σ_k terms[k]·H_k` for the put coefficients on `[a, b]`, the same values
/// as [`payoff_coefficients`] but with `cos/sin(kθ)` advanced by rotation.
fn put_series_sum(terms: &[f64], a: f64, b: f64) -> f64 {
    let d = b.min(0.0);
    if d <= a {
        return 0.0;
    }
    let width = b - a;
    let scale = 2.0 / width;
    let (ea, ed) = (a.exp(), d.exp());
    let step = PI / width;
    let theta = step * (d - a);
    let (s1, c1) = theta.sin_cos();
    let (mut s, mut c) = (0.0, 1.0);
    let mut acc = 0.0;
    for (k, f) in terms.iter().enumerate() {
        if k % ROTATION_ANCHOR == 0 {
            (s, c) = (k as f64 * theta).sin_cos();
        }
        let w = k as f64 * step;
        let chi = (c * ed - ea + w * s * ed) / (1.0 + w * w);
        let psi = if k == 0 { d - a } else { s / w };
        acc += f * scale * (psi - chi);
        (s, c) = (s * c1 + c * s1, c * c1 - s * s1);
    }
    acc
}

fn sum_series(quote: &Quote, lay: &Layout, terms: &[f64]) -> Result<CosPrice> {
    let a = lay.c1 - lay.half;
    let b = lay.c1 + lay.half;
    let acc = put_series_sum(terms, a, b);
    let discount = quote.discount();
    let raw_put = discount * acc;
    if !raw_put.is_finite() {
        return Err(Error::PricingDiverged);
    }
    let put = raw_put.max(0.0);
    let value = match quote.kind {
        OptionKind::Put => put,
        OptionKind::Call => (put + quote.moneyness - discount).max(0.0),
    };
    Ok(CosPrice {
        value,
        raw_put,
        interval: TruncationInterval { a, b },
        widenings: lay.widenings,
        terms: terms.len(),
        clamped: raw_put < 0.0,
    })
}

pub fn cos_price_detailed(
    params: &ModelParams,
    quote: &Quote,
    cfg: &CosConfig,
) -> Result<CosPrice> {
    cfg.validate()?;
    quote.validate()?;
    let lay = layout(params, quote, cfg)?;
    let terms = density_terms(params, quote.rate, quote.tau, &lay, cfg.n_terms);
    sum_series(quote, &lay, &terms)
}

/// Discounted cosine-series price normalized by the strike, never negative.
pub fn cos_price(params: &ModelParams, quote: &Quote, cfg: &CosConfig) -> Result<f64> {
    cos_price_detailed(params, quote, cfg).map(|p| p.value)
}

/// Prices every quote; element `i` is bit-identical to `cos_price(quotes[i])`.
///
/// Quotes sharing maturity, rate and interval width reuse one table of
/// characteristic-function terms. The first failing quote aborts the batch
/// and is reported by index.
pub fn price_surface_detailed(
    params: &ModelParams,
    quotes: &[Quote],
    cfg: &CosConfig,
) -> Result<Vec<CosPrice>> {
    cfg.validate()?;
    if quotes.is_empty() {
        return Err(Error::config("no quotes to price"));
    }
    let layouts: Vec<Layout> = quotes
        .iter()
        .enumerate()
        .map(|(i, q)| {
            q.validate().map_err(|e| e.at_quote(i))?;
            layout(params, q, cfg).map_err(|e| e.at_quote(i))
        })
        .collect::<Result<_>>()?;

    let mut groups: HashMap<(u64, u64, u64), usize> = HashMap::new();
    let mut owners = Vec::new();
    let group_of: Vec<usize> = quotes
        .iter()
        .zip(&layouts)
        .enumerate()
        .map(|(i, (q, lay))| {
            let key = (q.tau.to_bits(), q.rate.to_bits(), lay.half.to_bits());
            *groups.entry(key).or_insert_with(|| {
                owners.push(i);
                owners.len() - 1
            })
        })
        .collect();

    let tables: Vec<Vec<f64>> = owners
        .par_iter()
        .map(|&i| {
            density_terms(
                params,
                quotes[i].rate,
                quotes[i].tau,
                &layouts[i],
                cfg.n_terms,
            )
        })
        .collect();

    quotes
        .par_iter()
        .zip(layouts.par_iter())
        .zip(group_of.par_iter())
        .enumerate()
        .map(|(i, ((q, lay), &g))| sum_series(q, lay, &tables[g]).map_err(|e| e.at_quote(i)))
        .collect()
}

pub fn price_surface(params: &ModelParams, quotes: &[Quote], cfg: &CosConfig) -> Result<Vec<f64>> {
    Ok(price_surface_detailed(params, quotes, cfg)?
        .into_iter()
        .map(|p| p.value)
        .collect())
}
