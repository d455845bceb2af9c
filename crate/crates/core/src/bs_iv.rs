//! Black-Scholes prices on a unit strike and implied-volatility inversion by
//! Brent's method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{OptionKind, Quote};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IvConfig {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IvConfig {
    fn default() -> Self {
        IvConfig {
            lo: 1e-4,
            hi: 5.0,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl IvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo < self.hi && self.hi.is_finite()) {
            return Err(Error::config(format!(
                "iv bracket [{}, {}] invalid",
                self.lo, self.hi
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::config("iv tolerance and max_iter must be positive"));
        }
        Ok(())
    }
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes value with `S_0 = m`, `K = 1`.
pub fn bs_price(sigma: f64, quote: &Quote) -> f64 {
    let m = quote.moneyness;
    let df = quote.discount();
    let sd = sigma * quote.tau.sqrt();
    let d1 = (m.ln() + (quote.rate + 0.5 * sigma * sigma) * quote.tau) / sd;
    let d2 = d1 - sd;
    match quote.kind {
        OptionKind::Call => m * norm_cdf(d1) - df * norm_cdf(d2),
        OptionKind::Put => df * norm_cdf(-d2) - m * norm_cdf(-d1),
    }
}

/// No-arbitrage band `(lower, upper)` a price must fall strictly inside.
pub fn arbitrage_band(quote: &Quote) -> (f64, f64) {
    let m = quote.moneyness;
    let df = quote.discount();
    match quote.kind {
        OptionKind::Call => ((m - df).max(0.0), m),
        OptionKind::Put => ((df - m).max(0.0), df),
    }
}

/// Volatility reproducing `price`, bracketed in `[lo, hi]`; `hi` is doubled
/// once if the bracket misses the root from above.
pub fn implied_vol(price: f64, quote: &Quote, cfg: &IvConfig) -> Result<f64> {
    let (lower, upper) = arbitrage_band(quote);
    if !(price > lower && price < upper) {
        return Err(Error::NoImpliedVol {
            price,
            lower,
            upper,
        });
    }
    let f = |s: f64| bs_price(s, quote) - price;
    let f_lo = f(cfg.lo);
    let mut hi = cfg.hi;
    let mut f_hi = f(hi);
    if f_lo > 0.0 {
        return Err(Error::BracketFailure { lo: cfg.lo, hi });
    }
    if f_hi < 0.0 {
        hi *= 2.0;
        f_hi = f(hi);
        if f_hi < 0.0 {
            return Err(Error::BracketFailure { lo: cfg.lo, hi });
        }
    }
    brent(f, cfg.lo, hi, f_lo, f_hi, cfg.tol, cfg.max_iter)
}

/// Brent's root finder on a bracketing interval (`f_a`, `f_b` of opposite
/// sign or zero), combining bisection, secant and inverse quadratic steps.
pub fn brent<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    f_a: f64,
    f_b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut a, mut b, mut fa, mut fb) = (a, b, f_a, f_b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketFailure { lo: a, hi: b });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::NoConvergence(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(m: f64, tau: f64, r: f64, kind: OptionKind) -> Quote {
        Quote::new(m, tau, r, kind).unwrap()
    }

    #[test]
    fn zero_vol_otm_put_is_worthless() {
        let p = bs_price(1e-8, &q(1.2, 1.0, 0.0, OptionKind::Put));
        assert!(p.abs() < 1e-15);
    }

    #[test]
    fn atm_zero_rate_call() {
        let v = bs_price(0.2, &q(1.0, 1.0, 0.0, OptionKind::Call));
        let want = 2.0 * norm_cdf(0.1) - 1.0;
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.079655674554058).abs() < 1e-12);
    }

    #[test]
    fn parity() {
        for &(m, tau, r, s) in &[
            (0.8, 0.5, 0.03, 0.3),
            (1.3, 2.0, 0.05, 0.1),
            (1.0, 0.1, 0.0, 0.6),
        ] {
            let c = bs_price(s, &q(m, tau, r, OptionKind::Call));
            let p = bs_price(s, &q(m, tau, r, OptionKind::Put));
            assert!((c - p - (m - (-r * tau).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn round_trip() {
        let cfg = IvConfig::default();
        for kind in [OptionKind::Call, OptionKind::Put] {
            for &m in &[0.7, 1.0, 1.3] {
                let quote = q(m, 1.0, 0.02, kind);
                let price = bs_price(0.2, &quote);
                let s = implied_vol(price, &quote, &cfg).unwrap();
                assert!((s - 0.2).abs() < 1e-9, "{kind} {m}: {s}");
            }
        }
    }

    #[test]
    fn out_of_band_prices_rejected() {
        let cfg = IvConfig::default();
        let put = q(0.8, 1.0, 0.0, OptionKind::Put);
        assert!(matches!(
            implied_vol(0.1, &put, &cfg),
            Err(Error::NoImpliedVol { .. })
        ));
        assert!(matches!(
            implied_vol(1.0, &put, &cfg),
            Err(Error::NoImpliedVol { .. })
        ));
        let call = q(1.0, 1.0, 0.0, OptionKind::Call);
        assert!(matches!(
            implied_vol(0.0, &call, &cfg),
            Err(Error::NoImpliedVol { .. })
        ));
    }

    #[test]
    fn bracket_doubling_and_failure() {
        let quote = q(1.0, 1.0, 0.0, OptionKind::Call);
        let narrow = IvConfig {
            hi: 0.3,
            ..IvConfig::default()
        };
        let price = bs_price(0.5, &quote);
        assert!((implied_vol(price, &quote, &narrow).unwrap() - 0.5).abs() < 1e-9);
        let price = bs_price(0.9, &quote);
        assert!(matches!(
            implied_vol(price, &quote, &narrow),
            Err(Error::BracketFailure { .. })
        ));
    }

    #[test]
    fn brent_on_polynomial() {
        let f = |x: f64| x * x * x - 2.0 * x - 5.0;
        let root = brent(f, 2.0, 3.0, f(2.0), f(3.0), 1e-14, 100).unwrap();
        assert!((root - 2.0945514815423265).abs() < 1e-13);
    }
}
