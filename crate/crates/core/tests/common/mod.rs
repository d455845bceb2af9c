//! Independent oracles shared by the integration tests. None of them call into
//! the pricing code under test except through the characteristic function.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use svcal::models::{BatesParams, HestonParams, ModelParams, OptionKind, Quote};

pub fn heston(rho: f64, kappa: f64, gamma: f64, nu_bar: f64, nu0: f64) -> HestonParams {
    HestonParams::new(rho, kappa, gamma, nu_bar, nu0).unwrap()
}

/// κ=0.1, γ=0.1, ν̄=0.1, ρ=−0.75, ν0=0.05 with r=0.05 and T=2.
pub fn reference_set() -> ModelParams {
    heston(-0.75, 0.1, 0.1, 0.1, 0.05).into()
}

pub const REFERENCE_RATE: f64 = 0.05;
pub const REFERENCE_TAU: f64 = 2.0;

/// High-intensity jump set used for full Bates calibration.
pub fn bates_truth() -> ModelParams {
    BatesParams::new(heston(-0.3, 1.0, 0.7, 0.1, 0.1), 1.0, 0.1, 0.16)
        .unwrap()
        .into()
}

pub fn put(m: f64, tau: f64, r: f64) -> Quote {
    Quote::new(m, tau, r, OptionKind::Put).unwrap()
}

pub fn call(m: f64, tau: f64, r: f64) -> Quote {
    Quote::new(m, tau, r, OptionKind::Call).unwrap()
}

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes value with spot `m`, unit strike.
pub fn black_scholes(sigma: f64, m: f64, tau: f64, r: f64, kind: OptionKind) -> f64 {
    let sd = sigma * tau.sqrt();
    let d1 = ((m).ln() + (r + 0.5 * sigma * sigma) * tau) / sd;
    let d2 = d1 - sd;
    let df = (-r * tau).exp();
    match kind {
        OptionKind::Call => m * phi(d1) - df * phi(d2),
        OptionKind::Put => df * phi(-d2) - m * phi(-d1),
    }
}

/// Implied volatility by plain bisection on `[lo, hi]`.
pub fn bisection_iv(price: f64, m: f64, tau: f64, r: f64, kind: OptionKind, tol: f64) -> f64 {
    let (mut lo, mut hi) = (1e-6, 5.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if black_scholes(mid, m, tau, r, kind) > price {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite 20-point Gauss-Legendre rule over `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            rule.iter()
                .map(|&(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Call price from the characteristic function by the single-integral
/// Fourier formula along the line `Im u = −1/2`.
pub fn fourier_call(params: &ModelParams, m: f64, tau: f64, r: f64) -> f64 {
    let lm = m.ln();
    let integrand = |u: f64| {
        let z = params.cf(r, tau, Complex64::new(u, -0.5));
        let phase = Complex64::new(0.0, u * lm).exp();
        (phase * z).re / (u * u + 0.25)
    };
    let integral = integrate(integrand, 0.0, 400.0, 4000);
    m - m.sqrt() * (-r * tau).exp() * integral / std::f64::consts::PI
}

pub fn fourier_put(params: &ModelParams, m: f64, tau: f64, r: f64) -> f64 {
    fourier_call(params, m, tau, r) - m + (-r * tau).exp()
}

/// Mean and standard error of i.i.d. samples fed one at a time.
#[derive(Debug, Default, Clone, Copy)]
pub struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n).sqrt()
    }
}

/// Euler full-truncation simulation of `ln(S_T/S_0)` with antithetic pairs.
/// Calls `visit(x, x_antithetic)` once per pair. Jumps, when present, are
/// added exactly at maturity as a compound Poisson sum.
pub fn simulate_log_returns(
    params: &ModelParams,
    r: f64,
    tau: f64,
    pairs: usize,
    steps: usize,
    seed: u64,
    mut visit: impl FnMut(f64, f64),
) {
    let h = params.heston();
    let (lambda, mu, var_j) = match params {
        ModelParams::Heston(_) => (0.0, 0.0, 0.0),
        ModelParams::Bates(b) => (b.lambda_j, b.mu_j, b.nu_j_sq),
    };
    let compensator = lambda * ((mu + 0.5 * var_j).exp() - 1.0);
    let dt = tau / steps as f64;
    let sq_dt = dt.sqrt();
    let rho_bar = (1.0 - h.rho * h.rho).sqrt();
    let poisson = (lambda > 0.0).then(|| Poisson::new(lambda * tau).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let mut state = [(0.0f64, h.nu0), (0.0f64, h.nu0)];
        for _ in 0..steps {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
                let (x, v) = &mut state[k];
                let vp = v.max(0.0);
                let sv = vp.sqrt() * sq_dt;
                let w1 = sign * z1;
                let w2 = sign * (h.rho * z1 + rho_bar * z2);
                *x += (r - compensator - 0.5 * vp) * dt + sv * w1;
                *v += h.kappa * (h.nu_bar - vp) * dt + h.gamma * sv * w2;
            }
        }
        let mut xs = [state[0].0, state[1].0];
        if let Some(p) = &poisson {
            let n: f64 = p.sample(&mut rng);
            if n > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let spread = (n * var_j).sqrt() * z;
                xs[0] += n * mu + spread;
                xs[1] += n * mu - spread;
            }
        }
        visit(xs[0], xs[1]);
    }
}

/// Discounted option value estimated by Monte-Carlo, as pair-averaged samples.
pub fn mc_price(
    params: &ModelParams,
    quote: &Quote,
    pairs: usize,
    steps: usize,
    seed: u64,
) -> Moments {
    let df = (-quote.rate * quote.tau).exp();
    let m = quote.moneyness;
    let payoff = |x: f64| {
        let s = m * x.exp();
        match quote.kind {
            OptionKind::Put => (1.0 - s).max(0.0),
            OptionKind::Call => (s - 1.0).max(0.0),
        }
    };
    let mut acc = Moments::default();
    simulate_log_returns(params, quote.rate, quote.tau, pairs, steps, seed, |a, b| {
        acc.push(df * 0.5 * (payoff(a) + payoff(b)))
    });
    acc
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Central finite-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut q = x.to_vec();
            p[i] += h;
            q[i] -= h;
            (f(&p) - f(&q)) / (2.0 * h)
        })
        .collect()
}

/// `|a − b| ≤ tol·max(|a|, |b|)` with an absolute floor for entries near zero.
pub fn close_rel(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// Network with Glorot weights and small random biases, so that no unit sits
/// exactly at a kink.
pub fn random_net(input_dim: usize, hidden: usize, width: usize, seed: u64) -> svcal::nnet::Network {
    use svcal::nnet::{Network, NetworkSpec};
    let ranges: Vec<(f64, f64)> = (0..input_dim).map(|i| (-1.0 - i as f64, 2.0 + i as f64)).collect();
    let mut net = Network::new(NetworkSpec::new(input_dim, hidden, width).with_seed(seed), &ranges).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for l in &mut net.layers {
        for b in &mut l.b {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    net
}

/// Random batch of raw inputs inside the network's input ranges, with targets.
pub fn random_batch(net: &svcal::nnet::Network, rows: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..rows)
        .flat_map(|_| net.input_ranges.iter().map(|r| r.low + (r.high - r.low) * rng.random::<f64>()).collect::<Vec<_>>())
        .collect();
    let y = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    (x, y)
}

pub fn batch_loss(net: &svcal::nnet::Network, x: &[f64], y: &[f64]) -> f64 {
    let p = net.forward(x).unwrap();
    p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

pub fn param_mut(net: &mut svcal::nnet::Network, layer: usize, bias: bool, k: usize) -> &mut f64 {
    let l = &mut net.layers[layer];
    if bias { &mut l.b[k] } else { &mut l.w[k] }
}

/// Central-difference steps for gradient checks, widest first.
pub const GRADIENT_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Signs of every hidden pre-activation over a batch.
pub fn activation_pattern(net: &svcal::nnet::Network, x: &[f64]) -> Vec<bool> {
    let mut act = net.scale_inputs(x).unwrap();
    let mut pattern = Vec::new();
    let hidden = net.layers.len() - 1;
    for layer in &net.layers[..hidden] {
        let next: Vec<f64> = act
            .chunks_exact(layer.fan_in)
            .flat_map(|row| {
                (0..layer.fan_out).map(move |j| {
                    layer.b[j] + row.iter().enumerate().map(|(i, v)| v * layer.w[i * layer.fan_out + j]).sum::<f64>()
                })
            })
            .collect();
        pattern.extend(next.iter().map(|&z| z > 0.0));
        act = next.into_iter().map(|z| z.max(0.0)).collect();
    }
    pattern
}

/// Worst disagreement between backprop and central differences over every
/// weight and bias, as `|g − fd| / max(|g|, |fd|, floor)`. Each parameter uses
/// the widest step in `steps` that crosses no ReLU kink on the batch, where the
/// loss is exactly quadratic in that parameter; if every step crosses one the
/// narrowest is used.
pub fn gradient_check(net: &svcal::nnet::Network, x: &[f64], y: &[f64], steps: &[f64], floor: f64) -> f64 {
    let grads = net.backward(x, y).unwrap();
    let pattern = activation_pattern(net, x);
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for (li, g) in grads.layers.iter().enumerate() {
        for (bias, analytic) in [(false, &g.w), (true, &g.b)] {
            for (k, an) in analytic.iter().enumerate() {
                let base = *param_mut(&mut probe, li, bias, k);
                let mut fd = f64::NAN;
                for (n, &h) in steps.iter().enumerate() {
                    *param_mut(&mut probe, li, bias, k) = base + h;
                    let up = batch_loss(&probe, x, y);
                    let smooth = activation_pattern(&probe, x) == pattern;
                    *param_mut(&mut probe, li, bias, k) = base - h;
                    let down = batch_loss(&probe, x, y);
                    let smooth = smooth && activation_pattern(&probe, x) == pattern;
                    fd = (up - down) / (2.0 * h);
                    if smooth || n + 1 == steps.len() {
                        break;
                    }
                }
                *param_mut(&mut probe, li, bias, k) = base;
                worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(floor));
            }
        }
    }
    worst
}
