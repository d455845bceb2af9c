//! Differential Evolution over a box: Latin-hypercube start, dithered
//! `best1bin`/`rand1bin` mutation, binomial crossover and greedy selection.
//! The objective sees the whole trial population at once.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{latin_hypercube, seeded, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Best1Bin,
    Rand1Bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeConfig {
    pub pop_size: usize,
    pub strategy: Strategy,
    /// Range the mutation factor `F` is redrawn from each generation.
    pub mutation: (f64, f64),
    pub crossover: f64,
    pub tol: f64,
    pub max_generations: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            pop_size: 50,
            strategy: Strategy::Best1Bin,
            mutation: (0.5, 1.0),
            crossover: 0.7,
            tol: 0.01,
            max_generations: 1000,
            seed: 0,
            bounds: Vec::new(),
        }
    }
}

impl DeConfig {
    pub fn with_bounds(bounds: Vec<(f64, f64)>) -> Self {
        DeConfig {
            bounds,
            ..Default::default()
        }
    }

    /// Population of `multiplier × dimension` candidates (at least 4).
    pub fn with_pop_multiplier(mut self, multiplier: usize) -> Self {
        self.pop_size = (multiplier * self.bounds.len()).max(4);
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 {
            return Err(Error::config("DE population needs at least 4 members"));
        }
        let (lo, hi) = self.mutation;
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(Error::config(format!(
                "mutation range ({lo}, {hi}) invalid"
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::config("crossover must lie in [0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tol must be positive"));
        }
        if self.bounds.is_empty() {
            return Err(Error::config("DE needs at least one bounded dimension"));
        }
        for (j, &(l, h)) in self.bounds.iter().enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::config(format!("bound {j} [{l}, {h}] is degenerate")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub candidates: Vec<Vec<f64>>,
    /// `+∞` until evaluated, and for candidates the objective rejected.
    pub energies: Vec<f64>,
    pub generation: usize,
    pub best: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn best_energy(&self) -> f64 {
        self.energies[self.best]
    }

    fn refresh_best(&mut self) {
        self.best = argmin(&self.energies);
    }

    /// `(mean, std)` of the energies; infinite when any energy is.
    pub fn energy_stats(&self) -> (f64, f64) {
        let n = self.energies.len() as f64;
        if self.energies.iter().any(|e| !e.is_finite()) {
            return (f64::INFINITY, f64::INFINITY);
        }
        let mean = self.energies.iter().sum::<f64>() / n;
        let var = self
            .energies
            .iter()
            .map(|e| (e - mean) * (e - mean))
            .sum::<f64>()
            / n;
        (mean, var.sqrt())
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, e) in v.iter().enumerate() {
        if *e < v[best] {
            best = i;
        }
    }
    best
}

/// Folds `x` back into `[lo, hi]` by mirror reflection at the walls.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    if (lo..=hi).contains(&x) {
        return x;
    }
    let w = hi - lo;
    let mut y = (x - lo).rem_euclid(2.0 * w);
    if y > w {
        y = 2.0 * w - y;
    }
    (lo + y).clamp(lo, hi)
}

pub fn de_init_with(cfg: &DeConfig, rng: &mut SeededRng) -> Result<Population> {
    cfg.validate()?;
    let candidates = latin_hypercube(&cfg.bounds, cfg.pop_size, rng);
    Ok(Population {
        energies: vec![f64::INFINITY; candidates.len()],
        candidates,
        generation: 0,
        best: 0,
    })
}

/// Unevaluated Latin-hypercube population seeded from `cfg.seed`.
pub fn de_init(cfg: &DeConfig) -> Result<Population> {
    de_init_with(cfg, &mut seeded(cfg.seed))
}

fn draw_distinct(rng: &mut SeededRng, n: usize, exclude: &[usize]) -> usize {
    loop {
        let k = rng.random_range(0..n);
        if !exclude.contains(&k) {
            return k;
        }
    }
}

/// `θ_a + F(θ_b − θ_c)` with `a` the best member (best1bin) or random
/// (rand1bin); `b`, `c` distinct and different from `i` and `a`. Components
/// leaving the box are reflected back in.
pub fn de_mutate(
    pop: &Population,
    i: usize,
    f: f64,
    strategy: Strategy,
    bounds: &[(f64, f64)],
    rng: &mut SeededRng,
) -> Vec<f64> {
    let n = pop.len();
    let a = match strategy {
        Strategy::Best1Bin => pop.best,
        Strategy::Rand1Bin => draw_distinct(rng, n, &[i]),
    };
    let b = draw_distinct(rng, n, &[i, a]);
    let c = draw_distinct(rng, n, &[i, a, b]);
    mutant_from(
        &pop.candidates[a],
        &pop.candidates[b],
        &pop.candidates[c],
        f,
        bounds,
    )
}

/// The mutation formula itself, for explicit base and difference vectors.
pub fn mutant_from(a: &[f64], b: &[f64], c: &[f64], f: f64, bounds: &[(f64, f64)]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .zip(c)
        .zip(bounds)
        .map(|(((&xa, &xb), &xc), &(lo, hi))| reflect(xa + f * (xb - xc), lo, hi))
        .collect()
}

/// Binomial crossover: each component comes from the mutant when its uniform
/// draw is `≤ cr`; one uniformly chosen component always does.
pub fn de_crossover(target: &[f64], mutant: &[f64], cr: f64, rng: &mut SeededRng) -> Vec<f64> {
    let forced = rng.random_range(0..target.len());
    target
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (&t, &m))| {
            let p: f64 = rng.random();
            if j == forced || p <= cr {
                m
            } else {
                t
            }
        })
        .collect()
}

/// Replaces each incumbent whose trial energy is `≤` its own.
pub fn de_select(mut pop: Population, trials: Vec<Vec<f64>>, energies: &[f64]) -> Population {
    for (i, (trial, &e)) in trials.into_iter().zip(energies).enumerate() {
        if e <= pop.energies[i] {
            pop.candidates[i] = trial;
            pop.energies[i] = e;
        }
    }
    pop.generation += 1;
    pop.refresh_best();
    pop
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_energy: f64,
    pub mean_energy: f64,
    pub std_energy: f64,
    /// Mutation factor of the generation; absent for the initial population.
    #[serde(rename = "F_used")]
    pub f_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_energy: f64,
    pub generations: usize,
    /// Every candidate evaluation, the initial population included.
    pub evaluations: usize,
    pub converged: bool,
    /// Evaluations the objective returned as non-finite.
    pub rejected: usize,
    pub trace: Vec<TraceRow>,
}

pub fn write_trace<W: Write>(out: W, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn evaluate<F>(objective: &F, candidates: &[Vec<f64>], rejected: &mut usize) -> Result<Vec<f64>>
where
    F: Fn(&[Vec<f64>]) -> Vec<f64>,
{
    let mut e = objective(candidates);
    if e.len() != candidates.len() {
        return Err(Error::DimensionMismatch {
            expected: candidates.len(),
            got: e.len(),
        });
    }
    for v in &mut e {
        if !v.is_finite() {
            *v = f64::INFINITY;
            *rejected += 1;
        }
    }
    Ok(e)
}

fn trace_row(pop: &Population, f_used: Option<f64>) -> TraceRow {
    let (mean, std) = pop.energy_stats();
    TraceRow {
        generation: pop.generation,
        best_energy: pop.best_energy(),
        mean_energy: mean,
        std_energy: std,
        f_used,
    }
}

/// Minimises a batched objective (one energy per candidate row) over
/// `cfg.bounds`. Stops once `std ≤ tol·|mean|` over the population energies
/// or after `max_generations`.
pub fn de_minimize<F>(objective: F, cfg: &DeConfig) -> Result<DeResult>
where
    F: Fn(&[Vec<f64>]) -> Vec<f64>,
{
    let mut rng = seeded(cfg.seed);
    let mut pop = de_init_with(cfg, &mut rng)?;
    let mut rejected = 0;
    pop.energies = evaluate(&objective, &pop.candidates, &mut rejected)?;
    let mut evaluations = pop.len();
    if pop.energies.iter().all(|e| e.is_infinite()) {
        return Err(Error::ObjectiveInvalid);
    }
    pop.refresh_best();
    let mut trace = vec![trace_row(&pop, None)];
    let mut converged = false;
    let (f_lo, f_hi) = cfg.mutation;

    while pop.generation < cfg.max_generations {
        let f = if f_lo < f_hi {
            rng.random_range(f_lo..f_hi)
        } else {
            f_lo
        };
        let trials: Vec<Vec<f64>> = (0..pop.len())
            .map(|i| {
                let mutant = de_mutate(&pop, i, f, cfg.strategy, &cfg.bounds, &mut rng);
                de_crossover(&pop.candidates[i], &mutant, cfg.crossover, &mut rng)
            })
            .collect();
        let energies = evaluate(&objective, &trials, &mut rejected)?;
        evaluations += trials.len();
        pop = de_select(pop, trials, &energies);
        let row = trace_row(&pop, Some(f));
        trace.push(row);
        if row.std_energy <= cfg.tol * row.mean_energy.abs() {
            converged = true;
            break;
        }
    }
    Ok(DeResult {
        best: pop.candidates[pop.best].clone(),
        best_energy: pop.best_energy(),
        generations: pop.generation,
        evaluations,
        converged,
        rejected,
        trace,
    })
}
