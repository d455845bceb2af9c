mod common;

use proptest::prelude::*;
use svcal::de::{
    de_crossover, de_init, de_minimize, de_select, mutant_from, reflect, write_trace, DeConfig,
    Population, Strategy,
};
use svcal::sampling::seeded;

fn sphere(c: &[Vec<f64>]) -> Vec<f64> {
    c.iter().map(|x| x.iter().map(|v| v * v).sum()).collect()
}

/// Rosenbrock with its minimum moved off any round grid to `(A, A²)`.
const A: f64 = 1.003_7;

fn rosenbrock(x: &[f64]) -> f64 {
    (A - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
}

fn rosen_batch(c: &[Vec<f64>]) -> Vec<f64> {
    c.iter().map(|x| rosenbrock(x)).collect()
}

#[test]
fn sphere_is_minimised() {
    let cfg = DeConfig {
        tol: 1e-6,
        seed: 3,
        ..DeConfig::with_bounds(vec![(-5.0, 5.0); 3])
    };
    let out = de_minimize(sphere, &cfg).unwrap();
    assert!(out.best_energy < 1e-8, "{}", out.best_energy);
    assert!(out.best.iter().all(|v| v.abs() < 1e-4));
}

#[test]
fn rosenbrock_beats_dense_grid() {
    // grid oracle: 801 × 801 points on the search box
    let n = 801;
    let mut grid_best = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let x = [-2.0 + 4.0 * i as f64 / (n - 1) as f64, -1.0 + 4.0 * j as f64 / (n - 1) as f64];
            grid_best = grid_best.min(rosenbrock(&x));
        }
    }
    let cfg = DeConfig {
        tol: 1e-10,
        max_generations: 3000,
        seed: 1,
        ..DeConfig::with_bounds(vec![(-2.0, 2.0), (-1.0, 3.0)])
    };
    let out = de_minimize(rosen_batch, &cfg).unwrap();
    assert!(out.best_energy <= grid_best, "{} vs grid {grid_best}", out.best_energy);
    assert!((out.best[0] - A).abs() < 1e-3 && (out.best[1] - A * A).abs() < 2e-3, "{:?}", out.best);
}

#[test]
fn best_energy_never_increases_and_stays_in_box() {
    let bounds = vec![(-2.0, 2.0), (-1.0, 3.0)];
    let cfg = DeConfig {
        max_generations: 200,
        tol: 1e-300,
        strategy: Strategy::Rand1Bin,
        seed: 9,
        ..DeConfig::with_bounds(bounds.clone())
    };
    let seen = std::sync::Mutex::new(Vec::new());
    let out = de_minimize(
        |c: &[Vec<f64>]| {
            seen.lock().unwrap().extend(c.iter().cloned());
            rosen_batch(c)
        },
        &cfg,
    )
    .unwrap();
    for w in out.trace.windows(2) {
        assert!(w[1].best_energy <= w[0].best_energy);
    }
    for p in seen.lock().unwrap().iter() {
        for (v, (lo, hi)) in p.iter().zip(&bounds) {
            assert!(v >= lo && v <= hi);
        }
    }
    assert_eq!(out.trace.len(), out.generations + 1);
    assert_eq!(out.evaluations, cfg.pop_size * (out.generations + 1));
    assert!(out.trace[1..].iter().all(|r| {
        let f = r.f_used.unwrap();
        (0.5..1.0).contains(&f)
    }));
}

#[test]
fn runs_are_reproducible() {
    let cfg = DeConfig {
        max_generations: 50,
        seed: 17,
        ..DeConfig::with_bounds(vec![(-2.0, 2.0), (-1.0, 3.0)])
    };
    let a = de_minimize(rosen_batch, &cfg).unwrap();
    let b = de_minimize(rosen_batch, &cfg).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(a.trace, b.trace);
    let c = de_minimize(rosen_batch, &DeConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn batch_size_does_not_change_the_answer() {
    let cfg = DeConfig {
        max_generations: 40,
        seed: 2,
        ..DeConfig::with_bounds(vec![(-2.0, 2.0), (-1.0, 3.0)])
    };
    let batched = de_minimize(rosen_batch, &cfg).unwrap();
    let one_by_one = de_minimize(
        |c: &[Vec<f64>]| c.iter().flat_map(|x| rosen_batch(std::slice::from_ref(x))).collect(),
        &cfg,
    )
    .unwrap();
    assert_eq!(batched.trace, one_by_one.trace);
}

#[test]
fn infeasible_candidates_are_rejected_not_fatal() {
    let cfg = DeConfig {
        max_generations: 30,
        seed: 4,
        ..DeConfig::with_bounds(vec![(-1.0, 1.0); 2])
    };
    let out = de_minimize(
        |c: &[Vec<f64>]| {
            c.iter()
                .map(|x| if x[0] < 0.0 { f64::NAN } else { x[0] * x[0] + x[1] * x[1] })
                .collect()
        },
        &cfg,
    )
    .unwrap();
    assert!(out.rejected > 0);
    assert!(out.best[0] >= 0.0 && out.best_energy.is_finite());
    let all_bad = de_minimize(|c: &[Vec<f64>]| vec![f64::NAN; c.len()], &cfg);
    assert!(all_bad.is_err());
}

#[test]
fn hand_mutation() {
    let b = [(-10.0, 10.0); 2];
    assert_eq!(
        mutant_from(&[1.0, 1.0], &[2.0, 0.0], &[0.0, 2.0], 0.5, &b),
        vec![2.0, 0.0]
    );
    // leaving the box reflects back in: 0.9 + 0.5·0.4 = 1.1 → 0.9
    let r = mutant_from(&[0.9], &[0.4], &[0.0], 0.5, &[(0.0, 1.0)]);
    assert!((r[0] - 0.9).abs() < 1e-15);
}

#[test]
fn crossover_extremes() {
    let mut rng = seeded(5);
    let t = vec![0.0; 6];
    let m = vec![1.0; 6];
    assert_eq!(de_crossover(&t, &m, 1.0, &mut rng), m);
    let mut hits = [0usize; 6];
    for _ in 0..600 {
        let trial = de_crossover(&t, &m, 0.0, &mut rng);
        assert_eq!(trial.iter().filter(|&&v| v == 1.0).count(), 1);
        hits[trial.iter().position(|&v| v == 1.0).unwrap()] += 1;
    }
    assert!(hits.iter().all(|&h| h > 50), "{hits:?}");
}

#[test]
fn selection_prefers_trial_on_ties() {
    let pop = Population {
        candidates: vec![vec![0.0], vec![1.0]],
        energies: vec![2.0, 3.0],
        generation: 0,
        best: 0,
    };
    let next = de_select(pop, vec![vec![5.0], vec![6.0]], &[2.0, 3.5]);
    assert_eq!(next.candidates, vec![vec![5.0], vec![1.0]]);
    assert_eq!(next.generation, 1);
    assert_eq!(next.best, 0);
}

#[test]
fn initial_population_is_a_hypercube() {
    let cfg = DeConfig {
        pop_size: 8,
        ..DeConfig::with_bounds(vec![(0.0, 4.0), (-1.0, 1.0)])
    };
    let pop = de_init(&cfg).unwrap();
    assert_eq!(pop.len(), 8);
    for (j, &(lo, hi)) in cfg.bounds.iter().enumerate() {
        let mut cells: Vec<usize> = pop
            .candidates
            .iter()
            .map(|c| ((c[j] - lo) / (hi - lo) * 8.0).floor() as usize)
            .collect();
        cells.sort();
        assert_eq!(cells, (0..8).collect::<Vec<_>>());
    }
}

#[test]
fn bad_configs_are_rejected() {
    let ok = DeConfig::with_bounds(vec![(0.0, 1.0)]);
    for bad in [
        DeConfig { pop_size: 3, ..ok.clone() },
        DeConfig { crossover: 1.5, ..ok.clone() },
        DeConfig { mutation: (0.9, 0.5), ..ok.clone() },
        DeConfig::with_bounds(vec![(1.0, 0.0)]),
        DeConfig::with_bounds(vec![]),
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

#[test]
fn trace_csv_has_one_row_per_generation() {
    let cfg = DeConfig {
        max_generations: 5,
        tol: 1e-300,
        ..DeConfig::with_bounds(vec![(-1.0, 1.0)])
    };
    let out = de_minimize(sphere, &cfg).unwrap();
    let mut buf = Vec::new();
    write_trace(&mut buf, &out.trace).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("generation,best_energy"));
}

proptest! {
    #[test]
    fn reflection_lands_in_box(x in -100.0..100.0f64, lo in -5.0..5.0f64, w in 0.01..10.0f64) {
        let y = reflect(x, lo, lo + w);
        prop_assert!(y >= lo && y <= lo + w);
        if (lo..=lo + w).contains(&x) {
            prop_assert_eq!(y, x);
        }
    }
}
