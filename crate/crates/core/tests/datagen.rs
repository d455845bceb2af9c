mod common;

use std::path::PathBuf;

use svcal::bs_iv::{bs_price, implied_vol, IvConfig};
use svcal::cos::{cos_price, CosConfig};
use svcal::datagen::{
    build_dataset, input_columns, lhs_sample, meta_path, split_dataset, split_inputs, Dataset,
    RangeDim, SamplingRange, IV_RANGE, PRICE_RANGE,
};
use svcal::models::ModelKind;
use svcal::Error;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("svcal-datagen-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn one_dim(low: f64, high: f64) -> SamplingRange {
    SamplingRange {
        dims: vec![RangeDim {
            name: "x".into(),
            low,
            high,
            low_open: false,
            high_open: false,
        }],
    }
}

#[test]
fn four_point_hypercube_fills_each_quartile() {
    let pts = lhs_sample(&one_dim(0.0, 1.0), 4, 3);
    let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    for (i, x) in xs.iter().enumerate() {
        assert!(*x >= 0.25 * i as f64 && *x < 0.25 * (i + 1) as f64 + 1e-15, "{xs:?}");
    }
}

#[test]
fn hypercube_is_deterministic() {
    let r = SamplingRange::heston();
    let a = lhs_sample(&r, 257, 9);
    let b = lhs_sample(&r, 257, 9);
    let bits = |v: &Vec<Vec<f64>>| -> Vec<u64> { v.iter().flatten().map(|x| x.to_bits()).collect() };
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&lhs_sample(&r, 257, 10)));
}

#[test]
fn kappa_marginal_mean() {
    let r = SamplingRange::heston();
    let n = 10_000;
    let pts = lhs_sample(&r, n, 5);
    let k = input_columns(ModelKind::Heston)
        .iter()
        .position(|c| c == "kappa")
        .unwrap();
    let mean = pts.iter().map(|p| p[k]).sum::<f64>() / n as f64;
    let sigma = (3.0 / 12f64.sqrt()) / 100.0;
    assert!((mean - 1.5).abs() < 3.0 * sigma, "mean {mean}");
}

/// Kolmogorov-Smirnov statistic of samples against uniform on `[lo, hi]`.
fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = (x - lo) / (hi - lo);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn marginals_pass_kolmogorov_smirnov() {
    let r = SamplingRange::bates();
    let n = 10_000;
    let pts = lhs_sample(&r, n, 6);
    // asymptotic critical value at α = 0.01
    let critical = 1.6276 / (n as f64).sqrt();
    for (j, d) in r.dims.iter().enumerate() {
        let (lo, hi) = d.sampled_bounds();
        let stat = ks_uniform(pts.iter().map(|p| p[j]).collect(), lo, hi);
        assert!(stat < critical, "{}: D = {stat}", d.name);
    }
}

#[test]
fn open_bounds_are_inset() {
    let r = SamplingRange::heston();
    let pts = lhs_sample(&r, 2000, 8);
    for (j, d) in r.dims.iter().enumerate() {
        for p in &pts {
            assert!(p[j] <= d.high);
            if d.low_open {
                assert!(p[j] >= d.low + 1e-6 * (d.high - d.low) && p[j] > d.low);
            } else {
                assert!(p[j] >= d.low);
            }
        }
    }
}

#[test]
fn bs_limit_row_recovers_spot_vol() {
    let mut r = SamplingRange::heston();
    for (name, lo, hi) in [
        ("m", 1.0, 1.0 + 1e-9),
        ("tau", 0.05, 0.05 + 1e-9),
        ("r", 0.02, 0.02 + 1e-9),
        ("rho", -0.5, -0.5 + 1e-9),
        ("kappa", 1.0, 1.0 + 1e-9),
        ("gamma", 1e-5, 2e-5),
        ("nu_bar", 0.04, 0.04 + 1e-9),
        ("nu0", 0.04, 0.04 + 1e-9),
    ] {
        let d = r.get_mut(name).unwrap();
        d.low = lo;
        d.high = hi;
    }
    let ds = build_dataset(
        ModelKind::Heston,
        &r,
        1,
        1,
        &CosConfig::default(),
        &IvConfig::default(),
    )
    .unwrap();
    assert_eq!(ds.len(), 1);
    assert!((ds.rows[0].iv - 0.2).abs() < 2e-3, "iv {}", ds.rows[0].iv);
}

fn default_dataset() -> Dataset {
    build_dataset(
        ModelKind::Heston,
        &SamplingRange::heston(),
        1000,
        42,
        &CosConfig::default(),
        &IvConfig::default(),
    )
    .unwrap()
}

#[test]
fn default_dataset_respects_output_ranges_and_reprices() {
    let ds = default_dataset();
    assert_eq!(ds.meta.requested, 1000);
    assert_eq!(ds.meta.rows + ds.meta.dropped, 1000);
    assert_eq!(ds.meta.rows, ds.len());
    let cos = CosConfig::default();
    let iv = IvConfig::default();
    for row in &ds.rows {
        assert!(row.price > PRICE_RANGE.0 && row.price < PRICE_RANGE.1);
        assert!(row.iv > IV_RANGE.0 && row.iv < IV_RANGE.1);
    }
    for row in ds.rows.iter().step_by(ds.len() / 100) {
        let (quote, params) = split_inputs(ModelKind::Heston, &row.inputs).unwrap();
        let price = cos_price(&params, &quote, &cos).unwrap();
        assert!((price - row.price).abs() <= 1e-12);
        let back = implied_vol(bs_price(row.iv, &quote), &quote, &iv).unwrap();
        assert!((back - row.iv).abs() < 1e-8, "{back} vs {}", row.iv);
    }
}

#[test]
fn datasets_are_deterministic_and_round_trip() {
    let ds = default_dataset();
    let again = default_dataset();
    assert_eq!(ds.rows, again.rows);

    let path = scratch("heston.csv");
    ds.save(&path).unwrap();
    assert!(meta_path(&path).exists());
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("m,tau,r,rho,kappa,gamma,nu_bar,nu0,price,iv\n"));
    let back = Dataset::load(&path).unwrap();
    assert_eq!(back.meta, ds.meta);
    for (a, b) in back.rows.iter().zip(&ds.rows) {
        assert_eq!(a.price.to_bits(), b.price.to_bits());
        assert_eq!(a.iv.to_bits(), b.iv.to_bits());
        assert!(a.inputs.iter().zip(&b.inputs).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn missing_sidecar_is_malformed() {
    let ds = default_dataset();
    let path = scratch("orphan.csv");
    ds.save(&path).unwrap();
    std::fs::remove_file(meta_path(&path)).unwrap();
    assert!(matches!(Dataset::load(&path), Err(Error::Malformed { .. })));
}

#[test]
fn splits_partition_rows() {
    let ds = default_dataset();
    let (tr, va, te) = split_dataset(&ds, (0.8, 0.1, 0.1), 3).unwrap();
    assert_eq!(tr.len() + va.len() + te.len(), ds.len());
    assert_eq!(tr.len(), (0.8 * ds.len() as f64).round() as usize);
    let key = |r: &svcal::datagen::DataRow| r.inputs.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let mut all: Vec<_> = tr.rows.iter().chain(&va.rows).chain(&te.rows).map(key).collect();
    let mut orig: Vec<_> = ds.rows.iter().map(key).collect();
    all.sort();
    orig.sort();
    assert_eq!(all, orig);
    let (tr2, _, _) = split_dataset(&ds, (0.8, 0.1, 0.1), 3).unwrap();
    assert_eq!(tr.rows, tr2.rows);
    assert_eq!(tr.meta.split.as_deref(), Some("train"));
    assert!(split_dataset(&ds, (0.8, 0.3, 0.1), 3).is_err());
}

#[test]
fn bates_dataset_has_jump_columns() {
    let ds = build_dataset(
        ModelKind::Bates,
        &SamplingRange::bates(),
        64,
        7,
        &CosConfig::default(),
        &IvConfig::default(),
    )
    .unwrap();
    assert_eq!(ds.input_dim(), 11);
    assert_eq!(
        ds.meta.columns[8..],
        ["lambda_j".to_string(), "mu_j".into(), "nu_j_sq".into()]
    );
}

#[test]
fn extreme_ranges_are_degenerate() {
    let mut r = SamplingRange::heston();
    let nu0 = r.get_mut("nu0").unwrap();
    nu0.low = 0.9;
    nu0.high = 1.0;
    let nb = r.get_mut("nu_bar").unwrap();
    nb.low = 0.9;
    nb.high = 1.0;
    let err = build_dataset(
        ModelKind::Heston,
        &r,
        50,
        1,
        &CosConfig::default(),
        &IvConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::DegenerateRanges { .. }), "{err}");
}

#[test]
fn misordered_ranges_are_rejected() {
    let mut r = SamplingRange::heston();
    r.dims.swap(0, 1);
    assert!(r.validate(ModelKind::Heston).is_err());
    assert!(SamplingRange::heston().validate(ModelKind::Bates).is_err());
}
