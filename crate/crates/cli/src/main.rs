mod config;
mod io;
mod manifest;
mod problem;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use svcal::bs_iv::implied_vol;
use svcal::calibrate::{
    calibrate, hessian, landscape, linspace, synth_market, Backend, WeightSpec,
};
use svcal::cos::price_surface;
use svcal::datagen::{build_dataset, split_dataset, Dataset};
use svcal::de::{write_trace, DeConfig};
use svcal::models::{ModelKind, ModelParams, ParamName};
use svcal::nnet::{evaluate, train_with, Network, NetworkSpec, Samples};

use config::RunConfig;
use io::{read_json, read_quotes, read_rows, read_surface, write_json, write_rows, write_surface, QuoteRow};
use manifest::{manifest_path, Recorder};
use problem::load_problem;

#[derive(Parser)]
#[command(name = "svcal", version, about = "Heston/Bates pricing, surrogate training and calibration")]
struct Cli {
    /// Seed for every random stage (sampling, splits, initialization, DE).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON run configuration, or a run manifest to replay its configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// COS prices for a quotes CSV (m, tau, r, kind).
    Price(PriceArgs),
    /// Implied volatilities for a CSV with a price column.
    Iv(IvArgs),
    /// Labelled Latin-hypercube dataset.
    Gen(GenArgs),
    /// Train/validation/test split of a dataset.
    Split(SplitArgs),
    /// Train the implied-volatility network.
    Train(TrainArgs),
    /// Error metrics of trained weights on a dataset.
    Eval(EvalArgs),
    /// Calibrate a problem file with differential evolution.
    Calibrate(CalibrateArgs),
    /// Finite-difference Hessian of a problem's objective.
    Hessian(HessianArgs),
    /// Synthetic implied-volatility surface from known parameters.
    Synth(SynthArgs),
    /// Objective over a grid of two parameters.
    Landscape(LandscapeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Price(_) => "price",
            Command::Iv(_) => "iv",
            Command::Gen(_) => "gen",
            Command::Split(_) => "split",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Calibrate(_) => "calibrate",
            Command::Hessian(_) => "hessian",
            Command::Synth(_) => "synth",
            Command::Landscape(_) => "landscape",
        }
    }
}

#[derive(Args, Serialize)]
struct PriceArgs {
    /// Model parameters JSON.
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    quotes: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct IvArgs {
    /// CSV with columns m, tau, r, kind, price.
    #[arg(long)]
    prices: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long, default_value = "heston")]
    model: ModelKind,
    /// Points to draw before filtering.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory receiving train.csv, val.csv and test.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_value = "0.8,0.1,0.1")]
    fractions: Vec<f64>,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    /// Weights JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Metrics JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct CalibrateArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Result JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-generation DE trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct HessianArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Model parameters JSON; the free parameters are read from it.
    #[arg(long)]
    point: PathBuf,
    /// Per-parameter steps; defaults to a fixed fraction of each box width.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<f64>>,
    /// Report JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// True model parameters JSON.
    #[arg(long)]
    params: PathBuf,
    /// Weight given to every quote.
    #[arg(long, default_value_t = 1.0, conflicts_with = "atm_weight")]
    weight: f64,
    /// Weight of at-the-money quotes; others get 1.
    #[arg(long)]
    atm_weight: Option<f64>,
    /// Surface CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct LandscapeArgs {
    /// Parameters JSON; all but the two scanned ones are held at these values.
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    surface: PathBuf,
    /// First axis as name=lo:hi:n.
    #[arg(long)]
    x: String,
    /// Second axis as name=lo:hi:n.
    #[arg(long)]
    y: String,
    /// Move the grid point nearest each parameter's value onto it exactly.
    #[arg(long)]
    snap_truth: bool,
    /// Grid CSV to write.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numeric = e
                .chain()
                .find_map(|c| c.downcast_ref::<svcal::Error>())
                .is_some_and(|e| e.is_numeric());
            ExitCode::from(if numeric { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building the worker pool")?;
    }
    let mut config = RunConfig::load(cli.config.as_deref())?;
    config.apply_seed(cli.seed);
    let mut rec = Recorder::new(cli.command.name(), serde_json::to_value(&cli.command)?, &config);
    if let Some(c) = &cli.config {
        rec.input(c);
    }
    let out = match &cli.command {
        Command::Price(a) => cmd_price(a, &config, &mut rec)?,
        Command::Iv(a) => cmd_iv(a, &config, &mut rec)?,
        Command::Gen(a) => cmd_gen(a, &config, &mut rec)?,
        Command::Split(a) => cmd_split(a, &config, &mut rec)?,
        Command::Train(a) => cmd_train(a, &config, &mut rec)?,
        Command::Eval(a) => cmd_eval(a, &mut rec)?,
        Command::Calibrate(a) => cmd_calibrate(a, &config, &mut rec)?,
        Command::Hessian(a) => cmd_hessian(a, &config, &mut rec)?,
        Command::Synth(a) => cmd_synth(a, &config, &mut rec)?,
        Command::Landscape(a) => cmd_landscape(a, &config, &mut rec)?,
    };
    rec.finish(&manifest_path(&out))?;
    Ok(())
}

fn cmd_price(a: &PriceArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let params: ModelParams = read_json(&a.params)?;
    let quotes = read_quotes(&a.quotes)?;
    rec.input(&a.params);
    rec.input(&a.quotes);
    let prices = price_surface(&params, &quotes, &config.cos)?;
    let rows: Vec<QuoteRow> = quotes
        .iter()
        .zip(&prices)
        .map(|(q, &p)| QuoteRow {
            price: Some(p),
            ..QuoteRow::of(q)
        })
        .collect();
    write_rows(&a.out, &rows)?;
    rec.output(&a.out);
    Ok(a.out.clone())
}

fn cmd_iv(a: &IvArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let mut rows = read_rows(&a.prices)?;
    rec.input(&a.prices);
    for (i, r) in rows.iter_mut().enumerate() {
        let Some(p) = r.price else {
            bail!("{} row {}: missing price", a.prices.display(), i + 1);
        };
        let q = r.quote().map_err(|e| e.at_quote(i))?;
        r.iv = Some(implied_vol(p, &q, &config.iv).map_err(|e| e.at_quote(i))?);
    }
    write_rows(&a.out, &rows)?;
    rec.output(&a.out);
    Ok(a.out.clone())
}

fn cmd_gen(a: &GenArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let ranges = config.ranges_for(a.model);
    let ds = build_dataset(a.model, &ranges, a.n, config.seed, &config.cos, &config.iv)?;
    ds.save(&a.out)?;
    eprintln!(
        "{} rows kept of {} drawn ({} dropped, {} clamped)",
        ds.meta.rows, ds.meta.requested, ds.meta.dropped, ds.meta.clamped
    );
    rec.output(&a.out);
    rec.output(&svcal::datagen::meta_path(&a.out));
    Ok(a.out.clone())
}

fn cmd_split(a: &SplitArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let ds = Dataset::load(&a.data)?;
    rec.input(&a.data);
    let f = (a.fractions[0], a.fractions[1], a.fractions[2]);
    let parts = split_dataset(&ds, f, config.seed)?;
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (name, part) in [("train", parts.0), ("val", parts.1), ("test", parts.2)] {
        let path = a.out_dir.join(format!("{name}.csv"));
        part.save(&path)?;
        eprintln!("{name}: {} rows", part.len());
        rec.output(&path);
    }
    Ok(a.out_dir.join("split"))
}

fn cmd_train(a: &TrainArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let train = Dataset::load(&a.train)?;
    rec.input(&a.train);
    let val = match &a.val {
        Some(p) => {
            rec.input(p);
            Some(Dataset::load(p)?)
        }
        None => None,
    };
    let spec = NetworkSpec::new(
        train.input_dim(),
        config.network.hidden_layers,
        config.network.hidden_width,
    )
    .with_seed(config.train.seed);
    let net = Network::new(spec, &train.meta.ranges.bounds())?;
    let (x, y) = (train.inputs_flat(), train.ivs());
    let val_data = val.as_ref().map(|v| (v.inputs_flat(), v.ivs()));
    let val_samples = val_data.as_ref().map(|(x, y)| Samples { x, y });
    let every = (config.train.epochs / 20).max(1);
    let (net, trace) = train_with(net, Samples { x: &x, y: &y }, val_samples, &config.train, |s| {
        if s.epoch % every == 0 || s.epoch + 1 == config.train.epochs {
            match s.val_mse {
                Some(v) => eprintln!("epoch {:>6}  lr {:.3e}  train {:.4e}  val {:.4e}", s.epoch, s.lr, s.train_mse, v),
                None => eprintln!("epoch {:>6}  lr {:.3e}  train {:.4e}", s.epoch, s.lr, s.train_mse),
            }
        }
    })?;
    net.save(&a.out)?;
    rec.output(&a.out);
    if let Some(t) = &a.trace {
        let mut wr = csv::Writer::from_path(t).with_context(|| format!("writing {}", t.display()))?;
        for s in &trace {
            wr.serialize(s)?;
        }
        wr.flush()?;
        rec.output(t);
    }
    Ok(a.out.clone())
}

fn cmd_eval(a: &EvalArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let net = Network::load(&a.weights)?;
    let ds = Dataset::load(&a.data)?;
    rec.input(&a.weights);
    rec.input(&a.data);
    let (x, y) = (ds.inputs_flat(), ds.ivs());
    let m = evaluate(&net, Samples { x: &x, y: &y })?;
    println!("{m}");
    write_json(&a.out, &m)?;
    rec.output(&a.out);
    Ok(a.out.clone())
}

/// DE settings for `n_free` parameters; a configured multiplier sets the
/// population size.
fn de_config(config: &RunConfig, n_free: usize) -> DeConfig {
    let mut de = config.de.clone();
    if let Some(k) = config.pop_multiplier {
        de.pop_size = k * n_free;
    }
    de
}

fn cmd_calibrate(a: &CalibrateArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let loaded = load_problem(&a.problem, config)?;
    loaded.inputs.iter().for_each(|p| rec.input(p));
    let p = &loaded.problem;
    let de = de_config(config, p.free.len());
    let result = calibrate(p, &de)?;
    eprintln!(
        "J = {:.6e} after {} generations ({} evaluations, converged: {})",
        result.objective, result.generations, result.evaluations, result.converged
    );
    for (n, v) in result.free.iter().zip(&result.x) {
        eprintln!("  {n:<9} {v:.6}");
    }
    if let Some(g) = result.ground_error {
        eprintln!("ground total squared error {g:.6e}");
    }
    write_json(&a.out, &result)?;
    rec.output(&a.out);
    if let Some(t) = &a.trace {
        let f = File::create(t).with_context(|| format!("writing {}", t.display()))?;
        write_trace(BufWriter::new(f), &result.trace)?;
        rec.output(t);
    }
    Ok(a.out.clone())
}

fn cmd_hessian(a: &HessianArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let loaded = load_problem(&a.problem, config)?;
    loaded.inputs.iter().for_each(|p| rec.input(p));
    let point: ModelParams = read_json(&a.point)?;
    rec.input(&a.point);
    let p = &loaded.problem;
    let x: Vec<f64> = p.free.iter().map(|f| point.get(f.name)).collect();
    let report = hessian(p, &x, a.steps.as_deref())?;
    for (i, n) in report.names.iter().enumerate() {
        let row: Vec<String> = report.hessian[i].iter().map(|v| format!("{v:>12.4e}")).collect();
        eprintln!("{n:<9}{}", row.join(""));
    }
    eprintln!(
        "largest diagonal {} / smallest {} = {:.4e}",
        report.names[report.argmax_diagonal],
        report.names[report.argmin_diagonal],
        report.diagonal_ratio
    );
    write_json(&a.out, &report)?;
    rec.output(&a.out);
    Ok(a.out.clone())
}

fn cmd_synth(a: &SynthArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let truth: ModelParams = read_json(&a.params)?;
    rec.input(&a.params);
    let weights = match a.atm_weight {
        Some(w) => WeightSpec::Atm { atm: w },
        None => WeightSpec::Uniform(a.weight),
    };
    let market = synth_market(&truth, &config.grid, &weights, &config.cos, &config.iv)?;
    if !market.envelope_violations.is_empty() {
        eprintln!(
            "warning: {} quotes outside the implied-volatility envelope: {:?}",
            market.envelope_violations.len(),
            market.envelope_violations
        );
    }
    write_surface(&a.out, &market.surface)?;
    rec.output(&a.out);
    Ok(a.out.clone())
}

/// Parses `name=lo:hi:n`.
fn parse_axis(s: &str) -> Result<(ParamName, Vec<f64>)> {
    let (name, grid) = s
        .split_once('=')
        .with_context(|| format!("axis '{s}' is not name=lo:hi:n"))?;
    let name: ParamName = name.trim().parse()?;
    let parts: Vec<&str> = grid.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        bail!("axis '{s}' is not name=lo:hi:n");
    };
    let (lo, hi): (f64, f64) = (lo.trim().parse()?, hi.trim().parse()?);
    let n: usize = n.trim().parse()?;
    if n == 0 || !(lo <= hi) {
        bail!("axis '{s}' needs lo ≤ hi and n ≥ 1");
    }
    Ok((name, linspace(lo, hi, n)))
}

fn snap(values: &mut [f64], target: f64) {
    if let Some(k) = (0..values.len())
        .min_by(|&i, &j| (values[i] - target).abs().total_cmp(&(values[j] - target).abs()))
    {
        values[k] = target;
    }
}

fn cmd_landscape(a: &LandscapeArgs, config: &RunConfig, rec: &mut Recorder) -> Result<PathBuf> {
    let truth: ModelParams = read_json(&a.params)?;
    let surface = read_surface(&a.surface)?;
    rec.input(&a.params);
    rec.input(&a.surface);
    let (px, mut xs) = parse_axis(&a.x)?;
    let (py, mut ys) = parse_axis(&a.y)?;
    if a.snap_truth {
        snap(&mut xs, truth.get(px));
        snap(&mut ys, truth.get(py));
    }
    let backend = Backend::CosBrent {
        cos: config.cos,
        iv: config.iv,
    };
    let points = landscape(&truth, &surface, (px, &xs), (py, &ys), backend)?;
    write_landscape(&a.out, (px, py), &points)?;
    rec.output(&a.out);
    Ok(a.out.clone())
}

fn write_landscape(
    path: &Path,
    (px, py): (ParamName, ParamName),
    points: &[svcal::calibrate::LandscapePoint],
) -> Result<()> {
    let mut wr = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    wr.write_record([px.as_str(), py.as_str(), "objective", "log10_objective"])?;
    for p in points {
        wr.write_record([
            p.x.to_string(),
            p.y.to_string(),
            p.objective.to_string(),
            p.log10_objective.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
