use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use remedian::analytics::{
    are_remedian_vs_mean, are_remedian_vs_median, breakdown_point, correlation_matrix, multi_covariance,
    quad_covariance, rank_moments, tau_sq, Coordinate, QuadCovariance,
};
use remedian::multi::multi_breakdown;
use remedian::simulation::{run, Experiment, ExperimentConfig};
use remedian::{Distribution, MultiQuantileEstimator, RemedianSketch};

/// Streaming remedian sketches, their limiting laws, and the experiments that check them.
#[derive(Parser, Debug)]
#[command(name = "remedian", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Feed newline-delimited numbers through a sketch and report the estimate.
    Stream(StreamArgs),
    /// Print the limiting quantities for a sketch shape and population.
    Analyze(AnalyzeArgs),
    /// Run an experiment and write its report.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
struct Shape {
    /// Number of rows.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Row width (odd, at least 3).
    #[arg(long, default_value_t = 3)]
    b: usize,
}

#[derive(Args, Debug, Clone)]
struct Buffer {
    /// Front-buffer size for multi-quantile estimation.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Order-statistic indices into the buffer, comma separated.
    #[arg(long = "Ks", value_delimiter = ',')]
    ks: Option<Vec<usize>>,
}

impl Buffer {
    /// `None` when neither flag is given; `--Ks` alone implies `N = max K`.
    fn resolve(&self) -> Option<(usize, Vec<usize>)> {
        match (&self.n, &self.ks) {
            (None, None) => None,
            (Some(n), None) => Some((*n, vec![n.div_ceil(2)])),
            (n, Some(ks)) => Some((n.unwrap_or_else(|| ks.iter().copied().max().unwrap_or(1)), ks.clone())),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct StreamArgs {
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    buffer: Buffer,
    /// Read from this file instead of standard input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    buffer: Buffer,
    /// Population literal: uniform, normal:MU,SIGMA, pareto:ALPHA,BETA, beta:ALPHA, t:NU[,SCALE,SHIFT].
    #[arg(long, default_value = "normal:0,1")]
    dist: Distribution,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// exact-rank, rank, quad, psirem, multi, components or breakdown.
    experiment: Experiment,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    buffer: Buffer,
    #[arg(long, default_value = "normal:0,1")]
    dist: Distribution,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, env = "REMEDIAN_SEED", default_value_t = 0)]
    seed: u64,
    /// Correlation between the two streams of the components experiment.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rho: f64,
    /// Worker cap; the report does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with status 1 when any gated statistic misses its tolerance.
    #[arg(long)]
    check: bool,
    /// Include the per-replicate values.
    #[arg(long)]
    samples: bool,
    #[command(flatten)]
    out: Output,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Stream(args) => cmd_stream(&args),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: &Output, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn pretty(value: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Two-column `quantity,value` CSV.
fn pairs_csv(rows: &[(String, String)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_lines(text: &str) -> Result<Vec<(usize, f64)>> {
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let x: f64 = line.parse().map_err(|_| anyhow::anyhow!("line {}: invalid number {line:?}", i + 1))?;
        if !x.is_finite() {
            bail!("line {}: non-finite value {line:?}", i + 1);
        }
        values.push((i + 1, x));
    }
    Ok(values)
}

fn cmd_stream(args: &StreamArgs) -> Result<bool> {
    let text = match &args.input {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let values = parse_lines(&text)?;
    let Shape { k, b } = args.shape;

    let (fields, rows) = match args.buffer.resolve() {
        None => {
            let mut sketch = RemedianSketch::new(k, b)?;
            for &(line, x) in &values {
                if sketch.is_complete() {
                    bail!("line {line}: capacity b^k = {} exceeded (k={k}, b={b})", sketch.capacity());
                }
                sketch.insert(x)?;
            }
            let q = sketch.query().context("empty input")?;
            let estimate = if sketch.is_complete() { sketch.final_estimate()? } else { q.estimate };
            let value = json!({
                "estimate": estimate,
                "n": q.n,
                "digits": q.digits,
                "capacity": sketch.capacity(),
                "breakdown_point": sketch.breakdown_point(),
            });
            let rows = vec![
                ("estimate".to_string(), num(estimate)),
                ("n".to_string(), q.n.to_string()),
                ("digits".to_string(), join(&q.digits)),
                ("capacity".to_string(), sketch.capacity().to_string()),
                ("breakdown_point".to_string(), num(sketch.breakdown_point())),
            ];
            (value, rows)
        }
        Some((n, ks)) => {
            let mut est = MultiQuantileEstimator::new(n, &ks, k, b)?;
            for &(line, x) in &values {
                if est.count() >= est.capacity() {
                    bail!("line {line}: capacity N·b^k = {} exceeded (N={n}, k={k}, b={b})", est.capacity());
                }
                est.insert(x)?;
            }
            let q = est.query().context("empty input")?;
            let value = json!({
                "estimates": q.estimates,
                "n": q.n,
                "digits": q.digits,
                "pending": q.pending,
                "target_probabilities": est.target_probabilities(),
                "capacity": est.capacity(),
                "breakdown_point": est.breakdown_point(),
            });
            let mut rows: Vec<(String, String)> =
                ks.iter().zip(&q.estimates).map(|(kj, e)| (format!("estimate[{kj}]"), num(*e))).collect();
            rows.extend([
                ("n".to_string(), q.n.to_string()),
                ("digits".to_string(), join(&q.digits)),
                ("pending".to_string(), q.pending.to_string()),
                ("capacity".to_string(), est.capacity().to_string()),
                ("breakdown_point".to_string(), num(est.breakdown_point())),
            ]);
            (value, rows)
        }
    };
    let text = match args.out.format {
        Format::Json => pretty(&fields)?,
        Format::Csv => pairs_csv(&rows)?,
    };
    emit(&args.out, &text)?;
    Ok(true)
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

const COORDS: [Coordinate; 4] = [Coordinate::Mean, Coordinate::Median, Coordinate::Remedian, Coordinate::RemedianRank];
const UNAVAILABLE: &str = "unavailable";

fn coord_name(c: Coordinate) -> &'static str {
    match c {
        Coordinate::Mean => "mean",
        Coordinate::Median => "median",
        Coordinate::Remedian => "remedian",
        Coordinate::RemedianRank => "remedian_rank",
    }
}

/// Full 4 × 4 view with the marker where a coordinate is missing.
fn quad_json(q: &QuadCovariance) -> Value {
    let rows: Vec<Value> = COORDS
        .iter()
        .map(|&a| {
            Value::Array(
                COORDS
                    .iter()
                    .map(|&b| q.get(a, b).map_or(json!(UNAVAILABLE), |v| json!(v)))
                    .collect(),
            )
        })
        .collect();
    Value::Array(rows)
}

fn quad_pairs(prefix: &str, q: &QuadCovariance, diagonal: bool, rows: &mut Vec<(String, String)>) -> Value {
    let mut map = Map::new();
    for (i, &a) in COORDS.iter().enumerate() {
        for &b in &COORDS[if diagonal { i } else { i + 1 }..] {
            let key = format!("{},{}", coord_name(a), coord_name(b));
            let v = q.get(a, b);
            rows.push((format!("{prefix}[{key}]"), v.map_or(UNAVAILABLE.to_string(), num)));
            map.insert(key, v.map_or(json!(UNAVAILABLE), |v| json!(v)));
        }
    }
    Value::Object(map)
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<f64>>())).collect())
}

fn matrix_rows(prefix: &str, labels: &[usize], m: &nalgebra::DMatrix<f64>, rows: &mut Vec<(String, String)>) {
    for (i, a) in labels.iter().enumerate() {
        for (j, b) in labels.iter().enumerate().skip(i) {
            rows.push((format!("{prefix}[{a},{b}]"), num(m[(i, j)])));
        }
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<bool> {
    let Shape { k, b } = args.shape;
    let capacity = RemedianSketch::new(k, b)?.capacity();
    let dist = args.dist;
    let moments = dist.moments();
    let finite = moments.has_finite_variance();
    let rm = rank_moments(k, b);
    let cov = quad_covariance(&dist, k);
    let corr = correlation_matrix(&dist, k);

    let mut rows = vec![
        ("k".to_string(), k.to_string()),
        ("b".to_string(), b.to_string()),
        ("dist".to_string(), dist.to_string()),
        ("capacity".to_string(), capacity.to_string()),
        ("breakdown_point".to_string(), num(breakdown_point(k, b))),
        ("tau_sq".to_string(), num(tau_sq(k))),
        ("rank.mean_abs_dev".to_string(), num(rm.mean_abs_dev)),
        ("rank.sd_abs_dev".to_string(), num(rm.var_abs_dev.sqrt())),
    ];
    let covariance_pairs = quad_pairs("covariance", &cov, true, &mut rows);
    let correlation_pairs = quad_pairs("correlation", &corr, false, &mut rows);
    let are_mean = finite.then(|| are_remedian_vs_mean(&dist, k));
    let are_median = are_remedian_vs_median(k);
    rows.push(("are.remedian_vs_median".to_string(), num(are_median)));
    rows.push(("are.remedian_vs_mean".to_string(), are_mean.map_or(UNAVAILABLE.to_string(), num)));

    let mut report = json!({
        "k": k,
        "b": b,
        "dist": dist.to_string(),
        "capacity": capacity,
        "breakdown_point": breakdown_point(k, b),
        "tau_sq": tau_sq(k),
        "rank_moments": {
            "mean_abs_dev": rm.mean_abs_dev,
            "sd_abs_dev": rm.var_abs_dev.sqrt(),
            "var_abs_dev": rm.var_abs_dev,
        },
        "coordinates": COORDS.map(coord_name),
        "unavailable": if finite { vec![] } else { vec!["mean"] },
        "quad_covariance": quad_json(&cov),
        "covariance_pairs": covariance_pairs,
        "correlations": quad_json(&corr),
        "correlation_pairs": correlation_pairs,
        "are": {
            "remedian_vs_median": are_median,
            "remedian_vs_mean": are_mean.map_or(json!(UNAVAILABLE), |v| json!(v)),
        },
    });

    if let Some((n, ks)) = args.buffer.resolve() {
        let mc = multi_covariance(&dist, n, &ks, k, b)?;
        let bp = multi_breakdown(n, &ks, k, b)?;
        for (kj, p) in ks.iter().zip(&mc.ptilde) {
            rows.push((format!("ptilde[{kj}]"), num(*p)));
        }
        for (kj, q) in ks.iter().zip(&mc.quantiles) {
            rows.push((format!("quantile[{kj}]"), num(*q)));
        }
        matrix_rows("multi_covariance", &ks, &mc.covariance, &mut rows);
        matrix_rows("multi_iterated_covariance", &ks, &mc.iterated_covariance, &mut rows);
        rows.push(("multi_breakdown_point".to_string(), num(bp)));
        report["multi"] = json!({
            "N": n,
            "Ks": ks,
            "ptilde": mc.ptilde,
            "quantiles": mc.quantiles,
            "scale": mc.scale,
            "pibar": matrix_json(&mc.pibar),
            "covariance": matrix_json(&mc.covariance),
            "iterated_covariance": matrix_json(&mc.iterated_covariance),
            "finite_scale_covariance": matrix_json(&mc.finite_scale),
            "breakdown_point": bp,
        });
    }

    let text = match args.out.format {
        Format::Json => pretty(&report)?,
        Format::Csv => pairs_csv(&rows)?,
    };
    emit(&args.out, &text)?;
    Ok(true)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<bool> {
    let (buffer, ks) = args.buffer.resolve().unwrap_or((1, vec![1]));
    let config = ExperimentConfig {
        distribution: args.dist,
        depth: args.shape.k,
        width: args.shape.b,
        buffer,
        ks,
        rho: args.rho,
        replicates: args.replicates,
        seed: args.seed,
        threads: args.threads,
        keep_samples: args.samples,
    };
    config.validate()?;
    let report = run(args.experiment, &config)?;
    let text = match args.out.format {
        Format::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            s
        }
        Format::Csv => report.to_csv()?,
    };
    emit(&args.out, &text)?;
    if !args.check {
        return Ok(true);
    }
    let failures = report.failures();
    for f in &failures {
        eprintln!(
            "FAIL {}: observed {} predicted {} ({:?})",
            f.name,
            f.observed,
            f.predicted.map_or("-".to_string(), |p| p.to_string()),
            f.tolerance
        );
    }
    Ok(failures.is_empty())
}
