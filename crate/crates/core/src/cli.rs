//! The `l1tensor` command line.
//!
//! Exit codes: 0 success, 1 failed verification or I/O error, 2 infeasible
//! plan, 3 seed shortfall, 4 unsupported estimator, 64 usage or domain error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::blockspace::{BlockShape, SubspaceBasis};
use crate::distortion::{self, grid_oracle, minimize_ratio, sample_ratios};
use crate::dvoretzky::{mean_norm, DEFAULT_C};
use crate::error::{Error, Result};
use crate::format::{BasisFile, Encoding};
use crate::pipeline::{self, Config, ConstructionResult};
use crate::randbits::{reference_seed_bytes, BitStream};
use crate::tensor::DEFAULT_ELEMENT_CAP;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_SHORTFALL: i32 = 3;
pub const EXIT_UNSUPPORTED: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "l1tensor",
    version,
    about = "Almost-Euclidean subspaces of l1 from few random bits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive construction parameters without consuming randomness.
    Plan(PlanArgs),
    /// Build a subspace from seed bytes and write it as a basis file.
    Construct(ConstructArgs),
    /// Re-check a basis file against its embedded certificate.
    Verify(VerifyArgs),
    /// Estimate the l1/l2 ratio floor of a stored subspace.
    Estimate(EstimateArgs),
    /// Spherical mean of the block norm.
    MeanNorm(MeanNormArgs),
    /// Run a parameter sweep and print a CSV table.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Target ambient dimension.
    #[arg(long = "N")]
    pub n_target: u64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_C)]
    pub c1: f64,
    #[arg(long, default_value_t = DEFAULT_C)]
    pub c2: f64,
    /// Dimension-floor constant (default c2/4).
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long = "c-univ", default_value_t = 1.0)]
    pub c_univ: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Bin,
    Csv,
}

impl From<FormatArg> for Encoding {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Bin => Encoding::Bin,
            FormatArg::Csv => Encoding::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    /// Key of the exploratory (non-budgeted) generator.
    #[arg(long, default_value_t = 0)]
    pub key: u64,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Raw seed bytes.
    #[arg(
        long,
        conflicts_with = "seed_hex",
        required_unless_present = "seed_hex"
    )]
    pub seed_file: Option<PathBuf>,
    #[arg(long)]
    pub seed_hex: Option<String>,
    /// Use only the first this-many bits of the seed.
    #[arg(long)]
    pub seed_bits: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub retries: u32,
    #[arg(long, value_enum, default_value_t = FormatArg::Bin)]
    pub format: FormatArg,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub basis: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub basis: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Also run the certified net oracle at this resolution (m <= 3).
    #[arg(long)]
    pub grid: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MeanNormArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long = "B")]
    pub b: usize,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub key: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML or JSON sweep description.
    #[arg(long)]
    pub config: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => report_error(e, out, err),
    }
}

fn report_error(e: Error, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    match e {
        Error::Infeasible(report) => {
            let mut v = serde_json::to_value(&*report).expect("serializable");
            v["feasible"] = Value::Bool(false);
            emit(out, &v);
            EXIT_INFEASIBLE
        }
        Error::BudgetExhausted {
            stage,
            needed,
            available,
        } => {
            emit(
                out,
                &json!({ "stage": stage, "needed": needed, "available": available }),
            );
            EXIT_SHORTFALL
        }
        Error::Unsupported(_) => EXIT_UNSUPPORTED,
        Error::Domain(_) | Error::Shape { .. } => EXIT_USAGE,
        _ => EXIT_FAILED,
    }
}

/// Version of the stdout JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

fn emit(out: &mut dyn Write, v: &Value) {
    let mut v = v.clone();
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), json!(SCHEMA_VERSION));
    }
    let _ = writeln!(out, "{}", serde_json::to_string(&v).expect("serializable"));
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Plan(a) => cmd_plan(&a, out),
        Command::Construct(a) => cmd_construct(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::MeanNorm(a) => cmd_mean_norm(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

impl PlanArgs {
    fn config(&self) -> Config {
        Config {
            c1: self.c1,
            c2: self.c2,
            c0: self.c0,
            c_univ: self.c_univ,
            ..Config::default()
        }
    }

    fn check_open_gamma(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::domain(format!(
                "--gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

fn plan_json(plan: &pipeline::ConstructionPlan) -> Value {
    let mut v = serde_json::to_value(plan).expect("serializable");
    v["feasible"] = Value::Bool(true);
    v
}

fn cmd_plan(a: &PlanArgs, out: &mut dyn Write) -> Result<i32> {
    a.check_open_gamma()?;
    let plan = pipeline::plan(a.n_target, a.eps, a.gamma, &a.config())?;
    emit(out, &plan_json(&plan));
    Ok(EXIT_OK)
}

fn load_seed(a: &ConstructArgs) -> Result<BitStream> {
    let stream = match (&a.seed_file, &a.seed_hex) {
        (Some(path), _) => BitStream::from_bytes(fs::read(path)?),
        (None, Some(hex)) => BitStream::from_hex(hex)?,
        (None, None) => return Err(Error::domain("a seed is required")),
    };
    match a.seed_bits {
        Some(bits) => stream.truncated(bits),
        None => Ok(stream),
    }
}

fn result_certificate(r: &ConstructionResult) -> Value {
    let mut v = serde_json::to_value(&r.certificate).expect("serializable");
    v["attempts"] = json!(r.attempts);
    v["plan"] = serde_json::to_value(&r.plan).expect("serializable");
    v
}

fn cmd_construct(a: &ConstructArgs, out: &mut dyn Write) -> Result<i32> {
    a.plan.check_open_gamma()?;
    let config = Config {
        retries: a.retries,
        samples: a.estimator.samples,
        restarts: a.estimator.restarts,
        iters: a.estimator.iters,
        key: a.estimator.key,
        ..a.plan.config()
    };
    let mut stream = load_seed(a)?;
    let available = stream.len();
    let result = pipeline::construct(
        a.plan.n_target,
        a.plan.eps,
        a.plan.gamma,
        &mut stream,
        &config,
    )?;
    let certificate = result_certificate(&result);
    let file = BasisFile::new(
        result.padded_basis()?,
        result.scaling_m,
        result.bits_consumed,
        certificate.clone(),
    );
    file.write(&a.out, a.format.into())?;
    emit(
        out,
        &json!({
            "out": a.out,
            "bits_available": available,
            "bits_consumed": result.bits_consumed,
            "N": result.plan.n_target,
            "N_final": result.plan.n_final,
            "dim": result.basis.dim(),
            "scaling_M": result.scaling_m,
            "certificate": certificate,
        }),
    );
    Ok(EXIT_OK)
}

/// The first `rows` coordinates of every column, as a scalar-space basis.
fn leading_rows(basis: &SubspaceBasis, rows: usize) -> Result<SubspaceBasis> {
    let q = basis
        .columns()
        .flat_map(|c| c[..rows].iter().copied())
        .collect();
    SubspaceBasis::from_parts(BlockShape::scalar(rows)?, basis.dim(), q)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let file = BasisFile::read(&a.basis)?;
    let basis = &file.basis;
    let cert = &file.header.certificate;
    let mut checks = Map::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: Value| {
        ok &= pass;
        checks.insert(name.into(), json!({ "ok": pass, "detail": detail }));
    };

    let residual = basis.residual();
    check("orthonormal", residual <= ORTHONORMAL_TOL, json!(residual));

    let n_final = cert
        .get("n_final")
        .and_then(Value::as_u64)
        .map(|v| v as usize);
    let used = match n_final {
        Some(n) if n <= basis.rows() && basis.shape().width() == 1 => {
            let padding_zero = basis.columns().all(|c| c[n..].iter().all(|&v| v == 0.0));
            check(
                "zero_padding",
                padding_zero,
                json!({ "n_final": n, "rows": basis.rows() }),
            );
            Some(leading_rows(basis, n)?)
        }
        Some(n) => {
            check(
                "zero_padding",
                false,
                json!({ "n_final": n, "rows": basis.rows() }),
            );
            None
        }
        None => None,
    };

    if let (Some(used), Some(stored)) = (used, cert.get("sampled")) {
        let count = stored.get("count").and_then(Value::as_u64);
        let key = stored.get("key").and_then(Value::as_u64);
        match (count, key) {
            (Some(count), Some(key)) => {
                let fresh = serde_json::to_value(sample_ratios(&used, count as usize, key)?)
                    .expect("serializable");
                check("sampled_reproduces", &fresh == stored, fresh);
            }
            _ => check(
                "sampled_reproduces",
                false,
                json!("certificate lacks count or key"),
            ),
        }
    }

    emit(out, &json!({ "ok": ok, "checks": checks }));
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write) -> Result<i32> {
    let file = BasisFile::read(&a.basis)?;
    let basis = &file.basis;
    if let Some(delta) = a.grid {
        if basis.dim() > 3 {
            return Err(Error::Unsupported(format!(
                "grid oracle needs m <= 3, file has m = {}",
                basis.dim()
            )));
        }
        // Validate before the longer sampling work.
        if !(delta > 0.0 && delta <= 0.1) {
            return Err(Error::domain(format!(
                "--grid must lie in (0, 0.1], got {delta}"
            )));
        }
    }
    let e = &a.estimator;
    let stats = sample_ratios(basis, e.samples, e.key)?;
    let estimate = minimize_ratio(basis, e.restarts, e.iters, e.key)?;
    let mut v = json!({ "stats": stats, "estimate": estimate });
    if let Some(delta) = a.grid {
        v["grid"] = serde_json::to_value(grid_oracle(basis, delta)?).expect("serializable");
    }
    emit(out, &v);
    Ok(EXIT_OK)
}

fn cmd_mean_norm(a: &MeanNormArgs, out: &mut dyn Write) -> Result<i32> {
    let shape = BlockShape::new(a.n, a.b)?;
    let m = mean_norm(shape);
    let mut v = json!({
        "n": a.n,
        "B": a.b,
        "closed_form": m.value,
        "bounds": [m.lower_bound, m.upper_bound],
    });
    if let Some(count) = a.mc {
        let (mean, stderr) = distortion::mc_mean_norm(shape, count, a.key)?;
        v["mc_mean"] = json!(mean);
        v["mc_stderr"] = json!(stderr);
        v["key"] = json!(a.key);
    }
    emit(out, &v);
    Ok(EXIT_OK)
}

/// Sweep description for `bench`. Every list is a grid axis.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(rename = "N", default)]
    pub n_target: Vec<u64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default = "default_c")]
    pub c1: Vec<f64>,
    #[serde(default = "default_c")]
    pub c2: Vec<f64>,
    pub c0: Option<f64>,
    #[serde(default = "one")]
    pub c_univ: f64,
    /// Seeds per grid point; seed `s` is the reference byte stream with
    /// index `seed_offset + s`.
    #[serde(default = "one_seed")]
    pub seeds: u64,
    #[serde(default)]
    pub seed_offset: u64,
    /// Seed length; defaults to the plan's bit budget.
    pub seed_bytes: Option<usize>,
    #[serde(default)]
    pub retries: u32,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default)]
    pub key: u64,
    pub element_cap: Option<usize>,
}

fn default_c() -> Vec<f64> {
    vec![DEFAULT_C]
}
fn one() -> f64 {
    1.0
}
fn one_seed() -> u64 {
    1
}
fn default_samples() -> usize {
    10_000
}
fn default_restarts() -> usize {
    8
}
fn default_iters() -> usize {
    200
}

impl BenchConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let json =
            path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if json {
            serde_json::from_str(text).map_err(|e| Error::domain(format!("bench config: {e}")))
        } else {
            toml::from_str(text).map_err(|e| Error::domain(format!("bench config: {e}")))
        }
    }
}

pub const BENCH_HEADER: &str =
    "seed,N,eps,gamma,c1,c2,status,k,n,B,m,n_prime,N_final,dim,min_ratio,p01,bits";

#[derive(Debug, Clone, Copy)]
struct Point {
    n_target: u64,
    eps: f64,
    gamma: f64,
    c1: f64,
    c2: f64,
    seed: u64,
}

fn sorted<T: Copy + PartialOrd>(v: &[T]) -> Vec<T> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
    v
}

fn bench_row(cfg: &BenchConfig, p: Point) -> String {
    let config = Config {
        c1: p.c1,
        c2: p.c2,
        c0: cfg.c0,
        c_univ: cfg.c_univ,
        retries: cfg.retries,
        element_cap: cfg.element_cap.unwrap_or(DEFAULT_ELEMENT_CAP),
        samples: cfg.samples,
        restarts: cfg.restarts,
        iters: cfg.iters,
        key: cfg.key,
    };
    let prefix = format!(
        "{},{},{},{},{},{}",
        p.seed, p.n_target, p.eps, p.gamma, p.c1, p.c2
    );
    let status_only = |status: &str| format!("{prefix},{status},,,,,,,,,,,");
    let plan = match pipeline::plan(p.n_target, p.eps, p.gamma, &config) {
        Ok(plan) => plan,
        Err(Error::Infeasible(_)) => return status_only("infeasible"),
        Err(_) => return status_only("error"),
    };
    let len = cfg
        .seed_bytes
        .unwrap_or(plan.budget_bits.div_ceil(8) as usize);
    let mut stream = BitStream::from_bytes(reference_seed_bytes(p.seed, len));
    let dims = format!(
        "{},{},{},{},{},{}",
        plan.k, plan.n, plan.b, plan.m, plan.n_prime, plan.n_final
    );
    match pipeline::construct(p.n_target, p.eps, p.gamma, &mut stream, &config) {
        Ok(r) => {
            let s = &r.certificate.sampled;
            let min = s.min.min(r.certificate.witness.lambda_hat);
            format!(
                "{prefix},ok,{dims},{},{min},{},{}",
                r.basis.dim(),
                s.p01,
                r.bits_consumed
            )
        }
        Err(Error::BudgetExhausted { .. }) => format!("{prefix},shortfall,{dims},,,,"),
        Err(_) => format!("{prefix},error,{dims},,,,"),
    }
}

/// Renders the sweep as CSV: grid points in lexicographic order of
/// (N, eps, gamma, c1, c2), then seed index.
pub fn bench_csv(cfg: &BenchConfig) -> String {
    let mut points = Vec::new();
    for &n_target in &sorted(&cfg.n_target) {
        for &eps in &sorted(&cfg.eps) {
            for &gamma in &sorted(&cfg.gamma) {
                for &c1 in &sorted(&cfg.c1) {
                    for &c2 in &sorted(&cfg.c2) {
                        for s in 0..cfg.seeds {
                            points.push(Point {
                                n_target,
                                eps,
                                gamma,
                                c1,
                                c2,
                                seed: cfg.seed_offset + s,
                            });
                        }
                    }
                }
            }
        }
    }
    let rows: Vec<String> = points.par_iter().map(|&p| bench_row(cfg, p)).collect();
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    csv
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let text = fs::read_to_string(&a.config)?;
    let cfg = BenchConfig::parse(&text, &a.config)?;
    let csv = bench_csv(&cfg);
    match &a.out {
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(csv.as_bytes())?;
            tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        }
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(EXIT_OK)
}
