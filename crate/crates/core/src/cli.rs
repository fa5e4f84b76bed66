//! Command-line front end: plot data for the drift potentials and densities,
//! the verification suite and the Monte Carlo cross-check.
//!
//! Every run with `--out DIR` writes its data files plus a
//! `<command>.manifest.json` recording the arguments; `replay` re-runs a
//! manifest and reproduces the data files byte for byte.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::sde::{self, BoundaryPolicy, SdeConfig};
use crate::spectral::{default_grid, drift, drift_potential, stationary_pdf, PdfSeries, DomainSpec};
use crate::verify::{self, VerifyOptions};
use crate::xpoly::{Family, ModelParams};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_THRESHOLD: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "xfpe", version, about = "Exactly solvable Fokker-Planck systems from exceptional orthogonal polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drift potential U and drift coefficient D on a grid.
    Drift(DriftArgs),
    /// Time-dependent density from a delta initial condition.
    Evolve(EvolveArgs),
    /// Stationary density on a grid.
    Stationary(GridCommand),
    /// Orthonormality, residual and drift-consistency checks.
    Verify(VerifyArgs),
    /// Euler-Maruyama histogram against the spectral density.
    Mc(McArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct ModelArgs {
    /// L1, L2, J1 or J2.
    #[arg(long)]
    family: Family,
    #[arg(long)]
    g: f64,
    /// Second coupling (Jacobi families only).
    #[arg(long)]
    h: Option<f64>,
    /// Comma-separated deformation levels.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    ell: Vec<u32>,
}

impl ModelArgs {
    fn params(&self) -> Result<Vec<ModelParams>, Failure> {
        if self.family.is_laguerre() && self.h.is_some() {
            return Err(Failure::validation(format!("--h is not used by {}", self.family)));
        }
        self.ell
            .iter()
            .map(|&l| ModelParams::new(self.family, self.g, self.h, l).map_err(Failure::from))
            .collect()
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct GridArgs {
    #[arg(long, default_value_t = crate::spectral::DEFAULT_POINTS)]
    points: usize,
    /// Right end of the plotted half-line (Laguerre families only).
    #[arg(long, default_value_t = crate::spectral::DEFAULT_X_MAX)]
    xmax: f64,
}

impl GridArgs {
    fn grid(&self, params: &ModelParams) -> Result<Vec<f64>, Failure> {
        if self.points < 2 {
            return Err(Failure::validation("--points must be at least 2"));
        }
        if !(self.xmax.is_finite() && self.xmax > 0.0) {
            return Err(Failure::validation("--xmax must be positive"));
        }
        Ok(default_grid(params, self.points, self.xmax))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
struct OutputArgs {
    /// Directory for data files and the manifest; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
struct DriftArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct GridCommand {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct EvolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Start point of the delta initial condition (default 1.2 Laguerre, 0.3 Jacobi).
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.2,0.5,2.0")]
    times: Vec<f64>,
    /// Series length (default 80 Laguerre, 50 Jacobi).
    #[arg(long)]
    terms: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    n_max: u32,
    /// Scales each eigenfunction in the Gram matrix (negative control).
    #[arg(long, default_value_t = 1.0, hide = true)]
    norm_scale: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct McArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    t: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = sde::DEFAULT_DT)]
    dt: f64,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// reject_resample or reflect.
    #[arg(long, default_value = "reject_resample")]
    boundary: BoundaryPolicy,
    #[arg(long)]
    terms: Option<usize>,
    /// Right end of the histogram range (Laguerre families only).
    #[arg(long, default_value_t = crate::spectral::DEFAULT_X_MAX)]
    xmax: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failed run: message plus process exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn validation(msg: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: msg.into() }
    }

    fn internal(msg: impl Into<String>) -> Self {
        Self { code: EXIT_INTERNAL, message: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_)
            | Error::InvalidParams(_)
            | Error::Config(_)
            | Error::XiZero { .. }
            | Error::NonNormalizedProfile(_) => EXIT_VALIDATION,
            _ => EXIT_INTERNAL,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::internal(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Serialize)]
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn render(&self, format: Format) -> Result<String, Failure> {
        match format {
            Format::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                Ok(s)
            }
            Format::Json => to_json(self),
        }
    }
}

/// Shortest round-trip decimal; exponent notation for very large or small values.
fn format_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e16 {
        format!("{v}")
    } else {
        format!("{v:?}")
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::internal(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    /// Arguments after the program name.
    argv: &'a [String],
    params: &'a [ModelParams],
    settings: serde_json::Value,
    outputs: &'a [String],
    wall_clock_seconds: f64,
}

/// Collects outputs of one run, either into a directory or onto stdout.
struct Sink {
    dir: Option<PathBuf>,
    format: Format,
    written: Vec<String>,
}

impl Sink {
    fn new(output: &OutputArgs) -> Result<Self, Failure> {
        if let Some(dir) = &output.out {
            fs::create_dir_all(dir)?;
        }
        Ok(Self { dir: output.out.clone(), format: output.format, written: Vec::new() })
    }

    fn emit(&mut self, name: &str, content: &str) -> Result<(), Failure> {
        match &self.dir {
            Some(dir) => {
                fs::write(dir.join(name), content)?;
                self.written.push(name.to_string());
            }
            None => match io::stdout().lock().write_all(content.as_bytes()) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            },
        }
        Ok(())
    }

    fn table(&mut self, stem: &str, table: &Table) -> Result<(), Failure> {
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        self.emit(&format!("{stem}.{ext}"), &table.render(self.format)?)
    }

    fn report<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<(), Failure> {
        self.emit(&format!("{stem}.json"), &to_json(value)?)
    }

    fn finish<S: Serialize>(
        self,
        command: &str,
        argv: &[String],
        params: &[ModelParams],
        settings: &S,
        started: Instant,
    ) -> Result<(), Failure> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: "xfpe",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv,
            params,
            settings: serde_json::to_value(settings)
                .map_err(|e| Failure::internal(format!("serialization failed: {e}")))?,
            outputs: &self.written,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        };
        fs::write(dir.join(format!("{command}.manifest.json")), to_json(&manifest)?)?;
        Ok(())
    }
}

fn default_x0(params: &ModelParams, x0: Option<f64>) -> f64 {
    x0.unwrap_or_else(|| verify::default_x0(params))
}

fn cmd_drift(args: &DriftArgs, argv: &[String], started: Instant) -> Result<i32, Failure> {
    let params = args.model.params()?;
    let grid = args.grid.grid(&params[0])?;
    let mut columns = vec!["x".to_string()];
    for p in &params {
        columns.push(format!("U_l{}", p.ell));
        columns.push(format!("D_l{}", p.ell));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &x in &grid {
        let mut row = vec![x];
        for p in &params {
            row.push(drift_potential(p, x)?);
            row.push(drift(p, x)?);
        }
        rows.push(row);
    }
    let mut sink = Sink::new(&args.output)?;
    sink.table("drift", &Table { columns, rows })?;
    sink.finish("drift", argv, &params, args, started)?;
    Ok(EXIT_OK)
}

fn cmd_stationary(args: &GridCommand, argv: &[String], started: Instant) -> Result<i32, Failure> {
    let params = args.model.params()?;
    let grid = args.grid.grid(&params[0])?;
    let mut columns = vec!["x".to_string()];
    columns.extend(params.iter().map(|p| format!("P_l{}", p.ell)));
    let mut rows = Vec::with_capacity(grid.len());
    for &x in &grid {
        let mut row = vec![x];
        for p in &params {
            row.push(stationary_pdf(p, x)?);
        }
        rows.push(row);
    }
    let mut sink = Sink::new(&args.output)?;
    sink.table("stationary", &Table { columns, rows })?;
    sink.finish("stationary", argv, &params, args, started)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct EvolveSummaryRow {
    ell: u32,
    t: f64,
    /// `sup_x |P(x, t) − P_stat(x)|`.
    stationary_distance: f64,
    /// The same, divided by `max_x P_stat`.
    relative_stationary_distance: f64,
    tail_warnings: usize,
}

#[derive(Debug, Serialize)]
struct EvolveSummary {
    x0: f64,
    terms: usize,
    rows: Vec<EvolveSummaryRow>,
}

fn cmd_evolve(args: &EvolveArgs, argv: &[String], started: Instant) -> Result<i32, Failure> {
    let params = args.model.params()?;
    let grid = args.grid.grid(&params[0])?;
    let x0 = default_x0(&params[0], args.x0);
    let terms = args.terms.unwrap_or_else(|| verify::default_terms(&params[0]));
    if args.times.is_empty() || args.times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Failure::validation("--times must be positive"));
    }
    let series = params
        .iter()
        .map(|p| PdfSeries::delta(p, x0, terms))
        .collect::<Result<Vec<_>, _>>()?;
    let stationary = params
        .iter()
        .map(|p| grid.iter().map(|&x| stationary_pdf(p, x)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;

    let mut sink = Sink::new(&args.output)?;
    let mut summary = Vec::new();
    let mut long_rows = Vec::new();
    let mut columns = vec!["x".to_string()];
    for p in &params {
        columns.push(format!("P_l{}", p.ell));
        columns.push(format!("tail_l{}", p.ell));
    }
    for &t in &args.times {
        let mut rows: Vec<Vec<f64>> = grid.iter().map(|&x| vec![x]).collect();
        for (k, s) in series.iter().enumerate() {
            let (mut dist, mut peak, mut tails) = (0.0f64, 0.0f64, 0);
            for (i, &x) in grid.iter().enumerate() {
                let v = s.density(t, x)?;
                dist = dist.max((v.value - stationary[k][i]).abs());
                peak = peak.max(stationary[k][i]);
                tails += v.tail_warning as usize;
                rows[i].push(v.value);
                rows[i].push(if v.tail_warning { 1.0 } else { 0.0 });
            }
            summary.push(EvolveSummaryRow {
                ell: params[k].ell,
                t,
                stationary_distance: dist,
                relative_stationary_distance: dist / peak,
                tail_warnings: tails,
            });
        }
        if sink.dir.is_none() {
            long_rows.extend(rows.into_iter().map(|r| std::iter::once(t).chain(r).collect()));
        } else {
            sink.table(&format!("evolve_t{t}"), &Table { columns: columns.clone(), rows })?;
        }
    }
    if sink.dir.is_none() {
        // On stdout all times share one long table, time first.
        let columns = std::iter::once("t".to_string()).chain(columns).collect();
        sink.table("evolve", &Table { columns, rows: long_rows })?;
    }
    let summary = EvolveSummary { x0, terms, rows: summary };
    if sink.dir.is_some() {
        sink.report("evolve_summary", &summary)?;
    } else {
        eprint!("{}", to_json(&summary)?);
    }
    sink.finish("evolve", argv, &params, args, started)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct VerifyOutput {
    passed: bool,
    reports: Vec<verify::VerifyReport>,
}

fn cmd_verify(args: &VerifyArgs, argv: &[String], started: Instant) -> Result<i32, Failure> {
    let params = args.model.params()?;
    let opts = VerifyOptions { n_max: args.n_max, norm_scale: args.norm_scale, ..Default::default() };
    let reports = params
        .iter()
        .map(|p| verify::run(p, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = reports.iter().all(|r| r.passed);
    for r in reports.iter().filter(|r| !r.passed) {
        eprintln!("verify failed for {} l={}: {}", r.params.family, r.params.ell, r.failures.join(", "));
    }
    let mut sink = Sink::new(&args.output)?;
    sink.report("verify", &VerifyOutput { passed, reports })?;
    sink.finish("verify", argv, &params, args, started)?;
    Ok(if passed { EXIT_OK } else { EXIT_THRESHOLD })
}

#[derive(Debug, Serialize)]
struct McResult {
    ell: u32,
    l1_distance: f64,
    max_sigma_deviation: f64,
    resamples: u64,
    escaped: usize,
}

#[derive(Debug, Serialize)]
struct McReport {
    x0: f64,
    t: f64,
    paths: usize,
    dt: f64,
    seed: u64,
    boundary_policy: BoundaryPolicy,
    terms: usize,
    results: Vec<McResult>,
}

fn cmd_mc(args: &McArgs, argv: &[String], started: Instant) -> Result<i32, Failure> {
    let params = args.model.params()?;
    let x0 = default_x0(&params[0], args.x0);
    let terms = args.terms.unwrap_or_else(|| verify::default_terms(&params[0]));
    let domain = DomainSpec::of(&params[0]);
    let upper = if domain.upper.is_finite() { FRAC_PI_2 } else { args.xmax };
    let edges = sde::uniform_edges(domain.lower, upper, args.bins)?;
    let config =
        SdeConfig::new(args.dt, args.paths, vec![args.t], args.seed).with_policy(args.boundary);

    let mut sink = Sink::new(&args.output)?;
    let mut results = Vec::new();
    for p in &params {
        let samples = sde::simulate(p, x0, &config)?;
        let est = sde::histogram(&samples.positions[0], &edges)?;
        let series = PdfSeries::delta(p, x0, terms)?;
        let pdf = |x: f64| {
            if domain.contains(x) {
                series.density(args.t, x).map(|v| v.value)
            } else {
                Ok(0.0)
            }
        };
        let reference = sde::bin_averages(&edges, pdf)?;
        let cmp = sde::compare(&est, pdf)?;
        let rows = (0..args.bins)
            .map(|k| {
                vec![edges[k], edges[k + 1], est.density[k], est.std_err[k], reference[k]]
            })
            .collect();
        let columns = ["bin_lo", "bin_hi", "density", "std_err", "reference"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        sink.table(&format!("mc_l{}", p.ell), &Table { columns, rows })?;
        results.push(McResult {
            ell: p.ell,
            l1_distance: cmp.l1_distance,
            max_sigma_deviation: cmp.max_sigma_deviation,
            resamples: samples.resamples,
            escaped: est.escaped,
        });
    }
    let report = McReport {
        x0,
        t: args.t,
        paths: args.paths,
        dt: args.dt,
        seed: args.seed,
        boundary_policy: args.boundary,
        terms,
        results,
    };
    sink.report("mc_report", &report)?;
    sink.finish("mc", argv, &params, args, started)?;
    Ok(EXIT_OK)
}

fn cmd_replay(args: &ReplayArgs) -> Result<i32, Failure> {
    let text = fs::read_to_string(&args.manifest)?;
    let manifest: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("invalid manifest: {e}")))?;
    let recorded = manifest
        .get("argv")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Failure::validation("manifest has no argv array"))?;
    let mut argv = vec!["xfpe".to_string()];
    for v in recorded {
        argv.push(v.as_str().ok_or_else(|| Failure::validation("non-string argv entry"))?.to_string());
    }
    if let Some(out) = &args.out {
        argv = replace_out(&argv, out);
    }
    if argv.get(1).map(String::as_str) == Some("replay") {
        return Err(Failure::validation("a manifest cannot replay another replay"));
    }
    Ok(run(&argv))
}

fn replace_out(argv: &[String], out: &Path) -> Vec<String> {
    let mut result = Vec::with_capacity(argv.len() + 2);
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            result.push(a.clone());
        }
    }
    result.push("--out".into());
    result.push(out.display().to_string());
    result
}

/// Parse `argv` (program name first), run the command and return the exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let rest = &argv[1..];
    let result = match &cli.command {
        Command::Drift(a) => cmd_drift(a, rest, started),
        Command::Evolve(a) => cmd_evolve(a, rest, started),
        Command::Stationary(a) => cmd_stationary(a, rest, started),
        Command::Verify(a) => cmd_verify(a, rest, started),
        Command::Mc(a) => cmd_mc(a, rest, started),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn main() -> i32 {
    let argv: Vec<String> = std::env::args().collect();
    run(&argv)
}
