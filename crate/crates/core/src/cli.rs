//! Command-line front end.
//!
//! Every subcommand accepts `--config <file.json>` whose keys are the flag
//! names with underscores; explicit flags win over file values. The seed
//! falls back to `SKEWSHADOW_SEED` and then to 0.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when the exact oracle
//! disagrees with the computed statistic.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::asymptotics::{
    default_horizon, ruin_probability_mc, solve_ruin_exponent, RateFunction, DEFAULT_RATE_TOL, DEFAULT_RUIN_TOL,
};
use crate::model::ModelParams;
use crate::montecarlo::{phase_sweep, with_threads};
use crate::shadow::{k_fast, oracle_radius, ShadowReport, DEFAULT_CROSS_CHECK_TOL, DEFAULT_ORACLE_TOL, DEFAULT_STAT_TOL};
use crate::walk::{derive_stream, format_real, parse_instance, write_instance, Instance, PseudoOrbit, WalkPath};

pub const SEED_ENV: &str = "SKEWSHADOW_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Consistency(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Consistency(_) => 3,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "skewshadow", version, about = "Shadowing radii and phase transitions for linear skew products")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ruin exponent b and critical exponent c0 = 1/b
    Exponent(ExponentArgs),
    /// Optimal shadowing radius of an instance file
    Radius(RadiusArgs),
    /// Draw one random instance and report its radius
    Simulate(SimulateArgs),
    /// Shadowing probability on an (n, c) grid with d = eps / n^c
    Sweep(SweepArgs),
    /// Monte Carlo ruin probabilities against the ruin exponent
    Ruin(RuinArgs),
    /// Left-tail rate function h(eps)
    Rate(RateArgs),
}

macro_rules! options {
    ($(#[$meta:meta])* $name:ident { $($(#[$fmeta:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, Args, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            /// JSON file with the same keys as the flags
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $(
                $(#[$fmeta])*
                #[arg(long)]
                pub $field: Option<$ty>,
            )*
        }

        impl $name {
            fn merged(self, base: Self) -> Self {
                Self {
                    config: self.config,
                    $($field: self.$field.or(base.$field),)*
                }
            }
        }
    };
}

options!(ExponentArgs {
    lambda0: f64,
    lambda1: f64,
    tol: f64,
    format: Format,
    output_path: PathBuf,
});

options!(RadiusArgs {
    /// Instance file (`skewshadow-instance v1`)
    instance: PathBuf,
    /// Allowed |oracle - d·K| relative to max(1, radius)
    tol: f64,
    format: Format,
    output_path: PathBuf,
});

options!(SimulateArgs {
    lambda0: f64,
    lambda1: f64,
    /// Number of steps N
    n: usize,
    /// Noise amplitude
    d: f64,
    seed: u64,
    /// Also write the drawn instance to this file
    emit_instance: PathBuf,
    format: Format,
    output_path: PathBuf,
});

options!(SweepArgs {
    lambda0: f64,
    lambda1: f64,
    epsilon: f64,
    #[arg(value_delimiter = ',')]
    c_values: Vec<f64>,
    #[arg(value_delimiter = ',')]
    n_values: Vec<usize>,
    samples: u64,
    seed: u64,
    /// Worker threads (0 = all cores); output does not depend on it
    threads: usize,
    format: Format,
    output_path: PathBuf,
});

options!(RuinArgs {
    lambda0: f64,
    lambda1: f64,
    /// Ruin levels C
    #[arg(value_delimiter = ',')]
    levels: Vec<f64>,
    /// Steps per walk (default ceil(10 C / v + 50 / v))
    horizon: usize,
    samples: u64,
    seed: u64,
    threads: usize,
    tol: f64,
    format: Format,
    output_path: PathBuf,
});

options!(RateArgs {
    lambda0: f64,
    lambda1: f64,
    /// Deviations to evaluate; defaults to an even grid on (0, v - a0]
    #[arg(value_delimiter = ',')]
    eps_values: Vec<f64>,
    /// Grid size when no eps values are given
    points: usize,
    tol: f64,
    format: Format,
    output_path: PathBuf,
});

fn load_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>, command: &str) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(map) = value.as_object_mut() {
        if let Some(c) = map.remove("command") {
            if c.as_str() != Some(command) {
                return Err(CliError::Config(format!(
                    "{}: config is for command {c}, not '{command}'",
                    path.display()
                )));
            }
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn seed_or_env(seed: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}='{text}' is not a 64-bit unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn params(lambda0: Option<f64>, lambda1: Option<f64>) -> Result<ModelParams, CliError> {
    let l0 = lambda0.ok_or_else(|| config_err("missing --lambda0"))?;
    let l1 = lambda1.ok_or_else(|| config_err("missing --lambda1"))?;
    ModelParams::validate(l0, l1).map_err(config_err)
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{name} must be finite and > 0 (got {x})")))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Field {
    Int(u64),
    Real(f64),
    Bool(bool),
    Null,
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Int(i) => i.to_string(),
            Field::Real(x) => format_real(*x),
            Field::Bool(b) => b.to_string(),
            Field::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Int(i) => Value::from(*i),
            Field::Real(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Field::Bool(b) => Value::Bool(*b),
            Field::Null => Value::Null,
        }
    }
}

/// Output of a command: named columns and one or more rows.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Field>>,
    /// Rendered as a single JSON object rather than an array.
    record: bool,
}

impl Table {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Field::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let objects: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let map: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(k, v)| (k.to_string(), v.json()))
                            .collect();
                        Value::Object(map)
                    })
                    .collect();
                let value = if self.record && objects.len() == 1 {
                    objects.into_iter().next().expect("one row")
                } else {
                    Value::Array(objects)
                };
                let mut out = serde_json::to_string_pretty(&value).expect("serializable");
                out.push('\n');
                out
            }
        }
    }
}

/// Writes through a temporary file in the target directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(table: &Table, format: Format, output: Option<&Path>) -> Result<(), CliError> {
    let text = table.render(format);
    match output {
        Some(path) => write_atomic(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn witness_fields(report: &ShadowReport) -> (Field, Field) {
    match report.witness {
        Some((k, n)) => (Field::Int(k as u64), Field::Int(n as u64)),
        None => (Field::Null, Field::Null),
    }
}

fn run_exponent(args: ExponentArgs) -> Result<(), CliError> {
    let p = params(args.lambda0, args.lambda1)?;
    let tol = positive("tol", args.tol.unwrap_or(DEFAULT_RUIN_TOL))?;
    let normalized = p.normalize();
    let s = solve_ruin_exponent(&normalized, tol).map_err(config_err)?;
    let table = Table {
        columns: vec!["lambda0", "lambda1", "inverted", "b", "c0", "residual"],
        rows: vec![vec![
            Field::Real(p.lambda0()),
            Field::Real(p.lambda1()),
            Field::Bool(normalized.inverted()),
            Field::Real(s.b),
            Field::Real(s.c0),
            Field::Real(s.residual),
        ]],
        record: true,
    };
    emit(&table, args.format.unwrap_or(Format::Json), args.output_path.as_deref())
}

fn shadow_row(walk: &WalkPath, report: &ShadowReport) -> Vec<Field> {
    let (wk, wn) = witness_fields(report);
    vec![
        Field::Int(walk.len() as u64),
        Field::Real(report.k_statistic),
        wk,
        wn,
        Field::Real(report.radius),
        Field::Real(report.optimal_y0),
        Field::Real(report.d_bound),
    ]
}

const SHADOW_COLUMNS: [&str; 7] = ["N", "K", "witness_k", "witness_n", "radius", "optimal_y0", "D"];

fn run_radius(args: RadiusArgs) -> Result<(), CliError> {
    let path = args.instance.ok_or_else(|| config_err("missing --instance"))?;
    let tol = positive("tol", args.tol.unwrap_or(DEFAULT_CROSS_CHECK_TOL))?;
    let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let instance = parse_instance(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let (walk, pseudo) = instance
        .build()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let report = k_fast(&walk, &pseudo, DEFAULT_STAT_TOL).map_err(config_err)?;
    let oracle = oracle_radius(&walk, &pseudo, DEFAULT_ORACLE_TOL).map_err(config_err)?;
    let gap = (oracle.radius - report.radius).abs();
    let agreement = gap <= tol * report.radius.max(1.0);

    let mut columns = SHADOW_COLUMNS.to_vec();
    columns.extend(["oracle_radius", "agreement"]);
    let mut row = shadow_row(&walk, &report);
    row.extend([Field::Real(oracle.radius), Field::Bool(agreement)]);
    let table = Table {
        columns,
        rows: vec![row],
        record: true,
    };
    emit(&table, args.format.unwrap_or(Format::Json), args.output_path.as_deref())?;
    if agreement {
        Ok(())
    } else {
        Err(CliError::Consistency(format!(
            "oracle radius {} differs from d·K = {} by {gap:e}",
            oracle.radius, report.radius
        )))
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let p = params(args.lambda0, args.lambda1)?;
    let n = args.n.ok_or_else(|| config_err("missing --n"))?;
    let d = args.d.unwrap_or(1.0);
    if !(d.is_finite() && d >= 0.0) {
        return Err(CliError::Config(format!("d must be finite and >= 0 (got {d})")));
    }
    let seed = seed_or_env(args.seed)?;
    let mut stream = derive_stream(seed, 0);
    let symbols = (0..n).map(|_| stream.next_bit()).collect();
    let walk = WalkPath::from_symbols(p, symbols);
    let noise = (0..n).map(|_| stream.next_noise()).collect();
    let pseudo = PseudoOrbit::new(&walk, noise, d).map_err(config_err)?;
    if let Some(path) = &args.emit_instance {
        write_atomic(path, &write_instance(&Instance::from_parts(&walk, &pseudo)))?;
    }
    let report = k_fast(&walk, &pseudo, DEFAULT_STAT_TOL).map_err(config_err)?;
    let mut columns = vec!["seed", "d"];
    columns.extend(SHADOW_COLUMNS);
    let mut row = vec![Field::Int(seed), Field::Real(d)];
    row.extend(shadow_row(&walk, &report));
    let table = Table {
        columns,
        rows: vec![row],
        record: true,
    };
    emit(&table, args.format.unwrap_or(Format::Json), args.output_path.as_deref())
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let p = params(args.lambda0, args.lambda1)?;
    let eps = positive("epsilon", args.epsilon.unwrap_or(1.0))?;
    let c_values = args.c_values.ok_or_else(|| config_err("missing --c-values"))?;
    let n_values = args.n_values.ok_or_else(|| config_err("missing --n-values"))?;
    let samples = args.samples.unwrap_or(2000);
    let seed = seed_or_env(args.seed)?;
    let normalized = p.normalize();
    let cells = with_threads(args.threads.unwrap_or(0), || {
        phase_sweep(&normalized, eps, &c_values, &n_values, samples, seed)
    })
    .map_err(config_err)?
    .map_err(config_err)?;
    let rows = cells
        .iter()
        .map(|cell| {
            let e = &cell.estimate;
            vec![
                Field::Int(cell.n as u64),
                Field::Real(cell.c),
                Field::Real(cell.l),
                Field::Int(e.samples),
                Field::Int(e.successes),
                Field::Real(e.p_hat),
                Field::Real(e.ci_low),
                Field::Real(e.ci_high),
                Field::Int(e.master_seed),
            ]
        })
        .collect();
    let table = Table {
        columns: vec!["n", "c", "L", "samples", "successes", "p_hat", "ci_low", "ci_high", "seed"],
        rows,
        record: false,
    };
    emit(&table, args.format.unwrap_or(Format::Csv), args.output_path.as_deref())
}

fn run_ruin(args: RuinArgs) -> Result<(), CliError> {
    let p = params(args.lambda0, args.lambda1)?;
    let levels = args.levels.ok_or_else(|| config_err("missing --levels"))?;
    if levels.is_empty() {
        return Err(config_err("--levels is empty"));
    }
    for &c in &levels {
        positive("ruin level C", c)?;
    }
    let samples = args.samples.unwrap_or(100_000);
    let seed = seed_or_env(args.seed)?;
    let tol = positive("tol", args.tol.unwrap_or(DEFAULT_RUIN_TOL))?;
    let normalized = p.normalize();
    let b = solve_ruin_exponent(&normalized, tol).map_err(config_err)?.b;
    let rows = with_threads(args.threads.unwrap_or(0), || {
        levels
            .iter()
            .map(|&c| {
                let horizon = args.horizon.unwrap_or_else(|| default_horizon(&normalized, c));
                let e = ruin_probability_mc(&normalized, c, horizon, samples, seed)?;
                Ok(vec![
                    Field::Real(c),
                    Field::Int(horizon as u64),
                    Field::Int(e.samples),
                    Field::Real(e.p_hat),
                    Field::Real(e.ci_low),
                    Field::Real(e.ci_high),
                    Field::Real(-e.p_hat.ln() / c),
                    Field::Real(b),
                ])
            })
            .collect::<Result<Vec<_>, crate::asymptotics::AsymptoticsError>>()
    })
    .map_err(config_err)?
    .map_err(config_err)?;
    let table = Table {
        columns: vec![
            "C",
            "horizon",
            "samples",
            "p_hat",
            "ci_low",
            "ci_high",
            "minus_log_p_over_C",
            "b_reference",
        ],
        rows,
        record: false,
    };
    emit(&table, args.format.unwrap_or(Format::Csv), args.output_path.as_deref())
}

fn run_rate(args: RateArgs) -> Result<(), CliError> {
    let p = params(args.lambda0, args.lambda1)?;
    let tol = positive("tol", args.tol.unwrap_or(DEFAULT_RATE_TOL))?;
    let rate = RateFunction::new(p.normalize());
    let eps_values = match args.eps_values {
        Some(v) if v.is_empty() => return Err(config_err("--eps-values is empty")),
        Some(v) => v,
        None => {
            let points = args.points.unwrap_or(100);
            if points == 0 {
                return Err(config_err("--points must be >= 1"));
            }
            (1..=points)
                .map(|i| rate.max_eps() * (i as f64 / points as f64))
                .collect()
        }
    };
    let rows = eps_values
        .iter()
        .map(|&eps| {
            let h = rate.eval(eps, tol).map_err(config_err)?;
            Ok(vec![Field::Real(eps), Field::Real(h)])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let table = Table {
        columns: vec!["eps", "h"],
        rows,
        record: false,
    };
    emit(&table, args.format.unwrap_or(Format::Csv), args.output_path.as_deref())
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Exponent(a) => {
            let base = load_config(a.config.as_deref(), "exponent")?;
            run_exponent(a.merged(base))
        }
        Command::Radius(a) => {
            let base = load_config(a.config.as_deref(), "radius")?;
            run_radius(a.merged(base))
        }
        Command::Simulate(a) => {
            let base = load_config(a.config.as_deref(), "simulate")?;
            run_simulate(a.merged(base))
        }
        Command::Sweep(a) => {
            let base = load_config(a.config.as_deref(), "sweep")?;
            run_sweep(a.merged(base))
        }
        Command::Ruin(a) => {
            let base = load_config(a.config.as_deref(), "ruin")?;
            run_ruin(a.merged(base))
        }
        Command::Rate(a) => {
            let base = load_config(a.config.as_deref(), "rate")?;
            run_rate(a.merged(base))
        }
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
