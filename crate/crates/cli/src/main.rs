//! `twistmoment`: coefficient tables, Gauss sums, twisted central values,
//! Euler constants, moment sweeps, character-sum scans and self-checks.
//!
//! Exit codes: 0 success, 1 verification or tolerance failure, 2 usage or
//! configuration error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use twistmoment_core::charsum::{default_shape_grid, prop_key_shape_scan, s_brute, write_shape_csv, CharSumQuery, Flavor};
use twistmoment_core::gauss::{gauss_brute, gauss_closed, BRUTE_LIMIT};
use twistmoment_core::moments::{
    ab_moment_scan, moment_raw, moment_smoothed, with_threads, write_reports_csv, write_reports_json, CalNPolicy,
    MomentReport, OutputFormat, RunConfig, DEFAULT_MOMENT_TOL,
};
use twistmoment_core::modform::{CACHE_DIR_ENV, MAX_TABLE};
use twistmoment_core::verify::{self, Outcome, IDENTITY_SUITES};
use twistmoment_core::{constant_cf, sym2_coefficients, EigenformCoefficients, Error, TwistEngine, WeightJ};

#[derive(Parser)]
#[command(name = "twistmoment", version, about = "Second moment of quadratic twists of the discriminant form")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory holding the cached coefficient table.
    #[arg(long, global = true, env = CACHE_DIR_ENV)]
    cache_dir: Option<PathBuf>,
    /// Read coefficients from this file instead of building them.
    #[arg(long, global = true)]
    coefficients: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// τ(n) and λ(n) for a range of n.
    Tau {
        #[arg(long, default_value_t = 1)]
        from: usize,
        #[arg(long, default_value_t = 20)]
        to: usize,
    },
    /// Closed-form quadratic Gauss sum G_k(n), with brute force when small.
    Gauss {
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        #[arg(long)]
        n: u64,
    },
    /// Central values L(1/2, f⊗χ_8d) for odd squarefree d.
    Lvalue {
        #[arg(long, required = true, num_args = 1..)]
        d: Vec<u64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Also report the split at this cutoff.
        #[arg(long)]
        caln: Option<f64>,
    },
    /// L(1, sym² f), ℋ₂(0,0) and C_f with error estimates.
    Constants {
        #[arg(long, default_value_t = 100_000)]
        prime_cutoff: usize,
        #[arg(long, default_value_t = 15_000.0)]
        smoothing_y: f64,
    },
    /// Moments of central values.
    Moments {
        #[arg(long, required = true, num_args = 1..)]
        x: Vec<f64>,
        #[arg(long, num_args = 1.., default_values_t = [2u32])]
        k: Vec<u32>,
        #[arg(long, default_value_t = DEFAULT_MOMENT_TOL)]
        tol: f64,
        /// Smoothed second moment against its main term.
        #[arg(long)]
        smoothed: bool,
        /// Emit the split sums at this cutoff (default X/(log X)³ with --ab).
        #[arg(long)]
        caln: Option<f64>,
        /// Emit split sums instead of moment reports.
        #[arg(long)]
        ab: bool,
        #[arg(long, default_value_t = 100_000)]
        prime_cutoff: usize,
        #[arg(long, default_value_t = 15_000.0)]
        smoothing_y: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Normalized character sums, one cell or the default grid.
    Charsum {
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        n: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, value_enum, default_value_t = FlavorArg::Fundamental)]
        flavor: FlavorArg,
        /// Run the 3×3×3 grid instead of one cell.
        #[arg(long)]
        scan: bool,
    },
    /// Identity suites: one of the names below or `all`.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        /// Residual threshold of the functional-equation suite.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    All,
    Fundamental,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::All => Flavor::AllIntegers,
            FlavorArg::Fundamental => Flavor::FundamentalDiscriminants,
        }
    }
}

enum Failure {
    Config(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::OutOfRange(_) | Error::Cache(_) | Error::TableTooShort { .. } => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Check(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.common.threads;
    let outcome = with_threads(threads, || run(&cli)).unwrap_or_else(|e| Err(e.into()));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("twistmoment: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("twistmoment: {msg}");
            ExitCode::from(2)
        }
    }
}

fn sink(common: &Common) -> Result<Box<dyn Write>, Failure> {
    Ok(match &common.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: Serialize>(rows: &[T], common: &Common) -> CliResult {
    let mut out = sink(common)?;
    match common.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(rows).map_err(|e| Failure::Config(e.to_string()))?;
            writeln!(out, "{text}")?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in rows {
                w.serialize(r).map_err(|e| Failure::Config(e.to_string()))?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Coefficients covering `n_max`: imported, cached, or built in memory.
fn coefficients(common: &Common, n_max: usize) -> Result<EigenformCoefficients, Failure> {
    let n_max = n_max.clamp(2, MAX_TABLE);
    let coeffs = if let Some(path) = &common.coefficients {
        EigenformCoefficients::read_cache(path, Some(n_max))?
    } else if let Some(dir) = &common.cache_dir {
        std::fs::create_dir_all(dir)?;
        EigenformCoefficients::load_or_build(dir, n_max)?
    } else {
        EigenformCoefficients::build_delta(n_max)?
    };
    if coeffs.n_max < n_max {
        return Err(Error::TableTooShort {
            needed: n_max,
            available: coeffs.n_max,
        }
        .into());
    }
    Ok(coeffs)
}

/// Table length at which central values at conductor `q` meet `tol`.
fn table_for_conductor(q: f64, tol: f64) -> usize {
    (3.0 * q * (3.0 + (1.0 / tol).ln()) / (2.0 * std::f64::consts::PI)).ceil().max(1000.0) as usize
}

fn table_for_constants(prime_cutoff: usize, smoothing_y: f64) -> usize {
    prime_cutoff.max((160.0 * smoothing_y).ceil() as usize)
}

fn run(cli: &Cli) -> CliResult {
    let common = &cli.common;
    match &cli.command {
        Command::Tau { from, to } => tau(common, *from, *to),
        Command::Gauss { k, n } => gauss(common, *k, *n),
        Command::Lvalue { d, tol, caln } => lvalue(common, d, *tol, *caln),
        Command::Constants { prime_cutoff, smoothing_y } => {
            let coeffs = coefficients(common, table_for_constants(*prime_cutoff, *smoothing_y))?;
            let sym2 = sym2_coefficients(&coeffs, (160.0 * smoothing_y).ceil() as usize)?;
            let c = constant_cf(&coeffs, &sym2, *prime_cutoff, *smoothing_y)?;
            emit(&[c], common)
        }
        Command::Moments {
            x,
            k,
            tol,
            smoothed,
            caln,
            ab,
            prime_cutoff,
            smoothing_y,
            seed,
        } => {
            let config = RunConfig {
                x_list: x.clone(),
                k_list: k.clone(),
                tol: *tol,
                cal_n: caln.map_or(CalNPolicy::LogCube, CalNPolicy::Fixed),
                weight: WeightJ::default(),
                prime_cutoff: *prime_cutoff,
                smoothing_y: *smoothing_y,
                smoothed: *smoothed,
                table_len: 0,
                seed: *seed,
                threads: common.threads,
                output: common.output.clone(),
                format: Some(match common.format {
                    Format::Csv => OutputFormat::Csv,
                    Format::Json => OutputFormat::Json,
                }),
            };
            moments(common, config, *ab)
        }
        Command::Charsum { m, n, t, flavor, scan } => charsum(common, *m, *n, *t, (*flavor).into(), *scan),
        Command::Verify { suite, tol, seed } => verify_suites(common, suite, *tol, *seed),
    }
}

#[derive(Serialize)]
struct TauRow {
    n: usize,
    tau: String,
    lambda: f64,
}

fn tau(common: &Common, from: usize, to: usize) -> CliResult {
    if from == 0 || from > to {
        return Err(Failure::Config(format!("need 1 <= from <= to, got {from}..{to}")));
    }
    let coeffs = coefficients(common, to)?;
    let rows: Vec<TauRow> = (from..=to)
        .map(|n| TauRow {
            n,
            tau: coeffs.tau(n).to_string(),
            lambda: coeffs.lambda(n),
        })
        .collect();
    emit(&rows, common)
}

#[derive(Serialize)]
struct GaussRow {
    k: i64,
    n: u64,
    /// Exact value `coeff · √radicand`.
    coeff: String,
    radicand: u64,
    value: f64,
    brute_re: Option<f64>,
    brute_im: Option<f64>,
}

fn gauss(common: &Common, k: i64, n: u64) -> CliResult {
    let exact = gauss_closed(k, n)?;
    let brute = if n <= BRUTE_LIMIT { Some(gauss_brute(k, n)?) } else { None };
    emit(
        &[GaussRow {
            k,
            n,
            coeff: exact.coeff.to_string(),
            radicand: exact.radicand,
            value: exact.value(),
            brute_re: brute.map(|b| b.re),
            brute_im: brute.map(|b| b.im),
        }],
        common,
    )
}

#[derive(Serialize)]
struct LRow {
    d: i64,
    value: f64,
    n_cut: usize,
    tail_bound: f64,
    tolerance_met: bool,
    cal_n: Option<f64>,
    a_val: Option<f64>,
    b_val: Option<f64>,
}

fn lvalue(common: &Common, ds: &[u64], tol: f64, caln: Option<f64>) -> CliResult {
    let q = 8.0 * ds.iter().copied().max().unwrap_or(1) as f64;
    let q = q.max(caln.unwrap_or(0.0));
    let coeffs = coefficients(common, table_for_conductor(q, tol))?;
    let engine = TwistEngine::new(&coeffs);
    let mut rows = Vec::new();
    for &d in ds {
        let ev = engine.evaluate(d, tol, caln)?;
        rows.push(LRow {
            d: ev.value.d,
            value: ev.value.value,
            n_cut: ev.value.n_cut,
            tail_bound: ev.value.tail_bound,
            tolerance_met: ev.value.tolerance_met,
            cal_n: ev.split.as_ref().map(|s| s.cal_n),
            a_val: ev.split.as_ref().map(|s| s.a_val),
            b_val: ev.split.as_ref().map(|s| s.b_val),
        });
    }
    emit(&rows, common)?;
    let missed = rows.iter().filter(|r| !r.tolerance_met).count();
    if missed > 0 {
        return Err(Failure::Check(format!("{missed} value(s) missed tol = {tol:e}")));
    }
    Ok(())
}

fn moments(common: &Common, mut config: RunConfig, ab: bool) -> CliResult {
    config.validate()?;
    let weight = config.weight;
    let x_max = config.x_list.iter().copied().fold(0.0, f64::max);
    let q_max = if config.smoothed || ab { weight.hi * x_max } else { x_max };
    let needs_constants = config.smoothed || config.k_list.contains(&2);
    let mut n_max = table_for_conductor(q_max, config.tol);
    if needs_constants {
        n_max = n_max.max(table_for_constants(config.prime_cutoff, config.smoothing_y));
    }
    let coeffs = coefficients(common, n_max)?;
    if coeffs.kappa % 4 != 0 {
        return Err(Failure::Config(format!(
            "weight {} is not divisible by 4; moment runs need kappa = 0 mod 4",
            coeffs.kappa
        )));
    }
    config.table_len = coeffs.n_max.min(n_max.min(MAX_TABLE));
    let hash = config.config_hash();
    let engine = TwistEngine::new(&coeffs);

    if ab {
        let mut rows = Vec::new();
        for &x in &config.x_list {
            rows.push(ab_moment_scan(&engine, x, config.cal_n.resolve(x), &weight, config.tol, &hash)?);
        }
        return emit(&rows, common);
    }

    let constants = if needs_constants {
        let sym2 = sym2_coefficients(&coeffs, (160.0 * config.smoothing_y).ceil() as usize)?;
        Some(constant_cf(&coeffs, &sym2, config.prime_cutoff, config.smoothing_y)?)
    } else {
        None
    };
    let mut reports: Vec<MomentReport> = Vec::new();
    for &x in &config.x_list {
        if config.smoothed {
            let c = constants.as_ref().expect("constants computed");
            reports.push(moment_smoothed(&engine, x, &weight, config.tol, c, &hash)?.0);
        } else {
            for &k in &config.k_list {
                reports.push(moment_raw(&engine, x, k, config.tol, constants.as_ref(), &hash)?.0);
            }
        }
    }
    let mut out = sink(common)?;
    match common.format {
        Format::Csv => write_reports_csv(&reports, &mut out)?,
        Format::Json => write_reports_json(&reports, &mut out)?,
    }
    out.flush()?;
    let missed: usize = reports.iter().map(|r| r.tolerance_failures).sum();
    if missed > 0 {
        return Err(Failure::Check(format!(
            "{missed} central value(s) missed tol = {:e}; see tolerance_met in the output",
            config.tol
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct CharSumRow {
    m: f64,
    n: f64,
    t: f64,
    flavor: &'static str,
    value: f64,
}

fn charsum(common: &Common, m: Option<f64>, n: Option<f64>, t: f64, flavor: Flavor, scan: bool) -> CliResult {
    if scan {
        let (ms, ns, ts) = default_shape_grid();
        let n_top = ns.iter().copied().fold(0.0, f64::max);
        let coeffs = coefficients(common, (2.0 * n_top).ceil() as usize + 2)?;
        let result = prop_key_shape_scan(&coeffs, &ms, &ns, &ts, flavor)?;
        return match common.format {
            Format::Json => emit(&[result], common),
            Format::Csv => {
                let mut out = sink(common)?;
                write_shape_csv(&result.rows, &mut out)?;
                out.flush()?;
                Ok(())
            }
        };
    }
    let (Some(m), Some(n)) = (m, n) else {
        return Err(Failure::Config("charsum needs --m and --n, or --scan".into()));
    };
    let coeffs = coefficients(common, (2.0 * n).ceil() as usize + 2)?;
    let value = s_brute(&coeffs, &CharSumQuery { m, n, t, flavor })?;
    emit(
        &[CharSumRow {
            m,
            n,
            t,
            flavor: flavor.name(),
            value,
        }],
        common,
    )
}

fn verify_suites(common: &Common, suite: &str, tol: f64, seed: u64) -> CliResult {
    let names: Vec<&str> = if suite == "all" {
        IDENTITY_SUITES.to_vec()
    } else if IDENTITY_SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(Failure::Config(format!(
            "unknown suite '{suite}' (expected all or one of {})",
            IDENTITY_SUITES.join(", ")
        )));
    };
    let needs_table = names.iter().any(|n| !matches!(*n, "gauss" | "kernel" | "poisson"));
    let coeffs = coefficients(common, if needs_table { verify::IDENTITY_TABLE } else { 1000 })?;
    let mut outcomes: Vec<Outcome> = Vec::new();
    for name in names {
        let o = verify::run_identity_suite(name, &coeffs, tol, seed)?;
        eprintln!("{o}");
        outcomes.push(o);
    }
    emit(&outcomes, common)?;
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed: {}", failed.join(", "))))
    }
}
