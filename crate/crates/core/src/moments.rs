//! Moment sweeps `Σ* L(1/2, f⊗χ_{8d})^k` and the smoothed second moment
//! against its predicted main term, with self-describing reports.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::enumerate_twist_moduli;
use crate::error::{Error, Result};
use crate::kernels::WeightJ;
use crate::lfun::{EulerConstants, TwistEngine, TwistLValue};
use crate::sum::Accumulator;

/// Largest `X` accepted by the moment sweeps.
pub const MAX_X: f64 = 1e6;

/// Default per-value tolerance of the moment sweeps.
pub const DEFAULT_MOMENT_TOL: f64 = 1e-2;

/// How the `𝒜/ℬ` cutoff `𝒩` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalNPolicy {
    /// `𝒩 = X / (log X)³`.
    LogCube,
    Fixed(f64),
}

impl CalNPolicy {
    pub fn resolve(&self, x: f64) -> f64 {
        match *self {
            CalNPolicy::LogCube => x / x.ln().powi(3),
            CalNPolicy::Fixed(n) => n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Everything that determines a moment run. `threads` and `output` do not
/// affect results and are left out of [`config_hash`](Self::config_hash).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub x_list: Vec<f64>,
    pub k_list: Vec<u32>,
    pub tol: f64,
    pub cal_n: CalNPolicy,
    pub weight: WeightJ,
    pub prime_cutoff: usize,
    pub smoothing_y: f64,
    pub smoothed: bool,
    pub table_len: usize,
    pub seed: u64,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub output: Option<std::path::PathBuf>,
    #[serde(skip)]
    pub format: Option<OutputFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            x_list: vec![1e4],
            k_list: vec![2],
            tol: DEFAULT_MOMENT_TOL,
            cal_n: CalNPolicy::LogCube,
            weight: WeightJ::default(),
            prime_cutoff: 100_000,
            smoothing_y: 15_000.0,
            smoothed: false,
            table_len: 0,
            seed: 0,
            threads: 1,
            output: None,
            format: None,
        }
    }
}

impl RunConfig {
    /// SHA-256 of the canonical JSON form (keys sorted), hex encoded.
    pub fn config_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_list.iter().any(|&x| !(x > 0.0 && x <= MAX_X)) {
            return Err(Error::Config(format!("every X must lie in (0, {MAX_X:e}]")));
        }
        if self.k_list.iter().any(|&k| k == 0) {
            return Err(Error::Config("moment order must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol = {} must be positive", self.tol)));
        }
        Ok(())
    }
}

/// One moment computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub x: f64,
    pub k: u32,
    pub raw_sum: Option<f64>,
    pub smoothed_sum: Option<f64>,
    pub predicted_main: Option<f64>,
    pub ratio: Option<f64>,
    /// Number of moduli `d` summed over.
    pub d_count: usize,
    pub config_hash: String,
    /// The quantity the sum is compared with.
    pub target: String,
    pub tolerance_met: bool,
    /// Moduli whose central value missed the tolerance.
    pub tolerance_failures: usize,
    pub max_tail_bound: f64,
}

pub const RAW_TARGET: &str = "sum* L(1/2, f x chi_8d)^k over 0 < 8d < X";
pub const RAW_SECOND_TARGET: &str = "C_f X log X";
pub const SMOOTHED_TARGET: &str = "(2X/pi^2) J~(1) L(1, sym2 f)^3 H2(0,0) log X";

/// Run `f` on a pool with `threads` workers (the global pool when 0).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0 && x <= MAX_X) {
        return Err(Error::Config(format!("X = {x} must lie in (0, {MAX_X:e}]")));
    }
    Ok(())
}

/// Central values for every `d`, in ascending `d`.
pub fn central_values(engine: &TwistEngine, ds: &[u64], tol: f64) -> Result<Vec<TwistLValue>> {
    ds.par_iter()
        .map(|&d| engine.evaluate(d, tol, None).map(|e| e.value))
        .collect()
}

fn tolerance_summary(values: &[TwistLValue]) -> (usize, f64) {
    let failures = values.iter().filter(|v| !v.tolerance_met).count();
    let worst = values.iter().map(|v| v.tail_bound).fold(0.0, f64::max);
    (failures, worst)
}

/// `Σ_{v} v^k` in the given order.
pub fn power_sum(values: &[f64], k: u32) -> f64 {
    let mut acc = Accumulator::new();
    for &v in values {
        acc.add(v.powi(k as i32));
    }
    acc.value()
}

/// `M(k) = Σ*_{0<8d<X, (d,2)=1} L(1/2, f⊗χ_{8d})^k`. For `k = 2` and given
/// constants the report carries the prediction `C_f X log X`.
pub fn moment_raw(
    engine: &TwistEngine,
    x: f64,
    k: u32,
    tol: f64,
    constants: Option<&EulerConstants>,
    config_hash: &str,
) -> Result<(MomentReport, Vec<TwistLValue>)> {
    check_x(x)?;
    if k == 0 {
        return Err(Error::Config("moment order must be positive".into()));
    }
    let ds = enumerate_twist_moduli(x);
    let values = central_values(engine, &ds, tol)?;
    let raw: Vec<f64> = values.iter().map(|v| v.value).collect();
    let raw_sum = power_sum(&raw, k);
    let (failures, worst) = tolerance_summary(&values);
    let predicted = match (k, constants) {
        (2, Some(c)) if x > 1.0 => Some(c.c_f * x * x.ln()),
        _ => None,
    };
    let report = MomentReport {
        x,
        k,
        raw_sum: Some(raw_sum),
        smoothed_sum: None,
        predicted_main: predicted,
        ratio: predicted.filter(|&p| p > 0.0).map(|p| raw_sum / p),
        d_count: ds.len(),
        config_hash: config_hash.to_string(),
        target: if predicted.is_some() { RAW_SECOND_TARGET } else { RAW_TARGET }.to_string(),
        tolerance_met: failures == 0,
        tolerance_failures: failures,
        max_tail_bound: worst,
    };
    Ok((report, values))
}

/// Odd squarefree `d` with `J(8d/X) > 0`, ascending.
pub fn smoothed_moduli(x: f64, weight: &WeightJ) -> Vec<u64> {
    enumerate_twist_moduli(weight.hi * x)
        .into_iter()
        .filter(|&d| weight.eval(8.0 * d as f64 / x) > 0.0)
        .collect()
}

/// `(2X/π²) J̃(1) L(1, sym² f)³ ℋ₂(0,0) log X = C_f J̃(1) X log X`.
pub fn predicted_smoothed_main(x: f64, weight: &WeightJ, constants: &EulerConstants) -> f64 {
    debug_assert!((constants.c_f - 2.0 / (PI * PI) * constants.l1_sym2.powi(3) * constants.h2_00).abs() <= 1e-12 * constants.c_f.abs());
    constants.c_f * weight.integral() * x * x.ln()
}

/// `Σ*_{(d,2)=1} L(1/2, f⊗χ_{8d})² J(8d/X)` against its predicted main term.
pub fn moment_smoothed(
    engine: &TwistEngine,
    x: f64,
    weight: &WeightJ,
    tol: f64,
    constants: &EulerConstants,
    config_hash: &str,
) -> Result<(MomentReport, Vec<TwistLValue>)> {
    check_x(weight.hi * x)?;
    let ds = smoothed_moduli(x, weight);
    let values = central_values(engine, &ds, tol)?;
    let mut acc = Accumulator::new();
    for v in &values {
        acc.add(v.value * v.value * weight.eval(8.0 * v.d as f64 / x));
    }
    let smoothed = acc.value();
    let predicted = predicted_smoothed_main(x, weight, constants);
    let (failures, worst) = tolerance_summary(&values);
    let report = MomentReport {
        x,
        k: 2,
        raw_sum: None,
        smoothed_sum: Some(smoothed),
        predicted_main: Some(predicted),
        ratio: (predicted > 0.0).then(|| smoothed / predicted),
        d_count: ds.len(),
        config_hash: config_hash.to_string(),
        target: SMOOTHED_TARGET.to_string(),
        tolerance_met: failures == 0,
        tolerance_failures: failures,
        max_tail_bound: worst,
    };
    Ok((report, values))
}

/// `Σ𝒜²J`, `Σℬ²J`, `Σ𝒜ℬJ` at one cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ABMomentRecord {
    pub x: f64,
    pub cal_n: f64,
    pub sum_a2: f64,
    pub sum_b2: f64,
    pub sum_ab: f64,
    pub smoothed_sum: f64,
    /// `|Σ𝒜²J + 2Σ𝒜ℬJ + Σℬ²J − Σ L²J| / Σ L²J`.
    pub identity_residual: f64,
    /// `|Σ𝒜ℬJ| ≤ √(Σ𝒜²J Σℬ²J)`.
    pub cauchy_schwarz: bool,
    pub d_count: usize,
    pub config_hash: String,
    pub tolerance_met: bool,
}

pub fn ab_moment_scan(
    engine: &TwistEngine,
    x: f64,
    cal_n: f64,
    weight: &WeightJ,
    tol: f64,
    config_hash: &str,
) -> Result<ABMomentRecord> {
    check_x(weight.hi * x)?;
    let ds = smoothed_moduli(x, weight);
    let evals: Vec<_> = ds
        .par_iter()
        .map(|&d| engine.evaluate(d, tol, Some(cal_n)))
        .collect::<Result<_>>()?;
    let (mut a2, mut b2, mut ab, mut l2) = (Accumulator::new(), Accumulator::new(), Accumulator::new(), Accumulator::new());
    let mut met = true;
    for e in &evals {
        let s = e.split.as_ref().expect("split requested");
        let j = weight.eval(8.0 * s.d as f64 / x);
        a2.add(s.a_val * s.a_val * j);
        b2.add(s.b_val * s.b_val * j);
        ab.add(s.a_val * s.b_val * j);
        l2.add(e.value.value * e.value.value * j);
        met &= e.value.tolerance_met;
    }
    let (a2, b2, ab, l2) = (a2.value(), b2.value(), ab.value(), l2.value());
    let identity = ((a2 + 2.0 * ab + b2) - l2).abs() / l2.abs().max(f64::MIN_POSITIVE);
    Ok(ABMomentRecord {
        x,
        cal_n,
        sum_a2: a2,
        sum_b2: b2,
        sum_ab: ab,
        smoothed_sum: l2,
        identity_residual: identity,
        cauchy_schwarz: ab.abs() <= (a2 * b2).sqrt() * (1.0 + 1e-12),
        d_count: ds.len(),
        config_hash: config_hash.to_string(),
        tolerance_met: met,
    })
}

// ---------------------------------------------------------------------------
// Serialization

const REPORT_COLUMNS: &str =
    "x,k,raw_sum,smoothed_sum,predicted_main,ratio,d_count,tolerance_met,tolerance_failures,max_tail_bound,target,config_hash";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_reports_csv(reports: &[MomentReport], mut out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(e.to_string());
    writeln!(out, "{REPORT_COLUMNS}").map_err(io)?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:e},\"{}\",{}",
            r.x,
            r.k,
            opt(r.raw_sum),
            opt(r.smoothed_sum),
            opt(r.predicted_main),
            opt(r.ratio),
            r.d_count,
            r.tolerance_met,
            r.tolerance_failures,
            r.max_tail_bound,
            r.target,
            r.config_hash
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn write_reports_json(reports: &[MomentReport], mut out: impl Write) -> Result<()> {
    let text = serde_json::to_string_pretty(reports).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Error::Config(e.to_string()))
}

/// Per-`d` values as `d,value,n_cut,tail_bound,tolerance_met`, with values
/// in shortest round-trip form.
pub fn write_values_csv(values: &[TwistLValue], mut out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(e.to_string());
    writeln!(out, "d,value,n_cut,tail_bound,tolerance_met").map_err(io)?;
    for v in values {
        writeln!(out, "{},{:e},{},{:e},{}", v.d, v.value, v.n_cut, v.tail_bound, v.tolerance_met).map_err(io)?;
    }
    Ok(())
}

pub fn read_values_csv(input: impl BufRead) -> Result<Vec<TwistLValue>> {
    let bad = |line: usize| Error::Cache(format!("malformed per-d value file at line {line}"));
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Cache(e.to_string()))?;
        if i == 0 {
            if line != "d,value,n_cut,tail_bound,tolerance_met" {
                return Err(bad(1));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(i + 1));
        }
        out.push(TwistLValue {
            d: f[0].parse().map_err(|_| bad(i + 1))?,
            value: f[1].parse().map_err(|_| bad(i + 1))?,
            n_cut: f[2].parse().map_err(|_| bad(i + 1))?,
            tail_bound: f[3].parse().map_err(|_| bad(i + 1))?,
            tolerance_met: f[4].parse().map_err(|_| bad(i + 1))?,
        });
    }
    Ok(out)
}
