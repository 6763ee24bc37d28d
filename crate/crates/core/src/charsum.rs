//! Brute-force quadratic character sums
//! `S(M, N, t) = Σ_{M≤|m|<2M} |Σ_n λ(n) n^{−1/2−it} G(n/N) (m/n)|²` and the
//! fundamental-discriminant variant `S♭`, Poisson summation over the
//! twisting modulus, the inflation inequalities, and empirical shape scans.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, kronecker, FundamentalDiscriminant, Sieve};
use crate::error::{Error, Result};
use crate::gauss::gauss_closed;
use crate::kernels::{PartitionG, TestFunctionF};
use crate::modform::EigenformCoefficients;
use crate::sum::{Accumulator, ComplexAccumulator};

/// Largest `M·N` accepted by the brute-force sums.
pub const WORK_BOUND: f64 = 1e8;

/// Which `m` enter the outer sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    AllIntegers,
    FundamentalDiscriminants,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::AllIntegers => "all",
            Flavor::FundamentalDiscriminants => "fundamental",
        }
    }

    fn admits(self, m: i64) -> bool {
        match self {
            Flavor::AllIntegers => true,
            Flavor::FundamentalDiscriminants => FundamentalDiscriminant::new(m).is_some(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharSumQuery {
    pub m: f64,
    pub n: f64,
    pub t: f64,
    pub flavor: Flavor,
}

/// `m` with `M ≤ |m| < 2M`, negatives first, admitted by the flavor.
pub fn outer_moduli(m_scale: f64, flavor: Flavor) -> Vec<i64> {
    let lo = m_scale.ceil() as i64;
    let hi = (2.0 * m_scale).ceil() as i64;
    let mut out: Vec<i64> = (lo..hi).rev().map(|m| -m).collect();
    out.extend(lo..hi);
    out.retain(|&m| m != 0 && flavor.admits(m));
    out
}

/// Integers `n` with `G(n/N) ≠ 0`.
fn inner_range(n_scale: f64) -> (usize, usize) {
    let (a, b) = PartitionG::SUPPORT;
    let lo = ((a * n_scale).floor() as usize + 1).max(1);
    let hi = (b * n_scale).ceil() as usize;
    (lo, hi.saturating_sub(1).max(lo.saturating_sub(1)))
}

fn check_work(coeffs: &EigenformCoefficients, m_scale: f64, n_scale: f64) -> Result<(usize, usize)> {
    if !(m_scale >= 1.0 && n_scale > 0.0) {
        return Err(Error::OutOfRange(format!("M = {m_scale}, N = {n_scale}")));
    }
    if m_scale * n_scale > WORK_BOUND {
        return Err(Error::WorkBound(format!("M·N = {:e} exceeds {WORK_BOUND:e}", m_scale * n_scale)));
    }
    let (lo, hi) = inner_range(n_scale);
    if hi > coeffs.n_max {
        return Err(Error::TableTooShort {
            needed: hi,
            available: coeffs.n_max,
        });
    }
    Ok((lo, hi))
}

/// `λ(n) n^{−1/2−it} G(n/N)` for `n` in `lo..=hi`.
fn inner_coefficients(coeffs: &EigenformCoefficients, lo: usize, hi: usize, n_scale: f64, t: f64) -> Vec<Complex64> {
    let g = PartitionG;
    (lo..=hi)
        .map(|n| {
            let nf = n as f64;
            let phase = -t * nf.ln();
            Complex64::from_polar(coeffs.lambda(n) / nf.sqrt() * g.eval(nf / n_scale), phase)
        })
        .collect()
}

/// `S(M, N, t)` (or `S♭`) for several `t` sharing one Kronecker row per `m`.
pub fn s_brute_multi(
    coeffs: &EigenformCoefficients,
    m_scale: f64,
    n_scale: f64,
    ts: &[f64],
    flavor: Flavor,
) -> Result<Vec<f64>> {
    let (lo, hi) = check_work(coeffs, m_scale, n_scale)?;
    if lo > hi {
        return Ok(vec![0.0; ts.len()]);
    }
    let rows: Vec<Vec<Complex64>> = ts.iter().map(|&t| inner_coefficients(coeffs, lo, hi, n_scale, t)).collect();
    let ms = outer_moduli(m_scale, flavor);
    let per_m: Vec<Vec<f64>> = ms
        .par_iter()
        .map(|&m| {
            let chi: Vec<i8> = (lo..=hi).map(|n| kronecker(m, n as i64)).collect();
            rows.iter()
                .map(|row| {
                    let mut acc = ComplexAccumulator::new();
                    for (c, &x) in row.iter().zip(&chi) {
                        if x != 0 {
                            acc.add(c * x as f64);
                        }
                    }
                    acc.value().norm_sqr()
                })
                .collect()
        })
        .collect();
    Ok((0..ts.len())
        .map(|j| {
            let mut acc = Accumulator::new();
            for v in &per_m {
                acc.add(v[j]);
            }
            acc.value()
        })
        .collect())
}

/// `S(M, N, t)` or `S♭(M, N, t)` by direct double summation.
pub fn s_brute(coeffs: &EigenformCoefficients, q: &CharSumQuery) -> Result<f64> {
    Ok(s_brute_multi(coeffs, q.m, q.n, &[q.t], q.flavor)?[0])
}

/// `Σ_n λ(n) n^{−1/2−it} (m/n) w(n)` over `n ≤ n_max`.
fn twisted_sum(coeffs: &EigenformCoefficients, m: i64, t: f64, n_max: usize, w: impl Fn(usize) -> f64) -> Complex64 {
    let mut acc = ComplexAccumulator::new();
    for n in 1..=n_max {
        let chi = kronecker(m, n as i64);
        let wn = w(n);
        if chi == 0 || wn == 0.0 {
            continue;
        }
        let nf = n as f64;
        acc.add(Complex64::from_polar(coeffs.lambda(n) * chi as f64 * wn / nf.sqrt(), -t * nf.ln()));
    }
    acc.value()
}

// ---------------------------------------------------------------------------
// Inflation inequalities

/// Both inflation steps at one `(m, N, t, p)`:
/// `|Σ|² ≤ 2|Σ_{mp²}|² + 2δ(p∤m)|Σ_{np}|²` and
/// `|Σ_{np}|² ≤ (2λ(p)²/p)|Σ_{G(np/N)}|² + (2/p²)|Σ_{G(np²/N)}|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationCheck {
    pub m: i64,
    pub n_scale: f64,
    pub t: f64,
    pub p: u64,
    pub lhs: f64,
    /// `|Σ λ(n) n^{−1/2−it} (mp²/n) G(n/N)|²`.
    pub twisted: f64,
    /// `|Σ λ(np) (np)^{−1/2−it} (m/n) G(np/N)|²`.
    pub shifted: f64,
    pub first_rhs: f64,
    pub second_rhs: f64,
    /// True when no `n` in the support of `G(n/N)` is divisible by `p`.
    pub p_branch_empty: bool,
    pub holds: bool,
}

/// Relative slack for rounding in the inequality checks.
const INEQUALITY_SLACK: f64 = 1e-12;

pub fn check_inflation_pointwise(coeffs: &EigenformCoefficients, m: i64, n_scale: f64, t: f64, p: u64) -> Result<InflationCheck> {
    if p < 3 || !Sieve::shared().is_prime(p) {
        return Err(Error::OutOfRange(format!("p = {p} must be an odd prime")));
    }
    let (_, hi) = inner_range(n_scale);
    let needed = hi * p as usize;
    if needed > coeffs.n_max {
        return Err(Error::TableTooShort {
            needed,
            available: coeffs.n_max,
        });
    }
    let g = PartitionG;
    let pf = p as f64;
    let w = |n: usize| g.eval(n as f64 / n_scale);
    let lhs = twisted_sum(coeffs, m, t, hi, w).norm_sqr();
    let mp2 = m * (p * p) as i64;
    let twisted = twisted_sum(coeffs, mp2, t, hi, w).norm_sqr();
    let shifted = {
        let mut acc = ComplexAccumulator::new();
        for n in 1..=hi / p as usize + 1 {
            let chi = kronecker(m, n as i64);
            let np = n * p as usize;
            let wn = g.eval(np as f64 / n_scale);
            if chi == 0 || wn == 0.0 {
                continue;
            }
            let x = np as f64;
            acc.add(Complex64::from_polar(coeffs.lambda(np) * chi as f64 * wn / x.sqrt(), -t * x.ln()));
        }
        acc.value().norm_sqr()
    };
    let p_divides_m = m % p as i64 == 0;
    let first_rhs = 2.0 * twisted + if p_divides_m { 0.0 } else { 2.0 * shifted };
    let by_p = twisted_sum(coeffs, m, t, hi, |n| g.eval((n * p as usize) as f64 / n_scale)).norm_sqr();
    let by_p2 = twisted_sum(coeffs, m, t, hi, |n| g.eval((n * (p * p) as usize) as f64 / n_scale)).norm_sqr();
    let lp = coeffs.lambda(p as usize);
    let second_rhs = 2.0 * lp * lp / pf * by_p + 2.0 / (pf * pf) * by_p2;
    let (lo, hi_n) = inner_range(n_scale);
    let p_branch_empty = (lo..=hi_n).all(|n| n % p as usize != 0);
    let le = |a: f64, b: f64| a <= b + INEQUALITY_SLACK * (a.abs() + b.abs()) + 1e-300;
    Ok(InflationCheck {
        m,
        n_scale,
        t,
        p,
        lhs,
        twisted,
        shifted,
        first_rhs,
        second_rhs,
        p_branch_empty,
        holds: le(lhs, first_rhs) && le(shifted, second_rhs),
    })
}

// ---------------------------------------------------------------------------
// Poisson summation over the modulus

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoissonVariant {
    /// `Σ_d (d/n) F(d/Z) = (Z/n) Σ_k G_k(n) F̌(kZ/n)`.
    Simple,
    /// `Σ_{(d,2)=1} (d/n) F(d/Z) = (Z/2n)(2/n) Σ_k (−1)^k G_k(n) F̌(kZ/2n)`.
    Odd,
    /// `Σ_{(d,2)=1} (8d/n₁n₂) F(d/X)` against the square main term plus the `k ≠ 0` sum.
    TwoModuli,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonCheckResult {
    pub variant: PoissonVariant,
    pub n1: u64,
    pub n2: u64,
    /// `Z` or `X`.
    pub scale: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Largest `|k|` on the dual side.
    pub k_trunc: i64,
    pub deviation: f64,
}

/// Truncation of `Σ_d` at `|d| ≤ Z·R` with `F(x) < 1e−18 F(0)` beyond `R`.
const POISSON_TAIL_EPS: f64 = 1e-18;

/// Smallest radius `R` with `F(x) < eps·F(0)` for `|x| > R`, cached per `F`.
fn lhs_radius(f: &TestFunctionF) -> f64 {
    use std::sync::Mutex;
    static CACHE: Mutex<Vec<(u64, u64, f64)>> = Mutex::new(Vec::new());
    let key = (f.c0.to_bits(), f.c1.to_bits());
    let mut cache = CACHE.lock().expect("radius cache");
    if let Some(&(_, _, r)) = cache.iter().find(|e| (e.0, e.1) == key) {
        return r;
    }
    let r = f.tail_radius(POISSON_TAIL_EPS);
    cache.push((key.0, key.1, r));
    r
}

/// `Σ_{|d| ≤ ZR, d ≡ parity} (d/n) F(d/Z)`, summed symmetrically from the outside in.
fn lhs_sum(f: &TestFunctionF, n: u64, z: f64, odd_only: bool, twist: i64) -> f64 {
    let d_max = (z * lhs_radius(f)).ceil() as i64;
    let values: Vec<f64> = (0..=d_max).into_par_iter().map(|d| f.eval(d as f64 / z)).collect();
    let mut acc = Accumulator::new();
    for d in (0..=d_max).rev() {
        if odd_only && d % 2 == 0 {
            continue;
        }
        let fd = values[d as usize];
        for s in if d == 0 { &[1i64][..] } else { &[1, -1][..] } {
            let chi = kronecker(twist * s * d, n as i64);
            if chi != 0 {
                acc.add(chi as f64 * fd);
            }
        }
    }
    acc.value()
}

/// Poisson summation (`Simple` or `Odd`) for odd `n` at scale `Z`.
pub fn poisson_verify(f: &TestFunctionF, n: u64, z: f64, variant: PoissonVariant) -> Result<PoissonCheckResult> {
    if n % 2 == 0 || n > 10_000 || z <= 0.0 {
        return Err(Error::OutOfRange(format!("n = {n} must be odd and at most 10⁴, Z = {z} positive")));
    }
    let nf = n as f64;
    let supp = f.hat_support();
    let (lhs, rhs, k_trunc) = match variant {
        PoissonVariant::Simple => {
            let lhs = lhs_sum(f, n, z, false, 1);
            let k_max = (supp * nf / z).floor() as i64;
            let mut acc = Accumulator::new();
            for k in -k_max..=k_max {
                acc.add(gauss_closed(k, n)?.value() * f.check(k as f64 * z / nf));
            }
            (lhs, z / nf * acc.value(), k_max)
        }
        PoissonVariant::Odd => {
            let lhs = lhs_sum(f, n, z, true, 1);
            let k_max = (supp * 2.0 * nf / z).floor() as i64;
            let mut acc = Accumulator::new();
            for k in -k_max..=k_max {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc.add(sign * gauss_closed(k, n)?.value() * f.check(k as f64 * z / (2.0 * nf)));
            }
            let two = kronecker(2, n as i64) as f64;
            (lhs, z / (2.0 * nf) * two * acc.value(), k_max)
        }
        PoissonVariant::TwoModuli => {
            return Err(Error::Config("use poisson2_verify for two moduli".into()));
        }
    };
    Ok(PoissonCheckResult {
        variant,
        n1: n,
        n2: 1,
        scale: z,
        lhs,
        rhs,
        k_trunc,
        deviation: (lhs - rhs).abs(),
    })
}

fn is_square(n: u64) -> bool {
    let r = (n as f64).sqrt().round() as u64;
    r * r == n
}

/// `Σ_{(d,2)=1} (8d/n₁n₂) F(d/X)` against
/// `(X/2)[δ□(n₁n₂) F̂(0) ∏_{p|n₁n₂}(1−1/p) + Σ_{k≠0} (−1)^k G_k(n₁n₂)/(n₁n₂) F̌(kX/2n₁n₂)]`.
pub fn poisson2_verify(f: &TestFunctionF, n1: u64, n2: u64, x: f64) -> Result<PoissonCheckResult> {
    let n = n1 * n2;
    if n % 2 == 0 || n > 10_000 || x <= 0.0 {
        return Err(Error::OutOfRange(format!("n1·n2 = {n} must be odd and at most 10⁴, X = {x} positive")));
    }
    let nf = n as f64;
    let lhs = lhs_sum(f, n, x, true, 8);
    let main = if is_square(n) {
        let phi_ratio: f64 = factorize(n)?.factors.iter().map(|&(p, _)| 1.0 - 1.0 / p as f64).product();
        f.hat(0.0) * phi_ratio
    } else {
        0.0
    };
    let k_max = (f.hat_support() * 2.0 * nf / x).floor() as i64;
    let mut acc = Accumulator::new();
    for k in (-k_max..=k_max).filter(|&k| k != 0) {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * gauss_closed(k, n)?.value() / nf * f.check(k as f64 * x / (2.0 * nf)));
    }
    let rhs = x / 2.0 * (main + acc.value());
    Ok(PoissonCheckResult {
        variant: PoissonVariant::TwoModuli,
        n1,
        n2,
        scale: x,
        lhs,
        rhs,
        k_trunc: k_max,
        deviation: (lhs - rhs).abs(),
    })
}

// ---------------------------------------------------------------------------
// Shape scan

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    pub m: f64,
    pub n: f64,
    pub t: f64,
    pub flavor: Flavor,
    pub value: f64,
    /// `value / ((1+|t|)² (M + N log(2 + N/M)))`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeScan {
    pub rows: Vec<ShapeRow>,
    pub max_ratio: f64,
    pub median_ratio: f64,
}

impl ShapeScan {
    pub fn max_over_median(&self) -> f64 {
        self.max_ratio / self.median_ratio
    }
}

pub fn shape_denominator(m: f64, n: f64, t: f64) -> f64 {
    (1.0 + t.abs()).powi(2) * (m + n * (2.0 + n / m).ln())
}

/// Default grid `M, N ∈ {10², 10³, 10⁴}`, `t ∈ {0, 1, 5}`.
pub fn default_shape_grid() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (vec![1e2, 1e3, 1e4], vec![1e2, 1e3, 1e4], vec![0.0, 1.0, 5.0])
}

/// `S♭(M, N, t)` and its normalized ratio over a product grid.
pub fn prop_key_shape_scan(coeffs: &EigenformCoefficients, ms: &[f64], ns: &[f64], ts: &[f64], flavor: Flavor) -> Result<ShapeScan> {
    let mut rows = Vec::new();
    for &m in ms {
        for &n in ns {
            let values = s_brute_multi(coeffs, m, n, ts, flavor)?;
            for (&t, value) in ts.iter().zip(values) {
                rows.push(ShapeRow {
                    m,
                    n,
                    t,
                    flavor,
                    value,
                    ratio: value / shape_denominator(m, n, t),
                });
            }
        }
    }
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = if ratios.is_empty() {
        f64::NAN
    } else if ratios.len() % 2 == 1 {
        ratios[ratios.len() / 2]
    } else {
        0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2])
    };
    Ok(ShapeScan {
        max_ratio: ratios.last().copied().unwrap_or(f64::NAN),
        median_ratio,
        rows,
    })
}

/// CSV with columns `M,N,t,flavor,value,ratio`.
pub fn write_shape_csv(rows: &[ShapeRow], mut out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(e.to_string());
    writeln!(out, "M,N,t,flavor,value,ratio").map_err(io)?;
    for r in rows {
        writeln!(out, "{},{},{},{},{:e},{:e}", r.m, r.n, r.t, r.flavor.name(), r.value, r.ratio).map_err(io)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Single-character bound

/// `N₀ = min(N, m²(1+|t|)²/N)`.
pub fn effective_length(m: i64, n_scale: f64, t: f64) -> f64 {
    let mf = m as f64;
    n_scale.min(mf * mf * (1.0 + t.abs()).powi(2) / n_scale)
}

/// Largest `|Σ_n λ(n)n^{−1/2−it}G(n/N)(m/n)| / (√N₀ log(N₀+2))` over the grid.
pub fn single_sum_constant(coeffs: &EigenformCoefficients, ms: &[i64], ns: &[f64], ts: &[f64]) -> Result<f64> {
    let g = PartitionG;
    let mut worst = 0.0f64;
    for &n_scale in ns {
        let (_, hi) = check_work(coeffs, 1.0, n_scale)?;
        for &m in ms {
            for &t in ts {
                let s = twisted_sum(coeffs, m, t, hi, |n| g.eval(n as f64 / n_scale)).norm();
                let n0 = effective_length(m, n_scale, t);
                worst = worst.max(s / (n0.sqrt() * (n0 + 2.0).ln()));
            }
        }
    }
    Ok(worst)
}
