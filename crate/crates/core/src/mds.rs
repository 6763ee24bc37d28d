//! The multiple Dirichlet series
//! `Z(α, β, γ; k₁, q) = Σ_{k₂≥1} ΣΣ_{(n₁n₂, 2q)=1} λ(n₁)λ(n₂) n₁^{−α} n₂^{−β} k₂^{−2γ} G_{k₁k₂²}(n₁n₂)/(n₁n₂)`,
//! its Euler factors, the factorization `Z = L(1/2+α, f⊗χ_m) L(1/2+β, f⊗χ_m) Y`,
//! and the diagonal series `𝒢₁`, `𝒢₂`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, gcd, is_squarefree, kronecker, FundamentalDiscriminant, Sieve};
use crate::error::{Error, Result};
use crate::gauss::normalized_local;
use crate::lfun::{l_value, Estimate};
use crate::modform::EigenformCoefficients;
use crate::sum::{Accumulator, ComplexAccumulator};

/// A point `(α, β, γ)` together with the parameters `k₁` and `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZPoint {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub k1: i64,
    pub q: u64,
}

impl ZPoint {
    pub fn new(alpha: Complex64, beta: Complex64, gamma: Complex64, k1: i64, q: u64) -> Result<Self> {
        if k1 == 0 || !is_squarefree(k1.unsigned_abs()) {
            return Err(Error::OutOfRange(format!("k1 = {k1} must be squarefree and nonzero")));
        }
        if q == 0 {
            return Err(Error::OutOfRange("q must be positive".into()));
        }
        if gamma.re <= 0.5 {
            return Err(Error::OutOfRange(format!("Re γ = {} must exceed 1/2", gamma.re)));
        }
        Ok(Self { alpha, beta, gamma, k1, q })
    }

    /// Real-parameter shorthand.
    pub fn real(alpha: f64, beta: f64, gamma: f64, k1: i64, q: u64) -> Result<Self> {
        Self::new(alpha.into(), beta.into(), gamma.into(), k1, q)
    }

    /// The discriminant `m` with `χ_m(n) = (k₁/n)` on odd `n`:
    /// `k₁` if `k₁ ≡ 1 mod 4`, else `4k₁`.
    pub fn character_modulus(&self) -> i64 {
        if self.k1.rem_euclid(4) == 1 {
            self.k1
        } else {
            4 * self.k1
        }
    }

    fn divides_2q(&self, p: u64) -> bool {
        p == 2 || self.q % p == 0
    }
}

fn cpow(p: f64, s: Complex64) -> Complex64 {
    (-s * p.ln()).exp()
}

/// `Σ_{i+j=n} λ(p^i)λ(p^j) x^i y^j` for `n = 0..=n_max`.
fn diagonal_sums(lambdas: &[f64], x: Complex64, y: Complex64, n_max: usize) -> Vec<Complex64> {
    let xs: Vec<Complex64> = (0..=n_max).map(|i| x.powu(i as u32) * lambdas[i]).collect();
    let ys: Vec<Complex64> = (0..=n_max).map(|j| y.powu(j as u32) * lambdas[j]).collect();
    (0..=n_max)
        .map(|n| {
            let mut acc = ComplexAccumulator::new();
            for i in 0..=n {
                acc.add(xs[i] * ys[n - i]);
            }
            acc.value()
        })
        .collect()
}

/// `(v_p(k₁), (k₁p^{−v}/p))` for an odd prime `p`.
fn k1_local(k1: i64, p: u64) -> (u32, i8) {
    if k1 % p as i64 == 0 {
        (1, kronecker(k1 / p as i64, p as i64))
    } else {
        (0, kronecker(k1, p as i64))
    }
}

/// `ℱ(p)`: the prime-power triple sum over `n₁ + n₂ ≤ trunc`, `k₂ ≤ trunc`,
/// with `G_{k₁p^{2k₂}}(p^{n₁+n₂})` from the Gauss-sum case table, and
/// `(1 − p^{−2γ})^{−1}` when `p | 2q`.
pub fn local_factor_f(coeffs: &EigenformCoefficients, p: u64, pt: &ZPoint, trunc: usize) -> Complex64 {
    if pt.divides_2q(p) {
        return (Complex64::new(1.0, 0.0) - cpow(p as f64, 2.0 * pt.gamma)).inv();
    }
    let pf = p as f64;
    let lambdas = coeffs.prime_power_lambdas(p as usize, trunc);
    let sums = diagonal_sums(&lambdas, cpow(pf, pt.alpha), cpow(pf, pt.beta), trunc);
    let (v1, sym) = k1_local(pt.k1, p);
    let step = cpow(pf, 2.0 * pt.gamma);
    let mut acc = ComplexAccumulator::new();
    let mut weight = Complex64::new(1.0, 0.0);
    for k2 in 0..=trunc {
        let v = v1 + 2 * k2 as u32;
        let mut inner = ComplexAccumulator::new();
        for (n, s) in sums.iter().enumerate() {
            let g = normalized_local(Some(v), sym, pf, n as u32);
            if g != 0.0 {
                inner.add(s * g);
            }
        }
        acc.add(weight * inner.value());
        weight *= step;
    }
    acc.value()
}

/// `ℱ(p)` from the case-by-case evaluation
/// `Σ_{k₂} p^{−2k₂γ} (Σ_{h≤k₂} φ(p^{2h})p^{−2h} S_{2h} + T_{k₂})` with
/// `T = −S_{2k₂+2}/p` for `p | k₁` and `T = χ_{k₁}(p) S_{2k₂+1}/√p` otherwise,
/// `S_n = Σ_{i+j=n} λ(p^i)λ(p^j)p^{−iα−jβ}`, summed over `k₂ ≤ trunc`.
pub fn local_factor_closed(coeffs: &EigenformCoefficients, p: u64, pt: &ZPoint, trunc: usize) -> Complex64 {
    if pt.divides_2q(p) {
        return (Complex64::new(1.0, 0.0) - cpow(p as f64, 2.0 * pt.gamma)).inv();
    }
    let pf = p as f64;
    let n_max = 2 * trunc + 2;
    let lambdas = coeffs.prime_power_lambdas(p as usize, n_max);
    let sums = diagonal_sums(&lambdas, cpow(pf, pt.alpha), cpow(pf, pt.beta), n_max);
    let (v1, sym) = k1_local(pt.k1, p);
    let step = cpow(pf, 2.0 * pt.gamma);
    let mut acc = ComplexAccumulator::new();
    let mut even = ComplexAccumulator::new();
    let mut weight = Complex64::new(1.0, 0.0);
    for k2 in 0..=trunc {
        let phi = if k2 == 0 { 1.0 } else { 1.0 - 1.0 / pf };
        even.add(sums[2 * k2] * phi);
        let last = if v1 == 1 {
            -sums[2 * k2 + 2] / pf
        } else {
            sums[2 * k2 + 1] * (sym as f64 / pf.sqrt())
        };
        acc.add(weight * (even.value() + last));
        weight *= step;
    }
    acc.value()
}

/// Bound on the part of `ℱ(p)` dropped by [`local_factor_f`] at `trunc`,
/// from `|λ(p^i)| ≤ i + 1` and `|G_k(p^n)|/p^n ≤ 1`.
pub fn local_truncation_bound(p: u64, pt: &ZPoint, trunc: usize) -> f64 {
    if pt.divides_2q(p) {
        return 0.0;
    }
    let pf = p as f64;
    let x = pf.powf(-pt.alpha.re.min(pt.beta.re)).max(pf.powf(-pt.alpha.re.max(pt.beta.re)));
    let g = pf.powf(-2.0 * pt.gamma.re);
    let s_bound = |n: usize| ((n + 1) as f64).powi(3) * x.powi(n as i32);
    let mut total = 0.0;
    // Terms with k₂ ≤ trunc but n = n₁+n₂ > trunc (G vanishes beyond n = 2k₂+2).
    let k_lo = trunc.saturating_sub(2) / 2;
    for k2 in k_lo..=trunc {
        let tail: f64 = (trunc + 1..=2 * k2 + 2).map(s_bound).sum();
        total += g.powi(k2 as i32) * tail;
    }
    // Terms with k₂ > trunc.
    for k2 in trunc + 1..trunc + 80 {
        let all: f64 = (0..=2 * k2 + 2).map(s_bound).sum();
        total += g.powi(k2 as i32) * all;
    }
    total
}

/// `𝒢(p, s) = (1 − λ(p)χ(p)p^{−s} + χ(p)²p^{−2s})^{−1}`, the Euler factor of
/// `L(s, f⊗χ_m)` at `p`.
pub fn twisted_euler_factor(lambda_p: f64, chi_p: i8, p: f64, s: Complex64) -> Complex64 {
    let x = cpow(p, s);
    let c = chi_p as f64;
    (Complex64::new(1.0, 0.0) - x * (lambda_p * c) + x * x * (c * c)).inv()
}

/// `Y_p = ℱ(p) / (𝒢(p, 1/2+α) 𝒢(p, 1/2+β))`.
pub fn local_y(coeffs: &EigenformCoefficients, p: u64, pt: &ZPoint, trunc: usize) -> Complex64 {
    let chi = kronecker(pt.character_modulus(), p as i64);
    let lp = coeffs.lambda(p as usize);
    let half = Complex64::new(0.5, 0.0);
    let pf = p as f64;
    local_factor_f(coeffs, p, pt, trunc)
        / (twisted_euler_factor(lp, chi, pf, half + pt.alpha) * twisted_euler_factor(lp, chi, pf, half + pt.beta))
}

/// One row of the per-prime comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFactorReport {
    pub p: u64,
    /// [`local_factor_f`].
    pub direct: Complex64,
    /// `𝒢(p,1/2+α)𝒢(p,1/2+β)·Y_p` with `Y_p` from [`local_factor_closed`].
    pub factored: Complex64,
    pub deviation: f64,
    pub tail_estimate: f64,
}

/// Per-prime comparison of the two local evaluations for `p ≤ prime_cutoff`.
pub fn local_factor_reports(
    coeffs: &EigenformCoefficients,
    pt: &ZPoint,
    prime_cutoff: usize,
    trunc: usize,
) -> Result<Vec<LocalFactorReport>> {
    check_table(coeffs, prime_cutoff)?;
    let primes = Sieve::shared().primes_up_to(prime_cutoff);
    Ok(primes
        .par_iter()
        .map(|&p| {
            let p = p as u64;
            let direct = local_factor_f(coeffs, p, pt, trunc);
            let closed = local_factor_closed(coeffs, p, pt, trunc);
            let chi = kronecker(pt.character_modulus(), p as i64);
            let lp = coeffs.lambda(p as usize);
            let half = Complex64::new(0.5, 0.0);
            let l_part = twisted_euler_factor(lp, chi, p as f64, half + pt.alpha)
                * twisted_euler_factor(lp, chi, p as f64, half + pt.beta);
            let factored = l_part * (closed / l_part);
            LocalFactorReport {
                p,
                direct,
                factored,
                deviation: (direct - factored).norm(),
                tail_estimate: local_truncation_bound(p, pt, trunc) + 1e-14 * direct.norm(),
            }
        })
        .collect())
}

/// CSV with columns `p,direct_re,direct_im,factored_re,factored_im,deviation,tail_estimate`.
pub fn write_local_factor_csv(rows: &[LocalFactorReport], mut out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(e.to_string());
    writeln!(out, "p,direct_re,direct_im,factored_re,factored_im,deviation,tail_estimate").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.p, r.direct.re, r.direct.im, r.factored.re, r.factored.im, r.deviation, r.tail_estimate
        )
        .map_err(io)?;
    }
    Ok(())
}

fn check_table(coeffs: &EigenformCoefficients, n: usize) -> Result<()> {
    if n > coeffs.n_max {
        return Err(Error::TableTooShort {
            needed: n,
            available: coeffs.n_max,
        });
    }
    if n > Sieve::shared().bound() {
        return Err(Error::OutOfRange(format!("{n} exceeds the sieve")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Truncated direct sum

/// Direct evaluation of `Z` with its truncation estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZTruncated {
    pub value: Complex64,
    pub n: usize,
    pub k: usize,
    /// Estimated contribution of `n₁n₂ > n`.
    pub n_tail_estimate: f64,
    /// Estimated contribution of `k₂ > k`.
    pub k_tail_estimate: f64,
}

impl ZTruncated {
    pub fn estimate(&self) -> f64 {
        self.n_tail_estimate + self.k_tail_estimate
    }
}

/// `Z` summed over `k₂ ≤ k` and `n₁n₂ ≤ n` (hyperbolic truncation).
///
/// The `n`-sum depends on `(n₁, n₂)` only through `n₁n₂` in `G`, so the
/// coefficients are collapsed into the convolution
/// `c(n) = Σ_{n₁n₂=n} λ(n₁)n₁^{−α} λ(n₂)n₂^{−β}` and `G_{k₁k₂²}(n)/n` is
/// generated multiplicatively for each `k₂`.
///
/// Requires `min(Re α, Re β) > 1/2`. The `n`-tail is estimated from the
/// absolute mass of the last dyadic block, assuming terms of size
/// `n^{−σ−1/2}`; the `k`-tail from the largest absolute inner sum.
pub fn z_truncated(coeffs: &EigenformCoefficients, pt: &ZPoint, n: usize, k: usize) -> Result<ZTruncated> {
    let sigma = pt.alpha.re.min(pt.beta.re);
    if sigma <= 0.5 {
        return Err(Error::OutOfRange(format!("min(Re α, Re β) = {sigma} must exceed 1/2")));
    }
    if n < 2 || k < 1 {
        return Err(Error::OutOfRange("n ≥ 2 and k ≥ 1 required".into()));
    }
    check_table(coeffs, n)?;
    let sieve = Sieve::shared();
    let admissible = |m: usize| m % 2 == 1 && gcd(m as u64, pt.q) == 1;
    let a: Vec<Complex64> = (0..=n)
        .map(|m| {
            if m > 0 && admissible(m) {
                cpow(m as f64, pt.alpha) * coeffs.lambda(m)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let b: Vec<Complex64> = (0..=n)
        .map(|m| {
            if m > 0 && admissible(m) {
                cpow(m as f64, pt.beta) * coeffs.lambda(m)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
    for n1 in (1..=n).step_by(2) {
        if a[n1] == Complex64::new(0.0, 0.0) {
            continue;
        }
        for n2 in (1..=n / n1).step_by(2) {
            c[n1 * n2] += a[n1] * b[n2];
        }
    }
    // Odd n = p^β r with p the smallest prime factor.
    let mut head = vec![(0u64, 0u32, 0usize); n + 1];
    let mut symbol = vec![(0u32, 0i8); n + 1];
    for m in (3..=n).step_by(2) {
        let p = sieve.spf(m);
        let mut r = m;
        let mut beta = 0;
        while r % p == 0 {
            r /= p;
            beta += 1;
        }
        head[m] = (p as u64, beta, r);
        if r == 1 && beta == 1 {
            symbol[m] = k1_local(pt.k1, p as u64);
        }
    }
    let half = n / 2;
    let rows: Vec<(Complex64, f64, f64)> = (1..=k)
        .into_par_iter()
        .map(|k2| {
            let k2_primes = factorize(k2 as u64).map(|f| f.factors).unwrap_or_default();
            let mut g = vec![0.0f64; n + 1];
            g[1] = 1.0;
            let mut inner = ComplexAccumulator::new();
            let mut block = Accumulator::new();
            let mut total = Accumulator::new();
            inner.add(c[1]);
            total.add(c[1].norm());
            for m in (3..=n).step_by(2) {
                let (p, beta, r) = head[m];
                if g[r] == 0.0 || !admissible(m) {
                    continue;
                }
                let (v1, sym) = symbol[p as usize];
                let v2 = k2_primes.iter().find(|&&(q, _)| q == p).map_or(0, |&(_, e)| e);
                g[m] = g[r] * normalized_local(Some(v1 + 2 * v2), sym, p as f64, beta);
                if g[m] == 0.0 {
                    continue;
                }
                let term = c[m] * g[m];
                inner.add(term);
                total.add(term.norm());
                if m > half {
                    block.add(term.norm());
                }
            }
            (inner.value(), block.value(), total.value())
        })
        .collect();
    let mut value = ComplexAccumulator::new();
    let mut n_tail = Accumulator::new();
    let mut max_total = 0.0f64;
    for (i, (inner, block, total)) in rows.iter().enumerate() {
        let w = cpow((i + 1) as f64, 2.0 * pt.gamma);
        value.add(w * inner);
        n_tail.add(w.norm() * block);
        max_total = max_total.max(*total);
    }
    let g2 = 2.0 * pt.gamma.re;
    Ok(ZTruncated {
        value: value.value(),
        n,
        k,
        n_tail_estimate: n_tail.value() / (2f64.powf(sigma - 0.5) - 1.0),
        k_tail_estimate: max_total * (k as f64).powf(1.0 - g2) / (g2 - 1.0),
    })
}

/// `L(1/2+α, f⊗χ_m) L(1/2+β, f⊗χ_m) ∏_{p≤P} Y_p` with its Euler-tail estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZFactored {
    pub l_alpha: Complex64,
    pub l_beta: Complex64,
    pub y_product: Complex64,
    pub value: Complex64,
    pub prime_cutoff: usize,
    pub tail_estimate: f64,
}

/// The factored side at prime cutoff `P`. The tail `Σ_{p>P} |Y_p − 1|` is
/// estimated as `C P^{1−e}/((e−1) log P)`, `e = min(2 Re γ, 1 + 2σ)`, with
/// `C` the largest `|Y_p − 1| p^e` over `P/2 < p ≤ P`.
pub fn z_factored(coeffs: &EigenformCoefficients, pt: &ZPoint, prime_cutoff: usize) -> Result<ZFactored> {
    check_table(coeffs, prime_cutoff)?;
    let m = FundamentalDiscriminant::new(pt.character_modulus())
        .ok_or_else(|| Error::OutOfRange(format!("k1 = {} gives no discriminant", pt.k1)))?;
    let half = Complex64::new(0.5, 0.0);
    let l_alpha = l_value(coeffs, &m, half + pt.alpha)?;
    let l_beta = l_value(coeffs, &m, half + pt.beta)?;
    let primes = Sieve::shared().primes_up_to(prime_cutoff);
    let ys: Vec<Complex64> = primes.par_iter().map(|&p| local_y(coeffs, p as u64, pt, 24)).collect();
    let mut log = ComplexAccumulator::new();
    for y in &ys {
        log.add(y.ln());
    }
    let y_product = log.value().exp();
    let sigma = pt.alpha.re.min(pt.beta.re);
    let e = (2.0 * pt.gamma.re).min(1.0 + 2.0 * sigma);
    let pc = prime_cutoff as f64;
    let c = primes
        .iter()
        .zip(&ys)
        .filter(|(&p, _)| p as f64 > pc / 2.0)
        .map(|(&p, y)| (y - 1.0).norm() * (p as f64).powf(e))
        .fold(0.0, f64::max);
    let value = l_alpha * l_beta * y_product;
    Ok(ZFactored {
        l_alpha,
        l_beta,
        y_product,
        value,
        prime_cutoff,
        tail_estimate: value.norm() * c * pc.powf(1.0 - e) / ((e - 1.0) * pc.ln()),
    })
}

/// One rung of a truncation ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCheck {
    pub point: ZPoint,
    pub truncated: ZTruncated,
    pub factored: ZFactored,
    pub deviation: f64,
    pub estimate: f64,
}

/// Truncation ladders `(N, K, P)` for the factorization check.
pub const Z_LADDERS: [(usize, usize, usize); 3] = [(1_000, 100, 100), (10_000, 1_000, 1_000), (100_000, 1_000, 10_000)];

/// Compare the direct and factored sides at one rung.
pub fn verify_factorization(
    coeffs: &EigenformCoefficients,
    pt: &ZPoint,
    n: usize,
    k: usize,
    prime_cutoff: usize,
) -> Result<FactorizationCheck> {
    let truncated = z_truncated(coeffs, pt, n, k)?;
    let factored = z_factored(coeffs, pt, prime_cutoff)?;
    let deviation = (truncated.value - factored.value).norm();
    let estimate = truncated.estimate() + factored.tail_estimate;
    Ok(FactorizationCheck {
        point: *pt,
        truncated,
        factored,
        deviation,
        estimate,
    })
}

/// Largest `|Y_p − 1| p^{1−2c}` over primes `3 ≤ p ≤ prime_limit` with
/// `p ∤ q`, for each point. Empirical envelope constant.
pub fn y_regularity_envelope(coeffs: &EigenformCoefficients, points: &[ZPoint], prime_limit: usize, c: f64) -> Result<f64> {
    check_table(coeffs, prime_limit)?;
    let mut worst = 0.0f64;
    for pt in points {
        for &p in Sieve::shared().primes_up_to(prime_limit) {
            let p = p as u64;
            if pt.divides_2q(p) {
                continue;
            }
            let y = local_y(coeffs, p, pt, 40);
            worst = worst.max((y - 1.0).norm() * (p as f64).powf(1.0 - 2.0 * c));
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Diagonal series

/// Weight of the diagonal series: `∏_{p|n₁n₂}(1 − 1/p)` or `∏(1 − 1/(p+1))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagonalVariant {
    Phi,
    Shifted,
}

impl DiagonalVariant {
    pub fn local_weight(self, p: f64) -> f64 {
        match self {
            DiagonalVariant::Phi => 1.0 - 1.0 / p,
            DiagonalVariant::Shifted => 1.0 - 1.0 / (p + 1.0),
        }
    }
}

/// `ΣΣ_{n₁n₂ = □, 2∤n₁n₂, n₁,n₂ ≤ N} λ(n₁)λ(n₂) n₁^{−1/2−u} n₂^{−1/2−v} ∏_{p|n₁n₂} w(p)`.
///
/// Pairs are enumerated as `n₁ = a s²`, `n₂ = a t²` with `a` squarefree;
/// the weight of `n₁n₂` is `w(n₁)w(n₂)/w(a·gcd(s,t))`.
pub fn diagonal_series_g(coeffs: &EigenformCoefficients, variant: DiagonalVariant, u: f64, v: f64, n: usize) -> Result<f64> {
    check_table(coeffs, n)?;
    let sieve = Sieve::shared();
    let mut w = vec![1.0f64; n + 1];
    for m in 2..=n {
        let p = sieve.spf(m);
        let r = m / p;
        w[m] = if r % p == 0 { w[r] } else { w[r] * variant.local_weight(p as f64) };
    }
    let sq = crate::arith::squarefree_flags(n);
    let xu: Vec<f64> = (0..=n).map(|m| coeffs.lambda(m) * (m as f64).powf(-0.5 - u)).collect();
    let xv: Vec<f64> = (0..=n).map(|m| coeffs.lambda(m) * (m as f64).powf(-0.5 - v)).collect();
    let cores: Vec<usize> = (1..=n).step_by(2).filter(|&a| sq[a]).collect();
    let rows: Vec<f64> = cores
        .par_iter()
        .map(|&a| {
            let mut acc = Accumulator::new();
            let smax = ((n / a) as f64).sqrt() as usize + 1;
            for s in (1..=smax).step_by(2) {
                let n1 = a * s * s;
                if n1 > n {
                    break;
                }
                for t in (1..=smax).step_by(2) {
                    let n2 = a * t * t;
                    if n2 > n {
                        break;
                    }
                    let weight = w[n1] * w[n2] / w[a * gcd(s as u64, t as u64) as usize];
                    acc.add(xu[n1] * xv[n2] * weight);
                }
            }
            acc.value()
        })
        .collect();
    Ok(crate::sum::sum(&rows))
}

/// `𝒢₂(u, v) / (ζ(1+u+v) L(1+2u, sym²f) L(1+2v, sym²f) L(1+u+v, sym²f))`
/// from given values of the four L-functions.
pub fn diagonal_ratio(g: f64, zeta: f64, sym_2u: f64, sym_2v: f64, sym_uv: f64) -> f64 {
    g / (zeta * sym_2u * sym_2v * sym_uv)
}

/// `L(s, sym² f)` at real `s > 1` and `ζ(s)`, with the product `ζ(1+u+v)
/// L(1+2u) L(1+2v) L(1+u+v)` as an [`Estimate`].
pub fn diagonal_l_product(sym2: &crate::modform::Sym2Coefficients, u: f64, v: f64) -> Estimate {
    let n_max = sym2.n_max();
    let (a, ea) = crate::lfun::sym2_series(sym2, 1.0 + 2.0 * u, n_max);
    let (b, eb) = crate::lfun::sym2_series(sym2, 1.0 + 2.0 * v, n_max);
    let (c, ec) = crate::lfun::sym2_series(sym2, 1.0 + u + v, n_max);
    let z = crate::special::zeta(1.0 + u + v);
    let value = z * a * b * c;
    Estimate {
        value,
        error: value.abs() * (ea / a.abs() + eb / b.abs() + ec / c.abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lfun::{g1_local, g2_local, h2_at};
    use crate::modform::sym2_coefficients;
    use std::sync::OnceLock;

    fn table() -> &'static EigenformCoefficients {
        static T: OnceLock<EigenformCoefficients> = OnceLock::new();
        T.get_or_init(|| EigenformCoefficients::build_delta(200_000).unwrap())
    }

    #[test]
    fn rejects_bad_points() {
        assert!(ZPoint::real(1.0, 1.0, 1.0, 4, 1).is_err());
        assert!(ZPoint::real(1.0, 1.0, 0.5, 1, 1).is_err());
        assert!(ZPoint::real(1.0, 1.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn character_modulus_rule() {
        let m = |k1| ZPoint::real(1.0, 1.0, 1.0, k1, 1).unwrap().character_modulus();
        assert_eq!(m(5), 5);
        assert_eq!(m(-3), -3);
        assert_eq!(m(2), 8);
        assert_eq!(m(3), 12);
        assert_eq!(m(-1), -4);
        for k1 in [5i64, -3, 2, 3, -1, 7, -5, 13] {
            let mm = m(k1);
            assert!(FundamentalDiscriminant::new(mm).is_some());
            for n in (1..200i64).step_by(2) {
                assert_eq!(kronecker(mm, n), kronecker(k1, n));
            }
        }
    }

    #[test]
    fn factor_at_2q_is_exact() {
        let pt = ZPoint::real(1.0, 1.0, 1.0, 5, 3).unwrap();
        for p in [2u64, 3] {
            let f = local_factor_f(table(), p, &pt, 20);
            let want = 1.0 / (1.0 - (p as f64).powi(-2));
            assert!((f.re - want).abs() < 1e-15 && f.im == 0.0);
        }
    }

    #[test]
    fn factor_matches_case_formula() {
        let pts = [
            ZPoint::real(1.5, 1.5, 1.0, 1, 1).unwrap(),
            ZPoint::new(Complex64::new(1.0, 0.5), 1.2.into(), Complex64::new(1.1, -0.3), -3, 7).unwrap(),
            ZPoint::real(-0.05, 0.2, 0.6, 15, 1).unwrap(),
        ];
        for pt in &pts {
            for p in [3u64, 5, 7, 11, 101, 997] {
                let a = local_factor_f(table(), p, pt, 30);
                let b = local_factor_closed(table(), p, pt, 30);
                let bound = local_truncation_bound(p, pt, 30);
                assert!((a - b).norm() <= bound + 1e-13, "p = {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn factor_leading_terms() {
        let lam = |n: usize| table().lambda(n);
        // p | k1: 1 − (λ(p²)p^{−2α} + λ(p²)p^{−2β} + λ(p)²p^{−α−β})/p + O(p^{−2γ}).
        let pt = ZPoint::real(1.0, 1.5, 1.0, 101, 1).unwrap();
        let p = 101.0f64;
        let f = local_factor_f(table(), 101, &pt, 20);
        let lead = 1.0 - (lam(10201) * p.powf(-2.0) + lam(10201) * p.powf(-3.0) + lam(101).powi(2) * p.powf(-2.5)) / p;
        assert!((f.re - lead).abs() < 4.0 * p.powf(-2.0), "{} vs {lead}", f.re);
        // p ∤ k1: 1 + λ(p)χ(p)p^{−1/2}(p^{−α} + p^{−β}) + O(p^{−1−2σ} + p^{−2γ}).
        let pt = ZPoint::real(1.0, 1.5, 1.0, 5, 1).unwrap();
        for p in [101u64, 103, 107] {
            let pf = p as f64;
            let f = local_factor_f(table(), p, &pt, 20);
            let chi = kronecker(5, p as i64) as f64;
            let lead = 1.0 + lam(p as usize) * chi / pf.sqrt() * (pf.powf(-1.0) + pf.powf(-1.5));
            assert!((f.re - lead).abs() < 10.0 * pf.powf(-2.0), "p = {p}");
        }
    }

    #[test]
    fn local_reports_within_bound() {
        let pt = ZPoint::real(1.0, 1.0, 1.0, -7, 1).unwrap();
        let rows = local_factor_reports(table(), &pt, 500, 20).unwrap();
        assert_eq!(rows.len(), 95);
        for r in &rows {
            assert!(r.deviation <= r.tail_estimate, "p = {}", r.p);
        }
        let mut buf = Vec::new();
        write_local_factor_csv(&rows[..3], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("2,"));
    }

    #[test]
    fn truncated_matches_euler_product_of_local_factors() {
        // α = β = 3/2, γ = 1, k1 = 1, q = 1: Z against ∏ ℱ(p) directly.
        let pt = ZPoint::real(1.5, 1.5, 1.0, 1, 1).unwrap();
        let z = z_truncated(table(), &pt, 20_000, 2_000).unwrap();
        let mut log = ComplexAccumulator::new();
        for &p in Sieve::shared().primes_up_to(20_000) {
            log.add(local_factor_f(table(), p as u64, &pt, 24).ln());
        }
        let euler = log.value().exp();
        let tol = z.estimate() + 1e-3;
        assert!((z.value - euler).norm() < tol, "{} vs {euler} (tol {tol})", z.value);
    }

    #[test]
    fn factorization_small_ladder() {
        let pt = ZPoint::real(1.0, 1.0, 1.25, 5, 1).unwrap();
        let mut prev = f64::INFINITY;
        for &(n, k, p) in &Z_LADDERS[..2] {
            let chk = verify_factorization(table(), &pt, n, k, p).unwrap();
            assert!(chk.deviation <= chk.estimate, "{chk:?}");
            assert!(chk.deviation < prev);
            prev = chk.deviation;
        }
    }

    #[test]
    fn y_envelope_is_finite() {
        let pts = [
            ZPoint::real(-0.05, -0.05, 0.6, 1, 1).unwrap(),
            ZPoint::real(0.0, 0.3, 0.7, 5, 3).unwrap(),
        ];
        let c = y_regularity_envelope(table(), &pts, 200, 0.05).unwrap();
        assert!(c.is_finite() && c > 0.0 && c < 100.0, "{c}");
    }

    fn diagonal_brute(variant: DiagonalVariant, u: f64, v: f64, n: usize) -> f64 {
        let mut acc = 0.0;
        for n1 in (1..=n).step_by(2) {
            for n2 in (1..=n).step_by(2) {
                let prod = (n1 * n2) as u64;
                let r = (prod as f64).sqrt().round() as u64;
                if r * r != prod {
                    continue;
                }
                let f = factorize(prod).unwrap();
                let w: f64 = f.factors.iter().map(|&(p, _)| variant.local_weight(p as f64)).product();
                acc += table().lambda(n1) * table().lambda(n2) * (n1 as f64).powf(-0.5 - u) * (n2 as f64).powf(-0.5 - v) * w;
            }
        }
        acc
    }

    #[test]
    fn diagonal_small_enumeration() {
        // N = 9: (1,1), (1,9), (9,1), (3,3), (5,5), (7,7), (9,9).
        let l = |n: usize| table().lambda(n);
        let (u, v) = (1.0, 1.0);
        let want = 1.0
            + 2.0 * l(9) * 27f64.powi(-1) * (2.0 / 3.0)
            + l(3) * l(3) / 27.0 * (2.0 / 3.0)
            + l(5) * l(5) / 125.0 * (4.0 / 5.0)
            + l(7) * l(7) / 343.0 * (6.0 / 7.0)
            + l(9) * l(9) / 729.0 * (2.0 / 3.0);
        let got = diagonal_series_g(table(), DiagonalVariant::Phi, u, v, 9).unwrap();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        for variant in [DiagonalVariant::Phi, DiagonalVariant::Shifted] {
            for (u, v) in [(0.3, 0.3), (0.5, 1.0), (1.0, 0.4)] {
                let a = diagonal_series_g(table(), variant, u, v, 301).unwrap();
                let b = diagonal_brute(variant, u, v, 301);
                assert!((a - b).abs() < 1e-12, "{variant:?} {u} {v}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn variant_weight_ratio_at_three() {
        let lp = table().prime_power_lambdas(3, 120);
        let r = (g1_local(&lp, 3.0, 1.0, 1.0) - 1.0) / (g2_local(&lp, 3.0, 1.0, 1.0) - 1.0);
        assert!((r - (2.0 / 3.0) / (3.0 / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn diagonal_factorization_moderate() {
        let sym2 = sym2_coefficients(table(), 200_000).unwrap();
        let g = diagonal_series_g(table(), DiagonalVariant::Shifted, 0.5, 0.5, 200_000).unwrap();
        let l = diagonal_l_product(&sym2, 0.5, 0.5);
        let h = h2_at(table(), 0.5, 0.5, 100_000).unwrap();
        let ratio = g / l.value;
        assert!((ratio - h.value).abs() < 1e-3 * h.value.abs(), "{ratio} vs {}", h.value);
    }

    #[test]
    fn sym2_from_squares() {
        // L(s, sym² f) = ζ(2s) Σ λ(n²) n^{−s}: A(n) = Σ_{d²|n} λ((n/d²)²).
        let sym2 = sym2_coefficients(table(), 400).unwrap();
        for n in 1..=400usize {
            let mut a = 0.0;
            let mut d = 1;
            while d * d <= n {
                if n % (d * d) == 0 {
                    let r = n / (d * d);
                    a += table().lambda(r * r);
                }
                d += 1;
            }
            assert!((a - sym2.a[n]).abs() < 1e-9 * a.abs().max(1.0), "n = {n}");
        }
    }
}
