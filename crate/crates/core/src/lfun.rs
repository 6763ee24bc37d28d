//! Twisted L-values through the approximate functional equation, the
//! functional-equation transform check, and the Euler-product constants
//! `L(1, sym² f)`, `ℋ₂(u, v)` and `C_f`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, kronecker, FundamentalDiscriminant, Sieve};
use crate::error::{Error, Result};
use crate::kernels::{grave_bessel, grave_bessel_nodes, PartitionG};
use crate::modform::{EigenformCoefficients, Sym2Coefficients};
use crate::special::{gamma_q, ln_gamma};
use crate::sum::{Accumulator, ComplexAccumulator};

/// Root number `i^κ ε(d)` with `ε(d) = sign(d)`.
pub fn epsilon_sign(d: i64, kappa: u32) -> Result<i8> {
    if kappa % 2 == 1 {
        return Err(Error::Config(format!("odd weight {kappa}: the root number is not real")));
    }
    if d == 0 {
        return Err(Error::OutOfRange("discriminant 0".into()));
    }
    let ik: i8 = if kappa % 4 == 0 { 1 } else { -1 };
    Ok(if d > 0 { ik } else { -ik })
}

/// A central value with its truncation data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistLValue {
    pub d: i64,
    pub value: f64,
    pub n_cut: usize,
    pub tail_bound: f64,
    pub tolerance_met: bool,
}

/// `𝒜(8d, 𝒩)` and `ℬ(8d) = L(1/2, f⊗χ_{8d}) − 𝒜(8d, 𝒩)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ABSplit {
    pub d: i64,
    pub cal_n: f64,
    pub a_val: f64,
    pub b_val: f64,
    /// Bound on the truncation error of `a_val`.
    pub a_tail_bound: f64,
}

/// Central value together with an optional `𝒜/ℬ` split from the same pass.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistEvaluation {
    pub value: TwistLValue,
    pub split: Option<ABSplit>,
}

// ---------------------------------------------------------------------------
// Central values of f ⊗ χ_{8d}

const BLOCK: usize = 1024;
const REFRESH: usize = 256;

/// Precomputed odd-index coefficients for fast `L(1/2, f⊗χ_{8d})`.
///
/// Only odd `n` contribute because `χ_{8d}(n) = 0` for even `n`, and for odd
/// `n` the symbol factors as `(2/n)(d/n)`; the `(2/n)` factor is folded into
/// the table and `(d/n)` comes from a row of `(j/d)` via reciprocity.
pub struct TwistEngine {
    kappa: u32,
    len: usize,
    /// `λ(n)(2/n)/√n` at `n = 2i + 1`.
    odd: Vec<f64>,
    /// `Σ |λ(n)|/√n` over the odd `n` of each block of `BLOCK` indices.
    abs_blocks: Vec<f64>,
}

impl TwistEngine {
    pub fn new(coeffs: &EigenformCoefficients) -> Self {
        let len = coeffs.n_max;
        let count = (len + 1) / 2;
        let mut odd = Vec::with_capacity(count);
        let mut abs_blocks = vec![0.0; count.div_ceil(BLOCK)];
        for i in 0..count {
            let n = 2 * i + 1;
            let two = if n % 8 == 1 || n % 8 == 7 { 1.0 } else { -1.0 };
            let a = coeffs.lambda(n) / (n as f64).sqrt();
            odd.push(two * a);
            abs_blocks[i / BLOCK] += a.abs();
        }
        Self {
            kappa: coeffs.kappa,
            len,
            odd,
            abs_blocks,
        }
    }

    /// Largest `n` covered by the table.
    pub fn table_len(&self) -> usize {
        self.len
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// `φ(x) = x^{−1/2} W_{1/2}(x/q)`.
    fn phi(&self, x: f64, q: f64) -> f64 {
        x.powf(-0.5) * crate::kernels::w_half(x / q, self.kappa)
    }

    /// Upper bound for `2 Σ_{n > n_cut} |λ(n)χ(n)| n^{−1/2} W_{1/2}(n/q)`.
    ///
    /// Inside the table: block sums of `|λ|/√n` times `W` at the block start
    /// (`W` is decreasing). Beyond it, with `D(x) = Σ_{n≤x} d(n) ≤ x(log x + 1)`
    /// and decreasing `φ`, partial summation gives
    /// `Σ_{n>T} d(n)φ(n) ≤ T(log T + 1)φ(T) + ∫_T^∞ (log x + 2)φ(x) dx`.
    pub fn tail_bound(&self, n_cut: usize, q: f64) -> f64 {
        let mut acc = Accumulator::new();
        let count = self.odd.len();
        // First odd n strictly above n_cut is 2i + 1.
        let i = (n_cut + 1) / 2;
        let block_end = ((i / BLOCK) + 1) * BLOCK;
        let w_at = |i: usize| crate::kernels::w_half((2 * i + 1) as f64 / q, self.kappa);
        if i < count {
            let w0 = w_at(i);
            for j in i..block_end.min(count) {
                acc.add(self.odd[j].abs() * w0);
            }
            for b in (block_end / BLOCK)..self.abs_blocks.len() {
                acc.add(self.abs_blocks[b] * w_at(b * BLOCK));
            }
        }
        let t = self.len.max(n_cut).max(2) as f64;
        acc.add(self.analytic_tail(t, q));
        2.0 * 1.01 * acc.value()
    }

    fn analytic_tail(&self, t: f64, q: f64) -> f64 {
        let mut acc = Accumulator::new();
        acc.add(t * (t.ln() + 1.0) * self.phi(t, q));
        // Upper Riemann sum: φ decreasing, log increasing.
        let h = q / (2.0 * PI) * 0.25;
        let mut x = t;
        loop {
            let next = x + h;
            let term = h * (next.ln() + 2.0) * self.phi(x, q);
            acc.add(term);
            x = next;
            if term < 1e-30 || term < 1e-18 * acc.value() {
                break;
            }
        }
        acc.value()
    }

    /// Row `(j/d)` for `0 ≤ j < d`, `d` odd squarefree.
    fn jacobi_row(d: u64) -> Result<Vec<i8>> {
        let f = factorize(d)?;
        let mut row = vec![1i8; d as usize];
        for &(p, _) in &f.factors {
            let p = p as usize;
            let mut leg = vec![-1i8; p];
            leg[0] = 0;
            for x in 1..p {
                leg[x * x % p] = 1;
            }
            for (j, r) in row.iter_mut().enumerate() {
                *r *= leg[j % p];
            }
        }
        Ok(row)
    }

    /// Truncated sums `2 Σ_{n ≤ n_cut} λ(n)χ_{8d}(n) n^{−1/2} W(n/q)` for each
    /// scale `q` in `scales`, in one pass.
    fn sums(&self, d: u64, n_cut: usize, scales: &[f64]) -> Result<Vec<f64>> {
        let row = Self::jacobi_row(d)?;
        let du = d as usize;
        let flip = d % 4 == 3;
        let count = n_cut.div_ceil(2).min(self.odd.len());
        let half = (self.kappa / 2) as usize;
        let mut inv_fact = vec![1.0; half];
        for j in 1..half {
            inv_fact[j] = inv_fact[j - 1] / j as f64;
        }
        let mut out = Vec::with_capacity(scales.len());
        for &q in scales {
            let c = 2.0 * PI / q;
            let step = (-2.0 * c).exp();
            let mut acc = Accumulator::new();
            let mut block = 0.0;
            let mut j = 1 % du;
            let mut e = 0.0;
            for i in 0..count {
                if i % REFRESH == 0 {
                    e = (-c * (2 * i + 1) as f64).exp();
                    if e == 0.0 {
                        break;
                    }
                }
                let y = c * (2 * i + 1) as f64;
                let mut poly = inv_fact[half - 1];
                for k in (0..half - 1).rev() {
                    poly = poly * y + inv_fact[k];
                }
                let chi = row[j] as f64;
                let sign = if flip && i % 2 == 1 { -1.0 } else { 1.0 };
                block += self.odd[i] * chi * sign * e * poly;
                e *= step;
                j += 2;
                if j >= du {
                    j -= du;
                    if j >= du {
                        j -= du;
                    }
                }
                if (i + 1) % BLOCK == 0 {
                    acc.add(block);
                    block = 0.0;
                }
            }
            acc.add(block);
            out.push(2.0 * acc.value());
        }
        Ok(out)
    }

    /// Smallest admissible truncation whose tail bound is below `tol` at
    /// scale `q`, starting from `max(50, ⌈q(3 + log(1/tol))/(2π)⌉)`.
    /// Returns the truncation, its bound, and whether `tol` was reached.
    pub fn choose_cut(&self, q: f64, tol: f64) -> (usize, f64, bool) {
        let start = (q * (3.0 + (1.0 / tol).ln()) / (2.0 * PI)).ceil().max(50.0) as usize;
        let mut n_cut = start.min(self.len);
        loop {
            let bound = self.tail_bound(n_cut, q);
            if bound < tol {
                return (n_cut, bound, true);
            }
            if n_cut >= self.len {
                return (n_cut, bound, false);
            }
            n_cut = ((n_cut as f64 * 1.25) as usize).min(self.len);
        }
    }

    fn check_modulus(d: u64) -> Result<()> {
        if d == 0 || d % 2 == 0 {
            return Err(Error::OutOfRange(format!("d = {d} must be odd and positive")));
        }
        if !factorize(d)?.is_squarefree() {
            return Err(Error::OutOfRange(format!("d = {d} is not squarefree")));
        }
        Ok(())
    }

    /// `L(1/2, f⊗χ_{8d})` with the best truncation the table allows; the
    /// result records whether `tol` was met.
    pub fn evaluate(&self, d: u64, tol: f64, cal_n: Option<f64>) -> Result<TwistEvaluation> {
        Self::check_modulus(d)?;
        let q = 8.0 * d as f64;
        let sign = epsilon_sign(q as i64, self.kappa)?;
        let (mut n_cut, mut bound, mut met) = self.choose_cut(q, tol);
        let mut a_bound = 0.0;
        if let Some(n) = cal_n {
            if !(n > 0.0) {
                return Err(Error::Config(format!("cutoff {n} must be positive")));
            }
            let (cut_a, _, met_a) = self.choose_cut(n, tol);
            if cut_a > n_cut {
                n_cut = cut_a;
                bound = self.tail_bound(n_cut, q);
            }
            a_bound = self.tail_bound(n_cut, n);
            met = met && met_a && bound < tol;
        }
        let scales: Vec<f64> = std::iter::once(q).chain(cal_n).collect();
        let sums = if sign == 1 {
            self.sums(d, n_cut, &scales)?
        } else {
            vec![0.0; scales.len()]
        };
        let value = TwistLValue {
            d: d as i64,
            value: sums[0],
            n_cut,
            tail_bound: bound,
            tolerance_met: met,
        };
        let split = cal_n.map(|n| ABSplit {
            d: d as i64,
            cal_n: n,
            a_val: sums[1],
            b_val: sums[0] - sums[1],
            a_tail_bound: a_bound,
        });
        Ok(TwistEvaluation { value, split })
    }

    /// Like [`evaluate`](Self::evaluate) but fails when `tol` is out of reach.
    pub fn l_half_twist(&self, d: u64, tol: f64) -> Result<TwistLValue> {
        let ev = self.evaluate(d, tol, None)?;
        if !ev.value.tolerance_met {
            if ev.value.n_cut >= self.len && ev.value.tail_bound > 1e3 * tol {
                return Err(Error::TableTooShort {
                    needed: (8.0 * d as f64 * 40.0 / (2.0 * PI)) as usize,
                    available: self.len,
                });
            }
            return Err(Error::ToleranceUnachievable {
                tol,
                best: ev.value.tail_bound,
            });
        }
        Ok(ev.value)
    }

    /// `𝒜/ℬ` split at cutoff `𝒩`.
    pub fn ab_split(&self, d: u64, cal_n: f64, tol: f64) -> Result<ABSplit> {
        Ok(self
            .evaluate(d, tol, Some(cal_n))?
            .split
            .expect("split requested"))
    }
}

/// `L(1/2, f⊗χ_{8d})` by direct summation with Kronecker symbols and an
/// arbitrary kernel, for cross-checking [`TwistEngine`].
pub fn l_half_reference(
    coeffs: &EigenformCoefficients,
    d: i64,
    n_cut: usize,
    kernel: impl Fn(f64) -> f64,
) -> f64 {
    let q = 8 * d;
    let mut acc = Accumulator::new();
    for n in 1..=n_cut.min(coeffs.n_max) {
        let chi = kronecker(q, n as i64);
        if chi != 0 {
            acc.add(coeffs.lambda(n) * chi as f64 / (n as f64).sqrt() * kernel(n as f64 / q.unsigned_abs() as f64));
        }
    }
    2.0 * acc.value()
}

// ---------------------------------------------------------------------------
// General approximate functional equation

/// `Λ(s) = (|m|/2π)^s Γ(s + (κ−1)/2) L(s, f⊗χ_m)` from the two-sided
/// approximate functional equation with split parameter `y`:
/// `Λ(s) = Σ a_n (|m|/2π)^s n^{−s} Γ(s+a, 2πn/(|m|y))
///        + ε Σ a_n (|m|/2π)^{1−s} n^{s−1} Γ(1−s+a, 2πny/|m|)`.
pub fn completed_l(
    coeffs: &EigenformCoefficients,
    m: &FundamentalDiscriminant,
    s: Complex64,
    y: f64,
) -> Result<Complex64> {
    let q = m.conductor() as f64;
    let a = (coeffs.kappa as f64 - 1.0) / 2.0;
    let eps = epsilon_sign(m.m, coeffs.kappa)? as f64;
    let lq = (q / (2.0 * PI)).ln();
    let one_sided = |s: Complex64, scale: f64| -> Result<Complex64> {
        let b = s + a;
        let lg = ln_gamma(b);
        // Γ(σ, x) < 1e−22 · Γ(σ) well before x = 60 + 2σ.
        let x_max = 60.0 + 2.0 * b.re.abs();
        let n_cut = (x_max * scale / (2.0 * PI)).ceil() as usize + 1;
        if n_cut > coeffs.n_max {
            return Err(Error::TableTooShort {
                needed: n_cut,
                available: coeffs.n_max,
            });
        }
        let mut acc = ComplexAccumulator::new();
        for n in 1..=n_cut {
            let chi = kronecker(m.m, n as i64);
            if chi == 0 || coeffs.lambda(n) == 0.0 {
                continue;
            }
            let x = 2.0 * PI * n as f64 / scale;
            let g = gamma_q(b, x);
            let w = (s * (lq - (n as f64).ln()) + lg).exp();
            acc.add(g * w * (coeffs.lambda(n) * chi as f64));
        }
        Ok(acc.value())
    };
    let first = one_sided(s, q * y)?;
    let second = one_sided(Complex64::new(1.0, 0.0) - s, q / y)?;
    Ok(first + second * eps)
}

/// `L(s, f⊗χ_m)` from [`completed_l`].
pub fn l_value(coeffs: &EigenformCoefficients, m: &FundamentalDiscriminant, s: Complex64) -> Result<Complex64> {
    let q = m.conductor() as f64;
    let a = (coeffs.kappa as f64 - 1.0) / 2.0;
    let lambda = completed_l(coeffs, m, s, 1.0)?;
    Ok(lambda / (s * (q / (2.0 * PI)).ln() + ln_gamma(s + a)).exp())
}

/// `L(s, f⊗χ_m)` for real `s > 1` by its Dirichlet series over `n ≤ n_max`,
/// with the Deligne-bound tail `Σ_{n>N} d(n) n^{−s}`.
pub fn l_series_direct(coeffs: &EigenformCoefficients, m: i64, s: f64, n_max: usize) -> (f64, f64) {
    let n_max = n_max.min(coeffs.n_max);
    let mut acc = Accumulator::new();
    for n in 1..=n_max {
        let chi = kronecker(m, n as i64);
        if chi != 0 {
            acc.add(coeffs.lambda(n) * chi as f64 * (n as f64).powf(-s));
        }
    }
    // Partial summation with D(x) ≤ x(log x + 1):
    // Σ_{n>T} d(n) n^{−s} ≤ s ∫_T^∞ (log x + 1) x^{−s} dx.
    let t = n_max as f64;
    let sig = s - 1.0;
    let tail = s * t.powf(-sig) * (t.ln() / sig + 1.0 / (sig * sig) + 1.0 / sig);
    (acc.value(), tail)
}

/// Central value for a general fundamental discriminant:
/// `(1 + i^κε(m)) Σ λ(n)χ_m(n) n^{−1/2} W_{1/2}(n/|m|)`, exactly 0 when the
/// root number is −1.
pub fn central_value(coeffs: &EigenformCoefficients, m: &FundamentalDiscriminant) -> Result<f64> {
    let eps = epsilon_sign(m.m, coeffs.kappa)?;
    if eps == -1 {
        return Ok(0.0);
    }
    let q = m.conductor() as f64;
    let n_cut = (q * 12.0).ceil() as usize + 10;
    if n_cut > coeffs.n_max {
        return Err(Error::TableTooShort {
            needed: n_cut,
            available: coeffs.n_max,
        });
    }
    let mut acc = Accumulator::new();
    for n in 1..=n_cut {
        let chi = kronecker(m.m, n as i64);
        if chi != 0 {
            acc.add(coeffs.lambda(n) * chi as f64 / (n as f64).sqrt() * crate::kernels::w_half(n as f64 / q, coeffs.kappa));
        }
    }
    Ok(2.0 * acc.value())
}

// ---------------------------------------------------------------------------
// Functional-equation transform

/// `Ǵ` is below 1e−10 beyond this argument for the fixed partition function.
pub const GRAVE_CUTOFF: f64 = 1.5e6;

/// Both sides of
/// `Σ λ(n) n^{−1/2−z} (m/n) G(n/N) = i^κε(m) (2π/|m|)^{2z} Σ λ(n) n^{−1/2+z} (m/n) Ǵ_z(4π²nN/|m|²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeResidual {
    pub m: i64,
    pub n: f64,
    pub z: Complex64,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    /// `residual / max(1, |lhs|)`.
    pub relative: f64,
    pub rhs_terms: usize,
}

/// Evaluates both sides for several `z` at once (the Bessel values on the
/// right are shared). The root number `i^κε(m)` is applied on the right.
pub fn verify_functional_equation_multi(
    coeffs: &EigenformCoefficients,
    m: &FundamentalDiscriminant,
    big_n: f64,
    zs: &[Complex64],
) -> Result<Vec<FeResidual>> {
    for z in zs {
        if z.re.abs() > 0.5 {
            return Err(Error::OutOfRange(format!("|Re z| = {} exceeds 1/2", z.re.abs())));
        }
    }
    let q = m.conductor() as f64;
    let lhs_hi = (2.0 * big_n).floor() as usize;
    let scale = 4.0 * PI * PI * big_n / (q * q);
    let rhs_len = (GRAVE_CUTOFF / scale).floor() as usize;
    let needed = lhs_hi.max(rhs_len);
    if needed > coeffs.n_max {
        return Err(Error::TableTooShort {
            needed,
            available: coeffs.n_max,
        });
    }
    let eps = epsilon_sign(m.m, coeffs.kappa)? as f64;
    let g = PartitionG;
    let mut lhs = vec![ComplexAccumulator::new(); zs.len()];
    let lo = (0.75 * big_n).ceil().max(1.0) as usize;
    for n in lo..=lhs_hi {
        let w = g.eval(n as f64 / big_n);
        let chi = kronecker(m.m, n as i64);
        if w == 0.0 || chi == 0 {
            continue;
        }
        let base = coeffs.lambda(n) * chi as f64 * w;
        let ln = (n as f64).ln();
        for (acc, z) in lhs.iter_mut().zip(zs) {
            acc.add((-(0.5 + z) * ln).exp() * base);
        }
    }
    let mut rhs = vec![ComplexAccumulator::new(); zs.len()];
    for n in 1..=rhs_len {
        let chi = kronecker(m.m, n as i64);
        if chi == 0 || coeffs.lambda(n) == 0.0 {
            continue;
        }
        let x = scale * n as f64;
        let graves = grave_bessel(x, zs, coeffs.kappa, grave_bessel_nodes(x));
        let base = coeffs.lambda(n) * chi as f64;
        let ln = (n as f64).ln();
        for ((acc, z), gz) in rhs.iter_mut().zip(zs).zip(graves) {
            acc.add((-(0.5 - z) * ln).exp() * gz * base);
        }
    }
    Ok(zs
        .iter()
        .zip(lhs.iter().zip(rhs.iter()))
        .map(|(z, (l, r))| {
            let lhs = l.value();
            let rhs = r.value() * eps * ((2.0 * z) * (2.0 * PI / q).ln()).exp();
            let residual = (lhs - rhs).norm();
            FeResidual {
                m: m.m,
                n: big_n,
                z: *z,
                lhs,
                rhs,
                residual,
                relative: residual / lhs.norm().max(1.0),
                rhs_terms: rhs_len,
            }
        })
        .collect())
}

pub fn verify_functional_equation(
    coeffs: &EigenformCoefficients,
    m: &FundamentalDiscriminant,
    big_n: f64,
    z: Complex64,
) -> Result<FeResidual> {
    Ok(verify_functional_equation_multi(coeffs, m, big_n, &[z])?.remove(0))
}

// ---------------------------------------------------------------------------
// Euler-product constants

/// A value with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// `Σ_n A(n) e^{−n/Y} / n` over `n ≤ 40Y`.
pub fn sym2_smoothed(sym2: &Sym2Coefficients, y: f64) -> Result<f64> {
    let n_max = (40.0 * y).ceil() as usize;
    if n_max > sym2.n_max() {
        return Err(Error::TableTooShort {
            needed: n_max,
            available: sym2.n_max(),
        });
    }
    let mut acc = Accumulator::new();
    for n in 1..=n_max {
        acc.add(sym2.a[n] * (-(n as f64) / y).exp() / n as f64);
    }
    Ok(acc.value())
}

/// `L(1, sym² f)` from the smoothed series at `Y`, `2Y`, `4Y`.
///
/// Shifting the Mellin contour of `Γ(w) Y^w L(1+w)` gives
/// `S(Y) = L(1) − L(0, sym² f)/Y + O(Y^{−3})` (the entire `Λ` vanishes the
/// `Y^{−2}` residue), so the error decays like `1/Y`. The returned value is
/// `S(4Y)` and the error is the spread `|S(4Y) − S(Y)|`, which exceeds the
/// remaining bias of `S(4Y)` by a factor of about 3.
pub fn sym2_l1(sym2: &Sym2Coefficients, y: f64) -> Result<Estimate> {
    let s1 = sym2_smoothed(sym2, y)?;
    let s2 = sym2_smoothed(sym2, 2.0 * y)?;
    let s4 = sym2_smoothed(sym2, 4.0 * y)?;
    Ok(Estimate {
        value: s4,
        error: (s4 - s1).abs().max((s4 - s2).abs()),
    })
}

/// Inverse local factor of `L(s, sym² f)` at `p`: `1 − A x + A x² − x³`,
/// `x = p^{−s}`, `A = λ(p)² − 1`.
pub fn sym2_local_inverse(lambda_p: f64, p: f64, s: f64) -> f64 {
    let a = lambda_p * lambda_p - 1.0;
    let x = p.powf(-s);
    1.0 - a * x + a * x * x - x * x * x
}

/// `∏_{p ≤ P} (1 − A(p)p^{−s} + A(p)p^{−2s} − p^{−3s})^{−1}`.
pub fn sym2_euler_product(coeffs: &EigenformCoefficients, s: f64, prime_cutoff: usize) -> Result<f64> {
    check_primes(coeffs, prime_cutoff)?;
    let mut log = Accumulator::new();
    for &p in Sieve::shared().primes_up_to(prime_cutoff) {
        log.add(-sym2_local_inverse(coeffs.lambda(p as usize), p as f64, s).ln());
    }
    Ok(log.value().exp())
}

fn check_primes(coeffs: &EigenformCoefficients, prime_cutoff: usize) -> Result<()> {
    if prime_cutoff > coeffs.n_max {
        return Err(Error::TableTooShort {
            needed: prime_cutoff,
            available: coeffs.n_max,
        });
    }
    if prime_cutoff > Sieve::shared().bound() {
        return Err(Error::OutOfRange(format!("prime cutoff {prime_cutoff} exceeds the sieve")));
    }
    Ok(())
}

/// Local factor of `𝒢₂(u, v)` at an odd prime:
/// `1 + (1 − 1/(p+1)) Σ_{k≥1} Σ_{i+j=2k} λ(p^i)λ(p^j) p^{−i(1/2+u) − j(1/2+v)}`,
/// truncated at `k ≤ 60` or once `p^{−k(1+u+v)}` is below 1e−20.
pub fn g2_local(lambda_pows: &[f64], p: f64, u: f64, v: f64) -> f64 {
    g_local(lambda_pows, p, u, v, 1.0 - 1.0 / (p + 1.0))
}

/// Same with the weight `1 − 1/p` of `𝒢₁`.
pub fn g1_local(lambda_pows: &[f64], p: f64, u: f64, v: f64) -> f64 {
    g_local(lambda_pows, p, u, v, 1.0 - 1.0 / p)
}

fn g_local(lambda_pows: &[f64], p: f64, u: f64, v: f64, weight: f64) -> f64 {
    let xu = p.powf(-(0.5 + u));
    let xv = p.powf(-(0.5 + v));
    let kmax = (lambda_pows.len() - 1) / 2;
    let mut total = Accumulator::new();
    for k in 1..=kmax.min(60) {
        let mut inner = Accumulator::new();
        for i in 0..=2 * k {
            let j = 2 * k - i;
            inner.add(lambda_pows[i] * lambda_pows[j] * xu.powi(i as i32) * xv.powi(j as i32));
        }
        total.add(inner.value());
        if (xu * xv).powi(k as i32) * (2 * k + 1) as f64 * ((2 * k + 1) as f64).powi(2) < 1e-20 {
            break;
        }
    }
    1.0 + weight * total.value()
}

/// Local factor of `ℋ₂(u, v)`:
/// `𝒢₂,p · (1 − p^{−1−u−v}) · ∏ (sym² inverse local factors at 1+2u, 1+2v, 1+u+v)`,
/// with `𝒢₂,2 = 1`.
pub fn h2_local(coeffs: &EigenformCoefficients, p: usize, u: f64, v: f64) -> f64 {
    let pf = p as f64;
    let lp = coeffs.lambda(p);
    let g = if p == 2 {
        1.0
    } else {
        g2_local(&coeffs.prime_power_lambdas(p, 120), pf, u, v)
    };
    g * (1.0 - pf.powf(-1.0 - u - v))
        * sym2_local_inverse(lp, pf, 1.0 + 2.0 * u)
        * sym2_local_inverse(lp, pf, 1.0 + 2.0 * v)
        * sym2_local_inverse(lp, pf, 1.0 + u + v)
}

/// Empirical envelope constant `C` in `|ℋ₂,p − 1| ≤ C p^{−3/2}`.
pub const H2_ENVELOPE: f64 = 50.0;

/// `ℋ₂(u, v) ≈ ∏_{p ≤ P} ℋ₂,p`, tail estimated by `C Σ_{p>P} p^{−3/2} ≈ 2C/(√P log P)`.
pub fn h2_at(coeffs: &EigenformCoefficients, u: f64, v: f64, prime_cutoff: usize) -> Result<Estimate> {
    if u < -0.2 || v < -0.2 {
        return Err(Error::OutOfRange(format!("(u, v) = ({u}, {v}) below −1/5")));
    }
    check_primes(coeffs, prime_cutoff)?;
    let mut log = Accumulator::new();
    for &p in Sieve::shared().primes_up_to(prime_cutoff) {
        log.add(h2_local(coeffs, p as usize, u, v).ln());
    }
    let pc = prime_cutoff as f64;
    let value = log.value().exp();
    Ok(Estimate {
        value,
        error: value * H2_ENVELOPE * 2.0 / (pc.sqrt() * pc.ln()),
    })
}

/// `L(1, sym² f)`, `ℋ₂(0, 0)` and `C_f = (2/π²) L(1, sym² f)³ ℋ₂(0, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerConstants {
    pub l1_sym2: f64,
    pub l1_sym2_error: f64,
    pub h2_00: f64,
    pub h2_00_error: f64,
    pub c_f: f64,
    pub prime_cutoff: usize,
    pub smoothing_y: f64,
    /// Propagated relative error of `c_f`.
    pub tail_estimate: f64,
}

pub fn constant_cf(
    coeffs: &EigenformCoefficients,
    sym2: &Sym2Coefficients,
    prime_cutoff: usize,
    smoothing_y: f64,
) -> Result<EulerConstants> {
    let l1 = sym2_l1(sym2, smoothing_y)?;
    let h2 = h2_at(coeffs, 0.0, 0.0, prime_cutoff)?;
    let c_f = 2.0 / (PI * PI) * l1.value.powi(3) * h2.value;
    let rel = 3.0 * l1.error / l1.value.abs() + h2.error / h2.value.abs();
    Ok(EulerConstants {
        l1_sym2: l1.value,
        l1_sym2_error: l1.error,
        h2_00: h2.value,
        h2_00_error: h2.error,
        c_f,
        prime_cutoff,
        smoothing_y,
        tail_estimate: rel,
    })
}

/// `L(σ, sym² f)` for real `σ > 1` by its Dirichlet series with a Deligne
/// tail bound `Σ_{n>N} d₃(n) n^{−σ}` estimated as `N^{1−σ} log²N / (σ−1)`.
pub fn sym2_series(sym2: &Sym2Coefficients, sigma: f64, n_max: usize) -> (f64, f64) {
    let n_max = n_max.min(sym2.n_max());
    let mut acc = Accumulator::new();
    for n in 1..=n_max {
        acc.add(sym2.a[n] * (n as f64).powf(-sigma));
    }
    let t = n_max as f64;
    (acc.value(), t.powf(1.0 - sigma) * t.ln().powi(2) / (sigma - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::enumerate_fundamental_discriminants;
    use crate::kernels::{imag, w_contour, w_half};
    use crate::modform::sym2_coefficients;
    use rand::{Rng, SeedableRng};
    use std::sync::OnceLock;

    fn table() -> &'static EigenformCoefficients {
        static T: OnceLock<EigenformCoefficients> = OnceLock::new();
        T.get_or_init(|| EigenformCoefficients::build_delta(200_000).unwrap())
    }

    fn engine() -> &'static TwistEngine {
        static E: OnceLock<TwistEngine> = OnceLock::new();
        E.get_or_init(|| TwistEngine::new(table()))
    }

    #[test]
    fn signs() {
        assert_eq!(epsilon_sign(8, 12).unwrap(), 1);
        assert_eq!(epsilon_sign(-3, 12).unwrap(), -1);
        assert_eq!(epsilon_sign(8, 14).unwrap(), -1);
        assert!(epsilon_sign(8, 11).is_err());
    }

    #[test]
    fn d_one_stable_under_doubling() {
        let v = engine().l_half_twist(1, 1e-9).unwrap();
        let doubled = l_half_reference(table(), 1, 2 * v.n_cut, |x| w_half(x, 12));
        assert!((v.value - doubled).abs() < 1e-9);
        assert!(v.tail_bound < 1e-9);
    }

    #[test]
    fn fast_matches_reference() {
        for d in [1u64, 3, 5, 7, 11, 15, 105, 1001, 3003] {
            let v = engine().l_half_twist(d, 1e-8).unwrap();
            let r = l_half_reference(table(), d as i64, v.n_cut, |x| w_half(x, 12));
            assert!((v.value - r).abs() < 1e-11, "d = {d}: {} vs {r}", v.value);
        }
    }

    #[test]
    fn quadrature_kernel_matches_closed_form() {
        for d in [1i64, 3] {
            let n_cut = 400;
            let closed = l_half_reference(table(), d, n_cut, |x| w_half(x, 12));
            let quad = l_half_reference(table(), d, n_cut, |x| {
                w_contour(x, Complex64::new(0.5, 0.0), 12, 2.0, 1e-12).unwrap().value.re
            });
            assert!((closed - quad).abs() < 1e-8);
        }
    }

    #[test]
    fn negative_sign_twist_vanishes() {
        let m = FundamentalDiscriminant::new(-3).unwrap();
        assert_eq!(central_value(table(), &m).unwrap(), 0.0);
        let m = FundamentalDiscriminant::new(-24).unwrap();
        let lam = completed_l(table(), &m, Complex64::new(0.5, 0.0), 1.3).unwrap();
        assert!(lam.norm() < 1e-12);
    }

    #[test]
    fn general_route_agrees_with_engine() {
        for d in [1i64, 3, 7, 13] {
            let m = FundamentalDiscriminant::new(8 * d).unwrap();
            let v = central_value(table(), &m).unwrap();
            let fast = engine().l_half_twist(d as u64, 1e-10).unwrap().value;
            assert!((v - fast).abs() < 1e-10);
            let l = l_value(table(), &m, Complex64::new(0.5, 0.0)).unwrap();
            assert!((l.re - fast).abs() < 1e-9 && l.im.abs() < 1e-10);
        }
    }

    #[test]
    fn completed_symmetry() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let ds: Vec<u64> = crate::arith::enumerate_twist_moduli(8.0 * 200.0 + 1.0);
        for _ in 0..8 {
            let d = ds[rng.gen_range(0..ds.len())];
            let m = FundamentalDiscriminant::new(8 * d as i64).unwrap();
            let eps = epsilon_sign(m.m, 12).unwrap() as f64;
            for t in [0.0, 0.5, 1.0] {
                let s = Complex64::new(0.5, t);
                let a = completed_l(table(), &m, s, 1.3).unwrap();
                let b = completed_l(table(), &m, Complex64::new(1.0, 0.0) - s, 1.3).unwrap() * eps;
                assert!((a - b).norm() < 1e-6 * a.norm() + 1e-9, "d = {d}, t = {t}");
            }
        }
    }

    #[test]
    fn l_at_two_matches_series() {
        for m in [5i64, 8, -3, -4, 12, -7] {
            let fd = FundamentalDiscriminant::new(m).unwrap();
            let afe = l_value(table(), &fd, Complex64::new(2.0, 0.0)).unwrap();
            let (series, tail) = l_series_direct(table(), m, 2.0, 200_000);
            assert!(tail < 1e-3);
            assert!((afe.re - series).abs() < 2e-4, "m = {m}: {} vs {series}", afe.re);
            assert!(afe.im.abs() < 1e-12);
        }
    }

    #[test]
    fn tail_bound_is_an_upper_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let ds = crate::arith::enumerate_twist_moduli(8.0 * 2000.0);
        for _ in 0..25 {
            let d = ds[rng.gen_range(0..ds.len())];
            let v = engine().l_half_twist(d, 1e-6).unwrap();
            let r = l_half_reference(table(), d as i64, 2 * v.n_cut, |x| w_half(x, 12));
            assert!((v.value - r).abs() <= v.tail_bound, "d = {d}");
        }
    }

    #[test]
    fn ab_split_limits() {
        let d = 21u64;
        let q = 8.0 * d as f64;
        let s = engine().ab_split(d, q, 1e-10).unwrap();
        assert_eq!(s.b_val, 0.0);
        // With 𝒩 far beyond q² the truncated sum tends to 2 L(1/2): the dual
        // sum left after taking the residue at w = 0 has length ~q²/𝒩.
        let far = engine().ab_split(1, 2e4, 1e-8).unwrap();
        let full = engine().l_half_twist(1, 1e-10).unwrap().value;
        assert!((far.a_val - 2.0 * full).abs() < 1e-6, "{} vs {}", far.a_val, 2.0 * full);
        assert!((far.b_val + full).abs() < 1e-6);
    }

    #[test]
    fn functional_equation_examples() {
        let zero = Complex64::new(0.0, 0.0);
        let m5 = FundamentalDiscriminant::new(5).unwrap();
        let r = verify_functional_equation(table(), &m5, 50.0, zero).unwrap();
        assert!(r.relative < 1e-6, "{r:?}");
        let m8 = FundamentalDiscriminant::new(8).unwrap();
        let r = verify_functional_equation(table(), &m8, 100.0, imag(0.25)).unwrap();
        assert!(r.relative < 1e-6, "{r:?}");
        // N = 1/2 puts every n/N outside the support of G.
        let m1 = FundamentalDiscriminant::new(1).unwrap();
        let r = verify_functional_equation(table(), &m1, 0.5, zero).unwrap();
        assert_eq!(r.lhs, Complex64::new(0.0, 0.0));
        assert!(r.residual < 1e-6);
    }

    #[test]
    fn functional_equation_negative_discriminant_needs_root_number() {
        let m = FundamentalDiscriminant::new(-7).unwrap();
        let r = verify_functional_equation(table(), &m, 60.0, Complex64::new(0.0, 0.0)).unwrap();
        assert!(r.relative < 1e-6, "{r:?}");
        // Without the sign the two sides would differ by 2|lhs|.
        assert!((r.lhs + r.rhs).norm() > 0.1 * r.lhs.norm());
    }

    #[test]
    fn functional_equation_batch() {
        let zs = [Complex64::new(0.0, 0.0), imag(0.25), imag(-0.25)];
        for m in enumerate_fundamental_discriminants(20.0, true).into_iter().take(5) {
            let n = (12.5 * (m.m as f64).powi(2)).clamp(50.0, 80_000.0);
            for r in verify_functional_equation_multi(table(), &m, n, &zs).unwrap() {
                assert!(r.relative < 1e-6, "{r:?}");
            }
        }
    }

    #[test]
    fn h2_local_ratio_envelope() {
        for &p in Sieve::shared().primes_up_to(1000) {
            let r = h2_local(table(), p as usize, 0.0, 0.0);
            assert!((r - 1.0).abs() < H2_ENVELOPE * (p as f64).powf(-1.5), "p = {p}");
        }
        let g = g2_local(&table().prime_power_lambdas(3, 120), 3.0, 1.0, 1.0);
        let g1 = g1_local(&table().prime_power_lambdas(3, 120), 3.0, 1.0, 1.0);
        // Weights (3/4) and (2/3) scale the same prime-power sum.
        assert!(((g - 1.0) / (g1 - 1.0) - 0.75 / (2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn sym2_l1_estimates() {
        let sym2 = sym2_coefficients(table(), 200_000).unwrap();
        let e = sym2_l1(&sym2, 1200.0).unwrap();
        assert!(e.value > 0.1 && e.value < 10.0);
        assert!(e.error < 1e-3 * e.value);
        let euler = sym2_euler_product(table(), 1.0, 100_000).unwrap();
        assert!((euler - e.value).abs() < 1e-2 * e.value, "{euler} vs {}", e.value);
    }
}
