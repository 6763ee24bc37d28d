//! Hecke eigenvalues of the discriminant form Δ (weight 12, level 1) and the
//! Dirichlet coefficients of its symmetric-square L-function.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::arith::{divisor_counts, Sieve};
use crate::error::{Error, Result};

/// Largest table length supported with 128-bit coefficients.
pub const MAX_TABLE: usize = 3_000_000;

/// Name of the coefficient cache file inside a cache directory.
pub const CACHE_FILE: &str = "delta_tau.csv";

/// Environment variable overriding the coefficient cache directory.
pub const CACHE_DIR_ENV: &str = "TWISTMOMENT_CACHE_DIR";

/// Sparse series used to build `∏(1 − qⁿ)^24`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    /// Euler's pentagonal series for `∏(1 − qⁿ)`, applied 24 times.
    Pentagonal,
    /// Jacobi's triangular series `∏(1 − qⁿ)³ = Σ (−1)^k (2k+1) q^{k(k+1)/2}`,
    /// applied 8 times.
    Jacobi,
}

/// Exact `τ(n)` and normalized `λ(n) = τ(n)/n^{(κ−1)/2}` for `1 ≤ n ≤ n_max`.
/// Index 0 of both tables is unused and holds zero.
#[derive(Clone, Debug)]
pub struct EigenformCoefficients {
    pub kappa: u32,
    pub n_max: usize,
    pub tau: Vec<i128>,
    pub lambda: Vec<f64>,
}

fn pentagonal_terms(limit: usize) -> Vec<(usize, i128)> {
    let mut terms = vec![(0usize, 1i128)];
    let mut k: u64 = 1;
    loop {
        let e1 = (k * (3 * k - 1) / 2) as usize;
        let e2 = (k * (3 * k + 1) / 2) as usize;
        if e1 > limit {
            break;
        }
        let sign = if k % 2 == 0 { 1 } else { -1 };
        terms.push((e1, sign));
        if e2 <= limit {
            terms.push((e2, sign));
        }
        k += 1;
    }
    terms.sort_unstable();
    terms
}

fn triangular_terms(limit: usize) -> Vec<(usize, i128)> {
    let mut terms = Vec::new();
    let mut k = 0usize;
    while k * (k + 1) / 2 <= limit {
        let c = (2 * k + 1) as i128;
        terms.push((k * (k + 1) / 2, if k % 2 == 0 { c } else { -c }));
        k += 1;
    }
    terms
}

/// Multiply the dense series `a` by the sparse series `s`, truncating to
/// `a.len()` terms. Output blocks are kept cache-resident while the sparse
/// terms sweep over them. Arithmetic wraps modulo 2^128.
fn sparse_mul(a: &[i128], s: &[(usize, i128)]) -> Vec<i128> {
    const BLOCK: usize = 1 << 14;
    let n = a.len();
    let mut c = vec![0i128; n];
    let mut lo = 0;
    while lo < n {
        let hi = (lo + BLOCK).min(n);
        for &(e, w) in s {
            if e >= hi {
                break;
            }
            let start = lo.max(e);
            let dst = &mut c[start..hi];
            let src = &a[start - e..hi - e];
            match w {
                1 => dst.iter_mut().zip(src).for_each(|(x, y)| *x = x.wrapping_add(*y)),
                -1 => dst.iter_mut().zip(src).for_each(|(x, y)| *x = x.wrapping_sub(*y)),
                _ => dst
                    .iter_mut()
                    .zip(src)
                    .for_each(|(x, y)| *x = x.wrapping_add(w.wrapping_mul(*y))),
            }
        }
        lo = hi;
    }
    c
}

/// `|τ(n)| ≤ d(n) n^{11/2}` must stay below 2^127 for every `n ≤ n_max`;
/// under that bound the residue modulo 2^128 read as a signed `i128` is τ.
fn check_width(n_max: usize) -> Result<()> {
    let d = divisor_counts(n_max);
    let limit = 2f64.powi(127);
    for n in 1..=n_max {
        let bound = d[n] as f64 * (n as f64).powf(5.5);
        if bound >= limit {
            return Err(Error::Overflow(n));
        }
    }
    Ok(())
}

/// Exact `τ(n)` for `n ≤ n_max` from `q ∏ (1 − qⁿ)^24`.
pub fn build_tau(n_max: usize, ladder: Ladder) -> Result<Vec<i128>> {
    if n_max == 0 || n_max > MAX_TABLE {
        return Err(Error::OutOfRange(format!(
            "n_max = {n_max} outside 1..={MAX_TABLE}"
        )));
    }
    check_width(n_max)?;
    // Coefficients of ∏(1 − qⁿ)^24 up to q^{n_max − 1}.
    let len = n_max;
    let (terms, passes) = match ladder {
        Ladder::Pentagonal => (pentagonal_terms(len - 1), 24),
        Ladder::Jacobi => (triangular_terms(len - 1), 8),
    };
    let mut acc = vec![0i128; len];
    for &(e, w) in &terms {
        acc[e] = w;
    }
    for _ in 1..passes {
        acc = sparse_mul(&acc, &terms);
    }
    let mut tau = Vec::with_capacity(n_max + 1);
    tau.push(0);
    tau.extend_from_slice(&acc);
    Ok(tau)
}

impl EigenformCoefficients {
    /// Coefficient table of Δ up to `n_max` (Jacobi ladder).
    pub fn build_delta(n_max: usize) -> Result<Self> {
        Self::build_delta_with(n_max, Ladder::Jacobi)
    }

    pub fn build_delta_with(n_max: usize, ladder: Ladder) -> Result<Self> {
        let tau = build_tau(n_max, ladder)?;
        Self::from_tau(12, tau)
    }

    /// Wrap an externally supplied `τ` table (index 0 unused).
    pub fn from_tau(kappa: u32, tau: Vec<i128>) -> Result<Self> {
        if kappa == 0 || kappa % 2 == 1 {
            return Err(Error::Config(format!("weight {kappa} must be even and positive")));
        }
        if tau.len() < 2 || tau[1] != 1 {
            return Err(Error::Config("coefficient table must start with τ(1) = 1".into()));
        }
        let n_max = tau.len() - 1;
        let expo = (kappa as f64 - 1.0) / 2.0;
        let mut lambda = vec![0.0; n_max + 1];
        for n in 1..=n_max {
            lambda[n] = tau[n] as f64 / (n as f64).powf(expo);
        }
        Ok(Self {
            kappa,
            n_max,
            tau,
            lambda,
        })
    }

    #[inline]
    pub fn lambda(&self, n: usize) -> f64 {
        self.lambda[n]
    }

    #[inline]
    pub fn tau(&self, n: usize) -> i128 {
        self.tau[n]
    }

    /// Truncated copy covering `n ≤ n_max`.
    pub fn truncated(&self, n_max: usize) -> Self {
        let n = n_max.min(self.n_max);
        Self {
            kappa: self.kappa,
            n_max: n,
            tau: self.tau[..=n].to_vec(),
            lambda: self.lambda[..=n].to_vec(),
        }
    }

    /// `λ(p^k)` for `k = 0..=kmax` from the Hecke recursion at a prime `p ≤ n_max`.
    pub fn prime_power_lambdas(&self, p: usize, kmax: usize) -> Vec<f64> {
        let lp = self.lambda[p];
        let mut v = Vec::with_capacity(kmax + 1);
        v.push(1.0);
        if kmax >= 1 {
            v.push(lp);
        }
        for k in 2..=kmax {
            let next = lp * v[k - 1] - v[k - 2];
            v.push(next);
        }
        v
    }

    /// Write the table as `kappa,n_max` followed by `n,tau(n)` lines.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Cache(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        // Unique per writer so concurrent processes never share a partial file.
        static SERIAL: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
        let serial = SERIAL.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let tmp = path.with_extension(format!("csv.{}-{serial}.partial", std::process::id()));
        {
            let mut w = BufWriter::new(File::create(&tmp).map_err(io)?);
            writeln!(w, "{},{}", self.kappa, self.n_max).map_err(io)?;
            for n in 1..=self.n_max {
                writeln!(w, "{},{}", n, self.tau[n]).map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
        fs::rename(&tmp, path).map_err(io)
    }

    /// Read a coefficient file, keeping at most `limit` entries when given.
    pub fn read_cache(path: &Path, limit: Option<usize>) -> Result<Self> {
        let io = |e: std::io::Error| Error::Cache(format!("{}: {e}", path.display()));
        let bad = |line: usize, what: &str| {
            Error::Cache(format!("{} line {line}: {what}", path.display()))
        };
        let mut lines = BufReader::new(File::open(path).map_err(io)?).lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty file"))?.map_err(io)?;
        let (k, n) = header.split_once(',').ok_or_else(|| bad(1, "expected kappa,n_max"))?;
        let kappa: u32 = k.trim().parse().map_err(|_| bad(1, "bad kappa"))?;
        let n_max: usize = n.trim().parse().map_err(|_| bad(1, "bad n_max"))?;
        let keep = limit.map_or(n_max, |l| l.min(n_max));
        let mut tau = Vec::with_capacity(keep + 1);
        tau.push(0i128);
        for (i, line) in lines.enumerate() {
            if tau.len() > keep {
                break;
            }
            let line = line.map_err(io)?;
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| bad(i + 2, "expected n,tau"))?;
            let idx: usize = a.trim().parse().map_err(|_| bad(i + 2, "bad n"))?;
            if idx != tau.len() {
                return Err(bad(i + 2, "indices must run 1, 2, 3, ..."));
            }
            tau.push(b.trim().parse().map_err(|_| bad(i + 2, "bad coefficient"))?);
        }
        if tau.len() != keep + 1 {
            return Err(bad(0, "file shorter than its header claims"));
        }
        Self::from_tau(kappa, tau)
    }

    /// Load `dir/delta_tau.csv` when it covers `n_max`, otherwise build the
    /// table and rewrite the file.
    pub fn load_or_build(dir: &Path, n_max: usize) -> Result<Self> {
        let path = cache_path(dir);
        if let Ok(found) = Self::read_cache(&path, Some(n_max)) {
            if found.kappa == 12 && found.n_max == n_max {
                return Ok(found);
            }
        }
        let built = Self::build_delta(n_max)?;
        built.write_cache(&path)?;
        Ok(built)
    }
}

/// Location of the coefficient cache inside `dir`.
pub fn cache_path(dir: &Path) -> PathBuf {
    dir.join(CACHE_FILE)
}

/// Symmetric-square coefficients `A(n)`, `1 ≤ n ≤ n_max` (index 0 unused).
#[derive(Clone, Debug)]
pub struct Sym2Coefficients {
    pub a: Vec<f64>,
}

impl Sym2Coefficients {
    pub fn n_max(&self) -> usize {
        self.a.len() - 1
    }
}

/// `A(p^k)` for `k = 0..=kmax` from the local degree-3 recursion.
pub fn sym2_prime_powers(lambda_p: f64, kmax: usize) -> Vec<f64> {
    let c = lambda_p * lambda_p - 1.0;
    let mut v = vec![0.0; kmax + 1];
    for k in 0..=kmax {
        let a1 = if k >= 1 { v[k - 1] } else { 0.0 };
        let a2 = if k >= 2 { v[k - 2] } else { 0.0 };
        let a3 = if k >= 3 { v[k - 3] } else { 0.0 };
        v[k] = if k == 0 { 1.0 } else { c * (a1 - a2) + a3 };
    }
    v
}

/// Multiplicative extension of the local recursion to all `n ≤ n_max`.
pub fn sym2_coefficients(coeffs: &EigenformCoefficients, n_max: usize) -> Result<Sym2Coefficients> {
    if n_max > coeffs.n_max {
        return Err(Error::TableTooShort {
            needed: n_max,
            available: coeffs.n_max,
        });
    }
    let sieve = Sieve::shared();
    if n_max > sieve.bound() {
        return Err(Error::OutOfRange(format!("{n_max} exceeds the sieve bound")));
    }
    let mut a = vec![0.0; n_max + 1];
    if n_max >= 1 {
        a[1] = 1.0;
    }
    let mut local: Vec<f64> = Vec::new();
    let mut local_p = 0usize;
    for n in 2..=n_max {
        let p = sieve.spf(n);
        let mut m = n;
        let mut e = 0usize;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        if local_p != p || local.len() <= e {
            let mut kmax = 1;
            let mut q = p;
            while q <= n_max / p {
                q *= p;
                kmax += 1;
            }
            local = sym2_prime_powers(coeffs.lambda[p], kmax);
            local_p = p;
        }
        a[n] = a[m] * local[e];
    }
    Ok(Sym2Coefficients { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::factorize;
    use std::sync::OnceLock;

    fn table() -> &'static EigenformCoefficients {
        static T: OnceLock<EigenformCoefficients> = OnceLock::new();
        T.get_or_init(|| EigenformCoefficients::build_delta(20_000).unwrap())
    }

    /// Dense expansion of q ∏_{n ≤ L} (1 − qⁿ)^24 with no sparse tricks.
    fn tau_by_direct_product(len: usize) -> Vec<i128> {
        let mut poly = vec![0i128; len];
        poly[0] = 1;
        for n in 1..len {
            for _ in 0..24 {
                for i in (n..len).rev() {
                    poly[i] -= poly[i - n];
                }
            }
        }
        let mut tau = vec![0i128];
        tau.extend_from_slice(&poly);
        tau
    }

    #[test]
    fn first_values() {
        let t = table();
        assert_eq!(t.tau(1), 1);
        assert_eq!(t.tau(2), -24);
        assert_eq!(t.tau(3), 252);
        assert_eq!(t.tau(4), -1472);
        assert_eq!(t.tau(5), 4830);
    }

    #[test]
    fn matches_direct_product() {
        let direct = tau_by_direct_product(60);
        assert_eq!(&table().tau[..=60], &direct[..]);
    }

    #[test]
    fn ladders_agree() {
        let a = build_tau(5000, Ladder::Pentagonal).unwrap();
        let b = build_tau(5000, Ladder::Jacobi).unwrap();
        assert_eq!(a, b);
        assert_eq!(&b[..], &table().tau[..=5000]);
    }

    #[test]
    fn lambda_multiplicative_instance() {
        let t = table();
        assert!((t.lambda(6) - t.lambda(2) * t.lambda(3)).abs() < 1e-14);
    }

    #[test]
    fn hecke_relations_exact() {
        let t = table();
        for m in 1..=140usize {
            for n in 1..=140usize {
                if m * n <= 20_000 && gcd(m, n) == 1 {
                    assert_eq!(t.tau(m * n), t.tau(m) * t.tau(n));
                }
            }
        }
        for &p in Sieve::shared().primes_up_to(100) {
            let p = p as usize;
            assert_eq!(t.tau(p * p), t.tau(p) * t.tau(p) - (p as i128).pow(11));
        }
    }

    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn deligne_bound() {
        let t = table();
        let d = divisor_counts(t.n_max);
        for n in 1..=t.n_max {
            assert!(t.lambda(n).abs() <= d[n] as f64 + 1e-9, "n = {n}");
        }
    }

    #[test]
    fn prime_power_recursion_matches_table() {
        let t = table();
        for &p in Sieve::shared().primes_up_to(20) {
            let p = p as usize;
            let v = t.prime_power_lambdas(p, 3);
            let mut q = 1;
            for (k, &x) in v.iter().enumerate() {
                if q <= t.n_max {
                    assert!((x - t.lambda(q)).abs() < 1e-10, "p={p} k={k}");
                }
                q *= p;
            }
        }
    }

    #[test]
    fn out_of_range() {
        assert!(build_tau(0, Ladder::Jacobi).is_err());
        assert!(build_tau(MAX_TABLE + 1, Ladder::Jacobi).is_err());
    }

    #[test]
    fn sym2_examples() {
        let t = table();
        let s = sym2_coefficients(t, 2000).unwrap();
        assert_eq!(s.a[1], 1.0);
        assert!((s.a[2] - (t.lambda(2).powi(2) - 1.0)).abs() < 1e-14);
        // Coefficient of x² in [(1 − α²x)(1 − x)(1 − β²x)]^{-1} with αβ = 1 is
        // h₂(α², 1, β²) = σ² + σ where σ = α² + β² = λ(2)² − 2.
        let sigma = t.lambda(2).powi(2) - 2.0;
        assert!((s.a[4] - (sigma * sigma + sigma)).abs() < 1e-12);
    }

    /// λ(m²) through Hecke multiplicativity only.
    fn lambda_of_square(t: &EigenformCoefficients, m: u64) -> f64 {
        factorize(m)
            .unwrap()
            .factors
            .iter()
            .map(|&(p, e)| t.prime_power_lambdas(p as usize, 2 * e as usize)[2 * e as usize])
            .product()
    }

    #[test]
    fn sym2_matches_divisor_sum() {
        let t = table();
        let s = sym2_coefficients(t, 2000).unwrap();
        for n in 1..=2000u64 {
            let mut oracle = 0.0;
            let mut d = 1u64;
            while d * d <= n {
                if n % (d * d) == 0 {
                    oracle += lambda_of_square(t, n / (d * d));
                }
                d += 1;
            }
            let scale = 1.0 + oracle.abs();
            assert!((s.a[n as usize] - oracle).abs() < 1e-10 * scale, "n = {n}");
        }
    }

    #[test]
    fn sym2_multiplicative() {
        let t = table();
        let s = sym2_coefficients(t, 5000).unwrap();
        for m in 1..=70usize {
            for n in 1..=70usize {
                if gcd(m, n) == 1 {
                    let lhs = s.a[m * n];
                    let rhs = s.a[m] * s.a[n];
                    assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
                }
            }
        }
    }

    #[test]
    fn cache_round_trip_and_rebuild() {
        let dir = tempfile::tempdir().unwrap();
        let small = EigenformCoefficients::load_or_build(dir.path(), 300).unwrap();
        let again = EigenformCoefficients::read_cache(&cache_path(dir.path()), None).unwrap();
        assert_eq!(small.tau, again.tau);
        let text = fs::read_to_string(cache_path(dir.path())).unwrap();
        assert!(text.starts_with("12,300\n1,1\n2,-24\n3,252\n"));
        // A larger request rebuilds; a smaller one is served by truncation.
        let bigger = EigenformCoefficients::load_or_build(dir.path(), 500).unwrap();
        assert_eq!(bigger.n_max, 500);
        let trunc = EigenformCoefficients::load_or_build(dir.path(), 100).unwrap();
        assert_eq!(trunc.tau[..], bigger.tau[..=100]);
    }

    #[test]
    fn malformed_cache_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "12,3\n1,1\n3,252\n").unwrap();
        assert!(matches!(
            EigenformCoefficients::read_cache(&path, None),
            Err(Error::Cache(_))
        ));
        fs::write(&path, "12,3\n1,2\n2,-24\n3,252\n").unwrap();
        assert!(EigenformCoefficients::read_cache(&path, None).is_err());
    }
}
