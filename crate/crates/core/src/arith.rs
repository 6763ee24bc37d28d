//! Integer arithmetic: Kronecker symbols, sieve-backed factorization and
//! enumeration of twist moduli and fundamental discriminants.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound of the shared smallest-prime-factor table.
pub const DEFAULT_SIEVE_BOUND: usize = 10_000_000;

/// Smallest-prime-factor table on `[0, bound]`.
pub struct Sieve {
    spf: Vec<u32>,
    primes: Vec<u32>,
}

impl Sieve {
    /// Linear sieve; `spf[n]` is the least prime dividing `n` for `n ≥ 2`.
    pub fn new(bound: usize) -> Self {
        let bound = bound.max(2);
        let mut spf = vec![0u32; bound + 1];
        let mut primes = Vec::new();
        for i in 2..=bound {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let ip = i * p as usize;
                if p > si || ip > bound {
                    break;
                }
                spf[ip] = p;
            }
        }
        Sieve { spf, primes }
    }

    /// Process-wide sieve with [`DEFAULT_SIEVE_BOUND`], built on first use.
    pub fn shared() -> &'static Sieve {
        static SHARED: OnceLock<Sieve> = OnceLock::new();
        SHARED.get_or_init(|| Sieve::new(DEFAULT_SIEVE_BOUND))
    }

    pub fn bound(&self) -> usize {
        self.spf.len() - 1
    }

    /// All primes up to the bound, ascending.
    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Primes `p ≤ x`.
    pub fn primes_up_to(&self, x: usize) -> &[u32] {
        let end = self.primes.partition_point(|&p| (p as usize) <= x);
        &self.primes[..end]
    }

    /// Smallest prime factor of `2 ≤ n ≤ bound`.
    #[inline]
    pub fn spf(&self, n: usize) -> usize {
        self.spf[n] as usize
    }

    pub fn is_prime(&self, n: u64) -> bool {
        if (n as usize) <= self.bound() {
            n >= 2 && self.spf[n as usize] as u64 == n
        } else {
            match self.factorize(n) {
                Ok(f) => f.factors.len() == 1 && f.factors[0].1 == 1,
                Err(_) => false,
            }
        }
    }

    /// Exact factorization: table lookups up to the bound, trial division by
    /// the tabulated primes up to the bound squared.
    pub fn factorize(&self, n: u64) -> Result<Factorization> {
        if n == 0 {
            return Err(Error::OutOfRange("cannot factor 0".into()));
        }
        let bound = self.bound() as u64;
        if n > bound.saturating_mul(bound) {
            return Err(Error::OutOfRange(format!(
                "{n} exceeds the square of the sieve bound {bound}"
            )));
        }
        let mut factors = Vec::new();
        let mut m = n;
        if m > bound {
            for &p in &self.primes {
                let p = p as u64;
                if p * p > m || m <= bound {
                    break;
                }
                if m % p == 0 {
                    let mut e = 0;
                    while m % p == 0 {
                        m /= p;
                        e += 1;
                    }
                    factors.push((p, e));
                }
            }
            if m > bound {
                factors.push((m, 1));
                m = 1;
            }
        }
        while m > 1 {
            let p = self.spf[m as usize] as u64;
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
        factors.sort_unstable();
        Ok(Factorization { n, factors })
    }
}

/// `n = ∏ p^e` with primes strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub n: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    /// Möbius function.
    pub fn mobius(&self) -> i32 {
        if self.is_squarefree() {
            if self.factors.len() % 2 == 0 {
                1
            } else {
                -1
            }
        } else {
            0
        }
    }

    /// Euler's totient.
    pub fn euler_phi(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    /// Number of divisors.
    pub fn divisor_count(&self) -> u64 {
        self.factors.iter().map(|&(_, e)| e as u64 + 1).product()
    }

    /// Product of the distinct primes.
    pub fn radical(&self) -> u64 {
        self.factors.iter().map(|&(p, _)| p).product()
    }

    /// Exponent of `p` in `n`.
    pub fn valuation(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }
}

/// Factor `n` with the shared sieve.
pub fn factorize(n: u64) -> Result<Factorization> {
    Sieve::shared().factorize(n)
}

/// `(−1)^((m²−1)/8)` indexed by `m mod 8`.
const TWO_TABLE: [i8; 8] = [0, 1, 0, -1, 0, -1, 0, 1];

/// Kronecker symbol `(m/n)` for arbitrary integers, with `(m/0) = 1` iff
/// `m = ±1`.
pub fn kronecker(m: i64, n: i64) -> i8 {
    let mut a = m as i128;
    let mut b = n as i128;
    if b == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    if a % 2 == 0 && b % 2 == 0 {
        return 0;
    }
    let v = b.trailing_zeros();
    b >>= v;
    let mut k: i8 = if v % 2 == 0 {
        1
    } else {
        TWO_TABLE[(a & 7) as usize]
    };
    if b < 0 {
        b = -b;
        if a < 0 {
            k = -k;
        }
    }
    // b is odd and positive from here on.
    loop {
        if a == 0 {
            return if b > 1 { 0 } else { k };
        }
        let v = a.trailing_zeros();
        a >>= v;
        if v % 2 == 1 {
            k *= TWO_TABLE[(b & 7) as usize];
        }
        if a & b & 2 != 0 {
            k = -k;
        }
        let r = a.abs();
        a = b % r;
        b = r;
    }
}

/// The two shapes of a fundamental discriminant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscriminantKind {
    /// `m ≡ 1 mod 4`, squarefree.
    OddSquarefree,
    /// `m = 4m′`, `m′` squarefree, `m′ ≡ 2, 3 mod 4`.
    FourTimesSquarefree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FundamentalDiscriminant {
    pub m: i64,
    pub kind: DiscriminantKind,
}

impl FundamentalDiscriminant {
    /// Classify `m`; `None` if it is not a fundamental discriminant.
    pub fn new(m: i64) -> Option<Self> {
        if m == 0 {
            return None;
        }
        if m.rem_euclid(4) == 1 {
            return is_squarefree(m.unsigned_abs()).then_some(Self {
                m,
                kind: DiscriminantKind::OddSquarefree,
            });
        }
        if m % 4 == 0 {
            let q = m / 4;
            let r = q.rem_euclid(4);
            if (r == 2 || r == 3) && is_squarefree(q.unsigned_abs()) {
                return Some(Self {
                    m,
                    kind: DiscriminantKind::FourTimesSquarefree,
                });
            }
        }
        None
    }

    /// Conductor `|m|`.
    pub fn conductor(&self) -> u64 {
        self.m.unsigned_abs()
    }
}

/// Squarefree test through the shared sieve.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn is_squarefree(n: u64) -> bool {
    match factorize(n) {
        Ok(f) => f.is_squarefree(),
        Err(_) => false,
    }
}

/// Flags `ok[i]` for `i ≤ limit` marking squarefree integers (`ok[0] = false`).
pub fn squarefree_flags(limit: usize) -> Vec<bool> {
    let mut ok = vec![true; limit + 1];
    ok[0] = false;
    let mut q = 2usize;
    while q * q <= limit {
        let sq = q * q;
        let mut j = sq;
        while j <= limit {
            ok[j] = false;
            j += sq;
        }
        q += 1;
    }
    ok
}

/// All odd squarefree `d` with `0 < 8d < X`, ascending.
pub fn enumerate_twist_moduli(x: f64) -> Vec<u64> {
    if !(x > 8.0) {
        return Vec::new();
    }
    // Largest d with 8d < x.
    let mut top = (x / 8.0).floor() as u64;
    while top > 0 && (8 * top) as f64 >= x {
        top -= 1;
    }
    let flags = squarefree_flags(top as usize);
    (1..=top)
        .step_by(2)
        .filter(|&d| flags[d as usize])
        .collect()
}

/// Every fundamental discriminant with `M ≤ |m| < 2M`, ordered by `|m|` with
/// the negative one first.
pub fn enumerate_fundamental_discriminants(
    big_m: f64,
    both_signs: bool,
) -> Vec<FundamentalDiscriminant> {
    let lo = big_m.ceil().max(1.0) as i64;
    let hi = (2.0 * big_m).ceil() as i64; // exclusive
    let mut out = Vec::new();
    for a in lo..hi {
        if (a as f64) < big_m || (a as f64) >= 2.0 * big_m {
            continue;
        }
        if both_signs {
            if let Some(fd) = FundamentalDiscriminant::new(-a) {
                out.push(fd);
            }
        }
        if let Some(fd) = FundamentalDiscriminant::new(a) {
            out.push(fd);
        }
    }
    out
}

/// `d(n)` for `1 ≤ n ≤ limit` (index 0 unused).
pub fn divisor_counts(limit: usize) -> Vec<u32> {
    let mut d = vec![0u32; limit + 1];
    for i in 1..=limit {
        let mut j = i;
        while j <= limit {
            d[j] += 1;
            j += i;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn legendre_by_squares(a: i64, p: i64) -> i8 {
        let r = a.rem_euclid(p);
        if r == 0 {
            return 0;
        }
        if (1..p).any(|x| (x * x) % p == r) {
            1
        } else {
            -1
        }
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(1, 7), 1);
        assert_eq!(kronecker(12, 3), 0);
        assert_eq!(kronecker(5, 3), -1);
    }

    #[test]
    fn kronecker_zero_convention() {
        assert_eq!(kronecker(1, 0), 1);
        assert_eq!(kronecker(-1, 0), 1);
        assert_eq!(kronecker(2, 0), 0);
        assert_eq!(kronecker(0, 0), 0);
        assert_eq!(kronecker(0, 1), 1);
        assert_eq!(kronecker(0, -1), 1);
    }

    #[test]
    fn kronecker_even_and_negative_bottom() {
        // (m/2) is 0 for even m, 1 for m ≡ ±1 mod 8 and −1 for m ≡ ±3 mod 8.
        assert_eq!(kronecker(5, 2), -1);
        assert_eq!(kronecker(7, 2), 1);
        assert_eq!(kronecker(4, 2), 0);
        // (m/−1) is the sign of m.
        assert_eq!(kronecker(-3, -1), -1);
        assert_eq!(kronecker(3, -1), 1);
    }

    #[test]
    fn matches_legendre_for_odd_primes() {
        let sieve = Sieve::new(200);
        for &p in sieve.primes_up_to(200).iter().skip(1) {
            for a in -60i64..60 {
                assert_eq!(kronecker(a, p as i64), legendre_by_squares(a, p as i64));
            }
        }
    }

    #[test]
    fn completely_multiplicative_in_both_arguments() {
        for m in -150i64..=150 {
            for n1 in 1i64..=60 {
                for n2 in 1i64..=60 {
                    assert_eq!(
                        kronecker(m, n1 * n2),
                        kronecker(m, n1) * kronecker(m, n2),
                        "({m}/{n1}·{n2})"
                    );
                }
            }
        }
        for n in 1i64..=150 {
            for m1 in -40i64..=40 {
                for m2 in -40i64..=40 {
                    if n % 2 == 1 {
                        assert_eq!(kronecker(m1 * m2, n), kronecker(m1, n) * kronecker(m2, n));
                    }
                }
            }
        }
    }

    #[test]
    fn multiplicative_up_to_one_thousand() {
        // Strided so the full range is covered in reasonable time.
        for m in (-1000i64..=1000).step_by(7) {
            for n1 in (1i64..=1000).step_by(37) {
                for n2 in (1i64..=1000).step_by(41) {
                    assert_eq!(kronecker(m, n1 * n2), kronecker(m, n1) * kronecker(m, n2));
                }
            }
        }
    }

    #[test]
    fn quadratic_reciprocity() {
        for m in (1i64..=500).step_by(2) {
            for n in (1i64..=500).step_by(2) {
                if gcd(m, n) != 1 {
                    continue;
                }
                let sign = if ((m - 1) / 2 * ((n - 1) / 2)) % 2 == 0 { 1 } else { -1 };
                assert_eq!(kronecker(m, n) * kronecker(n, m), sign, "m={m} n={n}");
            }
        }
    }

    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().factors.is_empty());
        assert_eq!(factorize(12).unwrap().factors, vec![(2, 2), (3, 1)]);
        assert_eq!(
            factorize(9_699_690).unwrap().factors,
            vec![(2, 1), (3, 1), (5, 1), (7, 1), (11, 1), (13, 1), (17, 1), (19, 1)]
        );
    }

    #[test]
    fn factorize_beyond_table_uses_trial_division() {
        let sieve = Sieve::new(1000);
        let n = 991u64 * 997;
        assert_eq!(sieve.factorize(n).unwrap().factors, vec![(991, 1), (997, 1)]);
        assert_eq!(sieve.factorize(2 * 499_979).unwrap().factors, vec![(2, 1), (499_979, 1)]);
        assert_eq!(sieve.factorize(1_000_000).unwrap().factors, vec![(2, 6), (5, 6)]);
        assert!(matches!(sieve.factorize(1_000_001), Err(Error::OutOfRange(_))));
        assert!(matches!(sieve.factorize(0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn derived_functions() {
        let f = factorize(360).unwrap();
        assert_eq!(f.euler_phi(), 96);
        assert_eq!(f.divisor_count(), 24);
        assert_eq!(f.mobius(), 0);
        assert_eq!(f.radical(), 30);
        assert_eq!(factorize(30).unwrap().mobius(), -1);
        assert_eq!(factorize(1).unwrap().mobius(), 1);
        assert_eq!(factorize(1).unwrap().euler_phi(), 1);
    }

    #[test]
    fn twist_moduli_examples() {
        assert_eq!(enumerate_twist_moduli(40.0), vec![1, 3]);
        assert!(enumerate_twist_moduli(8.0).is_empty());
        assert_eq!(enumerate_twist_moduli(100.0), vec![1, 3, 5, 7, 11]);
    }

    #[test]
    fn fundamental_discriminant_examples() {
        let ms = |v: Vec<FundamentalDiscriminant>| v.into_iter().map(|f| f.m).collect::<Vec<_>>();
        assert_eq!(ms(enumerate_fundamental_discriminants(5.0, false)), vec![5, 8]);
        assert_eq!(ms(enumerate_fundamental_discriminants(1.0, false)), vec![1]);
        assert_eq!(ms(enumerate_fundamental_discriminants(3.0, true)), vec![-3, -4, 5]);
    }

    #[test]
    fn discriminants_satisfy_type_invariant_without_duplicates() {
        let all = enumerate_fundamental_discriminants(500.0, true);
        let mut seen = std::collections::HashSet::new();
        for fd in &all {
            assert!(seen.insert(fd.m));
            let a = fd.m.unsigned_abs();
            assert!((500..1000).contains(&a));
            match fd.kind {
                DiscriminantKind::OddSquarefree => {
                    assert_eq!(fd.m.rem_euclid(4), 1);
                    assert!(is_squarefree(a));
                }
                DiscriminantKind::FourTimesSquarefree => {
                    assert_eq!(fd.m % 4, 0);
                    let q = fd.m / 4;
                    assert!(matches!(q.rem_euclid(4), 2 | 3));
                    assert!(is_squarefree(q.unsigned_abs()));
                }
            }
        }
        // Brute-force recount of the same window.
        let brute = (-999i64..=999)
            .filter(|m| (500..1000).contains(&m.unsigned_abs()))
            .filter(|&m| FundamentalDiscriminant::new(m).is_some())
            .count();
        assert_eq!(brute, all.len());
    }

    #[test]
    fn eight_d_is_fundamental() {
        let fds: std::collections::HashSet<i64> = enumerate_fundamental_discriminants(8.0, false)
            .into_iter()
            .chain(enumerate_fundamental_discriminants(16.0, false))
            .chain(enumerate_fundamental_discriminants(32.0, false))
            .chain(enumerate_fundamental_discriminants(64.0, false))
            .chain(enumerate_fundamental_discriminants(128.0, false))
            .chain(enumerate_fundamental_discriminants(256.0, false))
            .chain(enumerate_fundamental_discriminants(512.0, false))
            .map(|f| f.m)
            .collect();
        for d in enumerate_twist_moduli(1024.0) {
            if 8 * d >= 8 {
                assert!(fds.contains(&(8 * d as i64)), "8·{d}");
            }
        }
    }

    #[test]
    fn divisor_counts_match_factorization() {
        let d = divisor_counts(2000);
        for n in 1..=2000u64 {
            assert_eq!(d[n as usize] as u64, factorize(n).unwrap().divisor_count());
        }
    }

    proptest! {
        #[test]
        fn factorization_multiplies_back(n in 1u64..50_000_000) {
            let f = factorize(n).unwrap();
            let mut prod = 1u64;
            let mut last = 0u64;
            for &(p, e) in &f.factors {
                prop_assert!(p > last);
                prop_assert!(e >= 1);
                prop_assert!(Sieve::shared().is_prime(p));
                prod *= p.pow(e);
                last = p;
            }
            prop_assert_eq!(prod, n);
        }

        #[test]
        fn kronecker_multiplicative(m in -1000i64..=1000, n1 in 1i64..=1000, n2 in 1i64..=1000) {
            prop_assert_eq!(kronecker(m, n1 * n2), kronecker(m, n1) * kronecker(m, n2));
        }
    }
}
