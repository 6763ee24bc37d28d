//! Quadratic Gauss-like sums
//! `G_k(n) = ((1−i)/2 + (−1/n)(1+i)/2) Σ_{a mod n} (a/n) e(ak/n)` for odd `n`,
//! by direct summation and in closed form.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, gcd, kronecker};
use crate::error::{Error, Result};
use crate::sum::ComplexAccumulator;

/// Largest modulus accepted by [`gauss_brute`].
pub const BRUTE_LIMIT: u64 = 100_000;

/// An exact value `coeff · √radicand` with `radicand` squarefree.
///
/// For odd moduli every local factor has an integral coefficient, so the
/// rational coefficient is held as an integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaussSumExact {
    pub coeff: i128,
    pub radicand: u64,
}

impl GaussSumExact {
    pub const ZERO: Self = Self { coeff: 0, radicand: 1 };
    pub const ONE: Self = Self { coeff: 1, radicand: 1 };

    pub fn integer(c: i128) -> Self {
        Self { coeff: c, radicand: 1 }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == 0
    }

    pub fn value(&self) -> f64 {
        self.coeff as f64 * (self.radicand as f64).sqrt()
    }
}

impl Mul for GaussSumExact {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        if self.coeff == 0 || rhs.coeff == 0 {
            return Self::ZERO;
        }
        // √r₁·√r₂ = g·√(r₁r₂/g²) with g = gcd(r₁, r₂); both are squarefree.
        let g = gcd(self.radicand, rhs.radicand);
        Self {
            coeff: self.coeff * rhs.coeff * g as i128,
            radicand: (self.radicand / g) * (rhs.radicand / g),
        }
    }
}

impl fmt::Display for GaussSumExact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand == 1 || self.coeff == 0 {
            write!(f, "{}", self.coeff)
        } else {
            write!(f, "{}*sqrt({})", self.coeff, self.radicand)
        }
    }
}

fn check_odd(n: u64) -> Result<()> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::OutOfRange(format!("modulus {n} must be odd and positive")));
    }
    Ok(())
}

/// `G_k(n)` from its definition, summed in double precision.
pub fn gauss_brute(k: i64, n: u64) -> Result<Complex64> {
    check_odd(n)?;
    if n > BRUTE_LIMIT {
        return Err(Error::OutOfRange(format!("modulus {n} exceeds {BRUTE_LIMIT}")));
    }
    let kr = k.rem_euclid(n as i64) as u64;
    let mut acc = ComplexAccumulator::new();
    for a in 0..n {
        let chi = kronecker(a as i64, n as i64);
        if chi == 0 {
            continue;
        }
        // Reduce a·k mod n exactly before forming the angle.
        let r = (a as u128 * kr as u128 % n as u128) as f64;
        let theta = 2.0 * PI * r / n as f64;
        acc.add(Complex64::new(theta.cos(), theta.sin()) * chi as f64);
    }
    let eps = kronecker(-1, n as i64) as f64;
    let pref = Complex64::new(0.5, -0.5) + Complex64::new(0.5, 0.5) * eps;
    Ok(pref * acc.value())
}

/// Shape of the local factor `G_k(p^β)` given `α = v_p(k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalShape {
    Zero,
    /// `φ(p^β)`.
    Phi,
    /// `−p^α` (here `β = α + 1` is even).
    NegPower(u32),
    /// `(k p^{−α} / p) p^α √p` (here `β = α + 1` is odd).
    SignedRoot(u32),
}

/// Case table for `G_k(p^β)`, `α = v_p(k)` (`None` for `k = 0`).
pub fn local_shape(alpha: Option<u32>, beta: u32) -> LocalShape {
    match alpha {
        None => {
            if beta % 2 == 1 {
                LocalShape::Zero
            } else {
                LocalShape::Phi
            }
        }
        Some(a) if beta <= a => {
            if beta % 2 == 1 {
                LocalShape::Zero
            } else {
                LocalShape::Phi
            }
        }
        Some(a) if beta == a + 1 => {
            if beta % 2 == 0 {
                LocalShape::NegPower(a)
            } else {
                LocalShape::SignedRoot(a)
            }
        }
        Some(_) => LocalShape::Zero,
    }
}

/// `G_k(p^β) / p^β` in floating point, where `unit_symbol = (k p^{−α} / p)`.
/// Unlike the exact form this never overflows for large `α`.
pub fn normalized_local(alpha: Option<u32>, unit_symbol: i8, p: f64, beta: u32) -> f64 {
    match local_shape(alpha, beta) {
        LocalShape::Zero => 0.0,
        LocalShape::Phi if beta == 0 => 1.0,
        LocalShape::Phi => 1.0 - 1.0 / p,
        LocalShape::NegPower(_) => -1.0 / p,
        LocalShape::SignedRoot(_) => unit_symbol as f64 / p.sqrt(),
    }
}

fn valuation(k: i64, p: u64) -> Option<u32> {
    if k == 0 {
        return None;
    }
    let mut a = 0u32;
    let mut m = k.unsigned_abs();
    while m % p == 0 {
        m /= p;
        a += 1;
    }
    Some(a)
}

/// Local factor `G_k(p^β)`.
pub fn gauss_prime_power(k: i64, p: u64, beta: u32) -> GaussSumExact {
    let pb = |e: u32| (p as i128).pow(e);
    match local_shape(valuation(k, p), beta) {
        LocalShape::Zero => GaussSumExact::ZERO,
        LocalShape::Phi => GaussSumExact::integer(phi_prime_power(p, beta)),
        LocalShape::NegPower(a) => GaussSumExact::integer(-pb(a)),
        LocalShape::SignedRoot(a) => {
            let unit = k / (p as i64).pow(a);
            GaussSumExact {
                coeff: kronecker(unit, p as i64) as i128 * pb(a),
                radicand: p,
            }
        }
    }
}

fn phi_prime_power(p: u64, beta: u32) -> i128 {
    if beta == 0 {
        1
    } else {
        (p as i128 - 1) * (p as i128).pow(beta - 1)
    }
}

/// `G_k(n)` as the product of its local factors.
pub fn gauss_closed(k: i64, n: u64) -> Result<GaussSumExact> {
    check_odd(n)?;
    let fact = factorize(n)?;
    let mut out = GaussSumExact::ONE;
    for &(p, beta) in &fact.factors {
        out = out * gauss_prime_power(k, p, beta);
        if out.is_zero() {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::Factorization;

    fn close(a: Complex64, b: f64, tol: f64) -> bool {
        (a.re - b).abs() < tol && a.im.abs() < tol
    }

    #[test]
    fn brute_examples() {
        assert!(close(gauss_brute(0, 1).unwrap(), 1.0, 1e-14));
        assert!(close(gauss_brute(1, 3).unwrap(), 3f64.sqrt(), 1e-12));
        assert!(close(gauss_brute(2, 15).unwrap(), 15f64.sqrt(), 1e-12));
        assert!(gauss_brute(1, 4).is_err());
    }

    #[test]
    fn closed_examples() {
        assert_eq!(gauss_closed(0, 9).unwrap(), GaussSumExact::integer(6));
        assert_eq!(gauss_closed(3, 9).unwrap(), GaussSumExact::integer(-3));
        assert_eq!(gauss_closed(1, 9).unwrap(), GaussSumExact::ZERO);
        assert_eq!(
            gauss_closed(2, 15).unwrap(),
            GaussSumExact { coeff: 1, radicand: 15 }
        );
        assert_eq!(gauss_closed(5, 1).unwrap(), GaussSumExact::ONE);
    }

    #[test]
    fn closed_matches_brute_small() {
        for n in (1..400u64).step_by(2) {
            for k in -30i64..=30 {
                let exact = gauss_closed(k, n).unwrap().value();
                let brute = gauss_brute(k, n).unwrap();
                let tol = 1e-6 * (n as f64).sqrt().max(1.0);
                assert!((brute.re - exact).abs() < tol, "k = {k}, n = {n}");
                assert!(brute.im.abs() < 1e-7 * (n as f64).sqrt(), "k = {k}, n = {n}");
            }
        }
    }

    #[test]
    fn multiplicative_exactly() {
        for m in (1..120u64).step_by(2) {
            for n in (1..120u64).step_by(2) {
                if gcd(m, n) != 1 {
                    continue;
                }
                for k in -20i64..=20 {
                    let lhs = gauss_closed(k, m * n).unwrap();
                    let rhs = gauss_closed(k, m).unwrap() * gauss_closed(k, n).unwrap();
                    assert_eq!(lhs, rhs, "k = {k}, m = {m}, n = {n}");
                }
            }
        }
    }

    #[test]
    fn k_zero_is_phi_on_squares() {
        for n in (1..3000u64).step_by(2) {
            let g = gauss_closed(0, n).unwrap();
            let r = (n as f64).sqrt().round() as u64;
            let f: Factorization = factorize(n).unwrap();
            if r * r == n {
                assert_eq!(g, GaussSumExact::integer(f.euler_phi() as i128));
            } else {
                assert!(g.is_zero());
            }
        }
    }

    #[test]
    fn normalized_matches_exact() {
        for p in [3u64, 5, 7, 11] {
            for k in -200i64..=200 {
                for beta in 0..6u32 {
                    let exact = gauss_prime_power(k, p, beta).value() / (p as f64).powi(beta as i32);
                    let alpha = valuation(k, p);
                    let unit = alpha.map_or(0, |a| kronecker(k / (p as i64).pow(a), p as i64));
                    let approx = normalized_local(alpha, unit, p as f64, beta);
                    assert!((exact - approx).abs() < 1e-14, "k = {k}, p = {p}, beta = {beta}");
                }
            }
        }
    }

    #[test]
    fn product_merges_radicands() {
        let a = GaussSumExact { coeff: 2, radicand: 6 };
        let b = GaussSumExact { coeff: -1, radicand: 15 };
        assert_eq!(a * b, GaussSumExact { coeff: -6, radicand: 10 });
        assert!(((a * b).value() - a.value() * b.value()).abs() < 1e-12);
    }
}
