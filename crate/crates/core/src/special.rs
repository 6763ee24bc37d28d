//! Special functions on the real line and in the complex plane: log-gamma,
//! the regularized upper incomplete gamma function, integer-order Bessel
//! functions of the first kind and the Riemann zeta function at real `s > 1`.

use num_complex::Complex64;
use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `B_{2k} / (2k (2k − 1))` for `k = 1..=8`.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// `ln Γ(z)` for complex `z` away from the poles. The imaginary part is only
/// determined modulo 2π, which is irrelevant once exponentiated.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let pi = Complex64::new(PI, 0.0);
        return pi.ln() - (pi * z).sin().ln() - ln_gamma(Complex64::new(1.0, 0.0) - z);
    }
    let mut z = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while z.norm() < 16.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = inv;
    for c in STIRLING {
        series += p * c;
        p *= inv2;
    }
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series - shift
}

/// `Γ(z)` for complex `z`.
pub fn gamma(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}

/// `ln Γ(x)` for real `x > 0`.
pub fn ln_gamma_real(x: f64) -> f64 {
    ln_gamma(Complex64::new(x, 0.0)).re
}

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x)/Γ(a)` for complex
/// `a` with `Re a > 0` and real `x ≥ 0`.
pub fn gamma_q(a: Complex64, x: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if x <= 0.0 {
        return one;
    }
    let lnx = x.ln();
    if x < a.re + 1.0 {
        // P(a, x) = x^a e^{-x} / Γ(a+1) Σ xⁿ / ((a+1)…(a+n)).
        let mut term = one;
        let mut total = one;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            total += term;
            if term.norm() < 1e-17 * total.norm() {
                break;
            }
        }
        let pre = (a * lnx - x - ln_gamma(a + 1.0)).exp();
        one - pre * total
    } else {
        // Modified Lentz evaluation of the continued fraction for Γ(a, x).
        let tiny = 1e-300;
        let mut b = Complex64::new(x + 1.0, 0.0) - a;
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (Complex64::new(i as f64, 0.0) - a);
            b += 2.0;
            d = an * d + b;
            if d.norm() < tiny {
                d = Complex64::new(tiny, 0.0);
            }
            c = b + an / c;
            if c.norm() < tiny {
                c = Complex64::new(tiny, 0.0);
            }
            d = d.inv();
            let del = d * c;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        (a * lnx - x - ln_gamma(a)).exp() * h
    }
}

/// `Q(k, x) = e^{-x} Σ_{j<k} x^j / j!` for a positive integer `k`.
pub fn gamma_q_int(k: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut total = 1.0;
    for j in 1..k {
        term *= x / j as f64;
        total += term;
    }
    (-x).exp() * total
}

/// Bessel function `J_n(x)` of integer order `n ≥ 0` at real `x ≥ 0`.
/// Uses the Hankel asymptotic expansion for large arguments and a
/// normalized backward recurrence otherwise.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nu = n as f64;
    if x >= 25.0 + nu * nu / 4.0 {
        hankel_j(nu, x)
    } else {
        miller_j(n, x)
    }
}

fn hankel_j(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        let mag = term.abs();
        if mag > last {
            break;
        }
        last = mag;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if mag < 1e-17 {
            break;
        }
    }
    let omega = x - (nu / 2.0 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * omega.cos() - q * omega.sin())
}

fn miller_j(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let mut m = (top + 20.0 + (40.0 * top).sqrt()) as u32;
    m += m % 2;
    let two_over_x = 2.0 / x;
    let (mut jp, mut j) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut ans = 0.0;
    for k in (1..=m).rev() {
        let jm = k as f64 * two_over_x * j - jp;
        jp = j;
        j = jm;
        if k - 1 == n {
            ans = j;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            ans *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += j;
    ans / norm
}

/// Riemann zeta at real `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta evaluated at s = {s} ≤ 1");
    const N: usize = 30;
    // B_{2k} / (2k)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30_240.0,
        -1.0 / 1_209_600.0,
        1.0 / 47_900_160.0,
        -691.0 / 1_307_674_368_000.0,
    ];
    let mut total = 0.0;
    for n in 1..N {
        total += (n as f64).powf(-s);
    }
    let nf = N as f64;
    total += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    let mut rising = s;
    let mut pw = nf.powf(-s - 1.0);
    for (k, b) in B.iter().enumerate() {
        total += b * rising * pw;
        let k2 = 2.0 * k as f64;
        rising *= (s + k2 + 1.0) * (s + k2 + 2.0);
        pw /= nf * nf;
    }
    total
}

/// Trapezoid rule on `[a, b]` with `n` panels.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = crate::sum::Accumulator::new();
    acc.add(0.5 * (f(a) + f(b)));
    for i in 1..n {
        acc.add(f(a + i as f64 * h));
    }
    acc.value() * h
}
