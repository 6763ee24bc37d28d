//! Self-checks: each suite compares two independent routes to the same
//! quantity (or checks an exact identity) and reports one outcome line.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith::{divisor_counts, FundamentalDiscriminant, Sieve};
use crate::charsum::{
    check_inflation_pointwise, default_shape_grid, poisson2_verify, poisson_verify, prop_key_shape_scan,
    write_shape_csv, Flavor, PoissonVariant,
};
use crate::error::Result;
use crate::gauss::{gauss_brute, gauss_closed};
use crate::kernels::{default_test_function, imag, w_contour, w_half, WeightJ};
use crate::lfun::{constant_cf, h2_at, verify_functional_equation_multi, EulerConstants, TwistEngine};
use crate::mds::{diagonal_l_product, diagonal_series_g, verify_factorization, DiagonalVariant, ZPoint, Z_LADDERS};
use crate::modform::{build_tau, sym2_coefficients, EigenformCoefficients, Ladder, Sym2Coefficients};
use crate::moments::{
    ab_moment_scan, moment_raw, moment_smoothed, with_threads, write_reports_csv, write_reports_json,
    write_values_csv,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

fn outcome(id: u8, name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { id, name, passed, detail }
}

/// Closed-form Gauss sums against brute force for odd `n ≤ n_max`, `|k| ≤ k_max`.
pub fn gauss_oracle(n_max: u64, k_max: i64) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for n in (1..=n_max).step_by(2) {
        let scale = (n as f64).sqrt().max(1.0);
        for k in -k_max..=k_max {
            let exact = gauss_closed(k, n)?.value();
            let brute = gauss_brute(k, n)?;
            worst = worst.max((brute - Complex64::new(exact, 0.0)).norm() / scale);
            count += 1;
        }
    }
    Ok(outcome(
        1,
        "Gauss sums, closed form vs brute force",
        worst < 1e-6,
        format!("{count} pairs, max |diff|/max(1,sqrt n) = {worst:.2e} (< 1e-6)"),
    ))
}

/// Small values against an independent product expansion, Hecke relations
/// for `p ≤ 100`, and `|λ(n)| ≤ d(n)` up to `deligne_max`.
pub fn tau_hecke(coeffs: &EigenformCoefficients, deligne_max: usize) -> Result<Outcome> {
    let oracle = build_tau(60, Ladder::Pentagonal)?;
    let mut bad = Vec::new();
    for (n, want) in [(1usize, 1i128), (2, -24), (3, 252)] {
        if coeffs.tau(n) != want || oracle[n] != want {
            bad.push(format!("tau({n})"));
        }
    }
    if (1..=60).any(|n| coeffs.tau(n) != oracle[n]) {
        bad.push("table vs product expansion".into());
    }
    let primes = Sieve::shared().primes_up_to(100);
    let mut relations = 0usize;
    for &p in primes {
        let p = p as usize;
        let want = coeffs.tau(p) * coeffs.tau(p) - (p as i128).pow(11);
        if coeffs.tau(p * p) != want {
            bad.push(format!("tau({p}^2)"));
        }
        relations += 1;
    }
    for m in 1..=100usize {
        for n in (m + 1)..=100usize {
            if crate::arith::gcd(m as u64, n as u64) == 1 && coeffs.tau(m * n) != coeffs.tau(m) * coeffs.tau(n) {
                bad.push(format!("tau({m}*{n})"));
            }
            relations += 1;
        }
    }
    let top = deligne_max.min(coeffs.n_max);
    let d = divisor_counts(top);
    let violations = (1..=top)
        .filter(|&n| coeffs.lambda(n).abs() > d[n] as f64 * (1.0 + 1e-12))
        .count();
    if top < deligne_max {
        bad.push(format!("table ends at {top}"));
    }
    Ok(outcome(
        2,
        "tau and Hecke relations",
        bad.is_empty() && violations == 0,
        format!(
            "{relations} relations checked, {} mismatches; Deligne bound violations for n <= {top}: {violations}{}",
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(" ({})", bad.join(", ")) }
        ),
    ))
}

/// Closed-form `W_{1/2}` against contour quadrature at six points.
pub fn kernel_identity() -> Result<Outcome> {
    let half = Complex64::new(0.5, 0.0);
    let mut worst = 0.0f64;
    for x in [0.05, 0.2, 0.5, 1.0, 2.0, 4.0] {
        let quad = w_contour(x, half, 12, 2.0, 1e-12)?.value;
        worst = worst.max((quad - w_half(x, 12)).norm());
    }
    Ok(outcome(
        3,
        "kernel W_1/2 closed form vs contour",
        worst < 1e-8,
        format!("6 points, max deviation {worst:.2e} (< 1e-8)"),
    ))
}

/// Instances `(n₁, n₂, scale, variant)`; `n₂ = 1` except for two moduli.
pub const POISSON_INSTANCES: [(u64, u64, f64, PoissonVariant); 22] = [
    (1, 1, 3.0, PoissonVariant::Simple),
    (3, 1, 60.0, PoissonVariant::Simple),
    (9, 1, 50.0, PoissonVariant::Simple),
    (25, 1, 40.0, PoissonVariant::Simple),
    (105, 1, 30.0, PoissonVariant::Simple),
    (441, 1, 25.0, PoissonVariant::Simple),
    (1155, 1, 20.0, PoissonVariant::Simple),
    (2001, 1, 20.0, PoissonVariant::Simple),
    (9, 1, 60.0, PoissonVariant::Odd),
    (15, 1, 100.0, PoissonVariant::Odd),
    (121, 1, 40.0, PoissonVariant::Odd),
    (231, 1, 35.0, PoissonVariant::Odd),
    (1001, 1, 25.0, PoissonVariant::Odd),
    (3025, 1, 30.0, PoissonVariant::Odd),
    (3, 3, 40.0, PoissonVariant::TwoModuli),
    (5, 5, 30.0, PoissonVariant::TwoModuli),
    (9, 25, 20.0, PoissonVariant::TwoModuli),
    (15, 15, 20.0, PoissonVariant::TwoModuli),
    (3, 5, 40.0, PoissonVariant::TwoModuli),
    (7, 11, 25.0, PoissonVariant::TwoModuli),
    (45, 49, 12.0, PoissonVariant::TwoModuli),
    (21, 55, 15.0, PoissonVariant::TwoModuli),
];

pub fn poisson_identities() -> Result<Outcome> {
    let f = default_test_function();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut with_dual = 0;
    for &(n1, n2, scale, variant) in &POISSON_INSTANCES {
        let r = match variant {
            PoissonVariant::TwoModuli => poisson2_verify(f, n1, n2, scale)?,
            _ => poisson_verify(f, n1, scale, variant)?,
        };
        if r.k_trunc > 0 {
            with_dual += 1;
        }
        if r.deviation >= worst {
            worst = r.deviation;
            worst_at = format!("{variant:?} n={n1}x{n2} scale={scale}");
        }
    }
    Ok(outcome(
        4,
        "Poisson summation identities",
        worst < 1e-8,
        format!(
            "{} instances ({with_dual} with dual terms), max deviation {worst:.2e} at {worst_at} (< 1e-8)",
            POISSON_INSTANCES.len()
        ),
    ))
}

/// Functional equation of the partitioned sums for `count` random
/// fundamental discriminants `|m| ≤ 200` and `z ∈ {0, ±i/4}`.
pub fn functional_equation(coeffs: &EigenformCoefficients, seed: u64, count: usize, tol: f64) -> Result<Outcome> {
    let pool: Vec<FundamentalDiscriminant> = (-200i64..=200).filter_map(FundamentalDiscriminant::new).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    while picked.len() < count.min(pool.len()) {
        let m = pool[rng.gen_range(0..pool.len())];
        if !picked.iter().any(|p: &FundamentalDiscriminant| p.m == m.m) {
            picked.push(m);
        }
    }
    let zs = [Complex64::new(0.0, 0.0), imag(0.25), imag(-0.25)];
    let mut worst = 0.0f64;
    let mut worst_m = 0;
    for m in &picked {
        let n = (12.5 * (m.m as f64).powi(2)).clamp(50.0, 80_000.0);
        for r in verify_functional_equation_multi(coeffs, m, n, &zs)? {
            if r.relative >= worst {
                worst = r.relative;
                worst_m = m.m;
            }
        }
    }
    Ok(outcome(
        5,
        "functional equation",
        worst < tol,
        format!("{} discriminants x 3 shifts, max residual {worst:.2e} at m={worst_m} (< {tol:e})", picked.len()),
    ))
}

pub fn z_points() -> Result<Vec<ZPoint>> {
    Ok(vec![
        ZPoint::real(1.0, 1.0, 1.5, 5, 1)?,
        ZPoint::new(Complex64::new(1.0, 0.5), 1.2.into(), Complex64::new(1.5, -0.3), -3, 7)?,
        ZPoint::real(1.0, 1.25, 1.75, -1, 1)?,
    ])
}

/// Truncated `Z` against `L·L·∏Y` along [`Z_LADDERS`].
pub fn z_factorization(coeffs: &EigenformCoefficients) -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for pt in z_points()? {
        let mut prev = f64::INFINITY;
        let mut devs = Vec::new();
        for &(n, k, p) in &Z_LADDERS {
            let chk = verify_factorization(coeffs, &pt, n, k, p)?;
            ok &= chk.deviation <= chk.estimate && chk.deviation < prev;
            prev = chk.deviation;
            devs.push(format!("{:.1e}/{:.1e}", chk.deviation, chk.estimate));
        }
        parts.push(devs.join(" > "));
    }
    Ok(outcome(
        6,
        "Z factorization",
        ok,
        format!("deviation/estimate per ladder: {}", parts.join("; ")),
    ))
}

/// `𝒢₂(½,½)/(ζ L L L)` against the `ℋ₂(½,½)` Euler product.
pub fn diagonal_factorization(coeffs: &EigenformCoefficients, sym2: &Sym2Coefficients, n: usize) -> Result<Outcome> {
    let n = n.min(sym2.n_max()).min(coeffs.n_max);
    let g = diagonal_series_g(coeffs, DiagonalVariant::Shifted, 0.5, 0.5, n)?;
    let l = diagonal_l_product(sym2, 0.5, 0.5);
    let h = h2_at(coeffs, 0.5, 0.5, 1_000_000.min(coeffs.n_max))?;
    let ratio = g / l.value;
    let rel = (ratio - h.value).abs() / h.value.abs();
    Ok(outcome(
        7,
        "diagonal factorization",
        rel < 1e-4,
        format!("series to {n}: ratio {ratio:.8}, Euler product {:.8}, relative {rel:.2e} (< 1e-4)", h.value),
    ))
}

/// `C_f` at `(P, Y) = (10⁵, y)` against `(10⁶, y/4)`.
pub fn constants_reproducible(coeffs: &EigenformCoefficients, sym2: &Sym2Coefficients, y: f64) -> Result<(Outcome, EulerConstants)> {
    let a = constant_cf(coeffs, sym2, 100_000, y)?;
    let b = constant_cf(coeffs, sym2, 1_000_000, y / 4.0)?;
    let rel = (a.c_f - b.c_f).abs() / a.c_f.abs();
    let out = outcome(
        8,
        "C_f reproducibility",
        rel < 1e-2,
        format!(
            "C_f = {:.7} (P=1e5, Y={y}) vs {:.7} (P=1e6, Y={}), relative {rel:.2e} (< 1e-2)",
            a.c_f,
            b.c_f,
            y / 4.0
        ),
    );
    Ok((out, a))
}

/// Smoothed second moment against its main term: ratio in `[0.5, 1.5]` at
/// `xs[band_index]` and `|ratio − 1|` non-increasing along `xs`.
pub fn moment_check(
    engine: &TwistEngine,
    constants: &EulerConstants,
    xs: &[f64],
    band_index: usize,
    tol: f64,
) -> Result<Outcome> {
    let w = WeightJ::default();
    let mut ratios = Vec::new();
    let mut failures = 0;
    for &x in xs {
        let (r, _) = moment_smoothed(engine, x, &w, tol, constants, "")?;
        ratios.push(r.ratio.unwrap_or(f64::NAN));
        failures += r.tolerance_failures;
    }
    let band = ratios.get(band_index).is_some_and(|r| (0.5..=1.5).contains(r));
    let trend = ratios.windows(2).all(|p| (p[1] - 1.0).abs() <= (p[0] - 1.0).abs());
    let listed: Vec<String> = xs.iter().zip(&ratios).map(|(x, r)| format!("X={x:e}: {r:.4}")).collect();
    Ok(outcome(
        9,
        "smoothed second moment vs main term",
        band && trend,
        format!(
            "ratios {}; band [0.5,1.5] at X={:e}: {band}; |ratio-1| non-increasing: {trend}; values over tol {tol:e}: {failures}",
            listed.join(", "),
            xs.get(band_index).copied().unwrap_or(f64::NAN)
        ),
    ))
}

/// Pointwise inflation inequalities on random `(m, N, t, p)`.
pub fn inflation(coeffs: &EigenformCoefficients, seed: u64, count: usize) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let primes = Sieve::shared().primes_up_to(40);
    let primes: Vec<u64> = primes.iter().skip(1).map(|&p| p as u64).collect();
    let mut violations = 0;
    let mut done = 0;
    while done < count {
        let m = rng.gen_range(-500i64..=500);
        if m == 0 {
            continue;
        }
        let n = rng.gen_range(1.0..400.0);
        let t = rng.gen_range(-20.0..20.0);
        let p = primes[rng.gen_range(0..primes.len())];
        if !check_inflation_pointwise(coeffs, m, n, t, p)?.holds {
            violations += 1;
        }
        done += 1;
    }
    Ok(outcome(
        10,
        "inflation inequalities",
        violations == 0,
        format!("{count} random tuples, {violations} violations"),
    ))
}

/// Normalized flat sums over the 3×3×3 grid: bounded, and no ratio above
/// three times the median.
pub fn shape_scan(coeffs: &EigenformCoefficients) -> Result<Outcome> {
    let (ms, ns, ts) = default_shape_grid();
    let scan = prop_key_shape_scan(coeffs, &ms, &ns, &ts, Flavor::FundamentalDiscriminants)?;
    let spread = scan.max_over_median();
    Ok(outcome(
        11,
        "character-sum shape scan",
        scan.max_ratio.is_finite() && spread <= 3.0,
        format!(
            "{} cells, bounding constant (max ratio) {:.4}, median {:.5}, max/median {spread:.1} (<= 3)",
            scan.rows.len(),
            scan.max_ratio,
            scan.median_ratio
        ),
    ))
}

fn report_bytes(engine: &TwistEngine, coeffs: &EigenformCoefficients, constants: &EulerConstants, x: f64) -> Result<Vec<u8>> {
    let w = WeightJ::default();
    let mut buf = Vec::new();
    let (raw, values) = moment_raw(engine, x, 2, 1e-6, Some(constants), "determinism")?;
    let (smooth, _) = moment_smoothed(engine, x, &w, 1e-6, constants, "determinism")?;
    let reports = [raw, smooth];
    write_reports_json(&reports, &mut buf)?;
    write_reports_csv(&reports, &mut buf)?;
    write_values_csv(&values, &mut buf)?;
    let ab = ab_moment_scan(engine, x, x / x.ln().powi(3), &w, 1e-6, "determinism")?;
    buf.extend(serde_json::to_vec(&ab).map_err(|e| crate::Error::Config(e.to_string()))?);
    buf.extend(serde_json::to_vec(constants).map_err(|e| crate::Error::Config(e.to_string()))?);
    let scan = prop_key_shape_scan(coeffs, &[1e2, 1e3], &[1e2, 1e3], &[0.0, 1.0], Flavor::FundamentalDiscriminants)?;
    write_shape_csv(&scan.rows, &mut buf)?;
    Ok(buf)
}

/// Reports produced with 1 and with 8 worker threads are byte-identical.
pub fn determinism(engine: &TwistEngine, coeffs: &EigenformCoefficients, constants: &EulerConstants, x: f64) -> Result<Outcome> {
    let one = with_threads(1, || report_bytes(engine, coeffs, constants, x))??;
    let eight = with_threads(8, || report_bytes(engine, coeffs, constants, x))??;
    Ok(outcome(
        12,
        "determinism across thread counts",
        one == eight,
        format!("{} bytes of reports at X={x:e}, threads 1 vs 8 identical: {}", one.len(), one == eight),
    ))
}

/// Suites that check identities (everything except the moment sweep, the
/// shape scan and determinism).
pub const IDENTITY_SUITES: [&str; 8] = ["gauss", "tau", "kernel", "poisson", "fe", "zfactor", "diagonal", "inflation"];

/// Table length the identity suites need.
pub const IDENTITY_TABLE: usize = 1_000_000;

/// Runs one identity suite by name.
pub fn run_identity_suite(name: &str, coeffs: &EigenformCoefficients, tol: f64, seed: u64) -> Result<Outcome> {
    match name {
        "gauss" => gauss_oracle(3000, 60),
        "tau" => tau_hecke(coeffs, 1_000_000),
        "kernel" => kernel_identity(),
        "poisson" => poisson_identities(),
        "fe" => functional_equation(coeffs, seed, 20, tol),
        "zfactor" => z_factorization(coeffs),
        "diagonal" => {
            let sym2 = sym2_coefficients(coeffs, coeffs.n_max)?;
            diagonal_factorization(coeffs, &sym2, coeffs.n_max)
        }
        "inflation" => inflation(coeffs, seed, 1000),
        other => Err(crate::Error::Config(format!(
            "unknown suite '{other}' (expected one of {} or all)",
            IDENTITY_SUITES.join(", ")
        ))),
    }
}
