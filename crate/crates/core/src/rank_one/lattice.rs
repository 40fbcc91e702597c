//! Step distribution of simple random walk on `Z^dim` and its generating
//! series `Σ_m P(S_m = x) s^m`.
//!
//! `P(S_m = x)` is computed exactly (up to rounding) by splitting the `m`
//! steps among coordinates with binomial weights, one coordinate at a time.
//! Beyond the last computed term the series is continued with the
//! asymptotic `P(S_m = x) ≈ c m^{-dim/2} + c' m^{-dim/2-1}` on the parity
//! class of `|x|_1`, fitted at the last two usable terms.

use std::f64::consts::LN_2;

/// Terms further than this many standard deviations from the binomial mean
/// are dropped; their total weight is below `e^{-100}`.
const WINDOW_SD: f64 = 15.0;
const EXPLICIT_TAIL_TERMS: usize = 200_000;

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    out.push(0.0);
    for k in 1..=n {
        let y = (k as f64).ln() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        out.push(sum);
    }
    out
}

/// `P(S_k = a)` for simple random walk on `Z`.
fn line_prob(lf: &[f64], k: usize, a: usize) -> f64 {
    if a > k || (k - a) % 2 == 1 {
        return 0.0;
    }
    (lf[k] - lf[(k + a) / 2] - lf[(k - a) / 2] - k as f64 * LN_2).exp()
}

/// `P(S_m = x)` for `m = 0..=terms`, with `x` given by absolute coordinates.
pub fn step_distribution(x: &[u64], terms: usize) -> Vec<f64> {
    assert!(!x.is_empty(), "lattice dimension must be positive");
    let lf = log_factorials(terms);
    let mut acc: Vec<f64> = (0..=terms)
        .map(|m| line_prob(&lf, m, x[0] as usize))
        .collect();
    for (j, &a) in x.iter().enumerate().skip(1) {
        let p = 1.0 / (j + 1) as f64;
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        let line: Vec<f64> = (0..=terms).map(|k| line_prob(&lf, k, a as usize)).collect();
        let mut next = vec![0.0; terms + 1];
        for (m, slot) in next.iter_mut().enumerate() {
            let mf = m as f64;
            let w = WINDOW_SD * (mf * p * (1.0 - p)).sqrt() + 10.0;
            let lo = (mf * p - w).floor().max(0.0) as usize;
            let hi = ((mf * p + w).ceil() as usize).min(m);
            let mut sum = 0.0;
            for k in lo..=hi {
                let (l, r) = (line[k], acc[m - k]);
                if l == 0.0 || r == 0.0 {
                    continue;
                }
                let w = (lf[m] - lf[k] - lf[m - k] + k as f64 * lp + (m - k) as f64 * lq).exp();
                sum += w * l * r;
            }
            *slot = sum;
        }
        acc = next;
    }
    acc
}

/// `2^{-b} ζ(b, a)` style sums `Σ_{i≥0} (m0 + 2i)^{-b}` by Euler–Maclaurin.
fn parity_zeta(b: f64, m0: f64) -> f64 {
    // Σ_{i≥0} (m0 + 2i)^{-b} = 2^{-b} ζ(b, m0/2).
    let mut a = m0 / 2.0;
    let mut head = 0.0;
    while a < 20.0 {
        head += a.powf(-b);
        a += 1.0;
    }
    let z = a.powf(1.0 - b) / (b - 1.0) + 0.5 * a.powf(-b) + b * a.powf(-b - 1.0) / 12.0
        - b * (b + 1.0) * (b + 2.0) * a.powf(-b - 3.0) / 720.0
        + b * (b + 1.0) * (b + 2.0) * (b + 3.0) * (b + 4.0) * a.powf(-b - 5.0) / 30240.0;
    (head + z) * 2f64.powf(-b)
}

/// `Σ_{i≥0} (m0 + 2i)^{-b} s^{m0+2i}` with an error bound for the part not
/// summed explicitly.
fn parity_tail(b: f64, s: f64, m0: usize) -> (f64, f64) {
    if s >= 1.0 {
        return (parity_zeta(b, m0 as f64), 0.0);
    }
    let ls = s.ln();
    let mut sum = 0.0;
    let mut m = m0 as f64;
    for _ in 0..EXPLICIT_TAIL_TERMS {
        let term = (m * ls - b * m.ln()).exp();
        sum += term;
        if term <= 1e-18 * sum {
            return (sum, 0.0);
        }
        m += 2.0;
    }
    // Remainder bounded by the s = 1 sum.
    let rest = (m * ls).exp() * parity_zeta(b, m);
    (sum + 0.5 * rest, 0.5 * rest)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TailFit {
    exponent: f64,
    c: f64,
    c_next: f64,
    c_single: f64,
    first: usize,
}

/// Generating series of `P(S_m = x)` on `Z^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSeries {
    dim: usize,
    coeffs: Vec<f64>,
    fit: Option<TailFit>,
}

impl LatticeSeries {
    pub fn new(x: &[u64], terms: usize) -> Self {
        let dim = x.len();
        let coeffs = step_distribution(x, terms);
        let parity = (x.iter().sum::<u64>() % 2) as usize;
        let last_at = |bound: usize| {
            (0..=bound)
                .rev()
                .find(|&m| m % 2 == parity && coeffs[m] > 0.0)
        };
        let exponent = dim as f64 / 2.0;
        let fit = match (last_at(terms), last_at(terms / 2)) {
            (Some(m1), Some(m2)) if m2 > 0 && m2 < m1 => {
                let (f1, f2) = (m1 as f64, m2 as f64);
                let (g1, g2) = (
                    coeffs[m1] * f1.powf(exponent),
                    coeffs[m2] * f2.powf(exponent),
                );
                let c_next = (g2 - g1) / (1.0 / f2 - 1.0 / f1);
                Some(TailFit {
                    exponent,
                    c: g1 - c_next / f1,
                    c_next,
                    c_single: g1,
                    first: m1 + 2,
                })
            }
            _ => None,
        };
        Self { dim, coeffs, fit }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Partial sum over the computed terms only.
    pub fn partial_sum(&self, s: f64, upto: usize) -> f64 {
        let mut pw = 1.0;
        let mut sum = 0.0;
        for &p in &self.coeffs[..=upto.min(self.terms())] {
            sum += p * pw;
            pw *= s;
        }
        sum
    }

    /// Series value at `s ∈ [0, 1]` with tail correction, and an error bound.
    /// Returns `+∞` at `s = 1` when the series diverges (`dim <= 2`).
    pub fn evaluate(&self, s: f64) -> (f64, f64) {
        let head = self.partial_sum(s, self.terms());
        let Some(fit) = self.fit else {
            return (head, 0.0);
        };
        if s >= 1.0 && fit.exponent <= 1.0 {
            return (f64::INFINITY, 0.0);
        }
        let (t0, e0) = parity_tail(fit.exponent, s, fit.first);
        let (t1, e1) = parity_tail(fit.exponent + 1.0, s, fit.first);
        let two_term = fit.c * t0 + fit.c_next * t1;
        let one_term = fit.c_single * t0;
        let err = (two_term - one_term).abs() + fit.c.abs() * e0 + fit.c_next.abs() * e1;
        (head + two_term, err)
    }
}

/// Arithmetic–geometric mean.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let (na, nb) = (0.5 * (a + b), (a * b).sqrt());
        if (na - nb).abs() <= 1e-16 * na {
            return na;
        }
        a = na;
        b = nb;
    }
    0.5 * (a + b)
}

/// `Σ_m P(S_m = x) s^m` on `Z` in closed form.
pub fn line_green(s: f64, x: u64) -> f64 {
    if s >= 1.0 {
        return f64::INFINITY;
    }
    if s == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    let r = (1.0 - s * s).sqrt();
    ((1.0 - r) / s).powi(x as i32) / r
}

/// `Σ_m P(S_m = 0) s^m` on `Z^2` in closed form.
pub fn plane_green_origin(s: f64) -> f64 {
    if s >= 1.0 {
        return f64::INFINITY;
    }
    1.0 / agm(1.0, (1.0 - s * s).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn one_dimensional_distribution() {
        let p = step_distribution(&[0], 10);
        assert_eq!(p[1], 0.0);
        assert!((p[4] - binom(4, 2) / 16.0).abs() < 1e-15);
        assert!((p[10] - binom(10, 5) / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_return_is_squared_binomial() {
        // P(S_{2n} = 0) on Z^2 equals (C(2n, n) / 4^n)^2.
        let p = step_distribution(&[0, 0], 40);
        for n in 1..=20u64 {
            let q = binom(2 * n, n) / 4f64.powi(n as i32);
            assert!((p[2 * n as usize] - q * q).abs() < 1e-14);
        }
    }

    #[test]
    fn distribution_is_a_probability_vector() {
        // Summing P(S_m = x) over a box containing all reachable x gives 1.
        let m = 7usize;
        let mut total = 0.0;
        for a in -7i64..=7 {
            for b in -7i64..=7 {
                for c in -7i64..=7 {
                    if a.abs() + b.abs() + c.abs() <= 7 {
                        let x = [a.unsigned_abs(), b.unsigned_abs(), c.unsigned_abs()];
                        total += step_distribution(&x, m)[m];
                    }
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn series_matches_closed_forms_below_one() {
        for &s in &[0.3, 0.8, 0.95] {
            let z1 = LatticeSeries::new(&[0], 4000).evaluate(s).0;
            assert!((z1 - line_green(s, 0)).abs() < 1e-12);
            let z1x = LatticeSeries::new(&[3], 4000).evaluate(s).0;
            assert!((z1x - line_green(s, 3)).abs() < 1e-12);
            let z2 = LatticeSeries::new(&[0, 0], 4000).evaluate(s).0;
            assert!((z2 - plane_green_origin(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_sums_increase() {
        let series = LatticeSeries::new(&[0, 0, 0], 2000);
        let mut prev = 0.0;
        for n in (0..=2000).step_by(100) {
            let v = series.partial_sum(1.0, n);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn divergent_series_report_infinity() {
        assert!(LatticeSeries::new(&[0, 0], 1000)
            .evaluate(1.0)
            .0
            .is_infinite());
        assert!(LatticeSeries::new(&[0], 1000).evaluate(1.0).0.is_infinite());
    }

    #[test]
    fn hurwitz_tail_against_direct_sum() {
        let direct: f64 = (0..2_000_000)
            .rev()
            .map(|i| (101.0 + 2.0 * i as f64).powf(-2.5))
            .sum();
        let rest = parity_zeta(2.5, 101.0 + 4_000_000.0);
        let total = parity_zeta(2.5, 101.0);
        assert!((total - direct - rest).abs() < 1e-11 * total);
    }
}
