//! Log-factorials, binomial coefficients, incomplete gamma and chi-square tails.

use alloc::boxed::Box;
use alloc::vec::Vec;
use once_cell::race::OnceBox;

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
pub(crate) fn powi(x: f64, n: u32) -> f64 {
    let mut r = 1.0;
    for _ in 0..n {
        r *= x;
    }
    r
}
pub(crate) fn fabs(x: f64) -> f64 {
    libm::fabs(x)
}
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Largest argument served from the exact cumulative table.
pub const LN_FACT_TABLE: usize = 20_000;

static LN_FACT: OnceBox<Vec<f64>> = OnceBox::new();

fn table() -> &'static [f64] {
    LN_FACT.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE + 1);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..=LN_FACT_TABLE {
            acc += ln(k as f64);
            t.push(acc);
        }
        Box::new(t)
    })
}

/// ln(n!) from a table up to 20 000 and a Stirling series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) <= LN_FACT_TABLE {
        return table()[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * ln(x) - x + 0.5 * ln(2.0 * core::f64::consts::PI * x)
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Exact binomial coefficient; `None` on overflow.
pub fn choose(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(r)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = sum;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if fabs(term) < fabs(sum) * 1e-16 {
            break;
        }
    }
    sum * exp(-x + a * ln(x) - ln_gamma(a))
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < 1e-16 {
            break;
        }
    }
    exp(-x + a * ln(x) - ln_gamma(a)) * h
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    gamma_q(df / 2.0, x / 2.0)
}

/// Upper tail of chi-square with an even number `2n` of degrees of freedom, closed form.
pub fn chi2_sf_even(t: f64, n: usize) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let h = t / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..n {
        term *= h / k as f64;
        sum += term;
    }
    (exp(-h) * sum).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn ln_factorial_table_and_series_agree() {
        let exact: f64 = (1..=20_001u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(20_001) - exact).abs() < 1e-7);
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-12);
        let s = 25_000u64;
        let stirling = ln_factorial(s);
        let direct: f64 = (1..=s).map(|k| (k as f64).ln()).sum();
        assert!((stirling - direct).abs() / direct < 1e-12);
    }

    #[test]
    fn choose_small() {
        assert_eq!(choose(5, 2), Some(10));
        assert_eq!(choose(40, 20), Some(137_846_528_820));
        assert_eq!(choose(3, 4), Some(0));
    }

    #[test]
    fn chi2_tail_matches_reference() {
        for &(x, df) in &[(41.39, 26.0), (4.0, 1.0), (0.5, 3.0), (120.0, 90.0), (3.0, 0.5)] {
            let reference = 1.0 - ChiSquared::new(df).unwrap().cdf(x);
            assert!((chi2_sf(x, df) - reference).abs() < 1e-10, "{x} {df}");
        }
        for n in 1..8usize {
            let t = 3.7 * n as f64;
            assert!((chi2_sf_even(t, n) - chi2_sf(t, 2.0 * n as f64)).abs() < 1e-12);
        }
    }
}
