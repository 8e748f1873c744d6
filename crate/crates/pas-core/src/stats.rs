//! Small statistical helpers: uniformity tests, correlations, binomial tails.

use alloc::vec::Vec;

use crate::numeric::{exp, fabs, ln_choose, sqrt};

/// Kolmogorov distribution upper tail with Stephens' small-sample correction.
pub fn kolmogorov_sf(d: f64, n: usize) -> f64 {
    if n == 0 || d <= 0.0 {
        return 1.0;
    }
    let sn = sqrt(n as f64);
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = exp(-2.0 * kf * kf * lambda * lambda);
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS distance of `xs` against `cdf`, with its asymptotic P value.
pub fn ks_test(xs: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(fabs((i as f64 + 1.0) / n - f)).max(fabs(f - i as f64 / n));
    }
    (d, kolmogorov_sf(d, v.len()))
}

pub fn ks_uniform(xs: &[f64]) -> (f64, f64) {
    ks_test(xs, |x| x.clamp(0.0, 1.0))
}

/// KS test of permutation P values against their exact null, the uniform law on
/// {1/(N+1), 2/(N+1), …, 1}. Both c.d.f.s are compared at the support points only,
/// so the lattice spacing is not mistaken for a deviation; the Kolmogorov tail is
/// conservative for a discrete null.
pub fn ks_discrete_uniform(xs: &[f64], n_perms: usize) -> (f64, f64) {
    let k = n_perms + 1;
    let mut counts = alloc::vec![0usize; k + 1];
    for &x in xs {
        let j = libm::round(x.clamp(0.0, 1.0) * k as f64) as usize;
        counts[j.min(k)] += 1;
    }
    let n = xs.len() as f64;
    let mut cum = 0usize;
    let mut d: f64 = 0.0;
    for (j, &c) in counts.iter().enumerate() {
        cum += c;
        d = d.max(fabs(cum as f64 / n - j as f64 / k as f64));
    }
    (d, kolmogorov_sf(d, xs.len()))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with divisor n−1.
pub fn sample_var(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / sqrt(sxx * syy)
}

/// Squared Pearson correlation, i.e. R² of a simple linear regression.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let r = pearson(x, y);
    r * r
}

/// Average ranks, ties sharing the mean rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut r = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// P(X ≥ k) for X ~ Binomial(n, p).
pub fn binomial_upper(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let lp = libm::log(p);
    let lq = libm::log1p(-p);
    let mut s = 0.0;
    for j in k..=n {
        s += exp(ln_choose(n, j) + j as f64 * lp + (n - j) as f64 * lq);
    }
    s.min(1.0)
}

/// Binomial standard deviation √(n p (1−p)).
pub fn binomial_sd(n: u64, p: f64) -> f64 {
    sqrt(n as f64 * p * (1.0 - p))
}
