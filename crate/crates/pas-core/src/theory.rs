//! Exact and numeric predictions for the pairwise-match distribution, brute-force
//! likelihood tables, pure χ² partitions and the contingency-table reference tests.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::inference::{perm_stream, permuted_column};
use crate::matrix::DataMatrix;
use crate::numeric::{chi2_sf, choose, exp, ln, ln_choose};
use crate::pairwise::PairwiseSummary;
use crate::rng::{shuffle, RngStream};

/// Probability of each match count m ∈ 0..=L with its mean and variance.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchDistribution {
    pub probs: Vec<f64>,
    pub m1: f64,
    pub m2: f64,
}

impl MatchDistribution {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let m1: f64 = probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        let m2 = probs.iter().enumerate().map(|(m, p)| (m as f64 - m1) * (m as f64 - m1) * p).sum();
        MatchDistribution { probs, m1, m2 }
    }
}

/// Exact pair counts for a population holding `n_copies` of every S-ary sequence of length L.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformPairCounts {
    /// Unordered pairs of distinct individuals with exactly m matches.
    pub counts: Vec<u128>,
    pub total: u128,
}

impl UniformPairCounts {
    pub fn prob(&self, m: usize) -> f64 {
        self.counts[m] as f64 / self.total as f64
    }
}

pub fn uniform_pair_counts(l: usize, s: usize, n_copies: usize) -> Result<UniformPairCounts> {
    if s < 2 || n_copies == 0 {
        return invalid("need S ≥ 2 and at least one copy");
    }
    let overflow = || Error::Guard(format!("L={l}, S={s} overflows exact counting"));
    let types = (s as u128).checked_pow(l as u32).ok_or_else(overflow)?;
    let n = types.checked_mul(n_copies as u128).ok_or_else(overflow)?;
    let total = n.checked_mul(n - 1).ok_or_else(overflow)? / 2;
    let mut counts = Vec::with_capacity(l + 1);
    for m in 0..l {
        let j = (l - m) as u32;
        let per = choose(l as u64, m as u64)
            .and_then(|c| c.checked_mul((s as u128 - 1).checked_pow(j)?))
            .and_then(|c| c.checked_mul(n_copies as u128))
            .ok_or_else(overflow)?;
        counts.push(n.checked_mul(per).ok_or_else(overflow)? / 2);
    }
    counts.push(types * (n_copies as u128 * (n_copies as u128 - 1) / 2));
    Ok(UniformPairCounts { counts, total })
}

/// P(m) between two distinct members of the finite uniform population.
pub fn prob_m_uniform(l: usize, s: usize, n_copies: usize, m: usize) -> Result<f64> {
    if m > l {
        return invalid("m exceeds L");
    }
    Ok(uniform_pair_counts(l, s, n_copies)?.prob(m))
}

pub const BINARY_L_LIMIT: usize = 1000;

/// P(m) for two independent binary sequences with marker frequencies (p, 1−p),
/// summed over sequence classes by number of 1s.
pub fn prob_m_binary_all(l: usize, p: f64) -> Result<Vec<f64>> {
    if !(p > 0.0 && p < 1.0) {
        return invalid("p must lie strictly between 0 and 1");
    }
    if l > BINARY_L_LIMIT {
        return Err(Error::Guard(format!("L={l} above {BINARY_L_LIMIT}")));
    }
    let (lp, lq) = (ln(p), ln(1.0 - p));
    let mut probs = vec![0.0; l + 1];
    for r in 0..=l {
        for k in 0..=r {
            for j in k..=(l - r) {
                let zeros = (2 * (l - r) + k - j) as f64;
                let ones = (2 * r + j - k) as f64;
                let a = if j != k { 2.0f64 } else { 1.0 };
                let t = ln_choose(l as u64, r as u64)
                    + ln_choose(r as u64, k as u64)
                    + ln_choose((l - r) as u64, j as u64)
                    + ln(a)
                    + zeros * lp
                    + ones * lq;
                probs[l - j - k] += exp(t);
            }
        }
    }
    Ok(probs)
}

pub fn prob_m_binary(l: usize, p: f64, m: usize) -> Result<f64> {
    if m > l {
        return invalid("m exceeds L");
    }
    Ok(prob_m_binary_all(l, p)?[m])
}

/// Binomial approximation with P(match) = Σ f².
pub fn naive_binomial(l: usize, freqs: &[f64]) -> MatchDistribution {
    let pm: f64 = freqs.iter().map(|f| f * f).sum();
    let probs = (0..=l)
        .map(|m| {
            let a = if m == 0 { 0.0 } else { m as f64 * ln(pm) };
            let b = if m == l { 0.0 } else { (l - m) as f64 * ln(1.0 - pm) };
            exp(ln_choose(l as u64, m as u64) + a + b)
        })
        .collect();
    MatchDistribution::from_probs(probs)
}

fn sample_code<R: Rng + ?Sized>(freqs: &[f64], rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, f) in freqs.iter().enumerate() {
        acc += f;
        if u < acc {
            return k as u8;
        }
    }
    (freqs.len() - 1) as u8
}

fn pm_match_counts(rows: &[Vec<u8>]) -> Vec<u32> {
    let mut out = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            out.push(rows[a].iter().zip(&rows[b]).filter(|(x, y)| x == y).count() as u32);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceContrast {
    pub empirical: Vec<Vec<f64>>,
    pub multinomial: Vec<Vec<f64>>,
    pub difference: Vec<Vec<f64>>,
}

/// Across-PM covariances of the per-m pair counts against the multinomial with
/// the same mean frequencies. Every cell of every simulated DM is drawn from `freqs`.
pub fn multinomial_covariance_contrast(r: usize, l: usize, freqs: &[f64], iters: usize, rng: &RngStream) -> Result<CovarianceContrast> {
    if r < 2 || iters < 2 {
        return invalid("need at least two rows and two iterations");
    }
    let w = (r * (r - 1) / 2) as f64;
    let k = l + 1;
    let mut sum = vec![0.0; k];
    let mut cross = vec![0.0; k * k];
    for it in 0..iters {
        let mut g = rng.child(it as u64).rng();
        let rows: Vec<Vec<u8>> = (0..r).map(|_| (0..l).map(|_| sample_code(freqs, &mut g)).collect()).collect();
        let mut c = vec![0.0; k];
        for m in pm_match_counts(&rows) {
            c[m as usize] += 1.0;
        }
        for i in 0..k {
            sum[i] += c[i];
            for j in 0..k {
                cross[i * k + j] += c[i] * c[j];
            }
        }
    }
    let n = iters as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let pi: Vec<f64> = mean.iter().map(|m| m / w).collect();
    let mut empirical = vec![vec![0.0; k]; k];
    let mut multinomial = vec![vec![0.0; k]; k];
    let mut difference = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            empirical[i][j] = (cross[i * k + j] - n * mean[i] * mean[j]) / (n - 1.0);
            multinomial[i][j] = w * (if i == j { pi[i] } else { 0.0 } - pi[i] * pi[j]);
            difference[i][j] = empirical[i][j] - multinomial[i][j];
        }
    }
    Ok(CovarianceContrast { empirical, multinomial, difference })
}

/// Mean match count and sample variance (n−1 denominator) over the pairs.
pub fn pm_moments(matches: &[u32]) -> (f64, f64) {
    let n = matches.len() as f64;
    let m1 = matches.iter().map(|&m| m as f64).sum::<f64>() / n;
    let ss: f64 = matches.iter().map(|&m| (m as f64 - m1) * (m as f64 - m1)).sum();
    let m2 = if matches.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    (m1, m2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoStepResult {
    pub m1: f64,
    pub m2: f64,
    pub var_m1: f64,
    pub var_m2: f64,
}

/// PM moments from two rounds of sampling: column counts per number-of-1s class,
/// then a uniform vertical arrangement inside each class.
pub fn two_step_numeric(r: usize, l: usize, p: f64, iters: usize, rng: &RngStream) -> Result<TwoStepResult> {
    if r < 2 || iters < 2 || !(p > 0.0 && p < 1.0) {
        return invalid("need r ≥ 2, iters ≥ 2 and 0 < p < 1");
    }
    let q = 1.0 - p;
    let class_p: Vec<f64> = (0..=r)
        .map(|i| exp(ln_choose(r as u64, i as u64) + i as f64 * ln(p) + (r - i) as f64 * ln(q)))
        .collect();
    let norm: f64 = class_p.iter().sum();
    let class_p: Vec<f64> = class_p.iter().map(|x| x / norm).collect();
    let (mut a1, mut a2) = (Vec::with_capacity(iters), Vec::with_capacity(iters));
    for it in 0..iters {
        let mut g = rng.child(it as u64).rng();
        let per_class = crate::matrix::multinomial_with(l as u64, &class_p, &mut g)?;
        let mut rows = vec![Vec::with_capacity(l); r];
        for (i, &cnt) in per_class.iter().enumerate() {
            for _ in 0..cnt {
                let mut col: Vec<u8> = (0..r).map(|x| (x < i) as u8).collect();
                shuffle(&mut col, &mut g);
                for (row, v) in rows.iter_mut().zip(col) {
                    row.push(v);
                }
            }
        }
        let (m1, m2) = pm_moments(&pm_match_counts(&rows));
        a1.push(m1);
        a2.push(m2);
    }
    Ok(TwoStepResult {
        m1: crate::stats::mean(&a1),
        m2: crate::stats::mean(&a2),
        var_m1: crate::stats::sample_var(&a1),
        var_m2: crate::stats::sample_var(&a2),
    })
}

pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Sorted m-vector → polynomial in marker frequencies (exponent tuple → coefficient).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VectorLikelihoodTable {
    pub rows: usize,
    pub cols: usize,
    pub arity: usize,
    pub entries: BTreeMap<Vec<u8>, BTreeMap<Vec<u32>, u64>>,
}

impl VectorLikelihoodTable {
    /// Probability of each vector at marker frequencies `freqs`.
    pub fn evaluate(&self, freqs: &[f64]) -> Vec<(Vec<u8>, f64)> {
        self.entries
            .iter()
            .map(|(v, poly)| {
                let p = poly
                    .iter()
                    .map(|(e, &c)| {
                        c as f64 * e.iter().zip(freqs).map(|(&x, &f)| crate::numeric::powi(f, x)).product::<f64>()
                    })
                    .sum();
                (v.clone(), p)
            })
            .collect()
    }

    pub fn total(&self, freqs: &[f64]) -> f64 {
        self.evaluate(freqs).iter().map(|(_, p)| p).sum()
    }

    /// One line per vector: `digits<TAB>coef:e0,e1,e2 ...`, terms by descending exponents.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (v, poly) in &self.entries {
            for d in v {
                let _ = write!(out, "{d}");
            }
            out.push('\t');
            for (i, (e, c)) in poly.iter().rev().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{c}:");
                let width = e.len().max(3);
                for k in 0..width {
                    if k > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{}", e.get(k).copied().unwrap_or(0));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Enumerates every R×L S-ary matrix and accumulates the monomial of each PM vector.
pub fn brute_force_likelihoods(r: usize, l: usize, s: usize) -> Result<VectorLikelihoodTable> {
    if r < 2 || l == 0 || s < 2 {
        return invalid("need R ≥ 2, L ≥ 1, S ≥ 2");
    }
    if l > 9 {
        return invalid("vectors are printed as single digits; L must be at most 9");
    }
    let cells = r * l;
    let n_dm = (s as u64).checked_pow(cells as u32).filter(|&n| n <= ENUMERATION_LIMIT);
    let Some(n_dm) = n_dm else {
        return Err(Error::Guard(format!("{s}^{cells} matrices exceed the enumeration limit {ENUMERATION_LIMIT}")));
    };
    let mut entries: BTreeMap<Vec<u8>, BTreeMap<Vec<u32>, u64>> = BTreeMap::new();
    let mut cell = vec![0u8; cells];
    for _ in 0..n_dm {
        let mut vector = Vec::with_capacity(r * (r - 1) / 2);
        for a in 0..r {
            for b in a + 1..r {
                let m = (0..l).filter(|&c| cell[a * l + c] == cell[b * l + c]).count();
                vector.push(m as u8);
            }
        }
        vector.sort_unstable();
        let mut e = vec![0u32; s];
        for &x in &cell {
            e[x as usize] += 1;
        }
        *entries.entry(vector).or_default().entry(e).or_default() += 1;
        for x in cell.iter_mut() {
            *x += 1;
            if (*x as usize) < s {
                break;
            }
            *x = 0;
        }
    }
    Ok(VectorLikelihoodTable { rows: r, cols: l, arity: s, entries })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodMoments {
    pub m1: f64,
    pub var_m1: f64,
    pub m2: f64,
    pub var_m2: f64,
}

/// Expected per-PM mean and sample variance of m, and their variances across PMs.
pub fn likelihood_moments(table: &VectorLikelihoodTable, freqs: &[f64]) -> LikelihoodMoments {
    let (mut e1, mut e11, mut e2, mut e22) = (0.0, 0.0, 0.0, 0.0);
    for (v, p) in table.evaluate(freqs) {
        let ms: Vec<u32> = v.iter().map(|&x| x as u32).collect();
        let (m1, m2) = pm_moments(&ms);
        e1 += p * m1;
        e11 += p * m1 * m1;
        e2 += p * m2;
        e22 += p * m2 * m2;
    }
    LikelihoodMoments { m1: e1, var_m1: e11 - e1 * e1, m2: e2, var_m2: e22 - e2 * e2 }
}

/// Mixed-radix cell coding of selected columns with margin-product expectations.
struct CellCoder {
    strides: Vec<usize>,
    cells: usize,
}

impl CellCoder {
    fn new(dm: &DataMatrix, cols: &[usize], limit: usize) -> Result<Self> {
        let mut strides = Vec::with_capacity(cols.len());
        let mut cells = 1usize;
        for &c in cols {
            strides.push(cells);
            cells = cells
                .checked_mul(dm.arity(c))
                .filter(|&x| x <= limit)
                .ok_or_else(|| Error::Guard(format!("contingency table exceeds {limit} cells")))?;
        }
        Ok(CellCoder { strides, cells })
    }
}

fn marginal_freqs(dm: &DataMatrix, c: usize) -> Vec<f64> {
    let r = dm.rows() as f64;
    dm.marker_counts(c).iter().map(|&k| k as f64 / r).collect()
}

/// Expected cell counts R·∏ f over the columns of `coder`.
fn expected_cells(dm: &DataMatrix, cols: &[usize], coder: &CellCoder) -> Vec<f64> {
    let mut e = vec![dm.rows() as f64; coder.cells];
    for (i, &c) in cols.iter().enumerate() {
        let f = marginal_freqs(dm, c);
        let a = dm.arity(c);
        for (idx, x) in e.iter_mut().enumerate() {
            *x *= f[(idx / coder.strides[i]) % a];
        }
    }
    e
}

fn chi2_from(counts: &[u32], expected: &[f64], rows: usize) -> f64 {
    let mut s = 0.0;
    for (&o, &e) in counts.iter().zip(expected) {
        if o > 0 {
            s += (o as f64) * (o as f64) / e;
        }
    }
    s - rows as f64
}

pub const CELL_LIMIT: usize = 1 << 22;

/// χ² of the joint table of `cols` against the product of its marginal frequencies.
pub fn plain_chi2(dm: &DataMatrix, cols: &[usize]) -> Result<f64> {
    let coder = CellCoder::new(dm, cols, CELL_LIMIT)?;
    let expected = expected_cells(dm, cols, &coder);
    let mut counts = vec![0u32; coder.cells];
    for r in 0..dm.rows() {
        let idx: usize = cols.iter().zip(&coder.strides).map(|(&c, &s)| dm.get(r, c) as usize * s).sum();
        counts[idx] += 1;
    }
    Ok(chi2_from(&counts, &expected, dm.rows()))
}

fn subsets(items: &[usize], k: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut Vec::new(), out);
}

/// Pure χ² of a column set: plain χ² minus the pure χ²s of all its proper subsets of size ≥ 2.
fn pure_chi2(dm: &DataMatrix, set: &[usize], memo: &mut BTreeMap<Vec<usize>, f64>) -> Result<f64> {
    if let Some(&v) = memo.get(set) {
        return Ok(v);
    }
    let mut v = plain_chi2(dm, set)?;
    for k in 2..set.len() {
        let mut subs = Vec::new();
        subsets(set, k, &mut subs);
        for s in subs {
            v -= pure_chi2(dm, &s, memo)?;
        }
    }
    if set.len() < 4 {
        memo.insert(set.to_vec(), v);
    }
    Ok(v)
}

pub const PURE_SUBSET_LIMIT: u64 = 20_000_000;

fn check_budget(l: usize, n: usize) -> Result<()> {
    if !(2..=4).contains(&n) {
        return invalid("pure χ² order must be 2, 3 or 4");
    }
    match choose(l as u64, n as u64) {
        Some(c) if c <= PURE_SUBSET_LIMIT as u128 => Ok(()),
        _ => Err(Error::Guard(format!("C({l},{n}) column subsets exceed {PURE_SUBSET_LIMIT}"))),
    }
}

/// Σ of pure n-way χ²s over every (n−1)-subset of the other columns joined with `focal`.
pub fn pure_chi2_sums(dm: &DataMatrix, _summary: &PairwiseSummary, focal: usize, n: usize) -> Result<f64> {
    check_budget(dm.cols(), n)?;
    let others: Vec<usize> = (0..dm.cols()).filter(|&c| c != focal).collect();
    let mut subs = Vec::new();
    subsets(&others, n - 1, &mut subs);
    let mut memo = BTreeMap::new();
    let mut total = 0.0;
    for mut s in subs {
        s.push(focal);
        s.sort_unstable();
        total += pure_chi2(dm, &s, &mut memo)?;
    }
    Ok(total)
}

/// `pure_chi2_sums` for every column at once, evaluating each subset a single time.
pub fn pure_chi2_sums_all(dm: &DataMatrix, n: usize) -> Result<Vec<f64>> {
    check_budget(dm.cols(), n)?;
    let all: Vec<usize> = (0..dm.cols()).collect();
    let mut memo = BTreeMap::new();
    let mut out = vec![0.0; dm.cols()];
    let mut subs = Vec::new();
    subsets(&all, n, &mut subs);
    for s in subs {
        let v = pure_chi2(dm, &s, &mut memo)?;
        for &c in &s {
            out[c] += v;
        }
    }
    Ok(out)
}

/// Overall χ² of the full marker-combination table with its cell coding, so one
/// column can be re-coded cheaply after permutation.
pub struct OverallTable {
    expected: Vec<f64>,
    strides: Vec<usize>,
    codes: Vec<usize>,
    rows: usize,
    pub cells: usize,
    pub df: usize,
}

impl OverallTable {
    pub fn new(dm: &DataMatrix) -> Result<Self> {
        let cols: Vec<usize> = (0..dm.cols()).collect();
        let coder = CellCoder::new(dm, &cols, CELL_LIMIT)?;
        let expected = expected_cells(dm, &cols, &coder);
        let codes = (0..dm.rows())
            .map(|r| cols.iter().zip(&coder.strides).map(|(&c, &s)| dm.get(r, c) as usize * s).sum())
            .collect();
        let free: usize = (0..dm.cols()).map(|c| dm.arity(c) - 1).sum();
        Ok(OverallTable {
            expected,
            strides: coder.strides,
            codes,
            rows: dm.rows(),
            cells: coder.cells,
            df: coder.cells.saturating_sub(free + 1),
        })
    }

    pub fn chi2(&self) -> f64 {
        self.chi2_codes(&self.codes)
    }

    fn chi2_codes(&self, codes: &[usize]) -> f64 {
        let mut counts = vec![0u32; self.cells];
        for &c in codes {
            counts[c] += 1;
        }
        chi2_from(&counts, &self.expected, self.rows)
    }

    /// Codes with column `c` removed, ready for `with_column`.
    fn without(&self, dm: &DataMatrix, c: usize) -> Vec<usize> {
        let col = dm.column(c);
        self.codes.iter().zip(col).map(|(&x, &v)| x - v as usize * self.strides[c]).collect()
    }

    fn with_column(&self, base: &[usize], c: usize, col: &[u8]) -> Vec<usize> {
        base.iter().zip(col).map(|(&x, &v)| x + v as usize * self.strides[c]).collect()
    }

    pub fn table_pvalue(&self) -> f64 {
        chi2_sf(self.chi2(), self.df as f64)
    }
}

/// P value of the overall χ² when column `col` is permuted; ties count as exceedances.
pub fn column_pvalue(dm: &DataMatrix, col: usize, perms: usize, rng: &RngStream) -> Result<f64> {
    let t = OverallTable::new(dm)?;
    Ok(column_pvalue_in(&t, dm, col, perms, rng))
}

pub(crate) fn column_pvalue_in(t: &OverallTable, dm: &DataMatrix, col: usize, perms: usize, rng: &RngStream) -> f64 {
    let obs = t.chi2();
    let base = t.without(dm, col);
    let eps = 1e-9 * obs.abs().max(1.0);
    let mut hits = 0usize;
    for k in 0..perms {
        let pc = permuted_column(dm.column(col), &perm_stream(rng, col, k));
        if t.chi2_codes(&t.with_column(&base, col, &pc)) >= obs - eps {
            hits += 1;
        }
    }
    (1 + hits) as f64 / (1 + perms) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig3Result {
    pub chi2: f64,
    pub df: usize,
    pub table_p: f64,
    pub dv_p: f64,
    /// (IV column, IV-dependent P value).
    pub iv_p: Vec<(usize, f64)>,
}

/// Contingency-table tests of a DV against the joint marker combinations of all
/// other columns, with expectations from products of marginal frequencies.
///
/// The IV-dependent P value of an IV is the fraction of IV permutations whose
/// re-estimated DV P value is no larger than the DV P value of the original matrix
/// at the same inner effort.
pub fn fig3_tests(dm: &DataMatrix, dv: usize, dv_perms: usize, iv_outer: usize, iv_inner: usize, rng: &RngStream) -> Result<Fig3Result> {
    fig3_until(dm, dv, dv_perms, iv_outer, iv_inner, rng, f64::INFINITY)
}

/// `fig3_tests` that stops at the first P value above `stop_above`; `iv_p` then
/// holds only the IVs evaluated so far.
pub(crate) fn fig3_until(
    dm: &DataMatrix,
    dv: usize,
    dv_perms: usize,
    iv_outer: usize,
    iv_inner: usize,
    rng: &RngStream,
    stop_above: f64,
) -> Result<Fig3Result> {
    if dv >= dm.cols() {
        return invalid("DV column out of range");
    }
    if dv_perms == 0 {
        return invalid("need at least one DV permutation");
    }
    let t = OverallTable::new(dm)?;
    let chi2 = t.chi2();
    let dv_p = column_pvalue_in(&t, dm, dv, dv_perms, rng);
    let mut iv_p = Vec::new();
    if iv_outer > 0 && iv_inner > 0 && dv_p <= stop_above {
        let inner = rng.named("inner");
        let outer = rng.named("iv");
        let dcol = dm.column(dv);
        let inner_cols: Vec<Vec<u8>> = (0..iv_inner).map(|k| permuted_column(dcol, &perm_stream(&inner, dv, k))).collect();
        let dv_p_with = |codes: &[usize]| {
            let base: Vec<usize> = codes.iter().zip(dcol).map(|(&x, &v)| x - v as usize * t.strides[dv]).collect();
            let obs = t.chi2_codes(codes);
            let eps = 1e-9 * obs.abs().max(1.0);
            let hits = inner_cols.iter().filter(|pc| t.chi2_codes(&t.with_column(&base, dv, pc)) >= obs - eps).count();
            (1 + hits) as f64 / (1 + iv_inner) as f64
        };
        let reference = dv_p_with(&t.codes);
        for iv in (0..dm.cols()).filter(|&c| c != dv) {
            let base = t.without(dm, iv);
            let mut hits = 0usize;
            for k in 0..iv_outer {
                let pc = permuted_column(dm.column(iv), &perm_stream(&outer, iv, k));
                if dv_p_with(&t.with_column(&base, iv, &pc)) <= reference + 1e-12 {
                    hits += 1;
                }
            }
            let p = (1 + hits) as f64 / (1 + iv_outer) as f64;
            iv_p.push((iv, p));
            if p > stop_above {
                break;
            }
        }
    }
    Ok(Fig3Result { chi2, df: t.df, table_p: t.table_pvalue(), dv_p, iv_p })
}

/// The five-column binary matrix of the reference contingency example: DV first,
/// rows expanded from the 32 combination counts.
pub fn fig3_matrix() -> DataMatrix {
    const COUNTS: [usize; 32] = [
        0, 0, 0, 6, 0, 0, 3, 1, 4, 9, 18, 13, 4, 3, 11, 28, 0, 2, 2, 0, 1, 0, 0, 5, 1, 7, 21, 17, 2, 7, 13, 22,
    ];
    let mut rows = Vec::new();
    for (idx, &c) in COUNTS.iter().enumerate() {
        let row: Vec<u8> = (0..5).map(|k| ((idx >> (4 - k)) & 1) as u8).collect();
        for _ in 0..c {
            rows.push(row.clone());
        }
    }
    let mut dm = DataMatrix::from_rows(&rows).expect("valid reference matrix");
    dm.set_dv(Some(0)).expect("binary DV");
    dm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts_small_cases() {
        let c = uniform_pair_counts(5, 2, 1).unwrap();
        assert_eq!(c.total, 496);
        assert_eq!(c.counts[0], 16);
        let c = uniform_pair_counts(7, 2, 3).unwrap();
        assert!((c.prob(7) - 2.0 / 383.0).abs() < 1e-15);
        let c = uniform_pair_counts(6, 4, 2).unwrap();
        assert_eq!(c.total, 33_550_336);
        assert_eq!(c.counts[1], 11_943_936);
    }

    #[test]
    fn uniform_sums_to_one() {
        for l in 1..=20 {
            for s in 2..=4 {
                for n in 1..=5 {
                    let c = uniform_pair_counts(l, s, n).unwrap();
                    assert_eq!(c.counts.iter().sum::<u128>(), c.total);
                }
            }
        }
    }

    #[test]
    fn binary_expression_matches_binomial() {
        let d = MatchDistribution::from_probs(prob_m_binary_all(40, 0.2).unwrap());
        assert!((d.m1 - 27.2).abs() < 1e-9);
        assert!((d.m2 - 8.704).abs() < 1e-9);
        let half = prob_m_binary_all(10, 0.5).unwrap();
        for (m, p) in half.iter().enumerate() {
            assert!((p - choose(10, m as u64).unwrap() as f64 / 1024.0).abs() < 1e-12);
        }
    }

    #[test]
    fn naive_trinary() {
        let d = naive_binomial(40, &[0.04, 0.32, 0.64]);
        assert!((d.m1 - 20.544).abs() < 1e-9);
        assert!((d.m2 - 9.992_601_6).abs() < 1e-9);
    }

    #[test]
    fn three_by_three_formula() {
        let t = brute_force_likelihoods(3, 3, 2).unwrap();
        assert_eq!(t.entries.len(), 7);
        let lik333 = &t.entries[&vec![3u8, 3, 3]];
        assert_eq!(lik333.get(&vec![9, 0]), Some(&1));
        assert_eq!(lik333.get(&vec![6, 3]), Some(&3));
        let mm = likelihood_moments(&t, &[0.2, 0.8]);
        assert!((mm.m1 - 2.04).abs() < 1e-9);
        assert!((mm.m2 - 0.48).abs() < 1e-9);
        assert!((mm.var_m1 - 0.3328).abs() < 1e-9);
        assert!((mm.var_m2 - 0.2368).abs() < 1e-9);
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(brute_force_likelihoods(5, 5, 2), Err(Error::Guard(_))));
    }

    #[test]
    fn reference_table() {
        let dm = fig3_matrix();
        let t = OverallTable::new(&dm).unwrap();
        assert_eq!(t.df, 26);
        assert!((t.chi2() - 41.388_888_888).abs() < 1e-6);
        assert!((t.table_pvalue() - 0.028_348_74).abs() < 1e-6);
    }

    #[test]
    fn exact_expectations_give_zero() {
        let rows: Vec<Vec<u8>> = (0..8).map(|i| vec![(i & 1) as u8, ((i >> 1) & 1) as u8, ((i >> 2) & 1) as u8]).collect();
        let dm = DataMatrix::from_rows(&rows).unwrap();
        let r = fig3_tests(&dm, 0, 20, 5, 5, &RngStream::new(1)).unwrap();
        assert!(r.chi2.abs() < 1e-12);
        assert_eq!(r.dv_p, 1.0);
        assert!(r.iv_p.iter().all(|&(_, p)| p == 1.0));
    }

    #[test]
    fn pure_pair_is_plain() {
        let dm = DataMatrix::from_digit_rows(&["00", "01", "10", "11", "00", "11"]).unwrap();
        let s = PairwiseSummary::new(&dm);
        let a = pure_chi2_sums(&dm, &s, 0, 2).unwrap();
        assert!((a - plain_chi2(&dm, &[0, 1]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn parity_triple_is_purely_three_way() {
        let dm = DataMatrix::from_digit_rows(&["000", "011", "101", "110"]).unwrap();
        let all2 = pure_chi2_sums_all(&dm, 2).unwrap();
        assert!(all2.iter().all(|x| x.abs() < 1e-12));
        let all3 = pure_chi2_sums_all(&dm, 3).unwrap();
        assert!(all3.iter().all(|x| (x - 4.0).abs() < 1e-12));
    }
}
