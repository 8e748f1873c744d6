//! Permutation P values, multiple-testing helpers and marginal-effect erasure.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::exec::Runner;
use crate::matrix::{generate_null_dm, DataMatrix, FrequencyScheme};
use crate::numeric::{chi2_sf, chi2_sf_even, fabs, ln, powf, sqrt};
use crate::rng::{sample_indices, shuffle, RngStream};
use crate::scan::{scan_ivs, ScanConfig};
use crate::spec::ScoreSpec;
use crate::stats::ks_discrete_uniform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Tail {
    #[default]
    Upper,
    TwoSided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// Sum of the defined raw cell values.
    Sum,
    /// Sum of per-cell Z values standardized across the permutation replicates.
    ZSum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PValueEstimate {
    /// Observed aggregate score.
    pub score: f64,
    pub p: f64,
    /// Observed aggregate standardized by the replicate mean and sd.
    pub z: Option<f64>,
    pub n_perms: usize,
    pub tail: Tail,
    /// No cell was defined for the observed data.
    pub undetectable: bool,
}

fn moments(xs: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    Some((m, sqrt(var)))
}

fn aggregate(cells: &[Option<f64>], z: Option<&[Option<(f64, f64)>]>) -> Option<f64> {
    let mut any = false;
    let mut s = 0.0;
    for (c, v) in cells.iter().enumerate() {
        if let Some(x) = v {
            any = true;
            match z {
                None => s += x,
                Some(st) => {
                    if let Some((m, sd)) = st[c] {
                        if sd > 0.0 {
                            s += (x - m) / sd;
                        }
                    }
                }
            }
        }
    }
    any.then_some(s)
}

/// P value of `observed` cells against permutation replicates.
///
/// Upper tail: p = (1 + #{replicate ≥ observed}) / (1 + N); replicates with no
/// defined cell never count as exceeding.
pub fn permutation_estimate(observed: &[Option<f64>], replicates: &[Vec<Option<f64>>], agg: Aggregation, tail: Tail) -> PValueEstimate {
    let n = replicates.len();
    let stats: Option<Vec<Option<(f64, f64)>>> = match agg {
        Aggregation::Sum => None,
        Aggregation::ZSum => Some(
            (0..observed.len())
                .map(|c| moments(replicates.iter().filter_map(|r| r.get(c).copied().flatten())))
                .collect(),
        ),
    };
    let obs = aggregate(observed, stats.as_deref());
    let reps: Vec<Option<f64>> = replicates.iter().map(|r| aggregate(r, stats.as_deref())).collect();
    let Some(obs) = obs else {
        return PValueEstimate { score: f64::NAN, p: 1.0, z: None, n_perms: n, tail, undetectable: true };
    };
    let defined: Vec<f64> = reps.iter().flatten().copied().collect();
    let (center, sd) = moments(defined.iter().copied()).unwrap_or((obs, 0.0));
    let eps = 1e-9 * obs.abs().max(1.0);
    let k = match tail {
        Tail::Upper => defined.iter().filter(|&&x| x >= obs - eps).count(),
        Tail::TwoSided => {
            let d = fabs(obs - center);
            defined.iter().filter(|&&x| fabs(x - center) >= d - eps).count()
        }
    };
    let z = (sd > 0.0).then(|| (obs - center) / sd);
    PValueEstimate { score: obs, p: (1 + k) as f64 / (1 + n) as f64, z, n_perms: n, tail, undetectable: false }
}

/// Stream of replicate `k` when permuting column `target`.
pub fn perm_stream(rng: &RngStream, target: usize, k: usize) -> RngStream {
    rng.child(target as u64).child(k as u64)
}

/// A vertically shuffled copy of `col`.
pub fn permuted_column(col: &[u8], stream: &RngStream) -> Vec<u8> {
    let mut v = col.to_vec();
    shuffle(&mut v, &mut stream.rng());
    v
}

/// Generic permutation test: shuffles column `target` and re-evaluates `score_fn`
/// on the modified matrix. Slow but score-agnostic; the scan engine is the fast path.
pub fn permute_pvalue<F>(
    dm: &DataMatrix,
    target: usize,
    n_perms: usize,
    tail: Tail,
    agg: Aggregation,
    rng: &RngStream,
    score_fn: F,
) -> Result<PValueEstimate>
where
    F: Fn(&DataMatrix) -> Result<Vec<Option<f64>>>,
{
    if n_perms == 0 {
        return invalid("n_perms must be at least 1");
    }
    let observed = score_fn(dm)?;
    let mut reps = Vec::with_capacity(n_perms);
    let mut work = dm.clone();
    for k in 0..n_perms {
        let col = permuted_column(dm.column(target), &perm_stream(rng, target, k));
        work.replace_column(target, &col)?;
        reps.push(score_fn(&work)?);
    }
    Ok(permutation_estimate(&observed, &reps, agg, tail))
}

/// Per-test cutoff 1 − (1 − α)^{1/n}.
pub fn sidak_cutoff(alpha: f64, n_tests: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || n_tests == 0 {
        return invalid("Sidak needs 0 < alpha < 1 and at least one test");
    }
    Ok(1.0 - powf(1.0 - alpha, 1.0 / n_tests as f64))
}

/// Fisher's combination: T = Σ −2 ln pᵢ against χ² with 2n d.f.
pub fn fisher_combine(pvals: &[f64]) -> Result<(f64, f64)> {
    if pvals.is_empty() {
        return invalid("no P values to combine");
    }
    if let Some(p) = pvals.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return invalid(format!("P value {p} outside (0, 1]"));
    }
    let t: f64 = pvals.iter().map(|&p| -2.0 * ln(p)).sum();
    Ok((t, chi2_sf_even(t, pvals.len())))
}

/// The two DV codes and the category index of every row.
fn dv_categories(dm: &DataMatrix, dv: usize) -> Result<([u8; 2], Vec<usize>)> {
    let codes = dm.distinct_codes(dv);
    if codes.len() != 2 {
        return invalid("DV must have exactly two categories");
    }
    let cats = dm.column(dv).iter().map(|&x| (x == codes[1]) as usize).collect();
    Ok(([codes[0], codes[1]], cats))
}

/// Contingency χ² of IV markers against DV categories and its P value with
/// (markers present − 1) d.f.
pub fn marginal_chi2(dm: &DataMatrix, dv: usize, iv: usize) -> Result<(f64, f64)> {
    let (_, cats) = dv_categories(dm, dv)?;
    let s = dm.arity(iv);
    let mut t = vec![0u64; 2 * s];
    for (r, &x) in dm.column(iv).iter().enumerate() {
        t[cats[r] * s + x as usize] += 1;
    }
    Ok(table_chi2(&t, 2, s))
}

fn table_chi2(t: &[u64], rows: usize, cols: usize) -> (f64, f64) {
    let n: u64 = t.iter().sum();
    let rs: Vec<u64> = (0..rows).map(|r| t[r * cols..(r + 1) * cols].iter().sum()).collect();
    let cs: Vec<u64> = (0..cols).map(|c| (0..rows).map(|r| t[r * cols + c]).sum()).collect();
    let mut chi = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let e = rs[r] as f64 * cs[c] as f64 / n as f64;
            if e > 0.0 {
                let d = t[r * cols + c] as f64 - e;
                chi += d * d / e;
            }
        }
    }
    let present_c = cs.iter().filter(|&&c| c > 0).count();
    let present_r = rs.iter().filter(|&&r| r > 0).count();
    let df = (present_c.saturating_sub(1) * present_r.saturating_sub(1)) as f64;
    (chi, if df > 0.0 { chi2_sf(chi, df) } else { 1.0 })
}

/// One batch of toggles at an IV within one DV category.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Toggle {
    pub iv: usize,
    pub category: u8,
    pub from: u8,
    pub to: u8,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ToggleLog {
    pub toggles: Vec<Toggle>,
    /// IVs whose marginal P value was at or below the threshold.
    pub treated: Vec<usize>,
}

/// Integer targets summing to `n` proportional to `weights`, by largest remainder.
fn largest_remainder(n: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    let mut out: Vec<usize> = weights.iter().map(|&w| n * w / total).collect();
    let mut rem: Vec<(usize, usize)> = weights.iter().enumerate().map(|(k, &w)| (n * w % total, k)).collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - out.iter().sum::<usize>();
    for &(_, k) in rem.iter().take(short) {
        out[k] += 1;
    }
    out
}

/// Removes marginal effects: at every IV with marginal P ≤ `p_threshold`, randomly
/// chosen excess markers in each DV category are toggled to deficit markers until the
/// category's counts equal its share of the pooled counts (up to rounding).
pub fn erase_marginals(dm: &DataMatrix, dv: usize, p_threshold: f64, rng: &RngStream) -> Result<(DataMatrix, ToggleLog)> {
    let (codes, cats) = dv_categories(dm, dv)?;
    let mut out = dm.clone();
    let mut log = ToggleLog::default();
    let idx: [Vec<usize>; 2] = [
        (0..dm.rows()).filter(|&r| cats[r] == 0).collect(),
        (0..dm.rows()).filter(|&r| cats[r] == 1).collect(),
    ];
    for iv in 0..dm.cols() {
        if iv == dv {
            continue;
        }
        let (_, p) = marginal_chi2(dm, dv, iv)?;
        if p > p_threshold {
            continue;
        }
        log.treated.push(iv);
        let s = dm.arity(iv);
        let pooled = dm.marker_counts(iv);
        let mut col = dm.column(iv).to_vec();
        for c in 0..2 {
            let rows = &idx[c];
            let target = largest_remainder(rows.len(), &pooled);
            let mut have = vec![0usize; s];
            for &r in rows {
                have[col[r] as usize] += 1;
            }
            let mut r = rng.child(iv as u64).child(c as u64).rng();
            let mut deficit: Vec<u8> = Vec::new();
            for k in 0..s {
                if target[k] > have[k] {
                    deficit.extend(core::iter::repeat_n(k as u8, target[k] - have[k]));
                }
            }
            shuffle(&mut deficit, &mut r);
            let mut slot = 0;
            for k in 0..s {
                if have[k] <= target[k] {
                    continue;
                }
                let excess = have[k] - target[k];
                let cells: Vec<usize> = rows.iter().copied().filter(|&row| col[row] as usize == k).collect();
                let chosen = sample_indices(cells.len(), excess, &mut r);
                let mut per_to = vec![0usize; s];
                for ci in chosen {
                    let to = deficit[slot];
                    slot += 1;
                    col[cells[ci]] = to;
                    per_to[to as usize] += 1;
                }
                for (to, &count) in per_to.iter().enumerate() {
                    if count > 0 {
                        log.toggles.push(Toggle { iv, category: codes[c], from: k as u8, to: to as u8, count });
                    }
                }
            }
        }
        out.replace_column(iv, &col)?;
    }
    Ok((out, log))
}

/// Settings of the added-random-IV threshold search.
#[derive(Clone, Debug)]
pub struct TuneConfig {
    pub n_added: usize,
    pub scheme: FrequencyScheme,
    /// Minimum KS P value for the added IVs' P values to count as uniform.
    pub target_level: f64,
    pub n_trials: usize,
    /// Candidate thresholds; searched from the largest down.
    pub grid: Vec<f64>,
    pub score: ScoreSpec,
    pub scan: ScanConfig,
}

impl TuneConfig {
    pub fn default_grid() -> Vec<f64> {
        vec![0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 5e-4, 2e-4, 1e-4, 5e-5, 2e-5, 1e-5]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneReport {
    pub threshold: f64,
    /// (threshold, KS P value of the pooled added-IV P values), largest threshold first.
    pub scanned: Vec<(f64, f64)>,
}

/// Largest grid threshold at which erasure leaves the P values of freshly added
/// random IVs uniform (KS P value above `target_level`).
pub fn tune_erasure<R: Runner>(dm: &DataMatrix, dv: usize, cfg: &TuneConfig, runner: &R, rng: &RngStream) -> Result<TuneReport> {
    if dv >= dm.cols() || dm.distinct_codes(dv).len() != 2 {
        return invalid("DV must be binary");
    }
    if cfg.n_added == 0 || cfg.n_trials == 0 || cfg.grid.is_empty() {
        return invalid("tuning needs added IVs, trials and a threshold grid");
    }
    if !cfg.score.is_dv() {
        return invalid("tuning needs a dv score");
    }
    let mut grid = cfg.grid.clone();
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut augmented = Vec::with_capacity(cfg.n_trials);
    for t in 0..cfg.n_trials {
        let added = generate_null_dm(dm.rows(), cfg.n_added, &cfg.scheme, &rng.named("added").child(t as u64))?;
        let mut aug = dm.hstack(&added)?;
        aug.set_dv(Some(dv))?;
        augmented.push(aug);
    }
    let first_added = dm.cols();
    let mut scanned = Vec::new();
    for (gi, &thr) in grid.iter().enumerate() {
        let mut pvals = Vec::new();
        for (t, aug) in augmented.iter().enumerate() {
            let (erased, _) = erase_marginals(aug, dv, thr, &rng.named("erase").child(t as u64).child(gi as u64))?;
            let summary = crate::pairwise::PairwiseSummary::new(&erased);
            let ivs: Vec<usize> = (first_added..erased.cols()).collect();
            let res = scan_ivs(runner, &erased, &summary, dv, &ivs, &[cfg.score], &cfg.scan, &rng.named("scan").child(t as u64))?;
            pvals.extend(res.iter().map(|r| r[0].p));
        }
        let (_, ks_p) = ks_discrete_uniform(&pvals, cfg.scan.n_perms);
        scanned.push((thr, ks_p));
        if ks_p > cfg.target_level {
            return Ok(TuneReport { threshold: thr, scanned });
        }
    }
    let mut msg = String::from("no threshold passed; KS P values:");
    for (t, p) in &scanned {
        msg.push_str(&format!(" {t}:{p:.4}"));
    }
    Err(Error::Exhausted(msg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_pvalues() {
        let reps: Vec<Vec<Option<f64>>> = (0..99).map(|k| vec![Some(k as f64)]).collect();
        let low = permutation_estimate(&[Some(-1.0)], &reps, Aggregation::Sum, Tail::Upper);
        assert_eq!(low.p, 1.0);
        let high = permutation_estimate(&[Some(1000.0)], &reps, Aggregation::Sum, Tail::Upper);
        assert!((high.p - 0.01).abs() < 1e-15);
        let none = permutation_estimate(&[None], &reps, Aggregation::Sum, Tail::Upper);
        assert!(none.undetectable && none.p == 1.0);
    }

    #[test]
    fn zsum_skips_constant_cells() {
        let reps: Vec<Vec<Option<f64>>> = (0..10).map(|k| vec![Some(1.0), Some(k as f64)]).collect();
        let e = permutation_estimate(&[Some(5.0), Some(9.0)], &reps, Aggregation::ZSum, Tail::Upper);
        assert!((e.p - 2.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn sidak_values() {
        assert!((sidak_cutoff(0.1, 100).unwrap() - 0.001053).abs() < 1e-6);
        assert!((sidak_cutoff(0.1, 1).unwrap() - 0.1).abs() < 1e-15);
        let c: Vec<f64> = [0.01, 0.05, 0.1, 0.2].iter().map(|&a| sidak_cutoff(a, 10).unwrap()).collect();
        for (x, want) in c.iter().zip([0.0010, 0.0051, 0.0105, 0.0221]) {
            assert!((x - want).abs() < 5e-5, "{x} {want}");
        }
    }

    #[test]
    fn fisher_edges() {
        assert_eq!(fisher_combine(&[1.0, 1.0]).unwrap(), (0.0, 1.0));
        assert!((fisher_combine(&[0.3]).unwrap().1 - 0.3).abs() < 1e-12);
        assert!(fisher_combine(&[0.0]).is_err());
    }

    #[test]
    fn marginal_textbook_table() {
        let mut dv = vec![0u8; 50];
        dv.extend(vec![1u8; 50]);
        let mut iv = vec![0u8; 30];
        iv.extend(vec![1u8; 20]);
        iv.extend(vec![0u8; 20]);
        iv.extend(vec![1u8; 30]);
        let dm = DataMatrix::from_columns(vec![dv, iv]).unwrap();
        let (chi, p) = marginal_chi2(&dm, 0, 1).unwrap();
        assert!((chi - 4.0).abs() < 1e-12);
        assert!((p - 0.0455).abs() < 1e-4);
    }

    #[test]
    fn erasure_balances_counts() {
        let mut dv = vec![0u8; 100];
        dv.extend(vec![1u8; 100]);
        let mut iv = vec![1u8; 60];
        iv.extend(vec![0u8; 40]);
        iv.extend(vec![1u8; 40]);
        iv.extend(vec![0u8; 60]);
        let dm = DataMatrix::from_columns(vec![dv, iv]).unwrap();
        let (out, log) = erase_marginals(&dm, 0, 0.05, &RngStream::new(2)).unwrap();
        assert_eq!(log.treated, vec![1]);
        assert_eq!(log.toggles.iter().map(|t| t.count).sum::<usize>(), 20);
        let (chi, p) = marginal_chi2(&out, 0, 1).unwrap();
        assert!(chi.abs() < 1e-12 && (p - 1.0).abs() < 1e-12);
        let (same, log2) = erase_marginals(&dm, 0, 1e-9, &RngStream::new(2)).unwrap();
        assert_eq!(same, dm);
        assert!(log2.treated.is_empty());
    }
}
