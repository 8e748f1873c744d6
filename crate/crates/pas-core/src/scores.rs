//! Single-focal-column scores: Mom^n, CHIx, the LKx bundle, KS and meePAS.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::matrix::DataMatrix;
use crate::numeric::{fabs, ln, ln_factorial, powi, sqrt};
use crate::pairwise::{ConditionalSets, PairwiseSummary, SetMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum MomentKind {
    /// n-th central moment (mean for n = 1).
    #[default]
    Central,
    /// Central moment divided by σⁿ for n ≥ 3; mean and variance as for `Central`.
    Standardized,
}

/// Moment of order `n` of a histogram over m; `None` when the histogram is empty.
pub fn hist_moment(h: &[u64], n: u32, kind: MomentKind) -> Option<f64> {
    let total: u64 = h.iter().sum();
    if total == 0 || n == 0 {
        return None;
    }
    let t = total as f64;
    let mean = h.iter().enumerate().map(|(m, &c)| m as f64 * c as f64).sum::<f64>() / t;
    if n == 1 {
        return Some(mean);
    }
    let central = |k: u32| h.iter().enumerate().map(|(m, &c)| c as f64 * powi(m as f64 - mean, k)).sum::<f64>() / t;
    let mu = central(n);
    match kind {
        MomentKind::Standardized if n >= 3 => {
            let var = central(2);
            if var <= 0.0 {
                None
            } else {
                Some(mu / powi(sqrt(var), n))
            }
        }
        _ => Some(mu),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Conditioning {
    /// Any match at the focal column.
    M,
    /// One value per matching focal marker.
    I,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentScore {
    pub order: u32,
    pub conditioning: Conditioning,
    /// One value for `M`, one per focal marker for `I`; `None` marks an empty state.
    pub values: Vec<Option<f64>>,
}

impl MomentScore {
    /// Sum of the defined values; empty states contribute nothing.
    pub fn sum(&self) -> Option<f64> {
        let v: Vec<f64> = self.values.iter().flatten().copied().collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum())
        }
    }
}

pub fn mom(sets: &ConditionalSets, n: u32, conditioning: Conditioning, kind: MomentKind) -> Result<MomentScore> {
    if n == 0 {
        return invalid("moment order must be at least 1");
    }
    let values = match conditioning {
        Conditioning::M => vec![hist_moment(&sets.match_histogram(), n, kind)],
        Conditioning::I => {
            if sets.mode == SetMode::Generic {
                return invalid("per-marker moments need per-marker or full-pair sets");
            }
            (0..sets.arity).map(|i| hist_moment(sets.state_row(i), n, kind)).collect()
        }
    };
    Ok(MomentScore { order: n, conditioning, values })
}

/// χ²-style departure of a two-way table from the product of its margins.
pub fn chix_table(joint: &[u64], n_rows: usize, n_cols: usize) -> f64 {
    let total: u64 = joint.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut rs = vec![0u64; n_rows];
    let mut cs = vec![0u64; n_cols];
    for r in 0..n_rows {
        for c in 0..n_cols {
            let x = joint[r * n_cols + c];
            rs[r] += x;
            cs[c] += x;
        }
    }
    let t = total as f64;
    let mut chi = 0.0;
    for r in 0..n_rows {
        if rs[r] == 0 {
            continue;
        }
        for c in 0..n_cols {
            if cs[c] == 0 {
                continue;
            }
            let e = rs[r] as f64 * cs[c] as f64 / t;
            let d = joint[r * n_cols + c] as f64 - e;
            chi += d * d / e;
        }
    }
    chi
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChixMode {
    /// Generic match/mismatch states.
    M,
    /// Fully specified unordered marker pairs.
    Ij,
}

pub fn chix(sets: &ConditionalSets, mode: ChixMode) -> Result<f64> {
    let s = match mode {
        ChixMode::M => sets.collapse(SetMode::Generic)?,
        ChixMode::Ij => {
            if sets.mode != SetMode::FullPair {
                return invalid("CHIx-ij needs full-pair sets");
            }
            sets.clone()
        }
    };
    Ok(chix_table(&s.joint, s.n_states(), s.m_len))
}

/// Logs of the hypergeometric LKx, the multinomial LKm and its maximum-likelihood maxLKm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LkxBundle {
    pub log_lkx: f64,
    pub log_lkm: f64,
    pub log_maxlkm: f64,
}

/// LKx bundle of a two-way table of state (rows) against fragment (columns).
pub fn lk_table(joint: &[u64], n_rows: usize, n_cols: usize) -> LkxBundle {
    let total: u64 = joint.iter().sum();
    let t = total as f64;
    let mut rs = vec![0u64; n_rows];
    let mut cs = vec![0u64; n_cols];
    let mut cells_lf = 0.0;
    let mut cells_ll = 0.0;
    for r in 0..n_rows {
        for c in 0..n_cols {
            let x = joint[r * n_cols + c];
            rs[r] += x;
            cs[c] += x;
            if x > 1 {
                cells_lf += ln_factorial(x);
            }
            if x > 0 {
                cells_ll += x as f64 * ln(x as f64 / t);
            }
        }
    }
    let margin = |v: &[u64]| -> (f64, f64) {
        let mut lf = 0.0;
        let mut ll = 0.0;
        for &x in v {
            if x > 1 {
                lf += ln_factorial(x);
            }
            if x > 0 {
                ll += x as f64 * ln(x as f64 / t);
            }
        }
        (lf, ll)
    };
    let (rlf, rll) = margin(&rs);
    let (clf, cll) = margin(&cs);
    let lw = ln_factorial(total);
    let log_lkx = rlf + clf - lw - cells_lf;
    LkxBundle {
        log_lkx: log_lkx.min(0.0),
        log_lkm: (log_lkx + rll + cll).min(0.0),
        log_maxlkm: (lw - cells_lf + cells_ll).min(0.0),
    }
}

/// LKx bundle over the states of `sets` as given (use full-pair sets for LKx proper).
pub fn lkx(sets: &ConditionalSets) -> LkxBundle {
    lk_table(&sets.joint, sets.n_states(), sets.m_len)
}

/// Per-state null c.d.f.s of m, estimated from permutation replicates.
#[derive(Clone, Debug, PartialEq)]
pub struct NullCdfs {
    pub cdfs: Vec<Option<Vec<f64>>>,
}

impl NullCdfs {
    /// From per-state histograms summed over replicates, laid out like `joint`.
    pub fn from_pooled(pooled: &[f64], n_states: usize, m_len: usize) -> Self {
        let cdfs = (0..n_states)
            .map(|s| {
                let row = &pooled[s * m_len..(s + 1) * m_len];
                let t: f64 = row.iter().sum();
                if t <= 0.0 {
                    return None;
                }
                let mut acc = 0.0;
                Some(
                    row.iter()
                        .map(|x| {
                            acc += x;
                            acc / t
                        })
                        .collect(),
                )
            })
            .collect();
        NullCdfs { cdfs }
    }
}

/// Sum over populated states of the sup-distance between observed and null c.d.f.s of m.
pub fn ks_distance(joint: &[u64], n_states: usize, m_len: usize, null: &NullCdfs) -> Result<f64> {
    let mut total = 0.0;
    for s in 0..n_states {
        let row = &joint[s * m_len..(s + 1) * m_len];
        let n: u64 = row.iter().sum();
        if n == 0 {
            continue;
        }
        let cdf = null
            .cdfs
            .get(s)
            .and_then(|c| c.as_ref())
            .ok_or_else(|| Error::Invalid(format!("no null c.d.f. for populated state {s}")))?;
        let mut acc = 0u64;
        let mut d: f64 = 0.0;
        for m in 0..m_len {
            acc += row[m];
            d = d.max(fabs(acc as f64 / n as f64 - cdf[m]));
        }
        total += d;
    }
    Ok(total)
}

/// KS score of `sets` (already in the desired mode) against `null`.
pub fn ks(sets: &ConditionalSets, null: &NullCdfs) -> Result<f64> {
    ks_distance(&sets.joint, sets.n_states(), sets.m_len, null)
}

/// Largest exclusion effect on one column's Mom^n-M.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeeResult {
    /// Signed change of the focal Mom^n-M when `arg_col` is excluded.
    pub delta: f64,
    /// Column whose exclusion changes the focal moment most.
    pub arg_col: usize,
}

/// For each column, the exclusion of another column that changes its Mom^n-M most.
///
/// For n = 1 the change is taken net of the excluded column's overall match
/// frequency, so a column that matches independently of the focal one has no effect.
pub fn mee_pas(dm: &DataMatrix, summary: &PairwiseSummary, n: u32, kind: MomentKind) -> Result<Vec<MeeResult>> {
    let l = dm.cols();
    if l < 2 {
        return invalid("meePAS needs at least two columns");
    }
    let r = dm.rows();
    let tl = l + 1;
    let total = summary.total();
    // g[f][t]: pairs matching at f with total t.
    let mut g = vec![vec![0u64; tl]; l];
    // h[f][c][t] for f < c: pairs matching at both.
    let mut h = vec![vec![0u64; tl]; l * l];
    for f in 0..l {
        let cf = dm.column(f);
        let mut w = 0;
        for a in 0..r {
            for b in a + 1..r {
                g[f][total[w] as usize] += (cf[a] == cf[b]) as u64;
                w += 1;
            }
        }
        for c in f + 1..l {
            let cc = dm.column(c);
            let hist = &mut h[f * l + c];
            let mut w = 0;
            for a in 0..r {
                let (fa, ca) = (cf[a], cc[a]);
                for b in a + 1..r {
                    hist[total[w] as usize] += ((fa == cf[b]) & (ca == cc[b])) as u64;
                    w += 1;
                }
            }
        }
    }
    let freq = summary.per_column_match_freq();
    let mut out = Vec::with_capacity(l);
    for f in 0..l {
        let mut base_h = vec![0u64; tl];
        for t in 1..tl {
            base_h[t - 1] = g[f][t];
        }
        let base = hist_moment(&base_h, n, kind);
        let mut best = MeeResult { delta: 0.0, arg_col: if f == 0 { 1 } else { 0 } };
        let mut best_abs = -1.0;
        for c in 0..l {
            if c == f {
                continue;
            }
            let both = &h[f.min(c) * l + f.max(c)];
            let mut ex = vec![0u64; tl];
            for t in 1..tl {
                let b = both[t];
                if b > 0 {
                    ex[t - 2] += b;
                }
                ex[t - 1] += g[f][t] - b;
            }
            let d = match (hist_moment(&ex, n, kind), base) {
                (Some(x), Some(y)) => x - y + if n == 1 { freq[c] } else { 0.0 },
                _ => 0.0,
            };
            if fabs(d) > best_abs {
                best_abs = fabs(d);
                best = MeeResult { delta: d, arg_col: c };
            }
        }
        out.push(best);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairwise::conditional_sets;

    #[test]
    fn identical_rows_moments() {
        let dm = DataMatrix::from_digit_rows(&["0101010101", "0101010101", "0101010101"]).unwrap();
        let s = PairwiseSummary::new(&dm);
        let cs = conditional_sets(&dm, &s, 2, SetMode::PerMarker).unwrap();
        let m1 = mom(&cs, 1, Conditioning::M, MomentKind::Central).unwrap();
        let m2 = mom(&cs, 2, Conditioning::M, MomentKind::Central).unwrap();
        assert_eq!(m1.values, vec![Some(9.0)]);
        assert_eq!(m2.values, vec![Some(0.0)]);
        let mi = mom(&cs, 1, Conditioning::I, MomentKind::Central).unwrap();
        assert_eq!(mi.values, vec![Some(9.0)]);
    }

    #[test]
    fn independent_table_has_zero_chix() {
        // Outer product of (1,2) and (3,4).
        let joint = [3u64, 4, 6, 8];
        assert!(chix_table(&joint, 2, 2).abs() < 1e-12);
    }

    #[test]
    fn single_category_lkx_is_one() {
        let joint = [3u64, 5, 0, 7];
        let b = lk_table(&joint, 1, 4);
        assert!(b.log_lkx.abs() < 1e-12);
    }

    #[test]
    fn lkx_counts_on_reference_sets() {
        // Favourable 15!/(2!·3!) over [15!/(3!3!9!)]·[15!/(3!3!2!3!3!)], with the
        // 1!s elided; computed from the reference sets.
        let dm = crate::pairwise::tests_support::lkx_reference_dm();
        let s = PairwiseSummary::new(&dm);
        let cs = conditional_sets(&dm, &s, 0, SetMode::PerMarker).unwrap();
        let b = lkx(&cs);
        let mut expect = -ln_factorial(15);
        for &x in &cs.s_counts() {
            expect += ln_factorial(x);
        }
        for &x in &cs.m_counts() {
            expect += ln_factorial(x);
        }
        for &x in &cs.joint {
            expect -= ln_factorial(x);
        }
        assert!((b.log_lkx - expect).abs() < 1e-12);
        assert!(b.log_lkm <= b.log_maxlkm && b.log_maxlkm <= 0.0);
    }

    #[test]
    fn ks_extremes() {
        let joint = [0u64, 4, 0];
        let same = NullCdfs::from_pooled(&[0.0, 1.0, 0.0], 1, 3);
        assert_eq!(ks_distance(&joint, 1, 3, &same).unwrap(), 0.0);
        let shifted = NullCdfs::from_pooled(&[1.0, 0.0, 0.0], 1, 3);
        assert_eq!(ks_distance(&joint, 1, 3, &shifted).unwrap(), 1.0);
        let missing = NullCdfs::from_pooled(&[0.0, 0.0, 0.0], 1, 3);
        assert!(ks_distance(&joint, 1, 3, &missing).is_err());
    }

    #[test]
    fn constant_column_exclusion_has_no_effect() {
        let dm = DataMatrix::from_digit_rows(&["0100", "0010", "0111", "0001", "0110"]).unwrap();
        let s = PairwiseSummary::new(&dm);
        for n in 1..=3 {
            let res = mee_pas(&dm, &s, n, MomentKind::Central).unwrap();
            for (f, r) in res.iter().enumerate() {
                if f == 0 {
                    continue;
                }
                let base_h = {
                    let cs = conditional_sets(&dm, &s, f, SetMode::Generic).unwrap();
                    cs.match_histogram()
                };
                assert!(!base_h.is_empty());
                if r.arg_col == 0 {
                    assert!(r.delta.abs() < 1e-12);
                }
            }
        }
    }
}
