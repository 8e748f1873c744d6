//! Implicit pairwise matrix: per-pair total matches and conditional count sets.
//!
//! Pairs `(a, b)` with `a < b` are enumerated a-major, so pair `w` of an R-row
//! matrix runs through `(0,1), (0,2), …, (0,R−1), (1,2), …`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::matrix::DataMatrix;

/// Index of pair `(a, b)`, `a < b`, among the W pairs of an `r`-row matrix.
pub fn pair_index(a: usize, b: usize, r: usize) -> usize {
    debug_assert!(a < b && b < r);
    a * (2 * r - a - 1) / 2 + (b - a - 1)
}

/// Total matches per row pair, computed once per matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseSummary {
    rows: usize,
    cols: usize,
    total: Vec<u16>,
    col_match_freq: Vec<f64>,
}

impl PairwiseSummary {
    pub fn new(dm: &DataMatrix) -> Self {
        let r = dm.rows();
        let w = dm.pairs();
        let mut total = vec![0u16; w];
        let mut freq = Vec::with_capacity(dm.cols());
        for j in 0..dm.cols() {
            let col = dm.column(j);
            let mut hits = 0u64;
            let mut k = 0;
            for a in 0..r {
                let ca = col[a];
                for &cb in &col[a + 1..] {
                    let m = (ca == cb) as u16;
                    total[k] += m;
                    hits += m as u64;
                    k += 1;
                }
            }
            freq.push(hits as f64 / w as f64);
        }
        PairwiseSummary { rows: r, cols: dm.cols(), total, col_match_freq: freq }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn pairs(&self) -> usize {
        self.total.len()
    }
    pub fn total(&self) -> &[u16] {
        &self.total
    }
    pub fn per_column_match_freq(&self) -> &[f64] {
        &self.col_match_freq
    }

    /// Matches outside `col` for every pair: total minus the match at `col`.
    pub fn non_focal(&self, col: &[u8]) -> Vec<u16> {
        let mut out = self.total.clone();
        let mut k = 0;
        for a in 0..self.rows {
            let ca = col[a];
            for &cb in &col[a + 1..] {
                out[k] -= (ca == cb) as u16;
                k += 1;
            }
        }
        out
    }
}

pub fn total_matches(dm: &DataMatrix) -> PairwiseSummary {
    PairwiseSummary::new(dm)
}

/// Pairwise match indicators of one column using R−1 tract copies.
///
/// For a binary column, tract `i` (row `i` against rows `i+1..R`) is a copy of the
/// later markers when marker `i` is 1 and their negation otherwise.
pub fn pm_column_fast(column: &[u8]) -> Vec<bool> {
    let r = column.len();
    let mut out = Vec::with_capacity(r * r.saturating_sub(1) / 2);
    let binary = column.iter().all(|&x| x <= 1);
    for i in 0..r {
        let rest = &column[i + 1..];
        if binary {
            if column[i] == 1 {
                out.extend(rest.iter().map(|&x| x == 1));
            } else {
                out.extend(rest.iter().map(|&x| x == 0));
            }
        } else {
            let ci = column[i];
            out.extend(rest.iter().map(|&x| x == ci));
        }
    }
    out
}

/// Reference double loop for `pm_column_fast`.
pub fn pm_column_brute(column: &[u8]) -> Vec<bool> {
    let r = column.len();
    let mut out = Vec::new();
    for a in 0..r {
        for b in a + 1..r {
            out.push(column[a] == column[b]);
        }
    }
    out
}

/// Categories of a single column's pairwise state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SetMode {
    /// Match or mismatch.
    Generic,
    /// One category per matching marker, all mismatches pooled.
    PerMarker,
    /// Every unordered marker pair, matches and mismatches alike.
    FullPair,
}

/// Number of state categories of an `arity`-marker column.
pub fn n_states(arity: usize, mode: SetMode) -> usize {
    match mode {
        SetMode::Generic => 2,
        SetMode::PerMarker => arity + 1,
        SetMode::FullPair => arity * (arity + 1) / 2,
    }
}

/// Full-pair state index: matches `(i,i)` are `0..S`, mismatches follow in
/// lexicographic order of `(i, j)`, `i < j`.
fn full_pair_state(i: usize, j: usize, s: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    if i == j {
        return i;
    }
    // Mismatch pairs preceding row i: Σ_{t<i} (S−1−t).
    s + i * (2 * s - i - 1) / 2 + (j - i - 1)
}

/// `S×S` lookup from a marker pair to its state index.
pub fn state_lut(arity: usize, mode: SetMode) -> Vec<u8> {
    let mut lut = vec![0u8; arity * arity];
    for i in 0..arity {
        for j in 0..arity {
            lut[i * arity + j] = match mode {
                SetMode::Generic => (i != j) as u8,
                SetMode::PerMarker => {
                    if i == j {
                        i as u8
                    } else {
                        arity as u8
                    }
                }
                SetMode::FullPair => full_pair_state(i, j, arity) as u8,
            };
        }
    }
    lut
}

/// Map from the states of `from` to those of the coarser `to`.
pub fn state_map(arity: usize, from: SetMode, to: SetMode) -> Vec<usize> {
    let fl = state_lut(arity, from);
    let tl = state_lut(arity, to);
    let mut map = vec![usize::MAX; n_states(arity, from)];
    for k in 0..arity * arity {
        let f = fl[k] as usize;
        let t = tl[k] as usize;
        debug_assert!(map[f] == usize::MAX || map[f] == t, "target mode is not coarser");
        map[f] = t;
    }
    map
}

/// Matching marker of a state, `None` for mismatch states.
pub fn match_marker(state: usize, arity: usize, mode: SetMode) -> Option<usize> {
    match mode {
        SetMode::Generic => (state == 0).then_some(usize::MAX),
        SetMode::PerMarker | SetMode::FullPair => (state < arity).then_some(state),
    }
}

pub fn state_label(state: usize, arity: usize, mode: SetMode) -> String {
    let lut = state_lut(arity, mode);
    match mode {
        SetMode::Generic => String::from(if state == 0 { "match" } else { "mismatch" }),
        SetMode::PerMarker if state == arity => String::from("mismatch"),
        _ => {
            for i in 0..arity {
                for j in i..arity {
                    if lut[i * arity + j] as usize == state {
                        return format!("{i}/{j}");
                    }
                }
            }
            String::from("?")
        }
    }
}

/// Adds one column's (state, m) pairings into `joint`, row-major by state.
pub fn focal_kernel(col: &[u8], arity: usize, lut: &[u8], nf: &[u16], m_len: usize, joint: &mut [u64]) {
    let r = col.len();
    let mut w = 0;
    for a in 0..r {
        let row = &lut[col[a] as usize * arity..(col[a] as usize + 1) * arity];
        let n = r - a - 1;
        let nfa = &nf[w..w + n];
        for (&cb, &m) in col[a + 1..].iter().zip(nfa) {
            joint[row[cb as usize] as usize * m_len + m as usize] += 1;
        }
        w += n;
    }
}

/// The counts {S_i}, {M_m} and {S_i..M_m} of one focal column.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSets {
    pub focal: usize,
    pub mode: SetMode,
    pub arity: usize,
    /// Values of m run over `0..m_len`.
    pub m_len: usize,
    /// `joint[state * m_len + m]`.
    pub joint: Vec<u64>,
}

impl ConditionalSets {
    pub fn from_joint(focal: usize, mode: SetMode, arity: usize, m_len: usize, joint: Vec<u64>) -> Self {
        debug_assert_eq!(joint.len(), n_states(arity, mode) * m_len);
        ConditionalSets { focal, mode, arity, m_len, joint }
    }

    /// Builds the sets of `col` against fixed non-focal match counts `nf`.
    pub fn from_column(focal: usize, col: &[u8], arity: usize, nf: &[u16], m_len: usize, mode: SetMode) -> Self {
        let mut joint = vec![0u64; n_states(arity, mode) * m_len];
        focal_kernel(col, arity, &state_lut(arity, mode), nf, m_len, &mut joint);
        Self::from_joint(focal, mode, arity, m_len, joint)
    }

    pub fn n_states(&self) -> usize {
        n_states(self.arity, self.mode)
    }

    pub fn cell(&self, state: usize, m: usize) -> u64 {
        self.joint[state * self.m_len + m]
    }

    pub fn state_row(&self, state: usize) -> &[u64] {
        &self.joint[state * self.m_len..(state + 1) * self.m_len]
    }

    pub fn s_counts(&self) -> Vec<u64> {
        (0..self.n_states()).map(|s| self.state_row(s).iter().sum()).collect()
    }

    pub fn m_counts(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.m_len];
        for s in 0..self.n_states() {
            for (o, &c) in out.iter_mut().zip(self.state_row(s)) {
                *o += c;
            }
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.joint.iter().sum()
    }

    pub fn is_match_state(&self, state: usize) -> bool {
        match_marker(state, self.arity, self.mode).is_some()
    }

    /// Histogram of m over all pairs whose focal state is any match.
    pub fn match_histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.m_len];
        for s in 0..self.n_states() {
            if self.is_match_state(s) {
                for (o, &c) in h.iter_mut().zip(self.state_row(s)) {
                    *o += c;
                }
            }
        }
        h
    }

    /// Re-bins into a coarser mode.
    pub fn collapse(&self, to: SetMode) -> Result<Self> {
        if to == self.mode {
            return Ok(self.clone());
        }
        let ok = matches!(
            (self.mode, to),
            (SetMode::FullPair, _) | (SetMode::PerMarker, SetMode::Generic)
        );
        if !ok {
            return invalid(format!("cannot refine {:?} sets into {:?}", self.mode, to));
        }
        let map = state_map(self.arity, self.mode, to);
        let mut joint = vec![0u64; n_states(self.arity, to) * self.m_len];
        for (s, &t) in map.iter().enumerate() {
            for m in 0..self.m_len {
                joint[t * self.m_len + m] += self.cell(s, m);
            }
        }
        Ok(Self::from_joint(self.focal, to, self.arity, self.m_len, joint))
    }
}

/// Conditional sets of `focal` using the cached totals.
pub fn conditional_sets(dm: &DataMatrix, summary: &PairwiseSummary, focal: usize, mode: SetMode) -> Result<ConditionalSets> {
    if focal >= dm.cols() {
        return invalid(format!("focal column {focal} out of range"));
    }
    let col = dm.column(focal);
    let nf = summary.non_focal(col);
    Ok(ConditionalSets::from_column(focal, col, dm.arity(focal), &nf, dm.cols(), mode))
}

/// Joint pairwise states at a DV-like column S and a second focal column E.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HybridMode {
    /// Generic match/mismatch at both columns.
    MM,
    /// Fully specified unordered marker pairs at both columns.
    FullPair,
}

impl HybridMode {
    pub fn set_mode(self) -> SetMode {
        match self {
            HybridMode::MM => SetMode::Generic,
            HybridMode::FullPair => SetMode::FullPair,
        }
    }
}

/// Per-pair code `e_state * m_len + m` of the hybrid fragment at E, where m
/// excludes both focal columns. `nd` holds matches outside S.
pub fn hybrid_codes(e_col: &[u8], e_arity: usize, e_mode: SetMode, nd: &[u16], m_len: usize) -> Vec<u16> {
    let lut = state_lut(e_arity, e_mode);
    let r = e_col.len();
    let mut out = Vec::with_capacity(nd.len());
    let mut w = 0;
    for a in 0..r {
        let ea = e_col[a] as usize;
        let row = &lut[ea * e_arity..(ea + 1) * e_arity];
        for &eb in &e_col[a + 1..] {
            let m = nd[w] - (ea == eb as usize) as u16;
            out.push(row[eb as usize] as u16 * m_len as u16 + m);
            w += 1;
        }
    }
    out
}

/// Adds the pairings of S-states with precomputed E fragments into `joint`.
pub fn hybrid_kernel(s_col: &[u8], s_arity: usize, s_lut: &[u8], codes: &[u16], block: usize, joint: &mut [u64]) {
    let r = s_col.len();
    let mut w = 0;
    for a in 0..r {
        let row = &s_lut[s_col[a] as usize * s_arity..(s_col[a] as usize + 1) * s_arity];
        let n = r - a - 1;
        for (&sb, &c) in s_col[a + 1..].iter().zip(&codes[w..w + n]) {
            joint[row[sb as usize] as usize * block + c as usize] += 1;
        }
        w += n;
    }
}

/// Counts {S_i}, {M_m..E_k} and {S_i..M_m..E_k}.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridSets {
    pub s_col: usize,
    pub e_col: usize,
    pub mode: HybridMode,
    pub s_arity: usize,
    pub e_arity: usize,
    /// Values of m run over `0..m_len`, excluding both focal columns.
    pub m_len: usize,
    /// `joint[(s * n_e + e) * m_len + m]`.
    pub joint: Vec<u64>,
}

impl HybridSets {
    pub fn n_s(&self) -> usize {
        n_states(self.s_arity, self.mode.set_mode())
    }
    pub fn n_e(&self) -> usize {
        n_states(self.e_arity, self.mode.set_mode())
    }
    pub fn cell(&self, s: usize, e: usize, m: usize) -> u64 {
        self.joint[(s * self.n_e() + e) * self.m_len + m]
    }
    pub fn block(&self) -> usize {
        self.n_e() * self.m_len
    }

    pub fn s_counts(&self) -> Vec<u64> {
        let b = self.block();
        (0..self.n_s()).map(|s| self.joint[s * b..(s + 1) * b].iter().sum()).collect()
    }

    /// The hybrid fragments {M_m..E_k}, indexed `e * m_len + m`.
    pub fn fragment_counts(&self) -> Vec<u64> {
        let b = self.block();
        let mut out = vec![0u64; b];
        for s in 0..self.n_s() {
            for (o, &c) in out.iter_mut().zip(&self.joint[s * b..(s + 1) * b]) {
                *o += c;
            }
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.joint.iter().sum()
    }

    /// Generic match/mismatch at both columns.
    pub fn collapse_mm(&self) -> HybridSets {
        if self.mode == HybridMode::MM {
            return self.clone();
        }
        let sm = state_map(self.s_arity, SetMode::FullPair, SetMode::Generic);
        let em = state_map(self.e_arity, SetMode::FullPair, SetMode::Generic);
        let mut joint = vec![0u64; 4 * self.m_len];
        for s in 0..self.n_s() {
            for e in 0..self.n_e() {
                for m in 0..self.m_len {
                    joint[(sm[s] * 2 + em[e]) * self.m_len + m] += self.cell(s, e, m);
                }
            }
        }
        HybridSets { mode: HybridMode::MM, joint, ..self.clone() }
    }

    /// Sets of E alone, with S folded back into m (the plain dv conditioning).
    pub fn e_sets(&self, mode: SetMode) -> Result<ConditionalSets> {
        let own = self.mode.set_mode();
        let sm = state_map(self.s_arity, own, SetMode::Generic);
        let m_len = self.m_len + 1;
        let mut joint = vec![0u64; n_states(self.e_arity, own) * m_len];
        for s in 0..self.n_s() {
            let add = (sm[s] == 0) as usize;
            for e in 0..self.n_e() {
                for m in 0..self.m_len {
                    joint[e * m_len + m + add] += self.cell(s, e, m);
                }
            }
        }
        ConditionalSets::from_joint(self.e_col, own, self.e_arity, m_len, joint).collapse(mode)
    }
}

/// Hybrid sets of S (usually the DV) and E using the cached totals.
pub fn hybrid_sets(dm: &DataMatrix, summary: &PairwiseSummary, s_col: usize, e_col: usize, mode: HybridMode) -> Result<HybridSets> {
    if s_col == e_col {
        return invalid("S and E must be different columns");
    }
    if s_col >= dm.cols() || e_col >= dm.cols() {
        return invalid("column out of range");
    }
    if dm.cols() < 2 {
        return invalid("hybrid sets need at least two columns");
    }
    let sm = mode.set_mode();
    let m_len = dm.cols() - 1;
    let nd = summary.non_focal(dm.column(s_col));
    let codes = hybrid_codes(dm.column(e_col), dm.arity(e_col), sm, &nd, m_len);
    let s_ar = dm.arity(s_col);
    let e_ar = dm.arity(e_col);
    let block = n_states(e_ar, sm) * m_len;
    let mut joint = vec![0u64; n_states(s_ar, sm) * block];
    hybrid_kernel(dm.column(s_col), s_ar, &state_lut(s_ar, sm), &codes, block, &mut joint);
    Ok(HybridSets { s_col, e_col, mode, s_arity: s_ar, e_arity: e_ar, m_len, joint })
}

#[cfg(test)]
pub(crate) mod tests_support {
    use crate::matrix::DataMatrix;

    pub(crate) fn lkx_reference_dm() -> DataMatrix {
        DataMatrix::from_digit_rows(&["010101001", "000010110", "100011001", "101110001", "111101110", "011000110"]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::lkx_reference_dm;
    use super::*;

    #[test]
    fn pair_index_is_lexicographic() {
        let r = 6;
        let mut k = 0;
        for a in 0..r {
            for b in a + 1..r {
                assert_eq!(pair_index(a, b, r), k);
                k += 1;
            }
        }
    }

    #[test]
    fn identical_rows() {
        let dm = DataMatrix::from_digit_rows(&["012012012", "012012012"]).unwrap();
        let s = PairwiseSummary::new(&dm);
        assert_eq!(s.total(), &[9]);
    }

    #[test]
    fn reference_dm_sets() {
        let dm = lkx_reference_dm();
        let s = PairwiseSummary::new(&dm);
        assert_eq!(s.pairs(), 15);
        let cs = conditional_sets(&dm, &s, 0, SetMode::PerMarker).unwrap();
        assert_eq!(cs.s_counts(), vec![3, 3, 9]);
        assert_eq!(&cs.m_counts()[1..7], &[3, 3, 2, 3, 3, 1]);
        assert_eq!(cs.m_counts()[0], 0);
        assert_eq!(cs.total(), 15);
    }

    #[test]
    fn fast_tracts_example() {
        let v = pm_column_fast(&[1, 0, 0, 1, 0]);
        let expect = [false, false, true, false, true, false, true, false, true, false];
        assert_eq!(v, expect);
    }

    #[test]
    fn full_pair_states_are_dense() {
        for s in 1..6 {
            let lut = state_lut(s, SetMode::FullPair);
            let mut seen = vec![false; n_states(s, SetMode::FullPair)];
            for &x in &lut {
                seen[x as usize] = true;
            }
            assert!(seen.iter().all(|&b| b));
        }
        assert_eq!(state_label(2, 2, SetMode::FullPair), "0/1");
        assert_eq!(state_label(5, 3, SetMode::FullPair), "1/2");
    }

    #[test]
    fn hybrid_sums_and_e_sets() {
        let dm = lkx_reference_dm();
        let s = PairwiseSummary::new(&dm);
        let h = hybrid_sets(&dm, &s, 0, 1, HybridMode::FullPair).unwrap();
        assert_eq!(h.total(), 15);
        let e = h.e_sets(SetMode::FullPair).unwrap();
        let direct = conditional_sets(&dm, &s, 1, SetMode::FullPair).unwrap();
        assert_eq!(e, direct);
        let mm = h.collapse_mm();
        let direct_mm = hybrid_sets(&dm, &s, 0, 1, HybridMode::MM).unwrap();
        assert_eq!(mm, direct_mm);
    }
}
