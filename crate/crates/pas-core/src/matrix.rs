//! Data matrices, marker-frequency schemes and null-matrix generation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Error, Result};
use crate::numeric::{fabs, floor, round};
use crate::rng::{shuffle, RngStream};

/// R×L matrix of small-integer markers, stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
    arities: Vec<u8>,
    dv: Option<usize>,
    ids: Vec<String>,
}

impl DataMatrix {
    /// Builds a matrix from columns, inferring each arity as 1 + max code.
    pub fn from_columns(columns: Vec<Vec<u8>>) -> Result<Self> {
        let arities = columns
            .iter()
            .map(|c| c.iter().copied().max().map_or(1, |m| m + 1))
            .collect();
        Self::from_columns_with_arities(columns, arities)
    }

    pub fn from_columns_with_arities(columns: Vec<Vec<u8>>, arities: Vec<u8>) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return invalid("matrix has no columns");
        }
        if arities.len() != cols {
            return invalid("one arity per column required");
        }
        let rows = columns[0].len();
        if rows < 2 {
            return invalid("at least two rows are required");
        }
        let mut data = Vec::with_capacity(rows * cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return invalid(format!("column {j} has {} rows, expected {rows}", c.len()));
            }
            if arities[j] == 0 {
                return invalid(format!("column {j} has arity 0"));
            }
            if let Some(&bad) = c.iter().find(|&&x| x >= arities[j]) {
                return invalid(format!("column {j} holds code {bad} ≥ arity {}", arities[j]));
            }
            data.extend_from_slice(c);
        }
        let ids = (0..cols).map(|j| format!("c{j}")).collect();
        Ok(DataMatrix { rows, cols, data, arities, dv: None, ids })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        if rows.is_empty() {
            return invalid("matrix has no rows");
        }
        let l = rows[0].len();
        if rows.iter().any(|r| r.len() != l) {
            return invalid("ragged rows");
        }
        let cols = (0..l).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::from_columns(cols)
    }

    /// Parses rows of digit characters such as `"0101"`.
    pub fn from_digit_rows(rows: &[&str]) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            let mut v = Vec::with_capacity(r.len());
            for ch in r.chars() {
                match ch.to_digit(10) {
                    Some(d) => v.push(d as u8),
                    None => return invalid(format!("non-digit '{ch}' in row {r:?}")),
                }
            }
            out.push(v);
        }
        Self::from_rows(&out)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    /// Number of pairwise comparisons W = R(R−1)/2.
    pub fn pairs(&self) -> usize {
        self.rows * (self.rows - 1) / 2
    }
    pub fn column(&self, j: usize) -> &[u8] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[c * self.rows + r]
    }
    pub fn row(&self, r: usize) -> Vec<u8> {
        (0..self.cols).map(|c| self.get(r, c)).collect()
    }
    pub fn arity(&self, j: usize) -> usize {
        self.arities[j] as usize
    }
    pub fn arities(&self) -> &[u8] {
        &self.arities
    }
    pub fn dv(&self) -> Option<usize> {
        self.dv
    }
    pub fn ids(&self) -> &[String] {
        &self.ids
    }
    pub fn column_id(&self, j: usize) -> &str {
        &self.ids[j]
    }

    pub fn set_ids(&mut self, ids: Vec<String>) -> Result<()> {
        if ids.len() != self.cols {
            return invalid("one id per column required");
        }
        self.ids = ids;
        Ok(())
    }

    /// Designates a binary dependent-variable column.
    pub fn set_dv(&mut self, dv: Option<usize>) -> Result<()> {
        if let Some(j) = dv {
            if j >= self.cols {
                return invalid(format!("DV column {j} out of range"));
            }
            let distinct = self.distinct_codes(j);
            if distinct.len() != 2 {
                return invalid(format!(
                    "DV column {} must hold exactly 2 distinct markers, found {}",
                    self.ids[j],
                    distinct.len()
                ));
            }
        }
        self.dv = dv;
        Ok(())
    }

    pub fn with_dv(mut self, dv: usize) -> Result<Self> {
        self.set_dv(Some(dv))?;
        Ok(self)
    }

    pub fn distinct_codes(&self, j: usize) -> Vec<u8> {
        let mut seen = vec![false; self.arity(j)];
        for &x in self.column(j) {
            seen[x as usize] = true;
        }
        (0..self.arity(j) as u8).filter(|&c| seen[c as usize]).collect()
    }

    pub fn marker_counts(&self, j: usize) -> Vec<usize> {
        let mut c = vec![0; self.arity(j)];
        for &x in self.column(j) {
            c[x as usize] += 1;
        }
        c
    }

    /// Replaces column `j`, keeping its arity unless a code exceeds it.
    pub fn replace_column(&mut self, j: usize, col: &[u8]) -> Result<()> {
        if col.len() != self.rows {
            return invalid("replacement column has the wrong length");
        }
        let max = col.iter().copied().max().unwrap_or(0);
        if max >= self.arities[j] {
            self.arities[j] = max + 1;
        }
        self.data[j * self.rows..(j + 1) * self.rows].copy_from_slice(col);
        if self.dv == Some(j) && self.distinct_codes(j).len() != 2 {
            return invalid("replacement DV column is not binary");
        }
        Ok(())
    }

    pub fn columns(&self) -> Vec<Vec<u8>> {
        (0..self.cols).map(|j| self.column(j).to_vec()).collect()
    }

    /// Keeps the listed columns in the given order; the DV follows if kept.
    pub fn select_columns(&self, keep: &[usize]) -> Result<Self> {
        let cols = keep.iter().map(|&j| self.column(j).to_vec()).collect();
        let ar = keep.iter().map(|&j| self.arities[j]).collect();
        let mut m = Self::from_columns_with_arities(cols, ar)?;
        m.ids = keep.iter().map(|&j| self.ids[j].clone()).collect();
        m.dv = self.dv.and_then(|d| keep.iter().position(|&j| j == d));
        Ok(m)
    }

    pub fn select_rows(&self, keep: &[usize]) -> Result<Self> {
        let cols = (0..self.cols)
            .map(|j| {
                let c = self.column(j);
                keep.iter().map(|&r| c[r]).collect()
            })
            .collect();
        let mut m = Self::from_columns_with_arities(cols, self.arities.clone())?;
        m.ids = self.ids.clone();
        m.dv = self.dv;
        Ok(m)
    }

    /// Lateral join; `other`'s columns are appended and renumbered after ours.
    pub fn hstack(&self, other: &DataMatrix) -> Result<Self> {
        if other.rows != self.rows {
            return invalid("row counts differ");
        }
        let mut cols = self.columns();
        cols.extend(other.columns());
        let mut ar = self.arities.clone();
        ar.extend_from_slice(&other.arities);
        let mut m = Self::from_columns_with_arities(cols, ar)?;
        m.dv = self.dv;
        Ok(m)
    }

    /// Vertical join; arities take the maximum of both.
    pub fn vstack(&self, other: &DataMatrix) -> Result<Self> {
        if other.cols != self.cols {
            return invalid("column counts differ");
        }
        let cols = (0..self.cols)
            .map(|j| {
                let mut c = self.column(j).to_vec();
                c.extend_from_slice(other.column(j));
                c
            })
            .collect();
        let ar = self.arities.iter().zip(&other.arities).map(|(a, b)| *a.max(b)).collect();
        let mut m = Self::from_columns_with_arities(cols, ar)?;
        m.ids = self.ids.clone();
        if let Some(d) = self.dv {
            m.set_dv(Some(d))?;
        }
        Ok(m)
    }

    /// TSV text with an optional header row of column ids.
    pub fn to_tsv(&self, header: bool) -> String {
        let mut s = String::with_capacity(self.rows * self.cols * 2 + 16);
        if header {
            s.push_str(&self.ids.join("\t"));
            s.push('\n');
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    s.push('\t');
                }
                let _ = write!(s, "{}", self.get(r, c));
            }
            s.push('\n');
        }
        s
    }
}

/// Parses a TSV matrix; a first row with any non-integer cell is a header.
pub fn parse_tsv(text: &str, dv: Option<&str>) -> Result<DataMatrix> {
    let mut lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        return invalid("empty input");
    }
    let mut header: Option<Vec<String>> = None;
    let first: Vec<&str> = lines[0].split('\t').collect();
    if first.iter().any(|c| c.trim().parse::<i64>().is_err()) {
        header = Some(first.iter().map(|c| c.trim().to_string()).collect());
        lines.remove(0);
    }
    let mut rows: Vec<Vec<u8>> = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let mut row = Vec::new();
        for cell in line.split('\t') {
            let cell = cell.trim();
            let v: i64 = cell
                .parse()
                .map_err(|_| Error::Invalid(format!("row {}: malformed cell {cell:?}", i + 1)))?;
            if !(0..=255).contains(&v) {
                return invalid(format!("row {}: marker code {v} outside 0..=255", i + 1));
            }
            row.push(v as u8);
        }
        if let Some(prev) = rows.first() {
            if prev.len() != row.len() {
                return invalid(format!("row {} has {} cells, expected {}", i + 1, row.len(), prev.len()));
            }
        }
        rows.push(row);
    }
    let mut m = DataMatrix::from_rows(&rows)?;
    if let Some(h) = header {
        if h.len() != m.cols() {
            return invalid("header width differs from data width");
        }
        m.set_ids(h)?;
    }
    if let Some(d) = dv {
        let j = resolve_column(&m, d)?;
        m.set_dv(Some(j))?;
    }
    Ok(m)
}

/// Resolves a column name, falling back to a numeric index.
pub fn resolve_column(m: &DataMatrix, name: &str) -> Result<usize> {
    if let Some(j) = m.ids().iter().position(|id| id == name) {
        return Ok(j);
    }
    match name.parse::<usize>() {
        Ok(j) if j < m.cols() => Ok(j),
        _ => invalid(format!("unknown column {name:?}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Binary,
    /// Genotype-like codes 0,1,2 with frequencies p², 2pq, q².
    TrinaryHw,
}

/// Minor-marker frequencies in tenths, cycling over columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyScheme {
    digits: Vec<u8>,
    arity: Arity,
}

impl FrequencyScheme {
    pub fn new(digits: Vec<u8>, arity: Arity) -> Result<Self> {
        if digits.is_empty() {
            return invalid("frequency scheme needs at least one digit");
        }
        if let Some(d) = digits.iter().find(|&&d| !(1..=5).contains(&d)) {
            return invalid(format!("scheme digit {d} outside 1..=5"));
        }
        Ok(FrequencyScheme { digits, arity })
    }

    /// Accepts `o12345`, `12345` or `1,2,3,4,5`.
    pub fn parse(text: &str, arity: Arity) -> Result<Self> {
        let t = text.trim().trim_start_matches(['o', 'O']);
        let digits: Vec<u8> = t
            .chars()
            .filter(|c| !matches!(c, ',' | ' '))
            .map(|c| c.to_digit(10).map(|d| d as u8).ok_or(c))
            .collect::<core::result::Result<_, _>>()
            .map_err(|c| Error::Invalid(format!("bad scheme character {c:?}")))?;
        Self::new(digits, arity)
    }

    pub fn uniform(digit: u8, arity: Arity) -> Result<Self> {
        Self::new(vec![digit], arity)
    }

    pub fn o12345(arity: Arity) -> Self {
        FrequencyScheme { digits: vec![1, 2, 3, 4, 5], arity }
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }
    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn n_markers(&self) -> usize {
        match self.arity {
            Arity::Binary => 2,
            Arity::TrinaryHw => 3,
        }
    }

    /// Marker frequencies of column `j`; marker 0 carries frequency p.
    pub fn freqs(&self, j: usize) -> Vec<f64> {
        let p = self.digits[j % self.digits.len()] as f64 / 10.0;
        let q = 1.0 - p;
        match self.arity {
            Arity::Binary => vec![p, q],
            Arity::TrinaryHw => vec![p * p, 2.0 * p * q, q * q],
        }
    }
}

impl core::fmt::Display for FrequencyScheme {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("o")?;
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Multinomial counts by sequential conditional binomials.
pub fn multinomial_counts(n: u64, probs: &[f64], rng: &RngStream) -> Result<Vec<u64>> {
    multinomial_with(n, probs, &mut rng.rng())
}

pub fn multinomial_with<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    if probs.iter().any(|&p| p < 0.0 || p.is_nan()) {
        return invalid("negative probability");
    }
    let total: f64 = probs.iter().sum();
    if fabs(total - 1.0) > 1e-9 {
        return invalid(format!("probabilities sum to {total}, not 1"));
    }
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0f64;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() || mass <= p {
            out[k] = left;
            left = 0;
            break;
        }
        let ratio = (p / mass).clamp(0.0, 1.0);
        let x = if ratio <= 0.0 {
            0
        } else if ratio >= 1.0 {
            left
        } else {
            Binomial::new(left, ratio).expect("valid binomial").sample(rng)
        };
        out[k] = x;
        left -= x;
        mass -= p;
    }
    if left > 0 {
        // Remaining mass fell to rounding; give it to the last positive category.
        let k = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        out[k] += left;
    }
    Ok(out)
}

/// Per-marker counts as close as possible to `rows × freq`: floors first, the
/// remaining slots assigned multinomially by renormalized fractional parts.
pub fn target_counts<R: Rng + ?Sized>(rows: usize, freqs: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let mut counts = Vec::with_capacity(freqs.len());
    let mut fracs = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let x = rows as f64 * f;
        let x = if fabs(x - round(x)) < 1e-9 { round(x) } else { x };
        let fl = floor(x);
        counts.push(fl as usize);
        fracs.push(x - fl);
    }
    let placed: usize = counts.iter().sum();
    if placed > rows {
        return invalid("frequencies sum above 1");
    }
    let residual = rows - placed;
    if residual > 0 {
        let s: f64 = fracs.iter().sum();
        let probs: Vec<f64> = if s > 0.0 {
            fracs.iter().map(|f| f / s).collect()
        } else {
            freqs.to_vec()
        };
        let extra = multinomial_with(residual as u64, &probs, rng)?;
        for (c, e) in counts.iter_mut().zip(extra) {
            *c += e as usize;
        }
    }
    Ok(counts)
}

/// One column with near-exact marker counts in random vertical order.
pub fn generate_column<R: Rng + ?Sized>(rows: usize, freqs: &[f64], rng: &mut R) -> Result<Vec<u8>> {
    let counts = target_counts(rows, freqs, rng)?;
    let mut col = Vec::with_capacity(rows);
    for (code, &c) in counts.iter().enumerate() {
        col.extend(core::iter::repeat_n(code as u8, c));
    }
    shuffle(&mut col, rng);
    Ok(col)
}

/// Null matrix whose column `j` follows `scheme.freqs(j)`; columns are independent.
pub fn generate_null_dm(rows: usize, cols: usize, scheme: &FrequencyScheme, rng: &RngStream) -> Result<DataMatrix> {
    generate_null_dm_offset(rows, cols, scheme, 0, rng)
}

/// As `generate_null_dm`, with the scheme cycle starting at position `offset`.
pub fn generate_null_dm_offset(
    rows: usize,
    cols: usize,
    scheme: &FrequencyScheme,
    offset: usize,
    rng: &RngStream,
) -> Result<DataMatrix> {
    if rows < 2 {
        return invalid("rows must be at least 2");
    }
    if cols == 0 {
        return invalid("cols must be at least 1");
    }
    let n = scheme.n_markers() as u8;
    let mut columns = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut r = rng.child(j as u64).rng();
        columns.push(generate_column(rows, &scheme.freqs(j + offset), &mut r)?);
    }
    DataMatrix::from_columns_with_arities(columns, vec![n; cols])
}
