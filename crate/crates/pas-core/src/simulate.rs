//! Model matrices, structured null matrices and block sampling.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::matrix::{generate_column, generate_null_dm, multinomial_counts, Arity, DataMatrix, FrequencyScheme};
use crate::numeric::round;
use crate::rng::{shuffle, RngStream};
use crate::theory::{column_pvalue_in, fig3_until, OverallTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Columns,
    DvMarginal,
    DvNoMarginal,
    PureNway,
    PureDv,
    Extended2way,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Columns => "columns",
            ModelKind::DvMarginal => "dv-marginal",
            ModelKind::DvNoMarginal => "dv-nomarginal",
            ModelKind::PureNway => "pure-nway",
            ModelKind::PureDv => "pure-dv",
            ModelKind::Extended2way => "extended-2way",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "columns" => ModelKind::Columns,
            "dv-marginal" => ModelKind::DvMarginal,
            "dv-nomarginal" => ModelKind::DvNoMarginal,
            "pure-nway" => ModelKind::PureNway,
            "pure-dv" => ModelKind::PureDv,
            "extended-2way" => ModelKind::Extended2way,
            _ => return invalid(format!("unknown model kind {s:?}")),
        })
    }
}

/// A small model matrix with how it was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDM {
    pub matrix: DataMatrix,
    pub kind: ModelKind,
    /// Retention cutoff, for encountered models.
    pub cutoff: Option<f64>,
    /// P values at retention: DV first for DV kinds, then one per tested column.
    pub pvalues: Vec<f64>,
    pub scheme: Option<FrequencyScheme>,
}

fn parity_rows(n: usize, even: bool) -> Vec<Vec<u8>> {
    (0..1usize << n)
        .filter(|x| (x.count_ones() % 2 == 0) == even)
        .map(|x| (0..n).map(|k| ((x >> (n - 1 - k)) & 1) as u8).collect())
        .collect()
}

fn repeat_rows(rows: &[Vec<u8>], copies: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::with_capacity(rows.len() * copies);
    for _ in 0..copies {
        out.extend(rows.iter().cloned());
    }
    out
}

fn with_dv_first(dv: Vec<u8>, ivs: &DataMatrix) -> Result<DataMatrix> {
    let d = DataMatrix::from_columns_with_arities(vec![dv], vec![2])?;
    let mut m = d.hstack(ivs)?;
    m.set_dv(Some(0))?;
    Ok(m)
}

fn binary_rows(rows: &[Vec<u8>]) -> Result<DataMatrix> {
    let n = rows[0].len();
    let cols = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    DataMatrix::from_columns_with_arities(cols, vec![2; n])
}

/// Every even-parity n-bit row, `copies` times each.
pub fn pure_nway(n: usize, copies: usize) -> Result<ModelDM> {
    if !(2..=16).contains(&n) || copies == 0 {
        return invalid("pure n-way models need 2 ≤ n ≤ 16 and at least one copy");
    }
    let rows = repeat_rows(&parity_rows(n, true), copies);
    Ok(ModelDM { matrix: binary_rows(&rows)?, kind: ModelKind::PureNway, cutoff: None, pvalues: Vec::new(), scheme: None })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PureDvMode {
    VsRandoms,
    VsControls,
}

/// Affecteds (DV 0) carry the even-parity set; controls (DV 1) carry either the
/// odd-parity complement or random columns of frequency 0.5.
pub fn pure_dv_model(n: usize, mode: PureDvMode, copies: usize, rng: &RngStream) -> Result<ModelDM> {
    if !(2..=16).contains(&n) || copies == 0 {
        return invalid("pure DV models need 2 ≤ n ≤ 16 and at least one copy");
    }
    let aff = repeat_rows(&parity_rows(n, true), copies);
    let half = aff.len();
    let ctl = match mode {
        PureDvMode::VsControls => repeat_rows(&parity_rows(n, false), copies),
        PureDvMode::VsRandoms => {
            let cols: Vec<Vec<u8>> = (0..n)
                .map(|j| generate_column(half, &[0.5, 0.5], &mut rng.child(j as u64).rng()))
                .collect::<Result<_>>()?;
            (0..half).map(|r| cols.iter().map(|c| c[r]).collect()).collect()
        }
    };
    let mut rows = aff;
    rows.extend(ctl);
    let mut dv = vec![0u8; half];
    dv.extend(vec![1u8; half]);
    let m = with_dv_first(dv, &binary_rows(&rows)?)?;
    Ok(ModelDM { matrix: m, kind: ModelKind::PureDv, cutoff: None, pvalues: Vec::new(), scheme: None })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    In,
    Off,
}

/// Affecteds get extra copies of the all-k runs over the IVs (in phase) or over
/// each consecutive IV pair independently (off phase) on top of a balanced
/// background; controls are per-column shuffles of the affecteds, so every IV has
/// identical marker counts in both DV categories.
pub fn extended_2way(n_ivs: usize, phase: Phase, boost: f64, arity: Arity, base_rows: usize, rng: &RngStream) -> Result<ModelDM> {
    if n_ivs < 2 {
        return invalid("need at least two IVs");
    }
    if !(0.0..1.0).contains(&boost) {
        return invalid("boost must lie in [0, 1)");
    }
    if phase == Phase::Off && n_ivs % 2 == 1 {
        return invalid("off-phase models need an even number of IVs");
    }
    if base_rows == 0 {
        return invalid("base_rows must be positive");
    }
    let s = match arity {
        Arity::Binary => 2usize,
        Arity::TrinaryHw => 3,
    };
    let mut cols: Vec<Vec<u8>> = vec![Vec::new(); n_ivs];
    let combos = (s as u128).checked_pow(n_ivs as u32).unwrap_or(u128::MAX);
    if combos <= base_rows as u128 {
        let combos = combos as usize;
        for i in 0..base_rows {
            let mut x = i % combos;
            for j in (0..n_ivs).rev() {
                cols[j].push((x % s) as u8);
                x /= s;
            }
        }
    } else {
        let uniform = vec![1.0 / s as f64; s];
        for (j, c) in cols.iter_mut().enumerate() {
            *c = generate_column(base_rows, &uniform, &mut rng.named("background").child(j as u64).rng())?;
        }
    }
    let per_run = round(boost * base_rows as f64 / s as f64) as usize;
    let runs: Vec<u8> = (0..s as u8).flat_map(|k| core::iter::repeat_n(k, per_run)).collect();
    match phase {
        Phase::In => {
            for c in cols.iter_mut() {
                c.extend_from_slice(&runs);
            }
        }
        Phase::Off => {
            for p in 0..n_ivs / 2 {
                let mut r = runs.clone();
                shuffle(&mut r, &mut rng.named("pairs").child(p as u64).rng());
                cols[2 * p].extend_from_slice(&r);
                cols[2 * p + 1].extend_from_slice(&r);
            }
        }
    }
    let half = cols[0].len();
    for (j, c) in cols.iter_mut().enumerate() {
        let mut ctl = c.clone();
        shuffle(&mut ctl, &mut rng.named("controls").child(j as u64).rng());
        c.extend(ctl);
    }
    let ivs = DataMatrix::from_columns_with_arities(cols, vec![s as u8; n_ivs])?;
    let mut dv = vec![0u8; half];
    dv.extend(vec![1u8; half]);
    Ok(ModelDM { matrix: with_dv_first(dv, &ivs)?, kind: ModelKind::Extended2way, cutoff: None, pvalues: Vec::new(), scheme: None })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncounterKind {
    Columns,
    DvMarginal,
    DvNoMarginal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncounterConfig {
    pub rows: usize,
    pub cols: usize,
    pub scheme: FrequencyScheme,
    pub cutoff: f64,
    pub kind: EncounterKind,
    pub perms: usize,
    pub max_attempts: usize,
}

fn candidate(cfg: &EncounterConfig, s: &RngStream) -> Result<DataMatrix> {
    match cfg.kind {
        EncounterKind::Columns => generate_null_dm(cfg.rows, cfg.cols, &cfg.scheme, s),
        EncounterKind::DvMarginal => {
            let ivs = generate_null_dm(cfg.rows, cfg.cols, &cfg.scheme, s)?;
            let mut dv = vec![0u8; cfg.rows / 2];
            dv.extend(vec![1u8; cfg.rows / 2]);
            with_dv_first(dv, &ivs)
        }
        EncounterKind::DvNoMarginal => {
            let first = generate_null_dm(cfg.rows / 2, cfg.cols, &cfg.scheme, s)?;
            let second: Vec<Vec<u8>> = (0..cfg.cols)
                .map(|j| {
                    let mut c = first.column(j).to_vec();
                    shuffle(&mut c, &mut s.named("second").child(j as u64).rng());
                    c
                })
                .collect();
            let second = DataMatrix::from_columns_with_arities(second, first.arities().to_vec())?;
            let mut dv = vec![0u8; cfg.rows / 2];
            dv.extend(vec![1u8; cfg.rows / 2]);
            with_dv_first(dv, &first.vstack(&second)?)
        }
    }
}

/// Draws candidate matrices until every tested P value is at most the cutoff.
///
/// Plain models test each column as the permuted column of the overall χ². DV
/// models test the DV and then every IV with nested permutations.
pub fn encounter_model(cfg: &EncounterConfig, rng: &RngStream) -> Result<ModelDM> {
    if !(cfg.cutoff > 0.0 && cfg.cutoff <= 1.0) {
        return invalid("cutoff must lie in (0, 1]");
    }
    if cfg.rows < 4 || cfg.cols == 0 || cfg.perms == 0 {
        return invalid("need rows ≥ 4, cols ≥ 1 and perms ≥ 1");
    }
    if cfg.kind != EncounterKind::Columns && cfg.rows % 2 == 1 {
        return invalid("DV models need an even number of rows");
    }
    for attempt in 0..cfg.max_attempts {
        let s = rng.child(attempt as u64);
        let dm = candidate(cfg, &s.named("dm"))?;
        let test = s.named("test");
        let (pvalues, ok) = match cfg.kind {
            EncounterKind::Columns => {
                let t = OverallTable::new(&dm)?;
                let mut ps = Vec::with_capacity(dm.cols());
                let mut ok = true;
                for c in 0..dm.cols() {
                    let p = column_pvalue_in(&t, &dm, c, cfg.perms, &test);
                    ps.push(p);
                    if p > cfg.cutoff {
                        ok = false;
                        break;
                    }
                }
                (ps, ok)
            }
            _ => {
                let r = fig3_until(&dm, 0, cfg.perms, cfg.perms, cfg.perms, &test, cfg.cutoff)?;
                let mut ps = vec![r.dv_p];
                ps.extend(r.iv_p.iter().map(|&(_, p)| p));
                let ok = ps.len() == dm.cols() && ps.iter().all(|&p| p <= cfg.cutoff);
                (ps, ok)
            }
        };
        if ok {
            let kind = match cfg.kind {
                EncounterKind::Columns => ModelKind::Columns,
                EncounterKind::DvMarginal => ModelKind::DvMarginal,
                EncounterKind::DvNoMarginal => ModelKind::DvNoMarginal,
            };
            return Ok(ModelDM { matrix: dm, kind, cutoff: Some(cfg.cutoff), pvalues, scheme: Some(cfg.scheme.clone()) });
        }
    }
    Err(Error::Exhausted(format!("no model retained after {} attempts", cfg.max_attempts)))
}

fn expand_rows(rows: &[Vec<u8>], target: usize, rng: &RngStream) -> Result<Vec<Vec<u8>>> {
    let mut types: BTreeMap<&[u8], usize> = BTreeMap::new();
    for r in rows {
        *types.entry(r.as_slice()).or_default() += 1;
    }
    let total = rows.len() as f64;
    let probs: Vec<f64> = types.values().map(|&c| c as f64 / total).collect();
    let counts = multinomial_counts(target as u64, &probs, rng)?;
    let mut out = Vec::with_capacity(target);
    for ((row, _), &k) in types.iter().zip(&counts) {
        for _ in 0..k {
            out.push(row.to_vec());
        }
    }
    Ok(out)
}

/// Multinomial resampling of the model's distinct rows up to `target_rows`.
/// With `per_category`, each DV category is expanded to `target_rows / 2` on its own.
pub fn expand_model(model: &DataMatrix, target_rows: usize, per_category: bool, rng: &RngStream) -> Result<DataMatrix> {
    if target_rows < 2 {
        return invalid("target_rows must be at least 2");
    }
    let rows: Vec<Vec<u8>> = (0..model.rows()).map(|r| model.row(r)).collect();
    let out = if per_category {
        let Some(dv) = model.dv() else {
            return invalid("per-category expansion needs a DV");
        };
        if target_rows % 2 == 1 {
            return invalid("per-category expansion needs an even target");
        }
        let mut out = Vec::with_capacity(target_rows);
        for (i, code) in model.distinct_codes(dv).into_iter().enumerate() {
            let part: Vec<Vec<u8>> = rows.iter().filter(|r| r[dv] == code).cloned().collect();
            out.extend(expand_rows(&part, target_rows / 2, &rng.child(i as u64))?);
        }
        out
    } else {
        expand_rows(&rows, target_rows, rng)?
    };
    let cols = (0..model.cols()).map(|j| out.iter().map(|r| r[j]).collect()).collect();
    let mut m = DataMatrix::from_columns_with_arities(cols, model.arities().to_vec())?;
    m.set_ids(model.ids().to_vec())?;
    if let Some(d) = model.dv() {
        m.set_dv(Some(d))?;
    }
    Ok(m)
}

/// Appends `n_random_cols` independent columns generated for all rows pooled.
pub fn embed(model: &DataMatrix, n_random_cols: usize, scheme: &FrequencyScheme, rng: &RngStream) -> Result<DataMatrix> {
    if n_random_cols == 0 {
        return Ok(model.clone());
    }
    model.hstack(&generate_null_dm(model.rows(), n_random_cols, scheme, rng)?)
}

/// Equal-length marker sequences for block sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSourceSet {
    pub sequences: Vec<Vec<u8>>,
    pub arity: usize,
    pub anchor_positions: Vec<usize>,
    pub linked_positions: Vec<usize>,
}

fn scaled(positions: &[usize], length: usize) -> Vec<usize> {
    let mut out: Vec<usize> = positions
        .iter()
        .map(|&p| (round(p as f64 * length as f64 / 100.0) as usize).min(length.saturating_sub(1)))
        .collect();
    out.dedup();
    out
}

/// Four anchor positions, scaled from a 100-marker layout.
pub fn default_anchors(length: usize) -> Vec<usize> {
    scaled(&[4, 34, 48, 65], length)
}

/// Five model-linked positions, scaled from a 100-marker layout.
pub fn default_linked(length: usize) -> Vec<usize> {
    scaled(&[0, 21, 49, 62, 87], length)
}

impl BlockSourceSet {
    pub fn new(sequences: Vec<Vec<u8>>, arity: usize) -> Result<Self> {
        let Some(first) = sequences.first() else {
            return invalid("source set is empty");
        };
        let len = first.len();
        if len == 0 {
            return invalid("source sequences are empty");
        }
        if arity < 2 {
            return invalid("source arity must be at least 2");
        }
        for (i, s) in sequences.iter().enumerate() {
            if s.len() != len {
                return invalid(format!("sequence {i} has length {}, expected {len}", s.len()));
            }
            if s.iter().any(|&x| x as usize >= arity) {
                return invalid(format!("sequence {i} holds a code ≥ {arity}"));
            }
        }
        Ok(BlockSourceSet { anchor_positions: default_anchors(len), linked_positions: default_linked(len), sequences, arity })
    }

    /// One sequence per line of contiguous digits; arity is 1 + the largest code, at least 2.
    pub fn parse(text: &str) -> Result<Self> {
        let mut seqs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let s: Vec<u8> = t
                .chars()
                .map(|c| c.to_digit(10).map(|d| d as u8))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Invalid(format!("line {}: non-digit character", i + 1)))?;
            seqs.push(s);
        }
        let arity = seqs.iter().flatten().copied().max().map_or(2, |m| (m as usize + 1).max(2));
        Self::new(seqs, arity)
    }

    pub fn length(&self) -> usize {
        self.sequences[0].len()
    }

    pub fn to_text(&self) -> alloc::string::String {
        let mut s = alloc::string::String::new();
        for q in &self.sequences {
            for &x in q {
                s.push((b'0' + x) as char);
            }
            s.push('\n');
        }
        s
    }
}

/// Per-row anchor targets for one block: row r of the block must carry
/// `targets[r]` at `anchors`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockGuide {
    pub block: usize,
    pub anchors: Vec<usize>,
    pub targets: Vec<Vec<u8>>,
}

/// Samples `rows` sequences per block with replacement, shuffles each unguided
/// block vertically on its own and joins the blocks laterally. Guided rows are
/// drawn uniformly among the sequences matching their anchor targets, which is the
/// exact law of rejection sampling. An optional DV is prepended unshuffled.
pub fn block_dm(
    source: &BlockSourceSet,
    n_blocks: usize,
    rows: usize,
    guides: &[BlockGuide],
    dv: Option<&[u8]>,
    rng: &RngStream,
) -> Result<DataMatrix> {
    if rows < 2 || n_blocks == 0 {
        return invalid("need rows ≥ 2 and at least one block");
    }
    let len = source.length();
    let n = source.sequences.len();
    let mut columns: Vec<Vec<u8>> = Vec::with_capacity(n_blocks * len);
    for b in 0..n_blocks {
        let mut g = rng.child(b as u64).rng();
        let picks: Vec<usize> = match guides.iter().find(|x| x.block == b) {
            Some(guide) => {
                if guide.targets.len() != rows {
                    return invalid("guide must give one target per row");
                }
                if guide.anchors.iter().any(|&a| a >= len) {
                    return invalid("guide anchor outside the source length");
                }
                let mut groups: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
                for (i, s) in source.sequences.iter().enumerate() {
                    groups.entry(guide.anchors.iter().map(|&a| s[a]).collect()).or_default().push(i);
                }
                guide
                    .targets
                    .iter()
                    .map(|t| {
                        let grp = groups
                            .get(t)
                            .ok_or_else(|| Error::Invalid(format!("anchor markers {t:?} absent from the source")))?;
                        Ok(grp[g.random_range(0..grp.len())])
                    })
                    .collect::<Result<_>>()?
            }
            None => {
                let mut p: Vec<usize> = (0..rows).map(|_| g.random_range(0..n)).collect();
                shuffle(&mut p, &mut g);
                p
            }
        };
        for pos in 0..len {
            columns.push(picks.iter().map(|&i| source.sequences[i][pos]).collect());
        }
    }
    let m = DataMatrix::from_columns_with_arities(columns, vec![source.arity as u8; n_blocks * len])?;
    match dv {
        Some(d) => {
            if d.len() != rows {
                return invalid("DV length differs from rows");
            }
            with_dv_first(d.to_vec(), &m)
        }
        None => Ok(m),
    }
}

/// Every unordered pair of distinct binary sequences, coded position-wise as the sum.
pub fn trinary_from_haplotypes(source: &BlockSourceSet) -> Result<BlockSourceSet> {
    if source.arity != 2 {
        return invalid("trinary pairing needs a binary source");
    }
    if source.sequences.len() < 2 {
        return invalid("need at least two sequences");
    }
    let s = &source.sequences;
    let mut out = Vec::with_capacity(s.len() * (s.len() - 1) / 2);
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            out.push(s[i].iter().zip(&s[j]).map(|(a, b)| a + b).collect());
        }
    }
    Ok(BlockSourceSet {
        sequences: out,
        arity: 3,
        anchor_positions: source.anchor_positions.clone(),
        linked_positions: source.linked_positions.clone(),
    })
}

/// Adds one sequence for every anchor-marker combination missing from the source:
/// a randomly chosen nearest sequence (Hamming distance at the anchors) is cloned
/// and its anchor markers set to the combination. Returns the number added.
pub fn complete_anchor_combinations(source: &mut BlockSourceSet, rng: &RngStream) -> Result<usize> {
    let anchors = source.anchor_positions.clone();
    let k = anchors.len();
    let total = source.arity.checked_pow(k as u32).filter(|&t| t <= 1 << 16).ok_or_else(|| Error::Guard("too many anchor combinations".into()))?;
    let mut g = rng.rng();
    let mut present: BTreeMap<Vec<u8>, ()> = BTreeMap::new();
    for s in &source.sequences {
        present.insert(anchors.iter().map(|&a| s[a]).collect(), ());
    }
    let mut added = 0;
    for idx in 0..total {
        let mut x = idx;
        let mut combo = vec![0u8; k];
        for c in combo.iter_mut().rev() {
            *c = (x % source.arity) as u8;
            x /= source.arity;
        }
        if present.contains_key(&combo) {
            continue;
        }
        let dist = |s: &Vec<u8>| anchors.iter().zip(&combo).filter(|&(&a, &c)| s[a] != c).count();
        let best = source.sequences.iter().map(dist).min().unwrap_or(0);
        let near: Vec<usize> = (0..source.sequences.len()).filter(|&i| dist(&source.sequences[i]) == best).collect();
        let mut clone = source.sequences[near[g.random_range(0..near.len())]].clone();
        for (&a, &c) in anchors.iter().zip(&combo) {
            clone[a] = c;
        }
        source.sequences.push(clone);
        present.insert(combo, ());
        added += 1;
    }
    Ok(added)
}

/// Binary sequences where each position copies its left neighbour with probability
/// `block_correlation` and is otherwise drawn afresh with a position-specific
/// frequency in [0.1, 0.5]. With `anchor_diversity`, anchors are drawn afresh at 0.5
/// and the set is redrawn until all marker combinations occur at the anchor positions.
pub fn synthetic_source(
    n_sequences: usize,
    length: usize,
    block_correlation: f64,
    anchor_diversity: bool,
    rng: &RngStream,
) -> Result<BlockSourceSet> {
    if !(0.0..=1.0).contains(&block_correlation) {
        return invalid("block_correlation must lie in [0, 1]");
    }
    if n_sequences < 2 || length == 0 {
        return invalid("need at least two sequences of positive length");
    }
    const ATTEMPTS: usize = 64;
    for attempt in 0..ATTEMPTS {
        let mut g = rng.child(attempt as u64).rng();
        let anchors = default_anchors(length);
        let freqs: Vec<f64> = (0..length)
            .map(|j| {
                let f = g.random_range(0.1..=0.5);
                if anchor_diversity && anchors.contains(&j) { 0.5 } else { f }
            })
            .collect();
        let seqs: Vec<Vec<u8>> = (0..n_sequences)
            .map(|_| {
                let mut s = Vec::with_capacity(length);
                for (j, &f) in freqs.iter().enumerate() {
                    let fresh = anchor_diversity && anchors.contains(&j);
                    let x = if j > 0 && !fresh && g.random_bool(block_correlation) {
                        s[j - 1]
                    } else {
                        (!g.random_bool(f)) as u8
                    };
                    s.push(x);
                }
                s
            })
            .collect();
        let src = BlockSourceSet::new(seqs, 2)?;
        if !anchor_diversity {
            return Ok(src);
        }
        let a = &src.anchor_positions;
        let mut seen = vec![false; 1 << a.len()];
        for s in &src.sequences {
            seen[a.iter().fold(0usize, |acc, &p| acc * 2 + s[p] as usize)] = true;
        }
        if seen.iter().all(|&x| x) {
            return Ok(src);
        }
    }
    Err(Error::Exhausted(format!("anchor combinations incomplete after {ATTEMPTS} draws")))
}
