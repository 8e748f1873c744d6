//! Fast permutation scans.
//!
//! Permuting the focal column leaves every pair's non-focal match count unchanged,
//! so each replicate only re-reads the focal states: O(W) per replicate. Likewise a
//! DV permutation leaves `total − DV match` unchanged for every IV.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dvscores::{dv_chix, dv_lkx, dv_mom};
use crate::error::{invalid, Result};
use crate::exec::Runner;
use crate::inference::{perm_stream, permutation_estimate, permuted_column, Aggregation, PValueEstimate, Tail};
use crate::matrix::DataMatrix;
use crate::pairwise::{
    focal_kernel, hybrid_codes, hybrid_kernel, n_states, state_lut, state_map, ConditionalSets, HybridMode, HybridSets,
    PairwiseSummary, SetMode,
};
use crate::rng::RngStream;
use crate::scores::{chix, ks, lkx, mom, Conditioning, MomentKind, NullCdfs};
use crate::spec::{LkKind, ScoreSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub n_perms: usize,
    pub tail: Tail,
    pub kind: MomentKind,
    /// Replicates of the separate stream that estimates KS null c.d.f.s.
    pub ks_null_perms: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { n_perms: 100, tail: Tail::Upper, kind: MomentKind::Central, ks_null_perms: 100 }
    }
}

impl ScanConfig {
    pub fn with_perms(n_perms: usize) -> Self {
        ScanConfig { n_perms, ks_null_perms: n_perms, ..Default::default() }
    }
}

fn lk_value(kind: LkKind, b: crate::scores::LkxBundle) -> f64 {
    match kind {
        LkKind::Lkx => -b.log_lkx,
        LkKind::Lkm => -b.log_lkm,
        LkKind::MaxLkm => b.log_maxlkm,
    }
}

fn ks_mode(c: Conditioning) -> SetMode {
    match c {
        Conditioning::M => SetMode::Generic,
        Conditioning::I => SetMode::PerMarker,
    }
}

/// Null c.d.f.s for each KS mode from pooled full-pair joint counts.
fn null_for(pooled: &[f64], arity: usize, m_len: usize, c: Conditioning) -> NullCdfs {
    let to = ks_mode(c);
    let map = state_map(arity, SetMode::FullPair, to);
    let mut out = vec![0.0; n_states(arity, to) * m_len];
    for (s, &t) in map.iter().enumerate() {
        for m in 0..m_len {
            out[t * m_len + m] += pooled[s * m_len + m];
        }
    }
    NullCdfs::from_pooled(&out, n_states(arity, to), m_len)
}

/// Raw per-cell values of a focal-column score on full-pair sets.
pub fn focal_cells(spec: &ScoreSpec, sets: &ConditionalSets, kind: MomentKind, nulls: &[Option<NullCdfs>; 2]) -> Result<Vec<Option<f64>>> {
    Ok(match spec {
        ScoreSpec::Mom { n, cond } => {
            let c = if matches!(cond, crate::spec::MomCond::M) { Conditioning::M } else { Conditioning::I };
            mom(sets, *n, c, kind)?.values
        }
        ScoreSpec::Chix(mode) => vec![Some(chix(sets, *mode)?)],
        ScoreSpec::Lk(k) => vec![Some(lk_value(*k, lkx(sets)))],
        ScoreSpec::Ks(c) => {
            let null = nulls[(*c == Conditioning::I) as usize].as_ref().expect("null prepared");
            vec![Some(ks(&sets.collapse(ks_mode(*c))?, null)?)]
        }
        _ => return invalid(format!("{spec} is a dv score")),
    })
}

/// Raw per-cell values of a dv score on full-pair hybrid sets.
pub fn dv_cells(spec: &ScoreSpec, h: &HybridSets, kind: MomentKind, nulls: &[Option<NullCdfs>; 2]) -> Result<Vec<Option<f64>>> {
    Ok(match spec {
        ScoreSpec::DvMom { n, cond } => dv_mom(h, *n, ScoreSpec::dv_conditioning(*cond), kind)?,
        ScoreSpec::DvChix(mode) => vec![Some(dv_chix(h, *mode)?)],
        ScoreSpec::DvLk(k) => vec![Some(lk_value(*k, dv_lkx(h)))],
        ScoreSpec::DvKs(c) => {
            let null = nulls[(*c == Conditioning::I) as usize].as_ref().expect("null prepared");
            vec![Some(ks(&h.e_sets(ks_mode(*c))?, null)?)]
        }
        _ => return invalid(format!("{spec} is not a dv score")),
    })
}

fn agg(spec: &ScoreSpec) -> Aggregation {
    if spec.z_sum() {
        Aggregation::ZSum
    } else {
        Aggregation::Sum
    }
}

fn ks_conditionings(specs: &[ScoreSpec]) -> [bool; 2] {
    let mut need = [false; 2];
    for s in specs {
        if let ScoreSpec::Ks(c) | ScoreSpec::DvKs(c) = s {
            need[(*c == Conditioning::I) as usize] = true;
        }
    }
    need
}

/// Permutation P values of every focal score in `specs` for column `focal`.
pub fn scan_column(
    dm: &DataMatrix,
    summary: &PairwiseSummary,
    focal: usize,
    specs: &[ScoreSpec],
    cfg: &ScanConfig,
    rng: &RngStream,
) -> Result<Vec<PValueEstimate>> {
    if focal >= dm.cols() {
        return invalid(format!("column {focal} out of range"));
    }
    if let Some(s) = specs.iter().find(|s| s.is_dv()) {
        return invalid(format!("{s} needs a DV scan"));
    }
    if cfg.n_perms == 0 {
        return invalid("n_perms must be at least 1");
    }
    let col = dm.column(focal);
    let arity = dm.arity(focal);
    let m_len = dm.cols();
    let nf = summary.non_focal(col);
    let lut = state_lut(arity, SetMode::FullPair);
    let ns = n_states(arity, SetMode::FullPair);
    let build = |c: &[u8]| {
        let mut joint = vec![0u64; ns * m_len];
        focal_kernel(c, arity, &lut, &nf, m_len, &mut joint);
        ConditionalSets::from_joint(focal, SetMode::FullPair, arity, m_len, joint)
    };

    let need = ks_conditionings(specs);
    let mut nulls: [Option<NullCdfs>; 2] = [None, None];
    if need[0] || need[1] {
        let mut pooled = vec![0.0f64; ns * m_len];
        let ks_rng = rng.named("ks-null");
        for k in 0..cfg.ks_null_perms.max(1) {
            let s = build(&permuted_column(col, &perm_stream(&ks_rng, focal, k)));
            for (p, &x) in pooled.iter_mut().zip(&s.joint) {
                *p += x as f64;
            }
        }
        for (c, cond) in [Conditioning::M, Conditioning::I].into_iter().enumerate() {
            if need[c] {
                nulls[c] = Some(null_for(&pooled, arity, m_len, cond));
            }
        }
    }

    let observed_sets = build(col);
    let observed: Vec<Vec<Option<f64>>> =
        specs.iter().map(|s| focal_cells(s, &observed_sets, cfg.kind, &nulls)).collect::<Result<_>>()?;
    let mut reps: Vec<Vec<Vec<Option<f64>>>> = vec![Vec::with_capacity(cfg.n_perms); specs.len()];
    for k in 0..cfg.n_perms {
        let sets = build(&permuted_column(col, &perm_stream(rng, focal, k)));
        for (i, s) in specs.iter().enumerate() {
            reps[i].push(focal_cells(s, &sets, cfg.kind, &nulls)?);
        }
    }
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, s)| permutation_estimate(&observed[i], &reps[i], agg(s), cfg.tail))
        .collect())
}

/// Permutation P values of every dv score in `specs` for IV `iv` against DV `dv`.
#[allow(clippy::too_many_arguments)]
pub fn scan_iv(
    dm: &DataMatrix,
    summary: &PairwiseSummary,
    dv: usize,
    iv: usize,
    specs: &[ScoreSpec],
    cfg: &ScanConfig,
    rng: &RngStream,
) -> Result<Vec<PValueEstimate>> {
    if dv == iv || dv >= dm.cols() || iv >= dm.cols() {
        return invalid("DV and IV must be distinct columns in range");
    }
    if dm.distinct_codes(dv).len() != 2 {
        return invalid("DV must have exactly two categories");
    }
    if let Some(s) = specs.iter().find(|s| !s.is_dv()) {
        return invalid(format!("{s} is not a dv score"));
    }
    if cfg.n_perms == 0 {
        return invalid("n_perms must be at least 1");
    }
    let dcol = dm.column(dv);
    let s_ar = dm.arity(dv);
    let e_ar = dm.arity(iv);
    let m_len = dm.cols() - 1;
    let nd = summary.non_focal(dcol);
    let codes = hybrid_codes(dm.column(iv), e_ar, SetMode::FullPair, &nd, m_len);
    let s_lut = state_lut(s_ar, SetMode::FullPair);
    let block = n_states(e_ar, SetMode::FullPair) * m_len;
    let ns = n_states(s_ar, SetMode::FullPair);
    let build = |d: &[u8]| {
        let mut joint = vec![0u64; ns * block];
        hybrid_kernel(d, s_ar, &s_lut, &codes, block, &mut joint);
        HybridSets { s_col: dv, e_col: iv, mode: HybridMode::FullPair, s_arity: s_ar, e_arity: e_ar, m_len, joint }
    };

    let need = ks_conditionings(specs);
    let mut nulls: [Option<NullCdfs>; 2] = [None, None];
    if need[0] || need[1] {
        let e_ns = n_states(e_ar, SetMode::FullPair);
        let mut pooled = vec![0.0f64; e_ns * (m_len + 1)];
        let ks_rng = rng.named("ks-null");
        for k in 0..cfg.ks_null_perms.max(1) {
            let h = build(&permuted_column(dcol, &perm_stream(&ks_rng, dv, k)));
            let e = h.e_sets(SetMode::FullPair)?;
            for (p, &x) in pooled.iter_mut().zip(&e.joint) {
                *p += x as f64;
            }
        }
        for (c, cond) in [Conditioning::M, Conditioning::I].into_iter().enumerate() {
            if need[c] {
                nulls[c] = Some(null_for(&pooled, e_ar, m_len + 1, cond));
            }
        }
    }

    let obs_h = build(dcol);
    let observed: Vec<Vec<Option<f64>>> =
        specs.iter().map(|s| dv_cells(s, &obs_h, cfg.kind, &nulls)).collect::<Result<_>>()?;
    let mut reps: Vec<Vec<Vec<Option<f64>>>> = vec![Vec::with_capacity(cfg.n_perms); specs.len()];
    for k in 0..cfg.n_perms {
        let h = build(&permuted_column(dcol, &perm_stream(rng, dv, k)));
        for (i, s) in specs.iter().enumerate() {
            reps[i].push(dv_cells(s, &h, cfg.kind, &nulls)?);
        }
    }
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, s)| permutation_estimate(&observed[i], &reps[i], agg(s), cfg.tail))
        .collect())
}

/// `scan_column` over several columns; results follow `cols` order.
pub fn scan_columns<R: Runner>(
    runner: &R,
    dm: &DataMatrix,
    summary: &PairwiseSummary,
    cols: &[usize],
    specs: &[ScoreSpec],
    cfg: &ScanConfig,
    rng: &RngStream,
) -> Result<Vec<Vec<PValueEstimate>>> {
    runner.map(cols.len(), |i| scan_column(dm, summary, cols[i], specs, cfg, rng)).into_iter().collect()
}

/// `scan_iv` over several IVs sharing the same DV permutations.
#[allow(clippy::too_many_arguments)]
pub fn scan_ivs<R: Runner>(
    runner: &R,
    dm: &DataMatrix,
    summary: &PairwiseSummary,
    dv: usize,
    ivs: &[usize],
    specs: &[ScoreSpec],
    cfg: &ScanConfig,
    rng: &RngStream,
) -> Result<Vec<Vec<PValueEstimate>>> {
    runner.map(ivs.len(), |i| scan_iv(dm, summary, dv, ivs[i], specs, cfg, rng)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::permute_pvalue;
    use crate::matrix::{generate_null_dm, Arity, FrequencyScheme};
    use crate::pairwise::{conditional_sets, hybrid_sets};

    fn null_dm(seed: u64, rows: usize, cols: usize) -> DataMatrix {
        let s = FrequencyScheme::o12345(Arity::TrinaryHw);
        let mut dm = generate_null_dm(rows, cols, &s, &RngStream::new(seed)).unwrap();
        let dv: Vec<u8> = (0..rows).map(|r| (r % 2) as u8).collect();
        dm.replace_column(0, &dv).unwrap();
        dm.set_dv(Some(0)).unwrap();
        dm
    }

    #[test]
    fn fast_scan_matches_generic_permutation() {
        let dm = null_dm(11, 30, 8);
        let summary = PairwiseSummary::new(&dm);
        let cfg = ScanConfig::with_perms(25);
        let rng = RngStream::new(5);
        let specs = [ScoreSpec::parse("mom1iz").unwrap(), ScoreSpec::parse("chix-ij").unwrap(), ScoreSpec::parse("lkx").unwrap()];
        let fast = scan_column(&dm, &summary, 3, &specs, &cfg, &rng).unwrap();
        for (i, spec) in specs.iter().enumerate() {
            let slow = permute_pvalue(&dm, 3, 25, Tail::Upper, agg(spec), &rng, |m| {
                let s = PairwiseSummary::new(m);
                let cs = conditional_sets(m, &s, 3, SetMode::FullPair)?;
                focal_cells(spec, &cs, MomentKind::Central, &[None, None])
            })
            .unwrap();
            assert_eq!(fast[i].p, slow.p, "{spec}");
            assert!((fast[i].score - slow.score).abs() < 1e-9);
        }
    }

    #[test]
    fn fast_dv_scan_matches_generic_permutation() {
        let dm = null_dm(12, 30, 8);
        let summary = PairwiseSummary::new(&dm);
        let cfg = ScanConfig::with_perms(25);
        let rng = RngStream::new(6);
        let specs = [ScoreSpec::parse("dvmom1ik").unwrap(), ScoreSpec::parse("dvchix-ijkl").unwrap(), ScoreSpec::parse("dvmom2iz").unwrap()];
        let fast = scan_iv(&dm, &summary, 0, 4, &specs, &cfg, &rng).unwrap();
        for (i, spec) in specs.iter().enumerate() {
            let slow = permute_pvalue(&dm, 0, 25, Tail::Upper, agg(spec), &rng, |m| {
                let s = PairwiseSummary::new(m);
                let h = hybrid_sets(m, &s, 0, 4, HybridMode::FullPair)?;
                dv_cells(spec, &h, MomentKind::Central, &[None, None])
            })
            .unwrap();
            assert_eq!(fast[i].p, slow.p, "{spec}");
        }
    }

    #[test]
    fn ks_scores_run() {
        let dm = null_dm(13, 24, 6);
        let summary = PairwiseSummary::new(&dm);
        let cfg = ScanConfig::with_perms(20);
        let r = scan_column(&dm, &summary, 2, &[ScoreSpec::parse("ks-i").unwrap()], &cfg, &RngStream::new(1)).unwrap();
        assert!(r[0].p > 0.0 && r[0].p <= 1.0);
        let r = scan_iv(&dm, &summary, 0, 2, &[ScoreSpec::parse("dvks-m").unwrap()], &cfg, &RngStream::new(1)).unwrap();
        assert!(r[0].p > 0.0 && r[0].p <= 1.0);
    }
}
