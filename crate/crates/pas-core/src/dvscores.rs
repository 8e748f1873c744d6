//! Scores of an independent column E against a dependent variable S.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::pairwise::{state_map, ConditionalSets, HybridMode, HybridSets, SetMode};
use crate::scores::{self, chix_table, hist_moment, lk_table, Conditioning, LkxBundle, MomentKind, NullCdfs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DvConditioning {
    /// Mom^n-M of E with the DV folded into m.
    Plain,
    /// Per-marker moments of E with the DV folded into m.
    PlainI,
    /// Generic matches at both the DV and E.
    MM,
    /// One value per double match (i at the DV, k at E); mismatches ignored.
    Ik,
}

/// Per-cell dv moments; `None` marks an empty cell.
pub fn dv_mom(h: &HybridSets, n: u32, cond: DvConditioning, kind: MomentKind) -> Result<Vec<Option<f64>>> {
    if n == 0 {
        return invalid("moment order must be at least 1");
    }
    Ok(match cond {
        DvConditioning::Plain => {
            let e = h.e_sets(SetMode::Generic)?;
            scores::mom(&e, n, Conditioning::M, kind)?.values
        }
        DvConditioning::PlainI => {
            if h.mode == HybridMode::MM {
                return invalid("per-marker dv moments need full-pair hybrid sets");
            }
            let e = h.e_sets(SetMode::PerMarker)?;
            scores::mom(&e, n, Conditioning::I, kind)?.values
        }
        DvConditioning::MM => {
            let mm = h.collapse_mm();
            vec![hist_moment(&mm.joint[..mm.m_len], n, kind)]
        }
        DvConditioning::Ik => {
            if h.mode == HybridMode::MM {
                return invalid("ik conditioning needs full-pair hybrid sets");
            }
            let mut out = Vec::with_capacity(h.s_arity * h.e_arity);
            for i in 0..h.s_arity {
                for k in 0..h.e_arity {
                    let start = (i * h.n_e() + k) * h.m_len;
                    out.push(hist_moment(&h.joint[start..start + h.m_len], n, kind));
                }
            }
            out
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DvChixMode {
    MM,
    Ijkl,
}

/// χ² of DV states against the hybrid fragments {M_m..E_k}.
pub fn dv_chix(h: &HybridSets, mode: DvChixMode) -> Result<f64> {
    let t = match mode {
        DvChixMode::MM => h.collapse_mm(),
        DvChixMode::Ijkl => {
            if h.mode != HybridMode::FullPair {
                return invalid("dvCHIx-ijkl needs full-pair hybrid sets");
            }
            h.clone()
        }
    };
    Ok(chix_table(&t.joint, t.n_s(), t.block()))
}

/// LKx bundle of DV states against hybrid fragments.
pub fn dv_lkx(h: &HybridSets) -> LkxBundle {
    lk_table(&h.joint, h.n_s(), h.block())
}

/// KS score of E's sets against null c.d.f.s obtained by permuting the DV.
pub fn dv_ks(e_sets: &ConditionalSets, null: &NullCdfs) -> Result<f64> {
    scores::ks(e_sets, null)
}

/// DV-state margin of the hybrid sets in generic form: (match count, mismatch count).
pub fn dv_match_counts(h: &HybridSets) -> (u64, u64) {
    let map = state_map(h.s_arity, h.mode.set_mode(), SetMode::Generic);
    let s = h.s_counts();
    let mut out = (0, 0);
    for (k, &c) in s.iter().enumerate() {
        if map[k] == 0 {
            out.0 += c;
        } else {
            out.1 += c;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DataMatrix;
    use crate::pairwise::{hybrid_sets, PairwiseSummary};

    #[test]
    fn identical_rows() {
        let dm = DataMatrix::from_digit_rows(&["0101101", "0101101", "0101101"]).unwrap();
        let s = PairwiseSummary::new(&dm);
        let h = hybrid_sets(&dm, &s, 0, 1, HybridMode::FullPair).unwrap();
        let m1 = dv_mom(&h, 1, DvConditioning::MM, MomentKind::Central).unwrap();
        let m2 = dv_mom(&h, 2, DvConditioning::MM, MomentKind::Central).unwrap();
        assert_eq!(m1, vec![Some(5.0)]);
        assert_eq!(m2, vec![Some(0.0)]);
    }

    #[test]
    fn perfect_dv_association_fills_diagonal_cells() {
        // DV, IV identical; the IV's 0/0 and 1/1 double-match cells hold all double-match mass.
        let rows = ["00", "00", "11", "11", "01", "10"];
        let dm = DataMatrix::from_digit_rows(&rows[..4]).unwrap();
        let s = PairwiseSummary::new(&dm);
        let h = hybrid_sets(&dm, &s, 0, 1, HybridMode::FullPair).unwrap();
        let cells = dv_mom(&h, 1, DvConditioning::Ik, MomentKind::Central).unwrap();
        assert!(cells[0].is_some() && cells[3].is_some());
        assert!(cells[1].is_none() && cells[2].is_none());
    }

    #[test]
    fn single_dv_state_collapses_lkx() {
        let h = HybridSets {
            s_col: 0,
            e_col: 1,
            mode: HybridMode::MM,
            s_arity: 2,
            e_arity: 2,
            m_len: 2,
            joint: vec![3, 1, 2, 5, 0, 0, 0, 0],
        };
        assert!(dv_lkx(&h).log_lkx.abs() < 1e-12);
    }
}
