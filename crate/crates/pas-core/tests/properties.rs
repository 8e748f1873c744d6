use pas_core::inference::{fisher_combine, sidak_cutoff, Tail};
use pas_core::matrix::parse_tsv;
use pas_core::pairwise::{conditional_sets, hybrid_sets, HybridMode, SetMode};
use pas_core::scan::{scan_column, ScanConfig};
use pas_core::{DataMatrix, PairwiseSummary, RngStream, ScoreSpec};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = DataMatrix> {
    (3usize..14, 2usize..7, 2u8..4).prop_flat_map(|(r, l, s)| {
        proptest::collection::vec(proptest::collection::vec(0..s, r), l)
            .prop_map(|cols| DataMatrix::from_columns(cols).unwrap())
    })
}

fn matches_without(dm: &DataMatrix, skip: &[usize]) -> Vec<u16> {
    let mut out = Vec::new();
    for a in 0..dm.rows() {
        for b in a + 1..dm.rows() {
            out.push((0..dm.cols()).filter(|j| !skip.contains(j) && dm.get(a, *j) == dm.get(b, *j)).count() as u16);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn non_focal_counts_drop_the_focal_column(dm in matrix(), f in 0usize..7) {
        let f = f % dm.cols();
        let s = PairwiseSummary::new(&dm);
        prop_assert_eq!(s.non_focal(dm.column(f)), matches_without(&dm, &[f]));
        prop_assert_eq!(s.total().to_vec(), matches_without(&dm, &[]));
    }

    #[test]
    fn set_counts_cover_every_pair(dm in matrix(), f in 0usize..7) {
        let f = f % dm.cols();
        let s = PairwiseSummary::new(&dm);
        let w = (dm.rows() * (dm.rows() - 1) / 2) as u64;
        for mode in [SetMode::Generic, SetMode::PerMarker, SetMode::FullPair] {
            let sets = conditional_sets(&dm, &s, f, mode).unwrap();
            prop_assert_eq!(sets.total(), w);
            prop_assert_eq!(sets.s_counts().iter().sum::<u64>(), w);
            prop_assert_eq!(sets.m_counts().iter().sum::<u64>(), w);
        }
        let full = conditional_sets(&dm, &s, f, SetMode::FullPair).unwrap();
        for mode in [SetMode::Generic, SetMode::PerMarker] {
            prop_assert_eq!(full.collapse(mode).unwrap().joint, conditional_sets(&dm, &s, f, mode).unwrap().joint);
        }
    }

    #[test]
    fn hybrid_mm_collapse_matches_direct(dm in matrix()) {
        prop_assume!(dm.cols() >= 2);
        let s = PairwiseSummary::new(&dm);
        let full = hybrid_sets(&dm, &s, 0, 1, HybridMode::FullPair).unwrap();
        let mm = hybrid_sets(&dm, &s, 0, 1, HybridMode::MM).unwrap();
        prop_assert_eq!(full.collapse_mm().joint, mm.joint);
        prop_assert_eq!(full.total(), (dm.rows() * (dm.rows() - 1) / 2) as u64);
    }

    #[test]
    fn permutation_pvalues_lie_on_the_lattice(dm in matrix(), seed in any::<u64>(), n in 1usize..30) {
        let s = PairwiseSummary::new(&dm);
        let specs = [ScoreSpec::parse("mom1iz").unwrap(), ScoreSpec::parse("chix-m").unwrap()];
        let cfg = ScanConfig { n_perms: n, tail: Tail::Upper, ..ScanConfig::default() };
        for e in scan_column(&dm, &s, 0, &specs, &cfg, &RngStream::new(seed)).unwrap() {
            prop_assert!(e.p >= 1.0 / (n as f64 + 1.0) - 1e-15 && e.p <= 1.0);
            let k = e.p * (n as f64 + 1.0);
            prop_assert!((k - k.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn tsv_round_trip(dm in matrix()) {
        let back = parse_tsv(&dm.to_tsv(true), None).unwrap();
        prop_assert_eq!(back.columns(), dm.columns());
        prop_assert_eq!(back.ids(), dm.ids());
        let bare = parse_tsv(&dm.to_tsv(false), None).unwrap();
        prop_assert_eq!(bare.columns(), dm.columns());
    }

    #[test]
    fn sidak_is_below_alpha_and_monotone(a in 0.001f64..0.5, n in 1usize..1000) {
        let c = sidak_cutoff(a, n).unwrap();
        prop_assert!(c <= a + 1e-15 && c > 0.0);
        prop_assert!(sidak_cutoff(a * 1.5, n).unwrap() > c);
        prop_assert!(sidak_cutoff(a, n + 1).unwrap() < c);
    }

    #[test]
    fn fisher_of_one_pvalue_is_itself(p in 1e-6f64..1.0) {
        prop_assert!((fisher_combine(&[p]).unwrap().1 - p).abs() < 1e-9);
    }
}
