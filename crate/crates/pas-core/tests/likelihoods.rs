use pas_core::theory::{brute_force_likelihoods, likelihood_moments, VectorLikelihoodTable};
use pas_core::RngStream;
use rand::Rng;
use std::collections::BTreeMap;

type Poly = BTreeMap<String, Vec<(u64, Vec<u32>)>>;

fn parse_table(text: &str) -> Poly {
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (v, terms) = line.split_once('\t').unwrap();
        let terms = terms
            .split_whitespace()
            .map(|t| {
                let (c, e) = t.split_once(':').unwrap();
                (c.parse().unwrap(), e.split(',').map(|x| x.parse().unwrap()).collect())
            })
            .collect();
        out.insert(v.to_string(), terms);
    }
    out
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn poly_total(p: &Poly, f: &[f64]) -> f64 {
    p.values()
        .flatten()
        .map(|(c, e)| *c as f64 * e.iter().zip(f).map(|(&k, &x)| x.powi(k as i32)).product::<f64>())
        .sum()
}

fn random_freqs(arity: usize, g: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..arity).map(|_| g.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn table(r: usize, l: usize, s: usize) -> VectorLikelihoodTable {
    brute_force_likelihoods(r, l, s).unwrap()
}

#[test]
fn binary_tables_match_reference_text() {
    for (r, l) in [(3, 3), (4, 3), (4, 4)] {
        let got = table(r, l, 2).to_text();
        let want = golden(&format!("likelihood_{r}x{l}_binary.txt"));
        assert_eq!(parse_table(&got), parse_table(&want), "{r}x{l}");
        assert_eq!(got, want, "{r}x{l} text layout");
    }
}

#[test]
fn enumerated_tables_sum_to_one() {
    let mut g = RngStream::new(17).rng();
    for (r, l, s) in [(3, 3, 2), (4, 3, 2), (4, 4, 2), (3, 3, 3)] {
        let t = table(r, l, s);
        for _ in 0..20 {
            let f = random_freqs(s, &mut g);
            assert!((t.total(&f) - 1.0).abs() < 1e-12, "{r}x{l} S={s}");
        }
    }
}

#[test]
fn trinary_reference_text_diverges_at_four_vectors() {
    let got = parse_table(&table(3, 3, 3).to_text());
    let printed = parse_table(&golden("likelihood_3x3_trinary.txt"));
    assert_eq!(got.keys().collect::<Vec<_>>(), printed.keys().collect::<Vec<_>>());
    let differing: Vec<&str> = got.keys().filter(|k| got[*k] != printed[*k]).map(String::as_str).collect();
    assert_eq!(differing, ["003", "012", "112", "223"]);
    // The printed coefficients do not form a probability distribution.
    let mut g = RngStream::new(5).rng();
    let f = random_freqs(3, &mut g);
    assert!((poly_total(&got, &f) - 1.0).abs() < 1e-12);
    assert!((poly_total(&printed, &f) - 1.0).abs() > 1e-3);
}

#[test]
fn three_by_three_moments() {
    let m = likelihood_moments(&table(3, 3, 2), &[0.2, 0.8]);
    assert!((m.m1 - 2.04).abs() < 1e-4);
    assert!((m.m2 - 0.48).abs() < 1e-4);
    assert!((m.var_m1 - 0.3328).abs() < 1e-4);
    assert!((m.var_m2 - 0.2368).abs() < 1e-4);
}

#[test]
fn four_by_three_moments_from_enumeration() {
    // Direct sum over all 2^12 matrices.
    let p: f64 = 0.2;
    let (mut e1, mut e2) = (0.0, 0.0);
    for x in 0u32..1 << 12 {
        let rows: Vec<u32> = (0..4).map(|i| (x >> (3 * i)) & 7).collect();
        let ones = x.count_ones() as i32;
        let w = (1.0 - p).powi(ones) * p.powi(12 - ones);
        let mut ms = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                ms.push(3 - (rows[a] ^ rows[b]).count_ones() as i32);
            }
        }
        let mean = ms.iter().sum::<i32>() as f64 / 6.0;
        let var = ms.iter().map(|&m| (m as f64 - mean).powi(2)).sum::<f64>() / 5.0;
        e1 += w * mean;
        e2 += w * var;
    }
    let m = likelihood_moments(&table(4, 3, 2), &[p, 1.0 - p]);
    assert!((m.m1 - e1).abs() < 1e-12);
    assert!((m.m2 - e2).abs() < 1e-12);
    assert!((m.m1 - 2.04).abs() < 1e-12);
}

#[test]
fn distinct_matrices_share_a_vector() {
    let vector = |rows: [[u8; 4]; 4]| {
        let mut v = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                v.push((0..4).filter(|&j| rows[a][j] == rows[b][j]).count());
            }
        }
        v.sort();
        v
    };
    let first = [[0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [1, 0, 0, 0]];
    let second = [[0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, 1, 1, 1]];
    assert_eq!(vector(first), [1, 1, 2, 2, 3, 3]);
    assert_eq!(vector(second), [1, 1, 2, 2, 3, 3]);
    assert!(table(4, 4, 2).entries.contains_key(&vec![1u8, 1, 2, 2, 3, 3]));
}
