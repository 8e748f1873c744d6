//! Type-I-error and power harnesses.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::exec::{Runner, Sequential};
use crate::inference::{sidak_cutoff, PValueEstimate};
use crate::matrix::{generate_column, generate_null_dm, DataMatrix, FrequencyScheme};
use crate::pairwise::PairwiseSummary;
use crate::rng::RngStream;
use crate::scan::{scan_columns, scan_ivs, ScanConfig};
use crate::simulate::{embed, expand_model, pure_dv_model, pure_nway, PureDvMode};
use crate::spec::ScoreSpec;
use crate::stats::{binomial_sd, ks_discrete_uniform, ks_uniform};

pub const SIDAK_ALPHAS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

/// Null matrix with a balanced binary DV prepended at column 0.
pub fn null_dm_with_dv(rows: usize, cols: usize, scheme: &FrequencyScheme, rng: &RngStream) -> Result<DataMatrix> {
    let dv = generate_column(rows, &[0.5, 0.5], &mut rng.named("dv").rng())?;
    let ivs = generate_null_dm(rows, cols, scheme, &rng.named("ivs"))?;
    let mut m = DataMatrix::from_columns_with_arities(vec![dv], vec![2])?.hstack(&ivs)?;
    m.set_dv(Some(0))?;
    Ok(m)
}

/// P values of `specs` at `targets`: focal specs score the target columns, dv specs
/// score the target IVs against the DV at column 0. Result is `[spec][target]`.
pub fn score_targets<R: Runner>(
    runner: &R,
    dm: &DataMatrix,
    targets: &[usize],
    specs: &[ScoreSpec],
    scan: &ScanConfig,
    rng: &RngStream,
) -> Result<Vec<Vec<PValueEstimate>>> {
    let summary = PairwiseSummary::new(dm);
    let focal: Vec<ScoreSpec> = specs.iter().copied().filter(|s| !s.is_dv()).collect();
    let dvs: Vec<ScoreSpec> = specs.iter().copied().filter(|s| s.is_dv()).collect();
    let f = if focal.is_empty() { Vec::new() } else { scan_columns(runner, dm, &summary, targets, &focal, scan, rng)? };
    let d = if dvs.is_empty() {
        Vec::new()
    } else {
        let dv = dm.dv().ok_or_else(|| Error::Invalid("dv scores need a DV".into()))?;
        scan_ivs(runner, dm, &summary, dv, targets, &dvs, scan, rng)?
    };
    let (mut fi, mut di) = (0, 0);
    let mut out = Vec::with_capacity(specs.len());
    for s in specs {
        if s.is_dv() {
            out.push(d.iter().map(|row| row[di]).collect());
            di += 1;
        } else {
            out.push(f.iter().map(|row| row[fi]).collect());
            fi += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Type1Config {
    pub rows: usize,
    pub cols: usize,
    pub scheme: FrequencyScheme,
    /// Prepend a balanced binary DV at column 0.
    pub with_dv: bool,
    pub replicates: usize,
    pub specs: Vec<ScoreSpec>,
    pub targets: Vec<usize>,
    /// Index pairs into `targets` whose P values are multiplied.
    pub pairs: Vec<(usize, usize)>,
    pub scan: ScanConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SidakHit {
    pub alpha: f64,
    pub cutoff: f64,
    pub hits: usize,
    pub families: usize,
}

impl SidakHit {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.families as f64
    }

    /// Distance of the hit rate from alpha in binomial standard deviations.
    pub fn z(&self) -> f64 {
        (self.rate() - self.alpha) / (binomial_sd(self.families as u64, self.alpha) / self.families as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdfGroup {
    pub label: String,
    /// Sorted pooled P values.
    pub pvalues: Vec<f64>,
    pub ks_d: f64,
    pub ks_p: f64,
    pub sidak: Vec<SidakHit>,
    /// Sorted products of paired P values.
    pub products: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdfReport {
    pub groups: Vec<CdfGroup>,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Builds the report from per-replicate P values shaped `[replicate][spec][target]`.
/// With `n_perms`, the KS null is the discrete uniform law of an N-permutation P value.
pub fn cdf_report(labels: &[String], per_rep: &[Vec<Vec<f64>>], pairs: &[(usize, usize)], n_perms: Option<usize>) -> Result<CdfReport> {
    let mut groups = Vec::with_capacity(labels.len());
    for (si, label) in labels.iter().enumerate() {
        let mut pooled = Vec::new();
        let mut products = Vec::new();
        let n_tests = per_rep.first().map_or(0, |r| r[si].len());
        let mut sidak: Vec<SidakHit> = SIDAK_ALPHAS
            .iter()
            .map(|&a| Ok(SidakHit { alpha: a, cutoff: sidak_cutoff(a, n_tests.max(1))?, hits: 0, families: 0 }))
            .collect::<Result<_>>()?;
        for rep in per_rep {
            let ps = &rep[si];
            pooled.extend_from_slice(ps);
            let min = ps.iter().copied().fold(f64::INFINITY, f64::min);
            for h in sidak.iter_mut() {
                h.families += 1;
                if min <= h.cutoff + 1e-12 {
                    h.hits += 1;
                }
            }
            for &(a, b) in pairs {
                products.push(ps[a] * ps[b]);
            }
        }
        let (ks_d, ks_p) = match n_perms {
            Some(n) => ks_discrete_uniform(&pooled, n),
            None => ks_uniform(&pooled),
        };
        groups.push(CdfGroup { label: label.clone(), pvalues: sorted(pooled), ks_d, ks_p, sidak, products: sorted(products) });
    }
    Ok(CdfReport { groups })
}

/// Scores the configured targets over independent null matrices.
pub fn type1_experiment<R: Runner>(cfg: &Type1Config, runner: &R, rng: &RngStream) -> Result<CdfReport> {
    if cfg.replicates == 0 || cfg.targets.is_empty() || cfg.specs.is_empty() {
        return invalid("type I experiments need replicates, targets and scores");
    }
    if cfg.specs.iter().any(|s| s.is_dv()) && !cfg.with_dv {
        return invalid("dv scores need with_dv");
    }
    for &(a, b) in &cfg.pairs {
        if a >= cfg.targets.len() || b >= cfg.targets.len() {
            return invalid("pair index outside targets");
        }
    }
    let per_rep: Vec<Result<Vec<Vec<f64>>>> = runner.map(cfg.replicates, |k| {
        let s = rng.child(k as u64);
        let dm = if cfg.with_dv {
            null_dm_with_dv(cfg.rows, cfg.cols, &cfg.scheme, &s.named("dm"))?
        } else {
            generate_null_dm(cfg.rows, cfg.cols, &cfg.scheme, &s.named("dm"))?
        };
        let res = score_targets(&Sequential, &dm, &cfg.targets, &cfg.specs, &cfg.scan, &s.named("perm"))?;
        Ok(res.iter().map(|row| row.iter().map(|e| e.p).collect()).collect())
    });
    let per_rep: Vec<Vec<Vec<f64>>> = per_rep.into_iter().collect::<Result<_>>()?;
    let labels: Vec<String> = cfg.specs.iter().map(|s| format!("{s}")).collect();
    cdf_report(&labels, &per_rep, &cfg.pairs, Some(cfg.scan.n_perms))
}

/// C.d.f. of the product of two independent discrete uniform P values on
/// {1/(N+1), …, 1}, evaluated at `x`.
pub fn product_cdf_discrete(x: f64, n_perms: usize) -> f64 {
    let k = (n_perms + 1) as f64;
    let mut acc = 0.0;
    for i in 1..=n_perms + 1 {
        let a = i as f64 / k;
        let need = x / a;
        let j = libm::floor(need * k + 1e-9).clamp(0.0, k);
        acc += j / k;
    }
    acc / k
}

/// Continuous product-of-two-uniforms c.d.f.: x − x ln x.
pub fn product_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x - x * libm::log(x)
    }
}

/// Model families for the power harness. Column 0 is the DV when there is one.
#[derive(Clone, Debug, PartialEq)]
pub enum PowerModel {
    /// Pure n-column association among columns 0..n.
    PureNway { n: usize },
    /// Pure n-IV DV association; IVs 1..=n.
    PureDv { n: usize, mode: PureDvMode },
    /// A given model matrix expanded multinomially (per DV category when it has a DV).
    Matrix(DataMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerConfig {
    pub model: PowerModel,
    pub n_random: usize,
    pub scheme: FrequencyScheme,
    pub spec: ScoreSpec,
    pub scan: ScanConfig,
    pub replicates: usize,
    /// Target detection fraction of the reference columns.
    pub fraction: f64,
    /// P-value cutoff for detection and false positives.
    pub cutoff: f64,
    pub min_rows: usize,
    pub max_rows: usize,
    /// Bisection stops once the bracket is at most this many rows wide.
    pub resolution: usize,
    /// Number of reference columns (the leftmost model columns).
    pub n_reference: usize,
    /// Random columns scored for false positives.
    pub n_fp_columns: usize,
}

impl PowerConfig {
    pub fn new(model: PowerModel, spec: ScoreSpec, scheme: FrequencyScheme) -> Self {
        PowerConfig {
            model,
            n_random: 10,
            scheme,
            spec,
            scan: ScanConfig::default(),
            replicates: 200,
            fraction: 0.6,
            cutoff: 0.1,
            min_rows: 20,
            max_rows: 20_000,
            resolution: 10,
            n_reference: 2,
            n_fp_columns: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub rows: usize,
    pub detection: f64,
    pub false_positive: f64,
    pub n_reference: usize,
    pub n_fp: usize,
    /// Sorted random-column P values.
    pub fp_pvalues: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerReport {
    pub detection_rows: usize,
    /// Every probe in the order evaluated.
    pub probes: Vec<Probe>,
}

impl PowerReport {
    pub fn at(&self, rows: usize) -> Option<&Probe> {
        self.probes.iter().find(|p| p.rows == rows)
    }
}

fn model_layout(cfg: &PowerConfig, rng: &RngStream) -> Result<(DataMatrix, bool, usize)> {
    Ok(match &cfg.model {
        PowerModel::PureNway { n } => (pure_nway(*n, 1)?.matrix, false, 0),
        PowerModel::PureDv { n, mode } => (pure_dv_model(*n, *mode, 4, rng)?.matrix, true, 1),
        PowerModel::Matrix(m) => (m.clone(), m.dv().is_some(), m.dv().map_or(0, |d| d + 1)),
    })
}

/// One replicate matrix at `rows`: the expanded model with random columns appended.
/// Returns the matrix, its reference columns and its scored random columns.
pub fn power_matrix(cfg: &PowerConfig, rows: usize, rng: &RngStream) -> Result<(DataMatrix, Vec<usize>, Vec<usize>)> {
    let (model, per_cat, first) = model_layout(cfg, &rng.named("controls"))?;
    let rows = if per_cat { rows + rows % 2 } else { rows };
    let expanded = expand_model(&model, rows, per_cat, &rng.named("expand"))?;
    let dm = embed(&expanded, cfg.n_random, &cfg.scheme, &rng.named("random"))?;
    let refs: Vec<usize> = (first..first + cfg.n_reference).collect();
    let fp: Vec<usize> = (model.cols()..model.cols() + cfg.n_fp_columns.min(cfg.n_random)).collect();
    Ok((dm, refs, fp))
}

/// Detection and false-positive fractions at one row count.
pub fn probe<R: Runner>(cfg: &PowerConfig, rows: usize, runner: &R, rng: &RngStream) -> Result<Probe> {
    let per: Vec<Result<(Vec<f64>, Vec<f64>)>> = runner.map(cfg.replicates, |k| {
        let s = rng.named("probe").child(rows as u64).child(k as u64);
        let (dm, refs, fp) = power_matrix(cfg, rows, &s)?;
        let mut targets = refs.clone();
        targets.extend_from_slice(&fp);
        let res = score_targets(&Sequential, &dm, &targets, &[cfg.spec], &cfg.scan, &s.named("perm"))?;
        let ps: Vec<f64> = res[0].iter().map(|e| e.p).collect();
        Ok((ps[..refs.len()].to_vec(), ps[refs.len()..].to_vec()))
    });
    let (mut r, mut f) = (Vec::new(), Vec::new());
    for x in per {
        let (a, b) = x?;
        r.extend(a);
        f.extend(b);
    }
    let hit = |v: &[f64]| v.iter().filter(|&&p| p <= cfg.cutoff + 1e-12).count() as f64 / v.len().max(1) as f64;
    Ok(Probe { rows, detection: hit(&r), false_positive: hit(&f), n_reference: r.len(), n_fp: f.len(), fp_pvalues: sorted(f) })
}

/// Smallest probed row count whose detection fraction reaches the target:
/// doubling from `min_rows`, then bisection of the last bracket.
pub fn power_experiment<R: Runner>(cfg: &PowerConfig, runner: &R, rng: &RngStream) -> Result<PowerReport> {
    if !(cfg.fraction > 0.0 && cfg.fraction < 1.0) || !(cfg.cutoff > 0.0 && cfg.cutoff < 1.0) {
        return invalid("fraction and cutoff must lie in (0, 1)");
    }
    if cfg.replicates == 0 || cfg.min_rows < 4 || cfg.max_rows < cfg.min_rows {
        return invalid("need replicates and 4 ≤ min_rows ≤ max_rows");
    }
    let mut probes = Vec::new();
    let mut lo: Option<usize> = None;
    let mut rows = cfg.min_rows;
    let hi = loop {
        let p = probe(cfg, rows, runner, rng)?;
        let ok = p.detection >= cfg.fraction;
        probes.push(p);
        if ok {
            break rows;
        }
        lo = Some(rows);
        if rows >= cfg.max_rows {
            return Err(Error::Exhausted(format!("detection below {} at {} rows", cfg.fraction, cfg.max_rows)));
        }
        rows = (rows * 2).min(cfg.max_rows);
    };
    let (mut lo, mut hi) = match lo {
        Some(l) => (l, hi),
        None => return Ok(PowerReport { detection_rows: hi, probes }),
    };
    while hi - lo > cfg.resolution.max(1) {
        let mid = (lo + hi) / 2;
        let p = probe(cfg, mid, runner, rng)?;
        if p.detection >= cfg.fraction {
            hi = mid;
        } else {
            lo = mid;
        }
        probes.push(p);
    }
    Ok(PowerReport { detection_rows: hi, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Arity;

    #[test]
    fn uniform_scores_give_uniform_report() {
        let mut per_rep = Vec::new();
        let mut g = RngStream::new(3).rng();
        for _ in 0..300 {
            let ps: Vec<f64> = (0..10).map(|_| rand::Rng::random::<f64>(&mut g)).collect();
            per_rep.push(vec![ps]);
        }
        let r = cdf_report(&[String::from("u")], &per_rep, &[(0, 1)], None).unwrap();
        let g = &r.groups[0];
        assert!(g.ks_p > 0.01);
        for h in &g.sidak {
            assert!(h.z().abs() < 3.5, "{h:?}");
        }
        assert!(g.pvalues.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(g.products.len(), 300);
    }

    #[test]
    fn product_cdfs_agree_for_many_perms() {
        for x in [0.01, 0.1, 0.3, 0.7] {
            assert!((product_cdf_discrete(x, 2000) - product_cdf(x)).abs() < 2e-3);
        }
    }

    #[test]
    fn small_type1_run() {
        let cfg = Type1Config {
            rows: 30,
            cols: 8,
            scheme: FrequencyScheme::o12345(Arity::Binary),
            with_dv: true,
            replicates: 4,
            specs: vec![ScoreSpec::parse("chix-m").unwrap(), ScoreSpec::parse("dvmom1ik").unwrap()],
            targets: vec![1, 2, 3],
            pairs: vec![(0, 1)],
            scan: ScanConfig::with_perms(19),
        };
        let a = type1_experiment(&cfg, &Sequential, &RngStream::new(1)).unwrap();
        let b = type1_experiment(&cfg, &Sequential, &RngStream::new(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.groups[0].pvalues.len(), 12);
    }

    #[test]
    fn perfect_pair_is_found_quickly() {
        let mut cfg = PowerConfig::new(
            PowerModel::PureNway { n: 2 },
            ScoreSpec::parse("mom1").unwrap(),
            FrequencyScheme::o12345(Arity::Binary),
        );
        cfg.replicates = 10;
        cfg.scan = ScanConfig::with_perms(19);
        cfg.min_rows = 8;
        let r = power_experiment(&cfg, &Sequential, &RngStream::new(2)).unwrap();
        assert!(r.detection_rows <= 64);
        let last = r.at(r.detection_rows).unwrap();
        assert!(last.detection >= 0.6);
    }
}
