use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use pas_core::inference::{erase_marginals, fisher_combine, marginal_chi2, sidak_cutoff, tune_erasure, PValueEstimate, TuneConfig};
use pas_core::matrix::resolve_column;
use pas_core::pairwise::PairwiseSummary;
use pas_core::scan::{scan_columns, scan_ivs};
use pas_core::scores::mee_pas;
use pas_core::{DataMatrix, ScoreSpec};

use super::{output_path, parse_specs, Ctx, PermArgs, SchemeArgs};
use crate::error::{CliError, Result};
use crate::fmt::{g6, g6_opt};
use crate::io::{load_dm, write_text};

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// Input TSV matrix (`-` for stdin).
    pub input: PathBuf,
    /// Comma-separated score specs such as mom1iz, chix-ij, lkx, ks-i.
    #[arg(long, required = true)]
    pub score: Vec<String>,
    /// Columns to score by id or index (default: all).
    #[arg(long)]
    pub columns: Vec<String>,
    /// Column id or index of a dependent variable, excluded from the default columns.
    #[arg(long)]
    pub dv: Option<String>,
    #[command(flatten)]
    pub perm: PermArgs,
    /// Append the Sidak family cutoff at this alpha and pass/fail.
    #[arg(long)]
    pub sidak: Option<f64>,
    /// `fisher`: append a combined P per column across the requested scores.
    #[arg(long)]
    pub combine: Option<String>,
    /// Also emit meePAS rows of this moment order.
    #[arg(long)]
    pub mee: Option<u32>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DvScanArgs {
    pub input: PathBuf,
    /// DV column id or index.
    #[arg(long, required = true)]
    pub dv: String,
    /// Comma-separated dv score specs such as dvmom1ik, dvchix-ijkl.
    #[arg(long)]
    pub score: Vec<String>,
    /// IVs to score (default: all but the DV).
    #[arg(long)]
    pub ivs: Vec<String>,
    #[command(flatten)]
    pub perm: PermArgs,
    #[arg(long)]
    pub sidak: Option<f64>,
    #[arg(long)]
    pub combine: Option<String>,
    /// Staged scan up to this order: marginal χ², erasure, then dvMom^k and dvMom^(k-1)-ik.
    #[arg(long, value_name = "N_MAX")]
    pub staged: Option<u32>,
    /// Marginal P threshold of the staged erasure.
    #[arg(long, default_value_t = 0.01)]
    pub erase_threshold: f64,
    /// Tune the erasure threshold with added random IVs before the staged scan.
    #[arg(long)]
    pub tune: bool,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EraseArgs {
    pub input: PathBuf,
    #[arg(long, required = true)]
    pub dv: String,
    /// IVs with marginal χ² P at or below this are erased.
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    /// TSV log of toggles: iv, category, from, to, count.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    pub input: PathBuf,
    #[arg(long, required = true)]
    pub dv: String,
    /// Random IVs added per trial.
    #[arg(long, default_value_t = 10)]
    pub added: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Minimum KS P value of the added IVs' P values.
    #[arg(long, default_value_t = 0.05)]
    pub target: f64,
    #[arg(long, default_value = "dvmom2i")]
    pub score: String,
    /// Comma-separated candidate thresholds.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub perm: PermArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

struct Row {
    stage: Option<String>,
    column: usize,
    score: String,
    value: Option<f64>,
    p: Option<f64>,
    z: Option<f64>,
    n_perms: Option<usize>,
    flags: Vec<&'static str>,
}

impl Row {
    fn from_estimate(column: usize, spec: &ScoreSpec, e: &PValueEstimate) -> Row {
        Row {
            stage: None,
            column,
            score: spec.to_string(),
            value: (!e.undetectable).then_some(e.score),
            p: Some(e.p),
            z: e.z,
            n_perms: Some(e.n_perms),
            flags: if e.undetectable { vec!["undetectable"] } else { Vec::new() },
        }
    }
}

fn resolve_list(dm: &DataMatrix, list: &[String]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in list {
        for name in item.split(',').filter(|s| !s.is_empty()) {
            out.push(resolve_column(dm, name.trim())?);
        }
    }
    Ok(out)
}

fn render(dm: &DataMatrix, rows: &[Row], sidak: Option<f64>, fisher: bool) -> Result<String> {
    let staged = rows.iter().any(|r| r.stage.is_some());
    let mut header: Vec<&str> = Vec::new();
    if staged {
        header.push("stage");
    }
    header.extend(["column_id", "score", "value", "p", "z", "n_perms", "flags"]);
    if sidak.is_some() {
        header.extend(["sidak_cutoff", "sidak_pass"]);
    }
    if fisher {
        header.extend(["fisher_stat", "fisher_p"]);
    }
    let mut family: BTreeMap<(Option<String>, String), usize> = BTreeMap::new();
    let mut by_col: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if r.p.is_some() {
            *family.entry((r.stage.clone(), r.score.clone())).or_default() += 1;
        }
        if let Some(p) = r.p {
            by_col.entry(r.column).or_default().push(p);
        }
    }
    let combined: BTreeMap<usize, (f64, f64)> =
        by_col.iter().map(|(&c, ps)| Ok((c, fisher_combine(&ps.iter().map(|p| p.max(f64::MIN_POSITIVE)).collect::<Vec<_>>())?))).collect::<Result<_>>()?;
    let mut s = header.join("\t");
    s.push('\n');
    for r in rows {
        let mut f: Vec<String> = Vec::new();
        if staged {
            f.push(r.stage.clone().unwrap_or_default());
        }
        f.push(dm.column_id(r.column).to_string());
        f.push(r.score.clone());
        f.push(g6_opt(r.value));
        f.push(g6_opt(r.p));
        f.push(g6_opt(r.z));
        f.push(r.n_perms.map_or_else(|| "NA".into(), |n| n.to_string()));
        f.push(if r.flags.is_empty() { "-".into() } else { r.flags.join(",") });
        if let Some(alpha) = sidak {
            match (r.p, family.get(&(r.stage.clone(), r.score.clone()))) {
                (Some(p), Some(&n)) => {
                    let c = sidak_cutoff(alpha, n)?;
                    f.push(g6(c));
                    f.push(if p <= c { "pass" } else { "fail" }.into());
                }
                _ => f.extend(["NA".into(), "NA".into()]),
            }
        }
        if fisher {
            let (t, p) = combined.get(&r.column).copied().map_or((None, None), |(t, p)| (Some(t), Some(p)));
            f.push(g6_opt(t));
            f.push(g6_opt(p));
        }
        s.push_str(&f.join("\t"));
        s.push('\n');
    }
    Ok(s)
}

fn want_fisher(c: &Option<String>) -> Result<bool> {
    match c.as_deref() {
        None => Ok(false),
        Some("fisher") => Ok(true),
        Some(o) => Err(CliError::Usage(format!("unknown --combine method {o:?}"))),
    }
}

pub fn run_scan(a: &ScanArgs, ctx: &Ctx) -> Result<()> {
    let dm = load_dm(&a.input, a.dv.as_deref())?;
    let specs = parse_specs(&a.score)?;
    if let Some(s) = specs.iter().find(|s| s.is_dv()) {
        return Err(CliError::Usage(format!("{s} is a DV score; use dvscan")));
    }
    let cols = if a.columns.is_empty() { (0..dm.cols()).filter(|&c| Some(c) != dm.dv()).collect() } else { resolve_list(&dm, &a.columns)? };
    let cfg = a.perm.config()?;
    let fisher = want_fisher(&a.combine)?;
    let summary = PairwiseSummary::new(&dm);
    let res = scan_columns(&ctx.runner, &dm, &summary, &cols, &specs, &cfg, &ctx.rng())?;
    let mut rows = Vec::new();
    for (ci, &c) in cols.iter().enumerate() {
        for (si, spec) in specs.iter().enumerate() {
            rows.push(Row::from_estimate(c, spec, &res[ci][si]));
        }
    }
    if let Some(n) = a.mee {
        let mee = mee_pas(&dm, &summary, n, cfg.kind)?;
        for &c in &cols {
            rows.push(Row {
                stage: None,
                column: c,
                score: format!("mee{n}:{}", dm.column_id(mee[c].arg_col)),
                value: Some(mee[c].delta),
                p: None,
                z: None,
                n_perms: None,
                flags: Vec::new(),
            });
        }
    }
    write_text(a.output.as_deref(), &render(&dm, &rows, a.sidak, fisher)?)
}

fn dv_of(dm: &DataMatrix) -> Result<usize> {
    let dv = dm.dv().ok_or_else(|| CliError::Usage("--dv is required".into()))?;
    if dm.distinct_codes(dv).len() != 2 {
        return Err(pas_core::Error::Invalid("the DV must take exactly two values".into()).into());
    }
    Ok(dv)
}

pub fn run_dvscan(a: &DvScanArgs, ctx: &Ctx) -> Result<()> {
    let dm = load_dm(&a.input, Some(&a.dv))?;
    let dv = dv_of(&dm)?;
    let ivs = if a.ivs.is_empty() { (0..dm.cols()).filter(|&c| c != dv).collect() } else { resolve_list(&dm, &a.ivs)? };
    if ivs.contains(&dv) {
        return Err(CliError::Usage("the DV cannot be scored as an IV".into()));
    }
    let cfg = a.perm.config()?;
    let fisher = want_fisher(&a.combine)?;
    let rng = ctx.rng();
    let Some(n_max) = a.staged else {
        let specs = parse_specs(&a.score)?;
        if let Some(s) = specs.iter().find(|s| !s.is_dv()) {
            return Err(CliError::Usage(format!("{s} is not a DV score; use scan")));
        }
        let summary = PairwiseSummary::new(&dm);
        let res = scan_ivs(&ctx.runner, &dm, &summary, dv, &ivs, &specs, &cfg, &rng)?;
        let mut rows = Vec::new();
        for (ii, &iv) in ivs.iter().enumerate() {
            for (si, spec) in specs.iter().enumerate() {
                rows.push(Row::from_estimate(iv, spec, &res[ii][si]));
            }
        }
        return write_text(a.output.as_deref(), &render(&dm, &rows, a.sidak, fisher)?);
    };
    if n_max < 1 {
        return Err(CliError::Usage("--staged needs N_MAX ≥ 1".into()));
    }
    if !a.score.is_empty() {
        return Err(CliError::Usage("--staged chooses its own scores; drop --score".into()));
    }
    let mut rows = Vec::new();
    for &iv in &ivs {
        let (chi2, p) = marginal_chi2(&dm, dv, iv)?;
        rows.push(Row { stage: Some("1".into()), column: iv, score: "marginal-chi2".into(), value: Some(chi2), p: Some(p), z: None, n_perms: None, flags: Vec::new() });
    }
    let threshold = if a.tune {
        let tc = TuneConfig {
            n_added: 10,
            scheme: a.scheme.scheme()?,
            target_level: 0.05,
            n_trials: 20,
            grid: TuneConfig::default_grid(),
            score: ScoreSpec::parse("dvmom2i")?,
            scan: cfg.clone(),
        };
        let t = tune_erasure(&dm, dv, &tc, &ctx.runner, &rng.named("tune"))?.threshold;
        eprintln!("tuned erasure threshold: {}", g6(t));
        t
    } else {
        a.erase_threshold
    };
    let (erased, log) = erase_marginals(&dm, dv, threshold, &rng.named("erase"))?;
    let summary = PairwiseSummary::new(&erased);
    for k in 2..=n_max {
        let specs = [ScoreSpec::parse(&format!("dvmom{k}"))?, ScoreSpec::parse(&format!("dvmom{}ik", k - 1))?];
        let res = scan_ivs(&ctx.runner, &erased, &summary, dv, &ivs, &specs, &cfg, &rng.named("stage").child(k as u64))?;
        for (ii, &iv) in ivs.iter().enumerate() {
            for (si, spec) in specs.iter().enumerate() {
                let mut r = Row::from_estimate(iv, spec, &res[ii][si]);
                r.stage = Some(k.to_string());
                if log.treated.contains(&iv) {
                    r.flags.push("erased-marginal");
                }
                rows.push(r);
            }
        }
    }
    write_text(a.output.as_deref(), &render(&dm, &rows, a.sidak, fisher || n_max > 1)?)
}

pub fn run_erase(a: &EraseArgs, ctx: &Ctx) -> Result<()> {
    let dm = load_dm(&a.input, Some(&a.dv))?;
    let dv = dv_of(&dm)?;
    let (out, log) = erase_marginals(&dm, dv, a.threshold, &ctx.rng())?;
    eprintln!("erased {} of {} IVs", log.treated.len(), dm.cols() - 1);
    if let Some(p) = &a.log {
        let mut s = String::from("iv\tcategory\tfrom\tto\tcount\n");
        for t in &log.toggles {
            s.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", dm.column_id(t.iv), t.category, t.from, t.to, t.count));
        }
        write_text(Some(p), &s)?;
    }
    write_text(output_path(&a.output), &out.to_tsv(true))
}

pub fn run_tune(a: &TuneArgs, ctx: &Ctx) -> Result<()> {
    let dm = load_dm(&a.input, Some(&a.dv))?;
    let dv = dv_of(&dm)?;
    let grid = match &a.grid {
        Some(g) => g
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad grid value {x:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?,
        None => TuneConfig::default_grid(),
    };
    let tc = TuneConfig {
        n_added: a.added,
        scheme: a.scheme.scheme()?,
        target_level: a.target,
        n_trials: a.trials,
        grid,
        score: ScoreSpec::parse(&a.score)?,
        scan: a.perm.config()?,
    };
    let rep = tune_erasure(&dm, dv, &tc, &ctx.runner, &ctx.rng())?;
    let mut s = String::from("threshold\tks_p\tselected\n");
    for (t, p) in &rep.scanned {
        s.push_str(&format!("{}\t{}\t{}\n", g6(*t), g6(*p), if *t == rep.threshold { "yes" } else { "no" }));
    }
    write_text(output_path(&a.output), &s)
}
