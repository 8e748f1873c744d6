use std::path::PathBuf;

use clap::{Args, Subcommand};
use pas_core::experiments::{power_experiment, type1_experiment, PowerConfig, PowerModel, Type1Config};
use pas_core::simulate::PureDvMode;
use pas_core::ScoreSpec;

use super::{parse_specs, Ctx, PermArgs, SchemeArgs};
use crate::error::{CliError, Result};
use crate::fmt::g6;
use crate::io::{load_model, write_text};

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[command(subcommand)]
    pub what: ExperimentKind,
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum ExperimentKind {
    /// P-value uniformity over null matrices.
    ///
    /// Columns: score, n_pvalues, ks_d, ks_p, alpha, sidak_cutoff, hits, families, rate, z.
    Type1 {
        #[arg(long, default_value_t = 500)]
        rows: usize,
        #[arg(long, default_value_t = 50)]
        cols: usize,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Prepend a balanced binary DV as column 0 (needed by dv scores).
        #[arg(long)]
        with_dv: bool,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, required = true)]
        score: Vec<String>,
        /// Comma-separated target column indices.
        #[arg(long, default_value = "1,2,3,4,5")]
        targets: String,
        /// Target-index pairs whose P values are multiplied, e.g. 0:1,2:3.
        #[arg(long)]
        pairs: Option<String>,
        /// Write the sorted pooled P values and products per score to this file.
        #[arg(long)]
        cdf: Option<PathBuf>,
        #[command(flatten)]
        perm: PermArgs,
    },
    /// Smallest row count at which the reference columns reach the detection fraction.
    ///
    /// Columns: rows, detection, false_positive, n_reference, n_fp, selected.
    Power {
        /// pure-nway, pure-dv or a model TSV path.
        #[arg(long, default_value = "pure-dv")]
        model: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// vs-controls or vs-randoms for pure-dv.
        #[arg(long, default_value = "vs-controls")]
        mode: String,
        #[arg(long, default_value_t = 10)]
        random: usize,
        #[arg(long, default_value = "dvmom2ik")]
        score: String,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, default_value_t = 0.6)]
        fraction: f64,
        #[arg(long, default_value_t = 0.1)]
        cutoff: f64,
        #[arg(long, default_value_t = 20)]
        min_rows: usize,
        #[arg(long, default_value_t = 20_000)]
        max_rows: usize,
        #[arg(long, default_value_t = 10)]
        resolution: usize,
        #[arg(long, default_value_t = 2)]
        reference: usize,
        #[arg(long, default_value_t = 5)]
        fp_columns: usize,
        /// Write the sorted false-positive P values at the selected row count.
        #[arg(long)]
        fp_cdf: Option<PathBuf>,
        #[command(flatten)]
        perm: PermArgs,
    },
}

fn parse_pairs(s: &Option<String>) -> Result<Vec<(usize, usize)>> {
    let Some(s) = s else { return Ok(Vec::new()) };
    s.split(',')
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.split_once(':')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| CliError::Usage(format!("bad pair {x:?}")))
        })
        .collect()
}

fn parse_indices(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|x| x.trim().parse().map_err(|_| CliError::Usage(format!("bad index {x:?}")))).collect()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| g6(*x)).collect::<Vec<_>>().join(",")
}

pub fn run_experiment(a: &ExperimentArgs, ctx: &Ctx) -> Result<()> {
    match &a.what {
        ExperimentKind::Type1 { rows, cols, scheme, with_dv, replicates, score, targets, pairs, cdf, perm } => {
            let cfg = Type1Config {
                rows: *rows,
                cols: *cols,
                scheme: scheme.scheme()?,
                with_dv: *with_dv,
                replicates: *replicates,
                specs: parse_specs(score)?,
                targets: parse_indices(targets)?,
                pairs: parse_pairs(pairs)?,
                scan: perm.config()?,
            };
            let width = cfg.cols + usize::from(cfg.with_dv);
            if let Some(t) = cfg.targets.iter().find(|&&t| t >= width || (cfg.with_dv && t == 0)) {
                return Err(CliError::Usage(format!("target {t} is not an IV column")));
            }
            let rep = type1_experiment(&cfg, &ctx.runner, &ctx.rng())?;
            let mut s = String::from("score\tn_pvalues\tks_d\tks_p\talpha\tsidak_cutoff\thits\tfamilies\trate\tz\n");
            for g in &rep.groups {
                for h in &g.sidak {
                    s.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                        g.label,
                        g.pvalues.len(),
                        g6(g.ks_d),
                        g6(g.ks_p),
                        g6(h.alpha),
                        g6(h.cutoff),
                        h.hits,
                        h.families,
                        g6(h.rate()),
                        g6(h.z())
                    ));
                }
            }
            if let Some(p) = cdf {
                let mut c = String::from("score\tkind\tvalues\n");
                for g in &rep.groups {
                    c.push_str(&format!("{}\tpvalues\t{}\n", g.label, join(&g.pvalues)));
                    c.push_str(&format!("{}\tproducts\t{}\n", g.label, join(&g.products)));
                }
                write_text(Some(p), &c)?;
            }
            write_text(a.output.as_deref(), &s)
        }
        ExperimentKind::Power {
            model,
            n,
            mode,
            random,
            score,
            scheme,
            replicates,
            fraction,
            cutoff,
            min_rows,
            max_rows,
            resolution,
            reference,
            fp_columns,
            fp_cdf,
            perm,
        } => {
            let model = match model.as_str() {
                "pure-nway" => PowerModel::PureNway { n: *n },
                "pure-dv" => PowerModel::PureDv {
                    n: *n,
                    mode: match mode.as_str() {
                        "vs-controls" => PureDvMode::VsControls,
                        "vs-randoms" => PureDvMode::VsRandoms,
                        m => return Err(CliError::Usage(format!("unknown mode {m:?}"))),
                    },
                },
                path => PowerModel::Matrix(load_model(std::path::Path::new(path))?.matrix),
            };
            let mut cfg = PowerConfig::new(model, ScoreSpec::parse(score)?, scheme.scheme()?);
            cfg.n_random = *random;
            cfg.scan = perm.config()?;
            cfg.replicates = *replicates;
            cfg.fraction = *fraction;
            cfg.cutoff = *cutoff;
            cfg.min_rows = *min_rows;
            cfg.max_rows = *max_rows;
            cfg.resolution = *resolution;
            cfg.n_reference = *reference;
            cfg.n_fp_columns = *fp_columns;
            let rep = power_experiment(&cfg, &ctx.runner, &ctx.rng())?;
            let mut s = String::from("rows\tdetection\tfalse_positive\tn_reference\tn_fp\tselected\n");
            for p in &rep.probes {
                s.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    p.rows,
                    g6(p.detection),
                    g6(p.false_positive),
                    p.n_reference,
                    p.n_fp,
                    if p.rows == rep.detection_rows { "yes" } else { "no" }
                ));
            }
            if let (Some(path), Some(p)) = (fp_cdf, rep.at(rep.detection_rows)) {
                write_text(Some(path), &format!("{}\n", p.fp_pvalues.iter().map(|x| g6(*x)).collect::<Vec<_>>().join("\n")))?;
            }
            write_text(a.output.as_deref(), &s)
        }
    }
}
