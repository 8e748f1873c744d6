use std::path::PathBuf;

use clap::{Args, Subcommand};
use pas_core::matrix::generate_null_dm;
use pas_core::simulate::{
    block_dm, complete_anchor_combinations, embed, encounter_model, expand_model, extended_2way, pure_dv_model, pure_nway,
    synthetic_source, trinary_from_haplotypes, EncounterConfig, EncounterKind, ModelDM, Phase, PureDvMode,
};
use pas_core::experiments::null_dm_with_dv;

use super::{Ctx, SchemeArgs};
use crate::error::{CliError, Result};
use crate::io::{load_model, load_source, save_model, write_text};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(subcommand)]
    pub what: SimKind,
    /// Output TSV; model matrices also get a `.meta` sidecar. Default: stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SimKind {
    /// Independent columns with target marker counts.
    Null {
        #[arg(long, default_value_t = 500)]
        rows: usize,
        #[arg(long, default_value_t = 50)]
        cols: usize,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Prepend a balanced binary DV as column 0.
        #[arg(long)]
        with_dv: bool,
    },
    /// Even-parity rows over n binary columns.
    PureNway {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        copies: usize,
    },
    /// Pure n-IV DV association.
    PureDv {
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// vs-controls or vs-randoms.
        #[arg(long, default_value = "vs-controls")]
        mode: String,
        #[arg(long, default_value_t = 1)]
        copies: usize,
    },
    /// Extended 2-way DV association over many IVs.
    Extended {
        #[arg(long, default_value_t = 4)]
        ivs: usize,
        /// in or off.
        #[arg(long, default_value = "in")]
        phase: String,
        /// Fraction of the base rows added as all-k runs.
        #[arg(long, default_value_t = 0.2)]
        boost: f64,
        #[arg(long, default_value = "binary")]
        arity: String,
        #[arg(long, default_value_t = 200)]
        base_rows: usize,
    },
    /// Multinomial expansion of a model matrix.
    Expand {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        rows: usize,
        /// Expand each DV category to half the rows.
        #[arg(long)]
        per_category: bool,
    },
    /// Append random columns to a model matrix.
    Embed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        random_cols: usize,
        #[command(flatten)]
        scheme: SchemeArgs,
    },
    /// Rows sampled from a block source set, blocks joined laterally.
    Blocks {
        /// Source file: one digit sequence per line.
        #[arg(long, conflicts_with = "synthetic")]
        source: Option<PathBuf>,
        /// Synthetic source as SEQUENCES,LENGTH.
        #[arg(long)]
        synthetic: Option<String>,
        /// Neighbour copy probability of the synthetic source.
        #[arg(long, default_value_t = 0.9)]
        correlation: f64,
        /// Pair binary sequences into trinary genotypes.
        #[arg(long)]
        trinary: bool,
        /// Add sequences for anchor combinations missing from the source.
        #[arg(long)]
        complete_anchors: bool,
        #[arg(long, default_value_t = 10)]
        blocks: usize,
        #[arg(long, default_value_t = 200)]
        rows: usize,
    },
}

#[derive(Args, Debug)]
pub struct EncounterArgs {
    /// columns, dv-marginal or dv-nomarginal.
    #[arg(long, default_value = "columns")]
    pub kind: String,
    #[arg(long, default_value_t = 200)]
    pub rows: usize,
    #[arg(long, default_value_t = 4)]
    pub cols: usize,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Largest accepted P value (default 0.01 for columns, 0.05 for DV kinds).
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Permutations per test (default 200 for columns, 100 for DV kinds).
    #[arg(long)]
    pub perms: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub max_attempts: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn emit(model: &ModelDM, out: &Option<PathBuf>, seed: u64) -> Result<()> {
    match out {
        Some(p) => save_model(p, model, seed),
        None => write_text(None, &model.matrix.to_tsv(true)),
    }
}

pub fn run_simulate(a: &SimulateArgs, ctx: &Ctx) -> Result<()> {
    let rng = ctx.rng();
    match &a.what {
        SimKind::Null { rows, cols, scheme, with_dv } => {
            let sc = scheme.scheme()?;
            let m = if *with_dv { null_dm_with_dv(*rows, *cols, &sc, &rng)? } else { generate_null_dm(*rows, *cols, &sc, &rng)? };
            write_text(a.output.as_deref(), &m.to_tsv(true))
        }
        SimKind::PureNway { n, copies } => emit(&pure_nway(*n, *copies)?, &a.output, ctx.seed),
        SimKind::PureDv { n, mode, copies } => {
            let mode = match mode.as_str() {
                "vs-controls" => PureDvMode::VsControls,
                "vs-randoms" => PureDvMode::VsRandoms,
                m => return Err(CliError::Usage(format!("unknown mode {m:?}"))),
            };
            emit(&pure_dv_model(*n, mode, *copies, &rng)?, &a.output, ctx.seed)
        }
        SimKind::Extended { ivs, phase, boost, arity, base_rows } => {
            let phase = match phase.as_str() {
                "in" => Phase::In,
                "off" => Phase::Off,
                p => return Err(CliError::Usage(format!("unknown phase {p:?}"))),
            };
            let m = extended_2way(*ivs, phase, *boost, crate::io::parse_arity(arity)?, *base_rows, &rng)?;
            emit(&m, &a.output, ctx.seed)
        }
        SimKind::Expand { model, rows, per_category } => {
            let src = load_model(model)?;
            let m = expand_model(&src.matrix, *rows, *per_category, &rng)?;
            emit(&ModelDM { matrix: m, ..src }, &a.output, ctx.seed)
        }
        SimKind::Embed { model, random_cols, scheme } => {
            let src = load_model(model)?;
            let sc = scheme.scheme()?;
            let m = embed(&src.matrix, *random_cols, &sc, &rng)?;
            emit(&ModelDM { matrix: m, ..src }, &a.output, ctx.seed)
        }
        SimKind::Blocks { source, synthetic, correlation, trinary, complete_anchors, blocks, rows } => {
            let mut src = match (source, synthetic) {
                (Some(p), _) => load_source(p)?,
                (None, Some(spec)) => {
                    let (n, len) = spec
                        .split_once(',')
                        .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
                        .ok_or_else(|| CliError::Usage(format!("--synthetic expects SEQUENCES,LENGTH, got {spec:?}")))?;
                    synthetic_source(n, len, *correlation, false, &rng.named("source"))?
                }
                (None, None) => return Err(CliError::Usage("give --source or --synthetic".into())),
            };
            if *complete_anchors {
                let added = complete_anchor_combinations(&mut src, &rng.named("complete"))?;
                eprintln!("added {added} sequences for missing anchor combinations");
            }
            if *trinary {
                src = trinary_from_haplotypes(&src)?;
            }
            let m = block_dm(&src, *blocks, *rows, &[], None, &rng.named("blocks"))?;
            write_text(a.output.as_deref(), &m.to_tsv(true))
        }
    }
}

pub fn run_encounter(a: &EncounterArgs, ctx: &Ctx) -> Result<()> {
    let kind = match a.kind.as_str() {
        "columns" => EncounterKind::Columns,
        "dv-marginal" => EncounterKind::DvMarginal,
        "dv-nomarginal" | "dv-no-marginal" => EncounterKind::DvNoMarginal,
        k => return Err(CliError::Usage(format!("unknown encounter kind {k:?}"))),
    };
    let columns = kind == EncounterKind::Columns;
    let cfg = EncounterConfig {
        rows: a.rows,
        cols: a.cols,
        scheme: a.scheme.scheme()?,
        cutoff: a.cutoff.unwrap_or(if columns { 0.01 } else { 0.05 }),
        kind,
        perms: a.perms.unwrap_or(if columns { 200 } else { 100 }),
        max_attempts: a.max_attempts,
    };
    let m = encounter_model(&cfg, &ctx.rng())?;
    emit(&m, &a.output, ctx.seed)
}
