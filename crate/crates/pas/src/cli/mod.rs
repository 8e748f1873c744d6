//! The `pas` command line.
//!
//! stdout carries data rows only; diagnostics go to stderr. Exit codes: 0 ok,
//! 1 usage, 2 data validation, 3 resource guard or exhausted search.

mod experiment;
mod scan;
mod simulate;
mod verify;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pas_core::inference::Tail;
use pas_core::scan::ScanConfig;
use pas_core::scores::MomentKind;
use pas_core::{Arity, FrequencyScheme, RngStream, ScoreSpec};

use crate::error::{CliError, ExitCode, Result};
use crate::io::{parse_arity, parse_key_values, read_text};
use crate::runner::RayonRunner;

#[derive(Parser, Debug)]
#[command(name = "pas", version, about = "Pairwise-match association scores and permutation tests")]
pub struct Cli {
    /// Flat key=value file of long-flag defaults; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed of all random streams; drawn from entropy and echoed to stderr when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Focal-column scores with permutation P values.
    ///
    /// Output columns: column_id, score, value, p, z, n_perms, flags
    /// [, sidak_cutoff, sidak_pass] [, fisher_stat, fisher_p].
    Scan(scan::ScanArgs),
    /// DV-dependent scores of independent columns, optionally staged with marginal erasure.
    ///
    /// Output columns: [stage,] column_id, score, value, p, z, n_perms, flags
    /// [, sidak_cutoff, sidak_pass] [, fisher_stat, fisher_p].
    Dvscan(scan::DvScanArgs),
    /// Generate null, model, expanded or block matrices as TSV.
    Simulate(simulate::SimulateArgs),
    /// Draw small random matrices until one passes the significance tests.
    Encounter(simulate::EncounterArgs),
    /// Remove marginal DV effects by toggling markers; writes the erased matrix.
    Erase(scan::EraseArgs),
    /// Search the erasure threshold with added random IVs.
    ///
    /// Output columns: threshold, ks_p, selected.
    Tune(scan::TuneArgs),
    /// Exact tables and reference values.
    Verify(verify::VerifyArgs),
    /// Type I error and power harnesses.
    Experiment(experiment::ExperimentArgs),
}

/// Shared permutation settings.
#[derive(Args, Debug, Clone)]
pub struct PermArgs {
    /// Permutations per P value.
    #[arg(long, default_value_t = 100)]
    pub perms: usize,
    /// Replicates used to estimate KS null c.d.f.s (defaults to --perms).
    #[arg(long)]
    pub ks_null_perms: Option<usize>,
    /// upper or two-sided.
    #[arg(long, default_value = "upper")]
    pub tail: String,
    /// Use standardized instead of central moments for orders ≥ 3.
    #[arg(long)]
    pub standardized: bool,
}

impl PermArgs {
    pub fn config(&self) -> Result<ScanConfig> {
        let tail = match self.tail.as_str() {
            "upper" => Tail::Upper,
            "two-sided" | "two" => Tail::TwoSided,
            t => return Err(CliError::Usage(format!("unknown tail {t:?}"))),
        };
        if self.perms == 0 {
            return Err(CliError::Usage("--perms must be positive".into()));
        }
        Ok(ScanConfig {
            n_perms: self.perms,
            tail,
            kind: if self.standardized { MomentKind::Standardized } else { MomentKind::Central },
            ks_null_perms: self.ks_null_perms.unwrap_or(self.perms),
        })
    }
}

/// Marker-frequency scheme of generated columns.
#[derive(Args, Debug, Clone)]
pub struct SchemeArgs {
    /// Minor-marker frequencies in tenths cycling over columns, e.g. o12345 or 5.
    #[arg(long, default_value = "o12345")]
    pub scheme: String,
    /// binary or trinary-hw.
    #[arg(long, default_value = "binary")]
    pub arity: String,
}

impl SchemeArgs {
    pub fn arity(&self) -> Result<Arity> {
        parse_arity(&self.arity)
    }
    pub fn scheme(&self) -> Result<FrequencyScheme> {
        Ok(FrequencyScheme::parse(&self.scheme, self.arity()?)?)
    }
}

pub struct Ctx {
    pub runner: RayonRunner,
    pub seed: u64,
}

impl Ctx {
    pub fn rng(&self) -> RngStream {
        RngStream::new(self.seed)
    }
}

pub fn parse_specs(list: &[String]) -> Result<Vec<ScoreSpec>> {
    let mut out = Vec::new();
    for s in list {
        out.extend(ScoreSpec::parse_list(s)?);
    }
    if out.is_empty() {
        return Err(CliError::Usage("no --score given".into()));
    }
    Ok(out)
}

pub fn output_path(p: &Option<PathBuf>) -> Option<&Path> {
    p.as_deref()
}

/// Appends config entries as `--key=value` (or bare `--key` for true booleans),
/// skipping keys already given on the command line.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path: Option<PathBuf> = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--" {
            rest.push(a);
            rest.extend(it.by_ref());
            break;
        }
        if s == "--config" {
            let v = it.next().ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            path = Some(PathBuf::from(v));
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(v));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let given: BTreeSet<String> = rest
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let cfg = parse_key_values(&read_text(&path)?)?;
    let insert_at = rest.iter().position(|a| a == "--").unwrap_or(rest.len());
    let mut extra = Vec::new();
    for (k, v) in cfg {
        let k = k.trim_start_matches("--").to_string();
        if given.contains(&k) || k == "config" {
            continue;
        }
        match v.as_str() {
            "true" | "yes" | "on" => extra.push(OsString::from(format!("--{k}"))),
            "false" | "no" | "off" => {}
            _ => extra.push(OsString::from(format!("--{k}={v}"))),
        }
    }
    rest.splice(insert_at..insert_at, extra);
    Ok(rest)
}

fn entropy_seed() -> u64 {
    let s: u64 = rand::random();
    eprintln!("seed: {s}");
    s
}

fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Ctx { runner: RayonRunner::new(cli.threads), seed: cli.seed.unwrap_or_else(entropy_seed) };
    match cli.command {
        Command::Scan(a) => scan::run_scan(&a, &ctx),
        Command::Dvscan(a) => scan::run_dvscan(&a, &ctx),
        Command::Simulate(a) => simulate::run_simulate(&a, &ctx),
        Command::Encounter(a) => simulate::run_encounter(&a, &ctx),
        Command::Erase(a) => scan::run_erase(&a, &ctx),
        Command::Tune(a) => scan::run_tune(&a, &ctx),
        Command::Verify(a) => verify::run_verify(&a, &ctx),
        Command::Experiment(a) => experiment::run_experiment(&a, &ctx),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code() as i32;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::Ok,
                _ => ExitCode::Usage,
            };
            let _ = e.print();
            return code as i32;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as i32
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn config_fills_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        std::fs::write(&p, "perms=50\nseed=3\nstandardized=true\ntail=upper\n").unwrap();
        let args: Vec<OsString> =
            ["pas", "scan", "x.tsv", "--perms", "7", "--config", p.to_str().unwrap()].iter().map(OsString::from).collect();
        let out: Vec<String> = merge_config(args).unwrap().into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(out, ["pas", "scan", "x.tsv", "--perms", "7", "--seed=3", "--standardized", "--tail=upper"]);
    }
}
