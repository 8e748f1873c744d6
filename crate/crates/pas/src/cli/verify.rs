use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use pas_core::matrix::parse_tsv;
use pas_core::theory::{
    brute_force_likelihoods, fig3_matrix, fig3_tests, likelihood_moments, naive_binomial, prob_m_binary_all, uniform_pair_counts,
    MatchDistribution,
};

use super::Ctx;
use crate::error::{CliError, Result};
use crate::fmt::g6;
use crate::io::{read_text, write_text};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub what: VerifyKind,
    /// Compare the output with a golden file (or the canonical file name in a directory).
    #[arg(long, global = true, value_name = "PATH")]
    pub diff: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum VerifyKind {
    /// Exact pairwise match counts when every S-ary sequence of length L occurs n times,
    /// or the binary-frequency distribution with --p. Columns: m, count, freq.
    ProbM {
        #[arg(long = "L")]
        l: usize,
        #[arg(long = "S", default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Minor-marker frequency of an infinite binary population instead.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Mean and variance of the binary match distribution over grids of L and p.
    /// Columns: L, p, m1, m2, binomial_m1, binomial_m2.
    Expr10 {
        /// Comma-separated column counts.
        #[arg(long = "L")]
        l: String,
        /// Comma-separated minor-marker frequencies.
        #[arg(long)]
        p: String,
    },
    /// Vector likelihood polynomials of an RxL matrix by enumeration.
    Formulas {
        /// Rows x columns, e.g. 3x3.
        #[arg(long)]
        rl: String,
        #[arg(long, default_value_t = 2)]
        arity: usize,
    },
    /// Expected PM moments from the likelihood table. Columns: m1, m2, var_m1, var_m2.
    Moments {
        #[arg(long)]
        rl: String,
        #[arg(long, default_value_t = 2)]
        arity: usize,
        /// Minor-marker frequency; trinary uses p², 2pq, q².
        #[arg(long, default_value_t = 0.2)]
        p: f64,
    },
    /// Overall contingency χ², its table P, and permutation P values of the DV and IVs.
    /// Default matrix: the built-in 200-row 5-column reference with DV column 0.
    Fig3 {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "0")]
        dv: String,
        #[arg(long, default_value_t = 10_000)]
        dv_perms: usize,
        #[arg(long, default_value_t = 200)]
        iv_outer: usize,
        #[arg(long, default_value_t = 200)]
        iv_inner: usize,
    },
}

fn parse_rl(rl: &str) -> Result<(usize, usize)> {
    rl.split_once(['x', 'X'])
        .and_then(|(r, l)| Some((r.trim().parse().ok()?, l.trim().parse().ok()?)))
        .ok_or_else(|| CliError::Usage(format!("expected RxL, got {rl:?}")))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(|x| x.trim().parse::<T>().map_err(|_| CliError::Usage(format!("bad list value {x:?}")))).collect()
}

fn arity_name(s: usize) -> &'static str {
    if s == 2 {
        "binary"
    } else {
        "trinary"
    }
}

fn hw_freqs(p: f64, arity: usize) -> Result<Vec<f64>> {
    let q = 1.0 - p;
    match arity {
        2 => Ok(vec![p, q]),
        3 => Ok(vec![p * p, 2.0 * p * q, q * q]),
        _ => Err(CliError::Usage("arity must be 2 or 3".into())),
    }
}

/// Text of the table and its canonical golden-file name.
fn produce(what: &VerifyKind, ctx: &Ctx) -> Result<(String, String)> {
    Ok(match what {
        VerifyKind::ProbM { l, s, n, p } => {
            let mut out = String::from("m\tcount\tfreq\n");
            match p {
                Some(p) => {
                    for (m, x) in prob_m_binary_all(*l, *p)?.iter().enumerate() {
                        out.push_str(&format!("{m}\tNA\t{}\n", g6(*x)));
                    }
                    (out, format!("prob_m_L{l}_p{p}.tsv"))
                }
                None => {
                    let c = uniform_pair_counts(*l, *s, *n)?;
                    for (m, &k) in c.counts.iter().enumerate() {
                        out.push_str(&format!("{m}\t{k}\t{}\n", g6(c.prob(m))));
                    }
                    out.push_str(&format!("total\t{}\t1\n", c.total));
                    (out, format!("prob_m_L{l}_S{s}_n{n}.tsv"))
                }
            }
        }
        VerifyKind::Expr10 { l, p } => {
            let ls: Vec<usize> = parse_list(l)?;
            let ps: Vec<f64> = parse_list(p)?;
            let mut out = String::from("L\tp\tm1\tm2\tbinomial_m1\tbinomial_m2\n");
            for &l in &ls {
                for &p in &ps {
                    let d = MatchDistribution::from_probs(prob_m_binary_all(l, p)?);
                    let b = naive_binomial(l, &[p, 1.0 - p]);
                    out.push_str(&format!("{l}\t{}\t{}\t{}\t{}\t{}\n", g6(p), g6(d.m1), g6(d.m2), g6(b.m1), g6(b.m2)));
                }
            }
            (out, "expr10.tsv".into())
        }
        VerifyKind::Formulas { rl, arity } => {
            let (r, l) = parse_rl(rl)?;
            (brute_force_likelihoods(r, l, *arity)?.to_text(), format!("likelihood_{r}x{l}_{}.txt", arity_name(*arity)))
        }
        VerifyKind::Moments { rl, arity, p } => {
            let (r, l) = parse_rl(rl)?;
            let t = brute_force_likelihoods(r, l, *arity)?;
            let m = likelihood_moments(&t, &hw_freqs(*p, *arity)?);
            let out = format!("m1\tm2\tvar_m1\tvar_m2\n{}\t{}\t{}\t{}\n", g6(m.m1), g6(m.m2), g6(m.var_m1), g6(m.var_m2));
            (out, format!("moments_{r}x{l}_{}.tsv", arity_name(*arity)))
        }
        VerifyKind::Fig3 { input, dv, dv_perms, iv_outer, iv_inner } => {
            let dm = match input {
                Some(p) => parse_tsv(&read_text(p)?, Some(dv))?,
                None => fig3_matrix(),
            };
            let dvi = dm.dv().unwrap_or(0);
            let r = fig3_tests(&dm, dvi, *dv_perms, *iv_outer, *iv_inner, &ctx.rng())?;
            let mut out = String::from("test\tcolumn_id\tchi2\tdf\tp\n");
            out.push_str(&format!("table\t-\t{}\t{}\t{}\n", g6(r.chi2), r.df, g6(r.table_p)));
            out.push_str(&format!("dv\t{}\t{}\t{}\t{}\n", dm.column_id(dvi), g6(r.chi2), r.df, g6(r.dv_p)));
            for (c, p) in &r.iv_p {
                out.push_str(&format!("iv\t{}\tNA\tNA\t{}\n", dm.column_id(*c), g6(*p)));
            }
            (out, "fig3.tsv".into())
        }
    })
}

/// First line where `got` and `want` differ, 1-based, with both lines.
pub fn first_divergence(got: &str, want: &str) -> Option<(usize, String, String)> {
    let mut g = got.lines();
    let mut w = want.lines();
    let mut i = 0;
    loop {
        i += 1;
        match (g.next(), w.next()) {
            (None, None) => return None,
            (a, b) if a != b => return Some((i, a.unwrap_or("<end>").to_string(), b.unwrap_or("<end>").to_string())),
            _ => {}
        }
    }
}

pub fn run_verify(a: &VerifyArgs, ctx: &Ctx) -> Result<()> {
    let (text, name) = produce(&a.what, ctx)?;
    write_text(a.output.as_deref(), &text)?;
    if let Some(d) = &a.diff {
        let path: PathBuf = if d.is_dir() { d.join(&name) } else { d.clone() };
        let want = read_text(Path::new(&path))?;
        if let Some((line, got, exp)) = first_divergence(&text, &want) {
            return Err(CliError::Mismatch(format!("{}: line {line} differs\n  got:      {got}\n  expected: {exp}", path.display())));
        }
        eprintln!("{}: identical", path.display());
    }
    Ok(())
}
