//! Matrix, source-set, sidecar and config files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use pas_core::matrix::parse_tsv;
use pas_core::simulate::{BlockSourceSet, ModelDM, ModelKind};
use pas_core::{Arity, DataMatrix, FrequencyScheme};

use crate::error::{CliError, Result};

/// Reads a file, or stdin for `-`.
pub fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::io("<stdin>", e))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes to a file, or stdout when `path` is `None`.
pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn load_dm(path: &Path, dv: Option<&str>) -> Result<DataMatrix> {
    Ok(parse_tsv(&read_text(path)?, dv)?)
}

pub fn load_source(path: &Path) -> Result<BlockSourceSet> {
    Ok(BlockSourceSet::parse(&read_text(path)?)?)
}

/// Flat `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn sidecar_path(tsv: &Path) -> PathBuf {
    let mut s = tsv.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn arity_name(a: Arity) -> &'static str {
    match a {
        Arity::Binary => "binary",
        Arity::TrinaryHw => "trinary-hw",
    }
}

pub fn parse_arity(s: &str) -> Result<Arity> {
    match s {
        "binary" | "2" => Ok(Arity::Binary),
        "trinary-hw" | "trinary" | "3" => Ok(Arity::TrinaryHw),
        _ => Err(CliError::Usage(format!("unknown arity {s:?}"))),
    }
}

/// Sidecar metadata of a model matrix.
pub fn model_sidecar(model: &ModelDM, seed: u64) -> String {
    let mut s = format!("kind={}\n", model.kind.name());
    if let Some(c) = model.cutoff {
        s.push_str(&format!("cutoff={c}\n"));
    }
    if let Some(sc) = &model.scheme {
        s.push_str(&format!("scheme={sc}\narity={}\n", arity_name(sc.arity())));
    }
    if let Some(dv) = model.matrix.dv() {
        s.push_str(&format!("dv={dv}\n"));
    }
    if !model.pvalues.is_empty() {
        let p: Vec<String> = model.pvalues.iter().map(|p| p.to_string()).collect();
        s.push_str(&format!("pvalues={}\n", p.join(",")));
    }
    s.push_str(&format!("seed={seed}\n"));
    s
}

/// Writes the model TSV (with header) and its sidecar next to it.
pub fn save_model(path: &Path, model: &ModelDM, seed: u64) -> Result<()> {
    write_text(Some(path), &model.matrix.to_tsv(true))?;
    write_text(Some(&sidecar_path(path)), &model_sidecar(model, seed))
}

/// Reads a model TSV, taking the DV from its sidecar when one exists.
pub fn load_model(path: &Path) -> Result<ModelDM> {
    let side = sidecar_path(path);
    let meta = if side.exists() { parse_key_values(&read_text(&side)?)? } else { BTreeMap::new() };
    let matrix = load_dm(path, meta.get("dv").map(String::as_str))?;
    let kind = match meta.get("kind") {
        Some(k) => ModelKind::parse(k)?,
        None if matrix.dv().is_some() => ModelKind::DvMarginal,
        None => ModelKind::Columns,
    };
    let scheme = match (meta.get("scheme"), meta.get("arity")) {
        (Some(s), a) => Some(FrequencyScheme::parse(s, parse_arity(a.map_or("binary", String::as_str))?)?),
        _ => None,
    };
    let cutoff = meta.get("cutoff").map(|c| c.parse::<f64>()).transpose().map_err(|e| CliError::Usage(e.to_string()))?;
    let pvalues = match meta.get("pvalues") {
        Some(p) => p.split(',').map(|x| x.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| CliError::Usage(e.to_string()))?,
        None => Vec::new(),
    };
    Ok(ModelDM { matrix, kind, cutoff, pvalues, scheme })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pas_core::simulate::pure_nway;

    #[test]
    fn key_values() {
        let m = parse_key_values("# c\nperms = 50\n\nseed=7\n").unwrap();
        assert_eq!(m["perms"], "50");
        assert_eq!(m["seed"], "7");
        assert!(parse_key_values("oops").is_err());
    }

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        let mut m = pure_nway(3, 2).unwrap();
        m.cutoff = Some(0.05);
        m.pvalues = vec![0.01, 0.02];
        save_model(&p, &m, 9).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back.matrix.columns(), m.matrix.columns());
        assert_eq!(back.kind, m.kind);
        assert_eq!(back.cutoff, Some(0.05));
        assert_eq!(back.pvalues, vec![0.01, 0.02]);
    }
}
