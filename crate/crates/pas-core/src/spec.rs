//! Score names such as `mom1iz`, `chix-ij` or `dvmom2ik`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dvscores::{DvChixMode, DvConditioning};
use crate::error::{invalid, Result};
use crate::scores::{ChixMode, Conditioning};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MomCond {
    M,
    I,
    /// Per-marker Z values summed.
    Iz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DvMomCond {
    Plain,
    PlainI,
    PlainIz,
    MM,
    Ik,
    /// Per-(i,k) Z values summed.
    Ikz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LkKind {
    /// −log LKx.
    Lkx,
    /// −log LKm.
    Lkm,
    /// log maxLKm.
    MaxLkm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScoreSpec {
    Mom { n: u32, cond: MomCond },
    Chix(ChixMode),
    Lk(LkKind),
    Ks(Conditioning),
    DvMom { n: u32, cond: DvMomCond },
    DvChix(DvChixMode),
    DvLk(LkKind),
    DvKs(Conditioning),
}

impl ScoreSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let t: String = text.trim().to_ascii_lowercase().chars().filter(|c| !matches!(c, '-' | '_')).collect();
        let (dv, body) = match t.strip_prefix("dv") {
            Some(rest) => (true, rest),
            None => (false, t.as_str()),
        };
        let lk = |b: &str| match b {
            "lkx" => Some(LkKind::Lkx),
            "lkm" => Some(LkKind::Lkm),
            "maxlkm" => Some(LkKind::MaxLkm),
            _ => None,
        };
        if let Some(k) = lk(body) {
            return Ok(if dv { ScoreSpec::DvLk(k) } else { ScoreSpec::Lk(k) });
        }
        if let Some(rest) = body.strip_prefix("mom") {
            let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
            let n: u32 = digits.parse().map_err(|_| crate::Error::Invalid(format!("missing moment order in {text:?}")))?;
            if n == 0 {
                return invalid("moment order must be at least 1");
            }
            let suffix = &rest[digits.len()..];
            return if dv {
                let cond = match suffix {
                    "" | "m" => DvMomCond::Plain,
                    "i" => DvMomCond::PlainI,
                    "iz" => DvMomCond::PlainIz,
                    "mm" => DvMomCond::MM,
                    "ik" => DvMomCond::Ik,
                    "ikz" => DvMomCond::Ikz,
                    _ => return invalid(format!("unknown dv moment conditioning in {text:?}")),
                };
                Ok(ScoreSpec::DvMom { n, cond })
            } else {
                let cond = match suffix {
                    "" | "m" => MomCond::M,
                    "i" => MomCond::I,
                    "iz" => MomCond::Iz,
                    _ => return invalid(format!("unknown moment conditioning in {text:?}")),
                };
                Ok(ScoreSpec::Mom { n, cond })
            };
        }
        if let Some(rest) = body.strip_prefix("chix") {
            return match (dv, rest) {
                (false, "" | "m") => Ok(ScoreSpec::Chix(ChixMode::M)),
                (false, "ij") => Ok(ScoreSpec::Chix(ChixMode::Ij)),
                (true, "" | "mm") => Ok(ScoreSpec::DvChix(DvChixMode::MM)),
                (true, "ijkl") => Ok(ScoreSpec::DvChix(DvChixMode::Ijkl)),
                _ => invalid(format!("unknown CHIx mode in {text:?}")),
            };
        }
        if let Some(rest) = body.strip_prefix("ks") {
            let c = match rest {
                "" | "m" => Conditioning::M,
                "i" => Conditioning::I,
                _ => return invalid(format!("unknown KS mode in {text:?}")),
            };
            return Ok(if dv { ScoreSpec::DvKs(c) } else { ScoreSpec::Ks(c) });
        }
        invalid(format!("unknown score {text:?}"))
    }

    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        text.split(',').filter(|s| !s.trim().is_empty()).map(Self::parse).collect()
    }

    /// True for scores whose null comes from permuting the DV.
    pub fn is_dv(&self) -> bool {
        matches!(self, ScoreSpec::DvMom { .. } | ScoreSpec::DvChix(_) | ScoreSpec::DvLk(_) | ScoreSpec::DvKs(_))
    }

    pub fn is_ks(&self) -> bool {
        matches!(self, ScoreSpec::Ks(_) | ScoreSpec::DvKs(_))
    }

    /// True when per-cell Z values are summed rather than raw values.
    pub fn z_sum(&self) -> bool {
        matches!(
            self,
            ScoreSpec::Mom { cond: MomCond::Iz, .. } | ScoreSpec::DvMom { cond: DvMomCond::PlainIz | DvMomCond::Ikz, .. }
        )
    }

    pub fn dv_conditioning(cond: DvMomCond) -> DvConditioning {
        match cond {
            DvMomCond::Plain => DvConditioning::Plain,
            DvMomCond::PlainI | DvMomCond::PlainIz => DvConditioning::PlainI,
            DvMomCond::MM => DvConditioning::MM,
            DvMomCond::Ik | DvMomCond::Ikz => DvConditioning::Ik,
        }
    }
}

impl core::fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let lk = |k: &LkKind| match k {
            LkKind::Lkx => "lkx",
            LkKind::Lkm => "lkm",
            LkKind::MaxLkm => "maxlkm",
        };
        match self {
            ScoreSpec::Mom { n, cond } => {
                let c = match cond {
                    MomCond::M => "",
                    MomCond::I => "i",
                    MomCond::Iz => "iz",
                };
                write!(f, "mom{n}{c}")
            }
            ScoreSpec::Chix(ChixMode::M) => f.write_str("chix-m"),
            ScoreSpec::Chix(ChixMode::Ij) => f.write_str("chix-ij"),
            ScoreSpec::Lk(k) => f.write_str(lk(k)),
            ScoreSpec::Ks(Conditioning::M) => f.write_str("ks-m"),
            ScoreSpec::Ks(Conditioning::I) => f.write_str("ks-i"),
            ScoreSpec::DvMom { n, cond } => {
                let c = match cond {
                    DvMomCond::Plain => "",
                    DvMomCond::PlainI => "i",
                    DvMomCond::PlainIz => "iz",
                    DvMomCond::MM => "mm",
                    DvMomCond::Ik => "ik",
                    DvMomCond::Ikz => "ikz",
                };
                write!(f, "dvmom{n}{c}")
            }
            ScoreSpec::DvChix(DvChixMode::MM) => f.write_str("dvchix-mm"),
            ScoreSpec::DvChix(DvChixMode::Ijkl) => f.write_str("dvchix-ijkl"),
            ScoreSpec::DvLk(k) => write!(f, "dv{}", lk(k)),
            ScoreSpec::DvKs(Conditioning::M) => f.write_str("dvks-m"),
            ScoreSpec::DvKs(Conditioning::I) => f.write_str("dvks-i"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn round_trip_names() {
        for name in [
            "mom1", "mom2i", "mom1iz", "chix-m", "chix-ij", "lkx", "lkm", "maxlkm", "ks-m", "ks-i", "dvmom1", "dvmom2i",
            "dvmom1iz", "dvmom1mm", "dvmom1ik", "dvmom3ikz", "dvchix-mm", "dvchix-ijkl", "dvlkx", "dvmaxlkm", "dvks-i",
        ] {
            let s = ScoreSpec::parse(name).unwrap();
            assert_eq!(s.to_string(), name);
        }
    }

    #[test]
    fn loose_spellings() {
        assert_eq!(ScoreSpec::parse("Mom1-M").unwrap(), ScoreSpec::Mom { n: 1, cond: MomCond::M });
        assert_eq!(ScoreSpec::parse("dvCHIx_ijkl").unwrap(), ScoreSpec::DvChix(DvChixMode::Ijkl));
        assert!(ScoreSpec::parse("mom0").is_err());
        assert!(ScoreSpec::parse("chix-ijkl").is_err());
        assert!(ScoreSpec::parse("foo").is_err());
    }
}
