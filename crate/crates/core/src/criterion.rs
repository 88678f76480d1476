//! Admission predicates that gate region growth.
//!
//! Two gradient costs are provided, both computed from the gradient magnitude
//! `G` at the candidate and the image-wide extrema `Gmax`/`Gmin`:
//!
//! * `Gn = G / (k * Gmax)`, admitted when `Gn < 1`;
//! * `Gm = (Gmax - G) / (Gmax - Gmin)`, admitted when `Gm > tm`.
//!
//! plus a mean-deviation test against the growing region and a conjunction.
//!
//! Textual form, shared by the CLI and the HTTP API:
//!
//! ```text
//! gn:k=0.25   gm:tm=0.8   int:t=12   and(gn:k=0.25,int:t=12)
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::Site;

pub const DEFAULT_K: f64 = 0.25;
pub const DEFAULT_TM: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub enum CriterionConfig {
    /// `|g - region mean| <= tint`.
    SimpleIntensity {
        tint: f64,
    },
    /// `G < k * Gmax`.
    GradientGn {
        k: f64,
    },
    /// `(Gmax - G) / (Gmax - Gmin) > tm`.
    GradientGm {
        tm: f64,
    },
    And(Vec<CriterionConfig>),
}

impl CriterionConfig {
    pub fn simple(tint: f64) -> Result<Self> {
        let c = CriterionConfig::SimpleIntensity { tint };
        c.validate()?;
        Ok(c)
    }

    pub fn gn(k: f64) -> Result<Self> {
        let c = CriterionConfig::GradientGn { k };
        c.validate()?;
        Ok(c)
    }

    pub fn gm(tm: f64) -> Result<Self> {
        let c = CriterionConfig::GradientGm { tm };
        c.validate()?;
        Ok(c)
    }

    pub fn and(parts: Vec<CriterionConfig>) -> Result<Self> {
        let c = CriterionConfig::And(parts);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CriterionConfig::SimpleIntensity { tint } => {
                if !(tint.is_finite() && *tint >= 0.0) {
                    return Err(Error::config(format!(
                        "int: t must be a finite value >= 0, got {tint}"
                    )));
                }
            }
            CriterionConfig::GradientGn { k } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::config(format!(
                        "gn: k must be a finite value > 0, got {k}"
                    )));
                }
            }
            CriterionConfig::GradientGm { tm } => {
                if !(*tm > 0.0 && *tm < 1.0) {
                    return Err(Error::config(format!("gm: tm must lie in (0,1), got {tm}")));
                }
            }
            CriterionConfig::And(parts) => {
                if parts.is_empty() {
                    return Err(Error::config("and(...) needs at least one criterion"));
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Whether admission depends on the running region mean.
    pub fn uses_region_mean(&self) -> bool {
        match self {
            CriterionConfig::SimpleIntensity { .. } => true,
            CriterionConfig::GradientGn { .. } | CriterionConfig::GradientGm { .. } => false,
            CriterionConfig::And(parts) => parts.iter().any(Self::uses_region_mean),
        }
    }

    /// Whether admission needs a gradient field.
    pub fn uses_gradient(&self) -> bool {
        match self {
            CriterionConfig::SimpleIntensity { .. } => false,
            CriterionConfig::GradientGn { .. } | CriterionConfig::GradientGm { .. } => true,
            CriterionConfig::And(parts) => parts.iter().any(Self::uses_gradient),
        }
    }
}

/// Everything a criterion may look at when deciding on one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissionContext {
    pub candidate: Site,
    pub region_mean: f64,
    pub intensity: f64,
    pub grad_mag: f64,
    pub gmax: f64,
    pub gmin: f64,
}

/// `G / (k * Gmax)`; zero on a flat image.
pub fn cost_gn(ctx: &AdmissionContext, k: f64) -> f64 {
    if ctx.gmax == 0.0 {
        0.0
    } else {
        ctx.grad_mag / (k * ctx.gmax)
    }
}

/// `(Gmax - G) / (Gmax - Gmin)`; one when the gradient field is uniform.
pub fn cost_gm(ctx: &AdmissionContext) -> f64 {
    if ctx.gmax == ctx.gmin {
        1.0
    } else {
        (ctx.gmax - ctx.grad_mag) / (ctx.gmax - ctx.gmin)
    }
}

pub fn admit(cfg: &CriterionConfig, ctx: &AdmissionContext) -> bool {
    match cfg {
        CriterionConfig::SimpleIntensity { tint } => {
            (ctx.intensity - ctx.region_mean).abs() <= *tint
        }
        // strict: G == k*Gmax is rejected
        CriterionConfig::GradientGn { k } => cost_gn(ctx, *k) < 1.0,
        CriterionConfig::GradientGm { tm } => cost_gm(ctx) > *tm,
        CriterionConfig::And(parts) => parts.iter().all(|p| admit(p, ctx)),
    }
}

impl fmt::Display for CriterionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriterionConfig::SimpleIntensity { tint } => write!(f, "int:t={tint}"),
            CriterionConfig::GradientGn { k } => write!(f, "gn:k={k}"),
            CriterionConfig::GradientGm { tm } => write!(f, "gm:tm={tm}"),
            CriterionConfig::And(parts) => {
                f.write_str("and(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for CriterionConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, pos: 0 };
        let c = p.criterion()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("unexpected trailing input"));
        }
        c.validate()?;
        Ok(c)
    }
}

impl Serialize for CriterionConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CriterionConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::config(format!(
            "criterion `{}`: {msg} at column {}",
            self.src,
            self.pos + 1
        ))
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
            .unwrap_or(self.rest().len());
        self.pos += len;
        &self.src[start..start + len]
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(self.rest().len());
        let text = &self.rest()[..len];
        let v: f64 = text
            .parse()
            .map_err(|_| self.error(&format!("invalid number `{text}`")))?;
        self.pos += len;
        Ok(v)
    }

    fn criterion(&mut self) -> Result<CriterionConfig> {
        let name = self.ident().to_ascii_lowercase();
        match name.as_str() {
            "and" => {
                if !self.eat('(') {
                    return Err(self.error("expected `(` after and"));
                }
                let mut parts = vec![self.criterion()?];
                while self.eat(',') {
                    parts.push(self.criterion()?);
                }
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(CriterionConfig::And(parts))
            }
            "gn" => {
                let k = self.param(&["k"])?.unwrap_or(DEFAULT_K);
                Ok(CriterionConfig::GradientGn { k })
            }
            "gm" => {
                let tm = self.param(&["tm"])?.unwrap_or(DEFAULT_TM);
                Ok(CriterionConfig::GradientGm { tm })
            }
            "int" => {
                let tint = self
                    .param(&["t", "tint"])?
                    .ok_or_else(|| self.error("int requires t=<value>"))?;
                Ok(CriterionConfig::SimpleIntensity { tint })
            }
            "" => Err(self.error("expected a criterion (gn, gm, int or and)")),
            other => Err(self.error(&format!("unknown criterion `{other}`"))),
        }
    }

    /// Optional `:key=value` suffix.
    fn param(&mut self, keys: &[&str]) -> Result<Option<f64>> {
        if !self.eat(':') {
            return Ok(None);
        }
        let key = self.ident().to_ascii_lowercase();
        if !keys.contains(&key.as_str()) {
            return Err(self.error(&format!("unknown parameter `{key}` (expected {})", keys[0])));
        }
        if !self.eat('=') {
            return Err(self.error("expected `=`"));
        }
        self.number().map(Some)
    }
}
