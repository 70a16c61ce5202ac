//! Run configuration: a flat JSON document whose every field has a default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use choquard::regimes::{classify_exact, parse_rational};
use choquard::{GridSpec, ProblemParams, RegimeLabel, SolverOptions, ZeroModePolicy};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// An exponent given either as a JSON number or as an exact string such as `"7/3"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Number(f64),
    Exact(String),
}

impl Exponent {
    pub fn value(&self) -> Result<f64> {
        match self {
            Exponent::Number(v) => Ok(*v),
            Exponent::Exact(s) => {
                let r = parse_rational(s)?;
                Ok(*r.numer() as f64 / *r.denom() as f64)
            }
        }
    }

    pub fn exact(&self) -> Option<Ratio<i64>> {
        match self {
            Exponent::Number(_) => None,
            Exponent::Exact(s) => parse_rational(s).ok(),
        }
    }

    /// Exact value, reading a JSON number as the shortest decimal that round-trips.
    pub fn as_rational(&self) -> Option<Ratio<i64>> {
        match self {
            Exponent::Number(v) => parse_rational(&v.to_string()).ok(),
            Exponent::Exact(_) => self.exact(),
        }
    }
}

impl From<f64> for Exponent {
    fn from(v: f64) -> Self {
        Exponent::Number(v)
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Number(v) => write!(f, "{v}"),
            Exponent::Exact(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub n: usize,
    pub alpha: Exponent,
    pub s: Exponent,
    pub p: Exponent,
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            n: 3,
            alpha: Exponent::Number(2.0),
            s: Exponent::Number(0.5),
            p: Exponent::Number(1.8),
            lambda: 0.05,
            mu: 1.0,
            tau: 1.0,
        }
    }
}

impl ParamsConfig {
    pub fn build(&self) -> Result<ProblemParams<f64>> {
        Ok(ProblemParams::new(
            self.n,
            self.alpha.value()?,
            self.s.value()?,
            self.p.value()?,
            self.lambda,
            self.mu,
            self.tau,
        )?)
    }

    /// Exact label when `p` is a rational string (`α` and `s` are then read
    /// exactly too), else the floating-point label.
    pub fn classify(&self) -> Result<(RegimeLabel, bool)> {
        if self.p.exact().is_none() {
            return Ok((choquard::regimes::classify(&self.build()?)?, false));
        }
        match (self.alpha.as_rational(), self.s.as_rational(), self.p.exact()) {
            (Some(a), Some(s), Some(p)) => Ok((classify_exact(self.n, a, s, p)?, true)),
            _ => Ok((choquard::regimes::classify(&self.build()?)?, false)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: 32, length: 16.0 }
    }
}

impl GridConfig {
    pub fn build(&self, dim: usize) -> Result<GridSpec<f64>> {
        Ok(GridSpec::new(dim, self.points, self.length)?)
    }
}

/// Axis lists for `sweep`; an empty list keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub p: Vec<Exponent>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub tau: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    #[default]
    Full,
    Oracle1d,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub suite: Suite,
    /// Test hook: perturb the Riesz multiplier used by the spectral path.
    pub corrupt_multiplier: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsConfig,
    pub grid: GridConfig,
    pub solver: SolverOptions<f64>,
    pub zero_mode: ZeroModePolicy<f64>,
    pub dealias: bool,
    pub seed: u64,
    pub workers: usize,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    /// G-N constant for the thresholds; estimated on the grid when absent.
    pub c_np: Option<f64>,
    pub sweep: SweepAxes,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ParamsConfig::default(),
            grid: GridConfig::default(),
            solver: SolverOptions::default(),
            zero_mode: ZeroModePolicy::default(),
            dealias: false,
            seed: 0,
            workers: 1,
            out: PathBuf::from("out"),
            c_np: None,
            sweep: SweepAxes::default(),
            verify: VerifyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| anyhow::anyhow!("line {}, column {}: {e}", e.line(), e.column()))?;
        Ok(cfg)
    }

    /// Checks every nested invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        self.params.build().context("params")?;
        self.grid.build(self.params.n).context("grid")?;
        self.solver.validate().context("solver")?;
        if self.workers == 0 {
            bail!("workers: must be at least 1");
        }
        if let Some(c) = self.c_np {
            if !(c > 0.0 && c.is_finite()) {
                bail!("c_np: must be positive, got {c}");
            }
        }
        for (i, p) in self.sweep.p.iter().enumerate() {
            p.value().with_context(|| format!("sweep.p[{i}]"))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn exact_exponent_strings() {
        let c = RunConfig::from_json(r#"{"params": {"p": "5/3"}}"#).unwrap();
        assert_eq!(c.params.p.exact(), Some(Ratio::new(5, 3)));
        let (label, exact) = c.params.classify().unwrap();
        assert_eq!(label, RegimeLabel::LowerCritical);
        assert!(exact);
        let c = RunConfig::from_json(r#"{"params": {"p": 1.8}}"#).unwrap();
        assert_eq!(c.params.classify().unwrap(), (RegimeLabel::ExistenceWindow, false));
    }

    #[test]
    fn malformed_documents_report_position() {
        let err = RunConfig::from_json("{\n  \"grid\": {\"points\": }\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let c = RunConfig::from_json(r#"{"params": {"alpha": 3.0}}"#).unwrap();
        let msg = format!("{:#}", c.validate().unwrap_err());
        assert!(msg.contains("alpha"), "{msg}");
        let c = RunConfig::from_json(r#"{"grid": {"points": 30}}"#).unwrap();
        assert!(format!("{:#}", c.validate().unwrap_err()).contains("power of two"));
    }
}
