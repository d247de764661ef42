//! Run configuration in TOML.
//!
//! ```toml
//! seed = 7
//! replicas = 200000
//! threads = 4
//! out = "runs/mdm"
//! mode = "mc"            # mc | oracle | both
//!
//! [model]
//! kind = "mdm"           # rwrs | mdm | ks
//! p = 0.3333333333333333
//!
//! [grid]
//! lo = 8                 # 2^lo .. 2^hi
//! hi = 16
//! ```
//!
//! An RWRS model names its walk and scenery:
//!
//! ```toml
//! [model]
//! kind = "rwrs"
//! walk = { kind = "lazy", p = 0.25 }
//! scenery = { kind = "zipf", beta = 0.5 }
//! ```
//!
//! Every key can be overridden with a dotted path, e.g. `model.walk.p=0.5`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::estimators::dyadic_grid;
use crate::experiments::ExperimentModel;
use crate::ks_limit::{KsEstimator, KsGrid};
use crate::rwrs::RwrsModel;
use crate::samplers::{SceneryDist, StableParams, WalkIncrementDist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Mc,
    Oracle,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WalkSpec {
    Simple,
    Lazy { p: f64 },
    Heavy { alpha: f64 },
}

impl WalkSpec {
    pub fn build(&self) -> Result<WalkIncrementDist> {
        match *self {
            Self::Simple => Ok(WalkIncrementDist::Simple),
            Self::Lazy { p } => WalkIncrementDist::lazy(p),
            Self::Heavy { alpha } => WalkIncrementDist::heavy_tail(alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScenerySpec {
    Rademacher,
    Ternary { q: f64 },
    Zipf { beta: f64 },
    Gaussian { sd: f64 },
}

impl ScenerySpec {
    pub fn build(&self) -> Result<SceneryDist> {
        match *self {
            Self::Rademacher => Ok(SceneryDist::Rademacher),
            Self::Ternary { q } => SceneryDist::ternary(q),
            Self::Zipf { beta } => SceneryDist::symmetric_zipf(beta),
            Self::Gaussian { sd } => SceneryDist::gaussian(sd),
        }
    }
}

fn default_walk() -> WalkSpec {
    WalkSpec::Simple
}

fn default_scenery() -> ScenerySpec {
    ScenerySpec::Rademacher
}

fn default_p() -> f64 {
    1.0 / 3.0
}

fn default_estimator() -> String {
    KsEstimator::NormalizedRwrs.id().to_string()
}

fn default_two() -> f64 {
    2.0
}

fn default_a1() -> f64 {
    0.5
}

fn default_ks_m() -> Vec<u64> {
    vec![1 << 12, 1 << 14, 1 << 16]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Rwrs {
        #[serde(default = "default_walk")]
        walk: WalkSpec,
        #[serde(default = "default_scenery")]
        scenery: ScenerySpec,
    },
    Mdm {
        #[serde(default = "default_p")]
        p: f64,
    },
    Ks {
        #[serde(default = "default_estimator")]
        estimator: String,
        #[serde(default = "default_two")]
        alpha: f64,
        /// Law of `U(1)`: index, scale and skew.
        #[serde(default = "default_two")]
        beta: f64,
        #[serde(default = "default_a1")]
        a1: f64,
        #[serde(default)]
        a2: f64,
        /// Resolutions, increasing; three on a geometric grid enable extrapolation.
        #[serde(default = "default_ks_m")]
        m: Vec<u64>,
        /// MdM layer probability for the derived constants.
        #[serde(default = "default_p")]
        p: f64,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::Rwrs {
            walk: default_walk(),
            scenery: default_scenery(),
        }
    }
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Rwrs { .. } => "rwrs",
            Self::Mdm { .. } => "mdm",
            Self::Ks { .. } => "ks",
        }
    }

    /// The model as an experiment subject; `ks` models are not one.
    pub fn experiment_model(&self) -> Result<ExperimentModel> {
        match self {
            Self::Rwrs { walk, scenery } => Ok(ExperimentModel::Rwrs(RwrsModel::new(walk.build()?, scenery.build()?)?)),
            Self::Mdm { p } => {
                crate::mdm::MdmConfig::new(*p, 1)?;
                Ok(ExperimentModel::Mdm { p: *p })
            }
            Self::Ks { .. } => Err(Error::Config("this command needs an rwrs or mdm model".into())),
        }
    }

    /// The coarsest `KsGrid` and the list of resolutions.
    pub fn ks_grid(&self) -> Result<(KsGrid, Vec<u64>)> {
        match self {
            Self::Ks {
                estimator,
                alpha,
                beta,
                a1,
                a2,
                m,
                ..
            } => {
                let est = KsEstimator::parse(estimator)?;
                let law = StableParams::new(*beta, *a1, *a2)?;
                let first = *m.first().ok_or_else(|| Error::Config("ks model needs at least one m".into()))?;
                Ok((KsGrid::new(first, *alpha, law, est)?, m.clone()))
            }
            _ => Err(Error::Config("this command needs a ks model".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_lo")]
    pub lo: u32,
    #[serde(default = "default_hi")]
    pub hi: u32,
    /// Explicit grid; overrides `lo`/`hi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<u64>>,
}

fn default_lo() -> u32 {
    8
}

fn default_hi() -> u32 {
    16
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: default_lo(),
            hi: default_hi(),
            points: None,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<u64>> {
        let pts = match &self.points {
            Some(p) => p.clone(),
            None => {
                if self.lo > self.hi || self.hi > 40 {
                    return Err(Error::Config(format!("grid needs lo <= hi <= 40, got {}..{}", self.lo, self.hi)));
                }
                dyadic_grid(self.lo, self.hi)
            }
        };
        if pts.is_empty() || pts[0] == 0 || pts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("grid points must be positive and strictly increasing".into()));
        }
        Ok(pts)
    }
}

fn default_seed() -> u64 {
    1
}

fn default_replicas() -> u64 {
    10_000
}

fn default_threads() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_oracle_n() -> usize {
    8
}

fn default_budget() -> u64 {
    crate::oracle::DEFAULT_BUDGET as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: GridSpec,
    /// `[lo, hi]` on the grid; defaults to dropping the two lowest octaves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[u64; 2]>,
    /// Track the two-dimensional MdM range (costs a hash set per replica).
    #[serde(default)]
    pub track_full_range: bool,
    /// Horizon of exact enumeration.
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    /// Largest number of enumerated configurations.
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// Keep per-replica records in `simulate`.
    #[serde(default)]
    pub per_replica: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_table(Table::new()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn from_table(mut table: Table) -> Result<Self> {
        if let Some(Value::Table(model)) = table.get_mut("model") {
            model.entry("kind").or_insert_with(|| Value::String("rwrs".into()));
        }
        let cfg: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses TOML text, applies `key=value` overrides and fills defaults.
    pub fn load(text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match text {
            Some(t) => parse_table(t)?,
            None => Table::new(),
        };
        for (k, v) in overrides {
            set_path(&mut table, k, parse_value(v))?;
        }
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be positive".into()));
        }
        self.grid.points()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn run_spec(&self) -> crate::ensemble::RunSpec {
        crate::ensemble::RunSpec::new(self.seed, self.replicas).threads(self.threads)
    }

    pub fn fit_window(&self) -> Option<(u64, u64)> {
        self.fit_window.map(|[a, b]| (a, b))
    }
}

/// Parses TOML, reporting the line of any syntax error.
pub fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        match line {
            Some(l) => Error::Config(format!("line {l}: {}", e.message())),
            None => Error::Config(e.message().to_string()),
        }
    })
}

/// A TOML literal if `raw` parses as one, otherwise a string.
pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `a.b.c = value`, creating intermediate tables.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("invalid key {path:?}")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{k} in {path:?} is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_filled() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.model, ModelSpec::default());
        assert_eq!(c.grid.points().unwrap(), dyadic_grid(8, 16));
        assert_eq!(c.mode, Mode::Mc);
    }

    #[test]
    fn models_parse() {
        let text = r#"
seed = 9
replicas = 50
[model]
kind = "rwrs"
walk = { kind = "lazy", p = 0.25 }
scenery = { kind = "zipf", beta = 0.5 }
[grid]
points = [4, 8, 16, 32]
"#;
        let c = RunConfig::load(Some(text), &[]).unwrap();
        assert_eq!(
            c.model,
            ModelSpec::Rwrs {
                walk: WalkSpec::Lazy { p: 0.25 },
                scenery: ScenerySpec::Zipf { beta: 0.5 }
            }
        );
        assert!(c.model.experiment_model().is_ok());
        assert_eq!(c.grid.points().unwrap(), vec![4, 8, 16, 32]);
        let ks = RunConfig::load(Some("[model]\nkind = \"ks\"\n"), &[]).unwrap();
        let (grid, ms) = ks.model.ks_grid().unwrap();
        assert_eq!(ms, vec![4096, 16384, 65536]);
        assert_eq!(grid.estimator, KsEstimator::NormalizedRwrs);
    }

    #[test]
    fn overrides_apply() {
        let sets = vec![
            parse_override("model.kind=mdm").unwrap(),
            parse_override("model.p=0.5").unwrap(),
            parse_override("seed = 4").unwrap(),
            parse_override("out=some/dir").unwrap(),
        ];
        let c = RunConfig::load(None, &sets).unwrap();
        assert_eq!(c.model, ModelSpec::Mdm { p: 0.5 });
        assert_eq!(c.seed, 4);
        assert_eq!(c.out, PathBuf::from("some/dir"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::load(Some("seed = 1\nreplicas = = 3\n"), &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(RunConfig::load(Some("replicas = 0"), &[]).is_err());
        assert!(RunConfig::load(Some("bogus = 1"), &[]).is_err());
        let bad_walk = "[model]\nkind = \"rwrs\"\nwalk = { kind = \"lazy\" }\n";
        assert!(RunConfig::load(Some(bad_walk), &[]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = RunConfig::load(Some("[model]\nkind = \"mdm\"\n"), &[]).unwrap();
        let text = c.to_toml().unwrap();
        let back = RunConfig::load(Some(&text), &[]).unwrap();
        assert_eq!(c, back);
    }
}
