//! Experiment configuration files.
//!
//! A config is a TOML document:
//!
//! ```toml
//! name = "grid-correlational"
//! algorithm = "correlational"  # brute-force | greedy | correlational | first-phase-only | fixed-mask
//! lambda = 0.1
//! n_trials = 50
//! seed = 0
//! # fixed_mask = "full"        # "full", "empty" or "{0,2}"; fixed-mask only
//!
//! [domain]
//! preset = "gridworld-small"
//! [domain.overrides]
//! crash_penalty = 2.0
//!
//! [search]                      # every key optional
//! n_rollouts = 500
//! cost = "cardinality"          # or "planner-wall-time"
//! [search.planner]
//! epsilon = 1e-4
//! timeout_secs = 60.0
//!
//! [correlational]
//! tau_correl = 1e-5
//! tau_variance = 0.0
//! n1 = 250
//! n2 = 5
//!
//! [datasets]                    # optional cached rollouts, see `exomask collect`
//! exo = "exo.csv"
//! full = "full.csv"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use exomask_core::domains::DomainSpec;
use exomask_core::search::{CorrelationalParams, SearchParams};
use exomask_core::Mask;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    BruteForce,
    Greedy,
    Correlational,
    FirstPhaseOnly,
    FixedMask,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::BruteForce,
        Algorithm::Greedy,
        Algorithm::Correlational,
        Algorithm::FirstPhaseOnly,
        Algorithm::FixedMask,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::BruteForce => "brute-force",
            Algorithm::Greedy => "greedy",
            Algorithm::Correlational => "correlational",
            Algorithm::FirstPhaseOnly => "first-phase-only",
            Algorithm::FixedMask => "fixed-mask",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown algorithm `{s}`")))
    }
}

/// A mask written without knowing `m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MaskChoice {
    Full,
    Empty,
    Indices(Vec<usize>),
}

impl MaskChoice {
    pub fn resolve(&self, m: usize) -> exomask_core::Result<Mask> {
        match self {
            MaskChoice::Full => Ok(Mask::full(m)),
            MaskChoice::Empty => Ok(Mask::empty()),
            MaskChoice::Indices(ix) => Mask::new(ix.iter().copied(), m),
        }
    }
}

impl From<MaskChoice> for String {
    fn from(c: MaskChoice) -> String {
        match c {
            MaskChoice::Full => "full".into(),
            MaskChoice::Empty => "empty".into(),
            MaskChoice::Indices(ix) => {
                let parts: Vec<String> = ix.iter().map(|i| i.to_string()).collect();
                format!("{{{}}}", parts.join(","))
            }
        }
    }
}

impl TryFrom<String> for MaskChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.trim() {
            "full" => Ok(MaskChoice::Full),
            "empty" => Ok(MaskChoice::Empty),
            other => {
                let inner = other.trim_start_matches('{').trim_end_matches('}');
                let ix = inner
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| p.parse::<usize>().map_err(|e| format!("bad mask `{s}`: {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(MaskChoice::Indices(ix))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub preset: String,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub overrides: toml::Table,
}

impl DomainConfig {
    /// The preset spec with overrides applied on top.
    pub fn resolve(&self) -> Result<DomainSpec, BenchError> {
        let base = DomainSpec::preset(&self.preset)
            .ok_or_else(|| BenchError::Config(format!("unknown domain preset `{}`", self.preset)))?;
        if self.overrides.is_empty() {
            return Ok(base);
        }
        let mut value = toml::Value::try_from(&base).map_err(|e| BenchError::Config(e.to_string()))?;
        let table = value.as_table_mut().expect("domain specs serialize to tables");
        for (k, v) in &self.overrides {
            if k == "kind" {
                return Err(BenchError::Config("the domain kind cannot be overridden".into()));
            }
            table.insert(k.clone(), v.clone());
        }
        value
            .try_into()
            .map_err(|e: toml::de::Error| BenchError::Config(format!("domain overrides: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_mask: Option<MaskChoice>,
    pub domain: DomainConfig,
    #[serde(default)]
    pub search: SearchParams,
    #[serde(default)]
    pub correlational: CorrelationalParams,
    /// Cached model-fitting datasets shared by every trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datasets: Option<DatasetFiles>,
}

/// Paths to CSV datasets written by `exomask collect`. Relative paths are
/// resolved against the config file's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFiles {
    pub exo: PathBuf,
    pub full: PathBuf,
}

fn default_trials() -> usize {
    50
}

impl ExperimentConfig {
    pub fn new(preset: &str, algorithm: Algorithm) -> Self {
        ExperimentConfig {
            name: String::new(),
            algorithm,
            lambda: 0.0,
            n_trials: default_trials(),
            seed: 0,
            fixed_mask: None,
            domain: DomainConfig {
                preset: preset.into(),
                overrides: toml::Table::new(),
            },
            search: SearchParams::default(),
            correlational: CorrelationalParams::default(),
            datasets: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses `text` after setting each dotted `key = value` override.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, BenchError> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        for (key, raw) in overrides {
            set_dotted(&mut doc, key, parse_value(raw))?;
        }
        let config: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut config = Self::parse_with_overrides(&text, overrides)?;
        if config.name.is_empty() {
            config.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        if let (Some(files), Some(dir)) = (config.datasets.as_mut(), path.parent()) {
            files.exo = dir.join(&files.exo);
            files.full = dir.join(&files.full);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: &str| Err(BenchError::Config(msg.into()));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be a finite non-negative number");
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        let s = &self.search;
        for (name, v) in [
            ("search.n_rollouts", s.n_rollouts),
            ("search.exo_rollouts", s.exo_rollouts),
            ("search.exo_horizon", s.exo_horizon),
            ("search.full_rollouts", s.full_rollouts),
            ("search.full_horizon", s.full_horizon),
            ("search.mi_rollouts", s.mi_rollouts),
            ("search.mi_horizon", s.mi_horizon),
            ("correlational.n1", self.correlational.n1),
        ] {
            if v == 0 {
                return Err(BenchError::Config(format!("{name} must be at least 1")));
            }
        }
        if s.horizon == Some(0) {
            return bad("search.horizon must be at least 1");
        }
        if self.correlational.n2 < 2 {
            return bad("correlational.n2 must be at least 2");
        }
        if !(s.planner.epsilon > 0.0) || !(s.planner.timeout_secs > 0.0) {
            return bad("planner epsilon and timeout must be positive");
        }
        match (self.algorithm, &self.fixed_mask) {
            (Algorithm::FixedMask, None) => return bad("fixed-mask needs `fixed_mask`"),
            (a, Some(_)) if a != Algorithm::FixedMask => {
                return bad("`fixed_mask` is only used by the fixed-mask algorithm")
            }
            _ => {}
        }
        let mdp = self.domain.resolve()?.build()?;
        if let Some(choice) = &self.fixed_mask {
            choice.resolve(mdp.m())?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize to TOML")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), BenchError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty());
    let Some(last) = last else {
        return Err(BenchError::Config(format!("bad override key `{key}`")));
    };
    let mut table = doc;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| BenchError::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
algorithm = "correlational"
lambda = 0.1
n_trials = 3
seed = 42

[domain]
preset = "crowd-desk"
[domain.overrides]
goal = 0

[search]
n_rollouts = 100
[search.planner]
epsilon = 1e-5

[correlational]
n1 = 50
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.algorithm, Algorithm::Correlational);
        assert_eq!(c.search.n_rollouts, 100);
        assert_eq!(c.search.exo_rollouts, 1000);
        assert_eq!(c.search.planner.epsilon, 1e-5);
        assert_eq!(c.search.planner.timeout_secs, 60.0);
        assert_eq!(c.correlational.n1, 50);
        assert_eq!(c.correlational.n2, 5);
        match c.domain.resolve().unwrap() {
            DomainSpec::Crowd(s) => assert_eq!(s.goal, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults_follow_the_experimental_protocol() {
        let c = ExperimentConfig::parse("algorithm = \"greedy\"\n[domain]\npreset = \"factory-desk\"\n").unwrap();
        assert_eq!(c.n_trials, 50);
        assert_eq!(c.search.n_rollouts, 500);
        assert_eq!(c.search.planner.timeout_secs, 60.0);
        assert_eq!(c.correlational.tau_correl, 1e-5);
        assert_eq!(c.correlational.tau_variance, 0.0);
        assert_eq!((c.correlational.n1, c.correlational.n2), (250, 5));
    }

    #[test]
    fn overrides_replace_file_keys() {
        let ov = vec![
            ("lambda".to_string(), "0.5".to_string()),
            ("search.planner.timeout_secs".to_string(), "5.0".to_string()),
            ("domain.overrides.goal".to_string(), "1".to_string()),
        ];
        let c = ExperimentConfig::parse_with_overrides(SAMPLE, &ov).unwrap();
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.search.planner.timeout_secs, 5.0);
        match c.domain.resolve().unwrap() {
            DomainSpec::Crowd(s) => assert_eq!(s.goal, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let cases = [
            SAMPLE.replace("lambda = 0.1", "lambda = -1.0"),
            SAMPLE.replace("n_trials = 3", "n_trials = 0"),
            SAMPLE.replace("crowd-desk", "moon-base"),
            SAMPLE.replace("goal = 0", "goal = 9"),
            SAMPLE.replace("goal = 0", "gaol = 0"),
            SAMPLE.replace("correlational\"", "fixed-mask\""),
            SAMPLE.replace("n1 = 50", "n2 = 1"),
            SAMPLE.replace("seed = 42", "seed = 42\nunknown = 1"),
        ];
        for text in cases {
            assert!(ExperimentConfig::parse(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::parse(SAMPLE).unwrap();
        c.fixed_mask = None;
        let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        let fixed = ExperimentConfig {
            algorithm: Algorithm::FixedMask,
            fixed_mask: Some(MaskChoice::Indices(vec![0, 3])),
            ..c
        };
        assert_eq!(ExperimentConfig::parse(&fixed.to_toml()).unwrap(), fixed);
    }

    #[test]
    fn mask_choices_parse() {
        assert_eq!(MaskChoice::try_from("full".to_string()).unwrap(), MaskChoice::Full);
        assert_eq!(MaskChoice::try_from("{}".to_string()).unwrap(), MaskChoice::Indices(vec![]));
        assert_eq!(
            MaskChoice::try_from("{2, 0}".to_string()).unwrap().resolve(4).unwrap(),
            Mask::new([0, 2], 4).unwrap()
        );
        assert!(MaskChoice::try_from("{a}".to_string()).is_err());
    }
}
