//! Layered run configuration: built-in defaults, then a named profile, then
//! a config file, then `section.key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::audio::FrontendConfig;
use crate::cascade::CascadeConfig;
use crate::corpus::SynthSpec;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::hmm::TrainConfig;
use crate::par::Parallelism;

pub const DEFAULTS: &str = include_str!("../profiles/defaults.toml");

/// Built-in profiles by name.
pub const PROFILES: [(&str, &str); 4] = [
    ("defaults", ""),
    ("micro", include_str!("../profiles/micro.toml")),
    ("benchmark", include_str!("../profiles/benchmark.toml")),
    ("paper-shaped", include_str!("../profiles/paper-shaped.toml")),
];

/// File name of the resolved-config echo written next to every output.
pub const ECHO_FILE: &str = "config.resolved.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Copied into `synth.rng_seed` and `training.init_seed`.
    pub seed: u64,
    /// Worker threads; 0 means all available cores.
    pub jobs: usize,
    pub synth: SynthSpec,
    pub frontend: FrontendConfig,
    pub training: TrainConfig,
    pub cascade: CascadeConfig,
    pub evaluation: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            synth: SynthSpec::default(),
            frontend: FrontendConfig::default(),
            training: TrainConfig::default(),
            cascade: CascadeConfig::default(),
            evaluation: EvalConfig::default(),
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table> {
    text.parse::<Table>()
        .map_err(|e| Error::ConfigInvalid(format!("{origin}: {e}")))
}

/// Recursively overlay `top` onto `base`; tables merge, everything else
/// replaces.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Apply one `a.b.c=value` override. The value is read as a TOML literal
/// and falls back to a plain string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::ConfigInvalid(format!("override {assignment:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::ConfigInvalid(format!("bad override key {path:?}")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()));
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::ConfigInvalid(format!("override {path:?}: {k} is not a section")))?;
    }
    node.insert(keys[keys.len() - 1].to_owned(), value);
    Ok(())
}

impl RunConfig {
    /// Resolve defaults, an optional profile, an optional config file and
    /// overrides into a validated configuration.
    pub fn resolve(profile: Option<&str>, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = parse_table(DEFAULTS, "defaults")?;
        if let Some(name) = profile {
            let text = PROFILES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| *t)
                .ok_or_else(|| {
                    let known: Vec<&str> = PROFILES.iter().map(|p| p.0).collect();
                    Error::ConfigInvalid(format!("unknown profile {name:?} (known: {})", known.join(", ")))
                })?;
            merge(&mut table, parse_table(text, name)?);
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            merge(&mut table, parse_table(&text, &path.display().to_string())?);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigInvalid(e.to_string()))?;
        cfg.synth.rng_seed = cfg.seed;
        cfg.training.init_seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.training.validate()?;
        self.frontend.validate(self.synth.sample_rate_hz)?;
        let e = &self.evaluation;
        if e.modes.is_empty() {
            return Err(Error::ConfigInvalid("evaluation.modes is empty".into()));
        }
        if !(e.ordering_slack_pp >= 0.0 && e.worst_case_band_pp >= 0.0) {
            return Err(Error::ConfigInvalid("ordering tolerances must be >= 0".into()));
        }
        Ok(())
    }

    pub fn parallelism(&self) -> Parallelism {
        Parallelism::with_jobs(self.jobs)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// Write the resolved configuration to `dir/config.resolved.toml`.
    pub fn echo(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join(ECHO_FILE);
        std::fs::write(&p, self.to_toml()?).map_err(|e| Error::io(p, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_file_pins_code_defaults() {
        assert_eq!(RunConfig::resolve(None, None, &[]).unwrap(), RunConfig::default());
        assert_eq!(RunConfig::resolve(Some("defaults"), None, &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn every_profile_resolves() {
        for (name, _) in PROFILES {
            RunConfig::resolve(Some(name), None, &[]).unwrap();
        }
        let micro = RunConfig::resolve(Some("micro"), None, &[]).unwrap();
        assert_eq!(micro.synth.n_speakers_per_gender, 2);
        assert_eq!(micro.synth.emotion_set, ["neutral", "anger"]);
        assert!(RunConfig::resolve(Some("nope"), None, &[]).is_err());
    }

    #[test]
    fn overrides_and_seed_propagation() {
        let sets = [
            "seed=7".to_string(),
            "synth.separability.noise_snr_db=-inf".to_string(),
            "cascade.eq3_variant=mean".to_string(),
            "evaluation.corpus_name=lab".to_string(),
            "evaluation.modes=[\"three_stage\"]".to_string(),
        ];
        let c = RunConfig::resolve(Some("micro"), None, &sets).unwrap();
        assert_eq!((c.synth.rng_seed, c.training.init_seed), (7, 7));
        assert_eq!(c.synth.separability.noise_snr_db, f64::NEG_INFINITY);
        assert_eq!(c.cascade.eq3_variant, crate::cascade::TermCombination::Mean);
        assert_eq!(c.evaluation.corpus_name, "lab");
        assert_eq!(c.evaluation.modes, [crate::eval::Framework::ThreeStage]);
    }

    #[test]
    fn bad_keys_and_values_are_rejected() {
        assert!(RunConfig::resolve(None, None, &["training.n_statez=3".into()]).is_err());
        assert!(RunConfig::resolve(None, None, &["training.n_states=0".into()]).is_err());
        assert!(RunConfig::resolve(None, None, &["noequals".into()]).is_err());
        assert!(RunConfig::resolve(None, None, &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn echo_resolves_to_itself() {
        let c = RunConfig::resolve(Some("benchmark"), None, &["seed=3".into()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        c.echo(dir.path()).unwrap();
        let back = RunConfig::resolve(None, Some(&dir.path().join(ECHO_FILE)), &[]).unwrap();
        assert_eq!(back, c);
    }
}
