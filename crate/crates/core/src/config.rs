//! Run configuration: one TOML document holding the environment, the agent
//! and the experiment settings, with dot-path overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::env::{EnvConfig, Mode};
use crate::error::{Error, Result};
use crate::ppo::AgentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub msps: Vec<usize>,
    pub horizons: Vec<usize>,
    pub policies: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            msps: vec![3, 5, 7],
            horizons: vec![100, 150, 200],
            policies: ["saving", "average", "max", "random", "myopic"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Relative quota increase per trial.
    pub quota_step: f64,
    pub quota_trials: usize,
    /// Relative budget cut per trial.
    pub budget_step: f64,
    pub budget_trials: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            quota_step: 0.10,
            quota_trials: 5,
            budget_step: 0.05,
            budget_trials: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    /// Training episode at which the environment changes.
    pub switch_episode: usize,
    pub threshold_after: f64,
    /// Client arrival rate of every room after the switch; client counts
    /// follow double-Poisson dynamics from then on.
    pub arrival_rate_after: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            switch_episode: 250,
            threshold_after: 0.67,
            arrival_rate_after: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapSweepConfig {
    /// Withdrawal-to-deposit caps; `inf` means uncapped.
    pub ratios: Vec<f64>,
}

impl Default for CapSweepConfig {
    fn default() -> Self {
        Self {
            ratios: vec![0.8, 1.0, 1.2, 1.4, 1.6, f64::INFINITY],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub policy: String,
    /// Evaluation episodes per run or sweep point.
    pub episodes: usize,
    /// Training episodes for learned policies.
    pub train_episodes: usize,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub sweep: SweepConfig,
    pub tolerance: ToleranceConfig,
    pub adapt: AdaptConfig,
    pub capsweep: CapSweepConfig,
}

impl RunConfig {
    pub fn with_env(env: EnvConfig) -> Self {
        Self {
            seed: 0,
            policy: "average".into(),
            episodes: 5,
            train_episodes: 500,
            env,
            agent: AgentConfig::default(),
            sweep: SweepConfig::default(),
            tolerance: ToleranceConfig::default(),
            adapt: AdaptConfig::default(),
            capsweep: CapSweepConfig::default(),
        }
    }

    /// Defaults for `mode`, using the environment preset of that mode.
    pub fn preset(mode: Mode, msps: usize, horizon: usize) -> Self {
        Self::with_env(match mode {
            Mode::Noncoop => EnvConfig::noncoop(msps, horizon),
            Mode::Coop => EnvConfig::coop(msps, horizon),
        })
    }

    /// Builds a configuration from an optional TOML document plus
    /// `key.path=value` overrides. Unset keys come from the preset of the
    /// requested `env.mode` (or `default_mode`), sized by `env.msps` and
    /// `env.horizon` when those are given.
    pub fn resolve(doc: Option<&str>, overrides: &[String], default_mode: Mode) -> Result<Self> {
        let mut user = match doc {
            Some(text) => text
                .parse::<Table>()
                .map_err(|e| Error::config(format!("TOML: {e}")))?,
            None => Table::new(),
        };
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        let env = user.get("env").and_then(Value::as_table);
        let mode = match env.and_then(|e| e.get("mode")) {
            Some(v) => v
                .clone()
                .try_into::<Mode>()
                .map_err(|e| Error::config(format!("env.mode: {e}")))?,
            None => default_mode,
        };
        let int = |key: &str, default: usize| -> Result<usize> {
            match env.and_then(|e| e.get(key)) {
                Some(Value::Integer(n)) if *n > 0 => Ok(*n as usize),
                Some(v) => Err(Error::config(format!("env.{key} must be a positive integer, got {v}"))),
                None => Ok(default),
            }
        };
        let base = Self::preset(mode, int("msps", 3)?, int("horizon", 100)?);
        let mut merged = Table::try_from(&base).map_err(|e| Error::config(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: Self = Value::Table(merged)
            .try_into()
            .map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String], default_mode: Mode) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::resolve(Some(&text), overrides, default_mode)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.policy.parse::<crate::policy::PolicyName>()?;
        for p in &self.sweep.policies {
            p.parse::<crate::policy::PolicyName>()?;
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes must be at least 1"));
        }
        if self.sweep.msps.iter().chain(&self.sweep.horizons).any(|&n| n == 0) {
            return Err(Error::config("sweep sizes must be positive"));
        }
        let t = &self.tolerance;
        if !(t.quota_step >= 0.0 && (0.0..1.0).contains(&(t.budget_step * t.budget_trials as f64))) {
            return Err(Error::config(
                "tolerance steps must be non-negative and budget cuts below 100%",
            ));
        }
        if self.capsweep.ratios.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::config("cap ratios must be non-negative"));
        }
        if !(self.adapt.arrival_rate_after >= 0.0 && self.adapt.arrival_rate_after.is_finite()) {
            return Err(Error::config("adapt.arrival_rate_after must be non-negative"));
        }
        Ok(())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Mode::Noncoop, 3, 100)
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Applies `a.b.c=value` to a TOML table, creating tables on the way.
pub fn apply_override(root: &mut Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{spec}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("override `{spec}` has an empty key")));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut table = root;
    for k in parents {
        let slot = table
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = slot
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override `{spec}`: `{k}` is not a table")))?;
    }
    table.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::resolve(Some(&text), &[], Mode::Noncoop).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn infinite_ratio_survives() {
        let cfg = RunConfig::preset(Mode::Coop, 3, 100);
        let back = RunConfig::resolve(Some(&cfg.to_toml().unwrap()), &[], Mode::Noncoop).unwrap();
        assert!(back.capsweep.ratios.last().unwrap().is_infinite());
        assert_eq!(back.env.mode, Mode::Coop);
    }

    #[test]
    fn overrides_and_presets() {
        let o = ["env.mode=\"coop\"", "env.msps=5", "env.reward.threshold=0.67", "policy=max-gcp"]
            .map(String::from);
        let cfg = RunConfig::resolve(None, &o, Mode::Noncoop).unwrap();
        assert_eq!(cfg.env.mode, Mode::Coop);
        assert_eq!(cfg.env.msps, 5);
        assert_eq!(cfg.env.budget_spread, 0.8);
        assert_eq!(cfg.env.reward.threshold, 0.67);
        assert_eq!(cfg.policy, "max-gcp");
        // bare strings work without quotes
        let cfg = RunConfig::resolve(None, &["env.mode=coop".into()], Mode::Noncoop).unwrap();
        assert_eq!(cfg.env.mode, Mode::Coop);
    }

    #[test]
    fn partial_room_override() {
        let doc = "[env.rooms.arena]\ncapacity = 80\n";
        let cfg = RunConfig::resolve(Some(doc), &[], Mode::Noncoop).unwrap();
        assert_eq!(cfg.env.rooms.arena.capacity, 80);
        assert_eq!(cfg.env.rooms.library, RunConfig::default().env.rooms.library);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::resolve(Some("seed = \"x\""), &[], Mode::Noncoop).is_err());
        assert!(RunConfig::resolve(None, &["policy=greedy".into()], Mode::Noncoop).is_err());
        assert!(RunConfig::resolve(None, &["nokey".into()], Mode::Noncoop).is_err());
        assert!(RunConfig::resolve(None, &["env.msps=0".into()], Mode::Noncoop).is_err());
    }
}
