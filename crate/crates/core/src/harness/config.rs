//! TOML overrides on top of a named scenario.
//!
//! ```toml
//! [scenario]
//! preset = "pair-sa-res25"
//! si_mode = "soft_avoid"
//! events = [{ after_episode = 50, event = { kind = "ue_exit", ue = 1 } }]
//!
//! [network]
//! coupling_loss = [3162.28, 3162.28]
//!
//! [agent]
//! episodes = 100
//! ```
//!
//! `[network]` and `[agent]` take the field names of [`NetworkConfig`] and
//! [`AgentHyperparams`]; keys given replace the preset's values and unknown
//! keys are rejected.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{presets, Baseline, Scenario, ScheduledEvent, SiMode};
use crate::agent::AgentHyperparams;
use crate::env::{CsiError, NetworkConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub si_mode: Option<SiMode>,
    pub baseline: Option<Baseline>,
    pub events: Option<Vec<ScheduledEvent>>,
    pub csi_error: Option<CsiError>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub network: toml::Table,
    #[serde(default)]
    pub agent: toml::Table,
}

fn overlay<T: Serialize + DeserializeOwned>(base: &T, patch: &toml::Table, section: &str) -> Result<T> {
    let mut table = match toml::Value::try_from(base) {
        Ok(toml::Value::Table(t)) => t,
        Ok(_) => unreachable!("structs serialize to tables"),
        Err(e) => return Err(Error::Config(format!("[{section}]: {e}"))),
    };
    for (k, v) in patch {
        table.insert(k.clone(), v.clone());
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Config(format!("[{section}]: {e}")))
}

impl ConfigFile {
    /// Preset named in the file, if any.
    pub fn preset(&self) -> Option<&str> {
        self.scenario.preset.as_deref()
    }

    /// Applies the overrides to `base` and validates the result.
    pub fn apply(&self, base: Scenario) -> Result<Scenario> {
        let network: NetworkConfig = overlay(&base.network, &self.network, "network")?;
        let agent: AgentHyperparams = overlay(&base.agent, &self.agent, "agent")?;
        let sec = &self.scenario;
        let s = Scenario {
            name: sec.name.clone().unwrap_or(base.name),
            network,
            agent,
            si_mode: sec.si_mode.unwrap_or(base.si_mode),
            baseline: sec.baseline.unwrap_or(base.baseline),
            events: sec.events.clone().unwrap_or(base.events),
            csi_error: sec.csi_error.or(base.csi_error),
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds the scenario: `preset` (or the file's own preset) overridden by
    /// the file.
    pub fn resolve(&self, preset: Option<&str>) -> Result<Scenario> {
        let name = preset
            .or(self.preset())
            .ok_or_else(|| Error::Config("no scenario given: pass a preset or set scenario.preset".into()))?;
        self.apply(presets::preset(name)?)
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Event;

    #[test]
    fn empty_file_keeps_preset() {
        let cfg = parse_config("").unwrap();
        let base = presets::preset("pair-sa-res25").unwrap();
        assert_eq!(cfg.resolve(Some("pair-sa-res25")).unwrap(), base);
        assert!(cfg.resolve(None).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = parse_config(
            r#"
            [scenario]
            preset = "single-sa-res25"
            baseline = "ha"
            events = [{ after_episode = 5, event = { kind = "set_q_hat", ue = 0, bits = 2000.0 } }]
            csi_error = { bias_db = 1.0, std_db = 2.0 }

            [network]
            rb_resolution = 5
            q_hat = [1200.0]

            [agent]
            episodes = 10
            cc_eval = "critic"
            "#,
        )
        .unwrap();
        let s = cfg.resolve(None).unwrap();
        assert_eq!(s.name, "single-sa-res25");
        assert_eq!(s.baseline, Baseline::Ha);
        assert_eq!(s.network.rb_resolution, 5);
        assert_eq!(s.network.q_hat, vec![1200.0]);
        assert_eq!(s.network.p_max, 0.5);
        assert_eq!(s.agent.episodes, 10);
        assert_eq!(s.agent.discount, 0.99);
        assert_eq!(s.events[0].event, Event::SetQHat { ue: 0, bits: 2000.0 });
        assert_eq!(s.csi_error.unwrap().bias_db, 1.0);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(parse_config("[bogus]\nx = 1\n").is_err());
        assert!(parse_config("[scenario]\nwhatever = 1\n").is_err());
        let cfg = parse_config("[network]\nnum_cc = 3\n").unwrap();
        assert!(matches!(cfg.resolve(Some("single-ha")), Err(Error::Config(_))));
        let cfg = parse_config("[agent]\ngama = 0.5\n").unwrap();
        assert!(cfg.resolve(Some("single-ha")).is_err());
    }

    #[test]
    fn invalid_values_are_errors() {
        let cfg = parse_config("[agent]\ndiscount = 1.5\n").unwrap();
        assert!(cfg.resolve(Some("single-ha")).is_err());
        let cfg = parse_config("[network]\nrb_resolution = 3\n").unwrap();
        assert!(cfg.resolve(Some("single-ha")).is_err());
    }
}
