//! Experiment orchestration: scenarios, the episode/cycle loop, baselines,
//! and trace output.

mod config;
mod plot;
pub mod presets;
mod runner;
pub mod seeds;
mod trace;

use serde::{Deserialize, Serialize};

use crate::agent::AgentHyperparams;
use crate::env::{CsiError, NetworkConfig};
use crate::error::{Error, Result};

pub use config::{load_config, parse_config, ConfigFile, ScenarioSection};
pub use plot::{emit_plot, plot_series, render_svg, Series, KNOWN_METRICS};
pub use runner::{baseline_ddpg_only, baseline_era, run_experiment, run_experiment_with_progress};
pub use trace::{emit_csv, parse_csv, write_csv, EpisodeTrace, TraceRow, CSV_HEADER};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiMode {
    /// No harmonic reaches the receiver.
    None,
    /// The SI-generating CC is never selected.
    HardAvoid,
    /// The SI-generating CC may be used at the cost of the reward penalty.
    #[default]
    SoftAvoid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    Ca2c,
    /// Every CC on, equal RB split, `p_max` per UE, no learning.
    Era,
    /// Every CC on; only powers are learned.
    DdpgOnly,
    /// CA2C restricted to hard avoidance.
    Ha,
}

impl Baseline {
    pub fn learns(self) -> bool {
        self != Baseline::Era
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    UeExit { ue: usize },
    UeJoin { ue: usize },
    SetQHat { ue: usize, bits: f64 },
    SetCsiError { bias_db: f64, std_db: f64 },
}

/// An event applied once episode `after_episode` (1-based) has finished.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledEvent {
    pub after_episode: usize,
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkConfig,
    pub agent: AgentHyperparams,
    pub si_mode: SiMode,
    pub baseline: Baseline,
    pub events: Vec<ScheduledEvent>,
    /// Estimation error active from the first episode.
    pub csi_error: Option<CsiError>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, network: NetworkConfig) -> Self {
        Scenario {
            name: name.into(),
            network,
            agent: AgentHyperparams::default(),
            si_mode: SiMode::SoftAvoid,
            baseline: Baseline::Ca2c,
            events: Vec::new(),
            csi_error: None,
        }
    }

    /// Network as simulated: without SI when `si_mode` is `None`.
    pub fn effective_network(&self) -> NetworkConfig {
        let mut cfg = self.network.clone();
        if self.si_mode == SiMode::None {
            cfg.si_cc = None;
        }
        cfg
    }

    pub fn hard_avoid(&self) -> bool {
        self.si_mode == SiMode::HardAvoid || self.baseline == Baseline::Ha
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.agent.validate()?;
        let k = self.network.num_ues();
        for b in 0..self.network.num_gnbs() {
            if self.network.ues_of(b).is_empty() {
                return Err(Error::Config(format!("gNB {b} serves no UE")));
            }
        }
        if self.hard_avoid() && self.network.si_cc.is_none() {
            return Err(Error::Config("hard avoidance needs an SI-generating CC (si_cc)".into()));
        }
        for i in 0..k {
            let d = self.network.serving_distance(i);
            if d > self.network.cell_radius {
                return Err(Error::DistanceOutOfRange {
                    distance: d,
                    d_max: self.network.cell_radius,
                });
            }
        }
        if let Some(e) = &self.csi_error {
            check_csi(e.std_db)?;
        }
        for ev in &self.events {
            if ev.after_episode > self.agent.episodes {
                return Err(Error::Config(format!(
                    "event after episode {} lies beyond the {} episodes run",
                    ev.after_episode, self.agent.episodes
                )));
            }
            match ev.event {
                Event::UeExit { ue } | Event::UeJoin { ue } | Event::SetQHat { ue, .. } if ue >= k => {
                    return Err(Error::Config(format!("event references missing UE {ue}")));
                }
                Event::SetQHat { bits, .. } if !(bits >= 0.0) => {
                    return Err(Error::Config(format!("q_hat must be non-negative, got {bits}")));
                }
                Event::SetCsiError { std_db, .. } => check_csi(std_db)?,
                _ => {}
            }
        }
        Ok(())
    }
}

fn check_csi(std_db: f64) -> Result<()> {
    if std_db >= 0.0 && std_db.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("CSI error std must be finite and >= 0, got {std_db}")))
    }
}
