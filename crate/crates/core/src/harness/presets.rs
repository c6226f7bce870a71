//! Named scenarios.

use super::{Baseline, Event, Scenario, ScheduledEvent, SiMode};
use crate::env::{CsiError, NetworkConfig, Point};
use crate::error::{Error, Result};
use crate::reward::PenaltyParams;
use crate::units::db_to_linear;

pub const NAMES: &[&str] = &[
    "single-no-si",
    "single-ha",
    "single-sa-res50",
    "single-sa-res25",
    "single-sa-res10",
    "pair-no-si",
    "pair-ha",
    "pair-sa-res50",
    "pair-sa-res25",
    "pair-sa-res10",
    "near-far-wide-sa-res10",
    "near-far-no-si",
    "near-far-ha",
    "near-far-sa-res50",
    "near-far-sa-res25",
    "near-far-sa-res10",
    "exit-rejoin",
    "penalty-lc35",
    "penalty-lc40",
    "three-cc-ca2c",
    "three-cc-era",
    "three-cc-ddpg-only",
    "sweep-lr-0.1",
    "sweep-lr-0.01",
    "sweep-lr-0.001",
    "sweep-gamma-0.5",
    "sweep-gamma-0.95",
    "sweep-gamma-0.99",
    "sweep-buffer-100",
    "sweep-buffer-500",
    "sweep-buffer-1000",
    "csi-perfect",
    "csi-unbiased",
    "csi-bias-plus1",
    "csi-bias-minus1",
    "dynamic-traffic",
    "two-cell-sa-res25",
    "two-cell-no-si",
    "two-cell-four-ue",
];

pub fn names() -> &'static [&'static str] {
    NAMES
}

fn with_omega(mut cfg: NetworkConfig, omegas: &[f64]) -> NetworkConfig {
    cfg.penalty = omegas.iter().map(|&o| PenaltyParams::from_dbm(-100.0, -95.0, o)).collect();
    cfg
}

/// Applies one of the five SI/resolution variants.
fn variant(mut s: Scenario, v: &str) -> Option<Scenario> {
    let (mode, res) = match v {
        "no-si" => (SiMode::None, 1),
        "ha" => (SiMode::HardAvoid, 1),
        "sa-res50" => (SiMode::SoftAvoid, 1),
        "sa-res25" => (SiMode::SoftAvoid, 2),
        "sa-res10" => (SiMode::SoftAvoid, 5),
        _ => return None,
    };
    s.si_mode = mode;
    s.network.rb_resolution = res;
    Some(s)
}

fn single_ue() -> NetworkConfig {
    with_omega(NetworkConfig::single_cell(&[25.0]), &[1e7])
}

fn equidistant() -> NetworkConfig {
    let cfg = NetworkConfig::new(
        vec![Point::default()],
        vec![Point::new(25.0, 0.0), Point::new(-25.0, 0.0)],
        vec![0, 0],
    );
    with_omega(cfg, &[0.625e7; 2])
}

fn near_far(near: f64, far: f64) -> NetworkConfig {
    with_omega(NetworkConfig::single_cell(&[near, far]), &[0.5e7, 1e7])
}

fn two_cell(ues: Vec<Point>, serving: Vec<usize>, omega: f64) -> NetworkConfig {
    let k = ues.len();
    let cfg = NetworkConfig::new(vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0)], ues, serving);
    with_omega(cfg, &vec![omega; k])
}

fn after(after_episode: usize, event: Event) -> ScheduledEvent {
    ScheduledEvent { after_episode, event }
}

/// Looks up a named scenario.
pub fn preset(name: &str) -> Result<Scenario> {
    build(name).ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

fn build(name: &str) -> Option<Scenario> {
    let sc = |cfg| Scenario::new(name, cfg);
    if let Some(v) = name.strip_prefix("single-") {
        return variant(sc(single_ue()), v);
    }
    if let Some(v) = name.strip_prefix("pair-") {
        return variant(sc(equidistant()), v);
    }
    if name == "near-far-wide-sa-res10" {
        return variant(sc(near_far(15.0, 45.0)), "sa-res10");
    }
    if let Some(v) = name.strip_prefix("near-far-") {
        return variant(sc(near_far(25.0, 35.0)), v);
    }
    if let Some(knob) = name.strip_prefix("sweep-") {
        let mut s = variant(sc(equidistant()), "sa-res25")?;
        let (knob, value) = knob.split_once('-')?;
        match knob {
            "lr" if ["0.1", "0.01", "0.001"].contains(&value) => s.agent.learning_rate = value.parse().ok()?,
            "gamma" if ["0.5", "0.95", "0.99"].contains(&value) => s.agent.discount = value.parse().ok()?,
            "buffer" if ["100", "500", "1000"].contains(&value) => s.agent.buffer_capacity = value.parse().ok()?,
            _ => return None,
        }
        return Some(s);
    }
    let s = match name {
        "exit-rejoin" => {
            let mut s = variant(sc(equidistant()), "no-si")?;
            s.events = vec![after(50, Event::UeExit { ue: 1 }), after(75, Event::UeJoin { ue: 1 })];
            s
        }
        "penalty-lc35" | "penalty-lc40" => {
            let lc = if name.ends_with("35") { 35.0 } else { 40.0 };
            let mut s = variant(sc(equidistant()), "sa-res25")?;
            s.network.penalty = vec![PenaltyParams::from_dbm(-105.0, -100.0, 0.625e7); 2];
            s.network.coupling_loss = vec![db_to_linear(lc); 2];
            s
        }
        "three-cc-ca2c" | "three-cc-era" | "three-cc-ddpg-only" => {
            let mut cfg = near_far(15.0, 45.0);
            cfg.num_ccs = 3;
            let mut s = variant(sc(cfg), "no-si")?;
            s.baseline = match name {
                "three-cc-era" => Baseline::Era,
                "three-cc-ddpg-only" => Baseline::DdpgOnly,
                _ => Baseline::Ca2c,
            };
            s
        }
        "csi-perfect" | "csi-unbiased" | "csi-bias-plus1" | "csi-bias-minus1" => {
            let bias_db = match name {
                "csi-unbiased" => Some(0.0),
                "csi-bias-plus1" => Some(1.0),
                "csi-bias-minus1" => Some(-1.0),
                _ => None,
            };
            let mut s = variant(sc(single_ue()), "no-si")?;
            s.csi_error = bias_db.map(|bias_db| CsiError { bias_db, std_db: 2.0 });
            s
        }
        "dynamic-traffic" => {
            let mut cfg = single_ue();
            cfg.ue_positions = vec![Point::new(750.0, 0.0)];
            cfg.cell_radius = 1000.0;
            cfg.d_qos = 0.015;
            let mut s = variant(sc(cfg), "no-si")?;
            s.events = [(50, 1750.0), (90, 1000.0), (110, 1750.0)]
                .into_iter()
                .map(|(e, bits)| after(e, Event::SetQHat { ue: 0, bits }))
                .collect();
            s
        }
        "two-cell-sa-res25" | "two-cell-no-si" => {
            let cfg = two_cell(vec![Point::new(25.0, 0.0), Point::new(60.0, 0.0)], vec![0, 1], 1e7);
            let mut s = variant(sc(cfg), &name["two-cell-".len()..])?;
            s.agent.episodes = 300;
            s
        }
        "two-cell-four-ue" => {
            let ues = [10.0, 20.0, 85.0, 70.0].map(|x| Point::new(x, 0.0)).to_vec();
            let cfg = two_cell(ues, vec![0, 0, 1, 1], 0.625e7);
            let mut s = variant(sc(cfg), "sa-res25")?;
            s.agent.episodes = 300;
            s
        }
        _ => return None,
    };
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds_and_validates() {
        for &n in NAMES {
            let s = preset(n).unwrap_or_else(|e| panic!("{n}: {e}"));
            assert_eq!(s.name, n);
            s.validate().unwrap_or_else(|e| panic!("{n}: {e}"));
            let expected = if s.network.num_gnbs() == 2 { 300 } else { 200 };
            assert_eq!(s.agent.episodes, expected, "{n}");
        }
        assert!(matches!(preset("no-such-preset"), Err(Error::UnknownScenario(_))));
        assert!(preset("single-sa-res7").is_err());
    }

    #[test]
    fn variants_set_mode_and_resolution() {
        let s = preset("single-sa-res10").unwrap();
        assert_eq!((s.si_mode, s.network.rb_resolution), (SiMode::SoftAvoid, 5));
        assert!(preset("pair-ha").unwrap().hard_avoid());
        assert_eq!(preset("single-no-si").unwrap().effective_network().si_cc, None);
        assert_eq!(preset("three-cc-era").unwrap().baseline, Baseline::Era);
        assert_eq!(preset("three-cc-ca2c").unwrap().network.num_ccs, 3);
        assert_eq!(preset("sweep-buffer-1000").unwrap().agent.buffer_capacity, 1000);
    }
}
