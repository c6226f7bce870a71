//! Per-gNB reward: sum throughput minus a distance-weighted SI penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{dbm_to_watts, watts_to_dbm};

/// Thresholds are in watts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyParams {
    pub theta1: f64,
    pub theta2: f64,
    pub omega: f64,
}

impl PenaltyParams {
    pub fn from_dbm(theta1_dbm: f64, theta2_dbm: f64, omega: f64) -> Self {
        PenaltyParams {
            theta1: dbm_to_watts(theta1_dbm),
            theta2: dbm_to_watts(theta2_dbm),
            omega,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta1 > 0.0 && self.theta1 < self.theta2) {
            return Err(Error::Config(format!(
                "penalty thresholds need 0 < theta1 < theta2, got {} and {}",
                self.theta1, self.theta2
            )));
        }
        if !(self.omega > 0.0) {
            return Err(Error::Config(format!("penalty omega must be > 0, got {}", self.omega)));
        }
        Ok(())
    }
}

/// Domain in which the penalty ramps between the two thresholds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyScale {
    #[default]
    Db,
    Linear,
}

pub fn penalty(p_si: f64, params: &PenaltyParams, scale: PenaltyScale) -> f64 {
    if p_si <= params.theta1 {
        return 0.0;
    }
    if p_si >= params.theta2 {
        return params.omega;
    }
    let fraction = match scale {
        PenaltyScale::Db => {
            let lo = watts_to_dbm(params.theta1);
            (watts_to_dbm(p_si) - lo) / (watts_to_dbm(params.theta2) - lo)
        }
        PenaltyScale::Linear => (p_si - params.theta1) / (params.theta2 - params.theta1),
    };
    params.omega * fraction.clamp(0.0, 1.0)
}

/// `d² / d_max²`.
pub fn distance_weight(d: f64, d_max: f64) -> Result<f64> {
    if d > d_max {
        return Err(Error::DistanceOutOfRange { distance: d, d_max });
    }
    if !(d > 0.0) {
        return Err(Error::Config(format!("UE distance must be positive, got {d}")));
    }
    Ok((d * d) / (d_max * d_max))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardRecord {
    pub sum_rate: f64,
    /// Sum of distance-weighted penalties.
    pub penalty_total: f64,
    pub reward: f64,
}

/// Reward of one gNB over the UEs it serves. Rates are in bits/s.
pub fn gnb_reward(
    rates: &[f64],
    p_si: &[f64],
    distances: &[f64],
    params: &[PenaltyParams],
    d_max: f64,
    scale: PenaltyScale,
) -> Result<RewardRecord> {
    let n = rates.len();
    if p_si.len() != n || distances.len() != n || params.len() != n {
        return Err(Error::Shape(format!(
            "reward inputs have lengths {n}, {}, {}, {}",
            p_si.len(),
            distances.len(),
            params.len()
        )));
    }
    let sum_rate: f64 = rates.iter().sum();
    let mut penalty_total = 0.0;
    for i in 0..n {
        let weight = distance_weight(distances[i], d_max)?;
        penalty_total += penalty(p_si[i], &params[i], scale) / weight;
    }
    Ok(RewardRecord {
        sum_rate,
        penalty_total,
        reward: sum_rate - penalty_total,
    })
}
