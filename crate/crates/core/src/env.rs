//! Network geometry, link budget, and the environment step that scores one
//! joint allocation.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{PenaltyParams, PenaltyScale};
use crate::si;
use crate::units::{db_to_linear, dbm_to_watts, linear_to_db};

const MIN_DISTANCE: f64 = 0.1;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const POWER_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Free-space power gain at 1 m for a carrier at `frequency` Hz.
pub fn free_space_gain_1m(frequency: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / frequency;
    (wavelength / (4.0 * std::f64::consts::PI)).powi(2)
}

/// Inverse-square distance law, `d^-2` with `d` in metres. Distances below
/// 0.1 m are clamped.
pub fn channel_gain(ue_pos: Point, gnb_pos: Point) -> f64 {
    let d = ue_pos.distance(&gnb_pos).max(MIN_DISTANCE);
    1.0 / (d * d)
}

/// Static description of one scenario's network.
///
/// Per-UE vectors (`serving_gnb`, `coupling_loss`, `penalty`, `q_hat`) are
/// indexed like `ue_positions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub gnb_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub serving_gnb: Vec<usize>,
    pub num_ccs: usize,
    pub rbs_per_cc: usize,
    /// Hz
    pub rb_bandwidth: f64,
    /// W
    pub p_max: f64,
    /// Receiver noise at the gNB, W.
    pub noise_power_ul: f64,
    /// Receiver noise at the UE, W.
    pub noise_power_dl: f64,
    /// Linear PA power gain.
    pub pa_gain: f64,
    pub c2: f64,
    pub c3: f64,
    /// Linear Tx-to-Rx coupling loss per UE.
    pub coupling_loss: Vec<f64>,
    pub penalty: Vec<PenaltyParams>,
    pub penalty_scale: PenaltyScale,
    /// m
    pub cell_radius: f64,
    /// Bits per burst, per UE.
    pub q_hat: Vec<f64>,
    /// s
    pub d_qos: f64,
    /// Resolution bits per UE on the fine-grained SCC (CC index 1).
    pub rb_resolution: usize,
    /// Absolute gain applied on top of [`channel_gain`].
    pub path_gain_1m: f64,
    /// CC whose second harmonic lands on the UE's downlink, if any.
    pub si_cc: Option<usize>,
}

impl NetworkConfig {
    /// Two 50-RB carriers at 3.5 GHz, 0.5 W UEs, and a 30 dB PA with SI from
    /// CC index 1. Per-UE parameters take the same default for every UE.
    pub fn new(gnb_positions: Vec<Point>, ue_positions: Vec<Point>, serving_gnb: Vec<usize>) -> Self {
        let k = ue_positions.len();
        NetworkConfig {
            gnb_positions,
            ue_positions,
            serving_gnb,
            num_ccs: 2,
            rbs_per_cc: 50,
            rb_bandwidth: 180e3,
            p_max: 0.5,
            noise_power_ul: dbm_to_watts(-70.0),
            noise_power_dl: dbm_to_watts(-100.0),
            pa_gain: db_to_linear(30.0),
            c2: 0.1417,
            c3: 0.0,
            coupling_loss: vec![db_to_linear(35.0); k],
            penalty: vec![PenaltyParams::from_dbm(-100.0, -95.0, 1e7); k],
            penalty_scale: PenaltyScale::Db,
            cell_radius: 50.0,
            q_hat: vec![1000.0; k],
            d_qos: 0.15,
            rb_resolution: 1,
            path_gain_1m: free_space_gain_1m(3.5e9),
            si_cc: Some(1),
        }
    }

    /// One gNB at the origin serving UEs placed along the x axis.
    pub fn single_cell(ue_distances: &[f64]) -> Self {
        let ues = ue_distances.iter().map(|&d| Point::new(d, 0.0)).collect();
        Self::new(vec![Point::default()], ues, vec![0; ue_distances.len()])
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn num_gnbs(&self) -> usize {
        self.gnb_positions.len()
    }

    /// UE indices served by `gnb`, ascending.
    pub fn ues_of(&self, gnb: usize) -> Vec<usize> {
        (0..self.num_ues()).filter(|&i| self.serving_gnb[i] == gnb).collect()
    }

    pub fn serving_distance(&self, ue: usize) -> f64 {
        self.ue_positions[ue].distance(&self.gnb_positions[self.serving_gnb[ue]])
    }

    /// Absolute link gain from `ue` to `gnb`.
    pub fn link_gain(&self, ue: usize, gnb: usize) -> f64 {
        self.path_gain_1m * channel_gain(self.ue_positions[ue], self.gnb_positions[gnb])
    }

    pub fn pa_coefficients(&self) -> Result<si::PaCoefficients> {
        si::PaCoefficients::from_gain(self.pa_gain, self.c2, self.c3)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_ues();
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.gnb_positions.is_empty() || k == 0 {
            return cfg_err("need at least one gNB and one UE".into());
        }
        if self.serving_gnb.len() != k {
            return cfg_err(format!("serving_gnb has {} entries for {k} UEs", self.serving_gnb.len()));
        }
        for (name, len) in [
            ("coupling_loss", self.coupling_loss.len()),
            ("penalty", self.penalty.len()),
            ("q_hat", self.q_hat.len()),
        ] {
            if len != k {
                return cfg_err(format!("{name} has {len} entries for {k} UEs"));
            }
        }
        for (i, &b) in self.serving_gnb.iter().enumerate() {
            if b >= self.num_gnbs() {
                return cfg_err(format!("UE {i} served by missing gNB {b}"));
            }
            if !(self.serving_distance(i) > 0.0) {
                return cfg_err(format!("UE {i} coincides with its serving gNB"));
            }
        }
        if self.num_ccs == 0 || self.rbs_per_cc == 0 {
            return cfg_err("num_ccs and rbs_per_cc must be positive".into());
        }
        if ![1, 2, 5].contains(&self.rb_resolution) {
            return cfg_err(format!("rb_resolution must be 1, 2 or 5, got {}", self.rb_resolution));
        }
        if self.rb_resolution > 1 && self.num_ccs < 2 {
            return cfg_err("fine RB resolution needs a secondary CC".into());
        }
        if let Some(j) = self.si_cc {
            if j >= self.num_ccs {
                return cfg_err(format!("si_cc {j} out of range for {} CCs", self.num_ccs));
            }
        }
        let positive = [
            ("rb_bandwidth", self.rb_bandwidth),
            ("p_max", self.p_max),
            ("noise_power_ul", self.noise_power_ul),
            ("noise_power_dl", self.noise_power_dl),
            ("cell_radius", self.cell_radius),
            ("d_qos", self.d_qos),
            ("path_gain_1m", self.path_gain_1m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return cfg_err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.coupling_loss.iter().any(|&l| !(l >= 1.0)) {
            return cfg_err("coupling_loss must be >= 1 (0 dB)".into());
        }
        if self.q_hat.iter().any(|&q| !(q >= 0.0)) {
            return cfg_err("q_hat must be non-negative".into());
        }
        for p in &self.penalty {
            p.validate()?;
        }
        self.pa_coefficients()?;
        Ok(())
    }
}

/// Per-UE QoS indicator: `true` when the delay requirement is met.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QosState(pub Vec<bool>);

impl QosState {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(u8::from(b))).collect()
    }
}

/// One cycle's joint decision for every UE slot in the network.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationState {
    /// `[UE, CC]`
    pub alpha: Array2<bool>,
    /// `[UE, CC, RB]`
    pub beta: Array3<bool>,
    /// Total transmit power per UE.
    pub ue_power: Array1<f64>,
    /// `[UE, CC, RB]`
    pub per_rb_power: Array3<f64>,
    /// Inactive slots carry no allocation and are exempt from the PCC rule.
    pub active: Vec<bool>,
}

impl AllocationState {
    pub fn empty(num_ues: usize, num_ccs: usize, rbs_per_cc: usize) -> Self {
        AllocationState {
            alpha: Array2::from_elem((num_ues, num_ccs), false),
            beta: Array3::from_elem((num_ues, num_ccs, rbs_per_cc), false),
            ue_power: Array1::zeros(num_ues),
            per_rb_power: Array3::zeros((num_ues, num_ccs, rbs_per_cc)),
            active: vec![true; num_ues],
        }
    }

    pub fn for_config(cfg: &NetworkConfig) -> Self {
        Self::empty(cfg.num_ues(), cfg.num_ccs, cfg.rbs_per_cc)
    }

    /// Number of RBs held by `ue` on `cc`.
    pub fn rb_count(&self, ue: usize, cc: usize) -> usize {
        self.beta.slice(ndarray::s![ue, cc, ..]).iter().filter(|&&b| b).count()
    }

    /// Transmit power of `ue` on `cc`.
    pub fn cc_power(&self, ue: usize, cc: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..self.beta.dim().2 {
            if self.beta[[ue, cc, k]] {
                total += self.per_rb_power[[ue, cc, k]];
            }
        }
        total
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        let (k, m, n) = (cfg.num_ues(), cfg.num_ccs, cfg.rbs_per_cc);
        if self.alpha.dim() != (k, m)
            || self.beta.dim() != (k, m, n)
            || self.per_rb_power.dim() != (k, m, n)
            || self.ue_power.len() != k
            || self.active.len() != k
        {
            return Err(Error::Shape(format!(
                "allocation shaped for {:?} does not match {k} UEs x {m} CCs x {n} RBs",
                self.beta.dim()
            )));
        }
        let violation = |msg: String| Err(Error::Constraint(msg));
        for i in 0..k {
            let p = self.ue_power[i];
            if !(p >= 0.0) || p > cfg.p_max * (1.0 + POWER_TOLERANCE) {
                return violation(format!("UE {i} power {p} W outside [0, p_max = {}]", cfg.p_max));
            }
            if !self.active[i] {
                if self.alpha.row(i).iter().any(|&a| a) || p != 0.0 {
                    return violation(format!("inactive UE {i} holds resources"));
                }
            } else if !self.alpha[[i, 0]] {
                return violation(format!("PCC not active for UE {i}"));
            }
            let mut sum = 0.0;
            for j in 0..m {
                for r in 0..n {
                    let rb_p = self.per_rb_power[[i, j, r]];
                    if self.beta[[i, j, r]] {
                        if !self.alpha[[i, j]] {
                            return violation(format!("UE {i} holds RB {r} of inactive CC {j}"));
                        }
                        if !(rb_p >= 0.0) {
                            return violation(format!("UE {i} negative power on CC {j} RB {r}"));
                        }
                        sum += rb_p;
                    } else if rb_p != 0.0 {
                        return violation(format!("UE {i} has power on unallocated CC {j} RB {r}"));
                    }
                }
            }
            if (sum - p).abs() > POWER_TOLERANCE * p {
                return violation(format!("UE {i} per-RB powers sum to {sum} W, expected {p} W"));
            }
        }
        for j in 0..m {
            for r in 0..n {
                for b in 0..cfg.num_gnbs() {
                    let holders = (0..k)
                        .filter(|&i| cfg.serving_gnb[i] == b && self.beta[[i, j, r]])
                        .count();
                    if holders > 1 {
                        return violation(format!("CC {j} RB {r} assigned to {holders} UEs of gNB {b}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Linear SINR per `[UE, CC, RB]`; zero where the RB is not allocated.
pub fn compute_sinr(alloc: &AllocationState, cfg: &NetworkConfig) -> Array3<f64> {
    let (k, m, n) = alloc.beta.dim();
    let g = cfg.num_gnbs();
    let gains = Array2::from_shape_fn((k, g), |(i, b)| cfg.link_gain(i, b));
    let mut sinr = Array3::zeros((k, m, n));
    let mut holders = Vec::with_capacity(k);
    for j in 0..m {
        for r in 0..n {
            holders.clear();
            holders.extend((0..k).filter(|&i| alloc.beta[[i, j, r]]));
            for &i in &holders {
                let b = cfg.serving_gnb[i];
                let interference: f64 = holders
                    .iter()
                    .filter(|&&o| o != i)
                    .map(|&o| alloc.per_rb_power[[o, j, r]] * gains[[o, b]])
                    .sum();
                sinr[[i, j, r]] =
                    alloc.per_rb_power[[i, j, r]] * gains[[i, b]] / (interference + cfg.noise_power_ul);
            }
        }
    }
    sinr
}

pub fn rb_rate(gamma: f64, bandwidth: f64) -> f64 {
    bandwidth * (1.0 + gamma).log2()
}

/// Sum of per-RB Shannon rates over the RBs each UE holds.
pub fn ue_total_rate(alloc: &AllocationState, sinr: &Array3<f64>, cfg: &NetworkConfig) -> Array1<f64> {
    let (k, m, n) = alloc.beta.dim();
    Array1::from_shape_fn(k, |i| {
        let mut total = 0.0;
        for j in 0..m {
            if !alloc.alpha[[i, j]] {
                continue;
            }
            for r in 0..n {
                if alloc.beta[[i, j, r]] {
                    total += rb_rate(sinr[[i, j, r]], cfg.rb_bandwidth);
                }
            }
        }
        total
    })
}

/// Delay `q̂ / R` per UE (infinite at zero rate) and the QoS state it implies.
pub fn ue_delay_and_state(rates: &[f64], cfg: &NetworkConfig) -> (Vec<f64>, QosState) {
    let delays: Vec<f64> = rates
        .iter()
        .zip(&cfg.q_hat)
        .map(|(&r, &q)| if r > 0.0 { q / r } else { f64::INFINITY })
        .collect();
    let bits = delays.iter().map(|&d| d <= cfg.d_qos).collect();
    (delays, QosState(bits))
}

/// SINR estimation error in dB: a fixed bias plus zero-mean Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsiError {
    pub bias_db: f64,
    pub std_db: f64,
}

impl CsiError {
    pub fn is_perfect(&self) -> bool {
        self.bias_db == 0.0 && self.std_db == 0.0
    }
}

pub fn apply_sinr_estimation_error<R: Rng + ?Sized>(sinr_db: f64, bias: f64, std_dev: f64, rng: &mut R) -> f64 {
    if std_dev == 0.0 {
        return sinr_db + bias;
    }
    let noise = Normal::new(0.0, std_dev).expect("std_dev must be finite and non-negative");
    sinr_db + bias + noise.sample(rng)
}

/// Per-UE quantities recorded for one cycle.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct UeMetrics {
    pub num_cc: usize,
    pub rb_cc1: usize,
    pub rb_cc2: usize,
    pub rb_total: usize,
    pub p_total: f64,
    pub p_cc1: f64,
    pub p_cc2: f64,
    pub p_si: f64,
    /// True throughput, bits/s.
    pub rate: f64,
    /// QoS bit as observed by the agents.
    pub state_bit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Throughput from the true SINR.
    pub true_rates: Vec<f64>,
    /// Throughput from the SINR the agents observe.
    pub observed_rates: Vec<f64>,
    /// Delays from the observed rates.
    pub delays: Vec<f64>,
    pub state: QosState,
    pub p_si: Vec<f64>,
    pub metrics: Vec<UeMetrics>,
}

/// Self-interference power at each UE's receiver.
pub fn si_powers(alloc: &AllocationState, cfg: &NetworkConfig) -> Vec<f64> {
    (0..alloc.active.len())
        .map(|i| match cfg.si_cc {
            Some(j) if alloc.active[i] => {
                si::si_power_from_tx(alloc.cc_power(i, j), cfg.pa_gain, cfg.c2, cfg.coupling_loss[i])
            }
            _ => 0.0,
        })
        .collect()
}

/// Scores `alloc`. With a CSI error the observed SINR of every allocated RB
/// is perturbed in dB; draws are taken in `[UE, CC, RB]` order.
pub fn env_step<R: Rng + ?Sized>(
    alloc: &AllocationState,
    cfg: &NetworkConfig,
    csi_error: Option<(&CsiError, &mut R)>,
) -> Result<StepOutcome> {
    alloc.validate(cfg)?;
    let sinr = compute_sinr(alloc, cfg);
    let true_rates = ue_total_rate(alloc, &sinr, cfg).to_vec();
    let observed_rates = match csi_error {
        Some((err, rng)) if !err.is_perfect() => {
            let mut observed = sinr.clone();
            for (g, &held) in observed.iter_mut().zip(alloc.beta.iter()) {
                if held && *g > 0.0 {
                    let db = apply_sinr_estimation_error(linear_to_db(*g), err.bias_db, err.std_db, rng);
                    *g = db_to_linear(db);
                }
            }
            ue_total_rate(alloc, &observed, cfg).to_vec()
        }
        _ => true_rates.clone(),
    };
    let (delays, state) = ue_delay_and_state(&observed_rates, cfg);
    let p_si = si_powers(alloc, cfg);
    let metrics = (0..cfg.num_ues())
        .map(|i| {
            let rb_cc1 = alloc.rb_count(i, 0);
            let rb_cc2 = if cfg.num_ccs > 1 { alloc.rb_count(i, 1) } else { 0 };
            let rb_total = (0..cfg.num_ccs).map(|j| alloc.rb_count(i, j)).sum();
            UeMetrics {
                num_cc: alloc.alpha.row(i).iter().filter(|&&a| a).count(),
                rb_cc1,
                rb_cc2,
                rb_total,
                p_total: alloc.ue_power[i],
                p_cc1: alloc.cc_power(i, 0),
                p_cc2: if cfg.num_ccs > 1 { alloc.cc_power(i, 1) } else { 0.0 },
                p_si: p_si[i],
                rate: true_rates[i],
                state_bit: state.bit(i),
            }
        })
        .collect();
    Ok(StepOutcome {
        true_rates,
        observed_rates,
        delays,
        state,
        p_si,
        metrics,
    })
}
