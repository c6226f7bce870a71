//! Power-amplifier nonlinearity and the self-interference it couples into
//! the UE's own downlink receiver.
//!
//! The PA is modelled as a memoryless cubic `y = c1 x + c2 x² − c3 x³`. For a
//! two-tone input `A1 cos ω1t + A2 cos ω2t` the output contains the ten
//! spectral lines produced by [`pa_output_spectrum`]. Only the second
//! harmonic of the SI-generating carrier feeds the reward; the rest of the
//! spectrum is exposed for analysis.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaCoefficients {
    /// Linear amplitude gain, `sqrt(G)`.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl PaCoefficients {
    /// Builds coefficients from the PA's linear power gain `G`.
    pub fn from_gain(gain: f64, c2: f64, c3: f64) -> Result<Self> {
        let coeffs = PaCoefficients {
            c1: gain.sqrt(),
            c2,
            c3,
        };
        coeffs.validate()?;
        Ok(coeffs)
    }

    pub fn power_gain(&self) -> f64 {
        self.c1 * self.c1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) {
            return Err(Error::Config(format!("PA coefficient c1 must be > 0, got {}", self.c1)));
        }
        if !(self.c2 >= 0.0) || !(self.c3 >= 0.0) {
            return Err(Error::Config(format!(
                "PA coefficients c2, c3 must be >= 0, got {}, {}",
                self.c2, self.c3
            )));
        }
        Ok(())
    }
}

/// One spectral line of the two-tone PA output. `±` rows stand for both the
/// sum and difference frequency, which share an amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tone {
    Dc,
    Fundamental1,
    Fundamental2,
    SecondHarmonic1,
    SecondHarmonic2,
    ThirdHarmonic1,
    ThirdHarmonic2,
    /// ω1 ± ω2
    SecondOrderIm,
    /// 2ω1 ± ω2
    ThirdOrderIm1,
    /// 2ω2 ± ω1
    ThirdOrderIm2,
}

impl Tone {
    pub const ALL: [Tone; 10] = [
        Tone::Dc,
        Tone::Fundamental1,
        Tone::Fundamental2,
        Tone::SecondHarmonic1,
        Tone::SecondHarmonic2,
        Tone::ThirdHarmonic1,
        Tone::ThirdHarmonic2,
        Tone::SecondOrderIm,
        Tone::ThirdOrderIm1,
        Tone::ThirdOrderIm2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Tone::Dc => "DC",
            Tone::Fundamental1 => "w1",
            Tone::Fundamental2 => "w2",
            Tone::SecondHarmonic1 => "2w1",
            Tone::SecondHarmonic2 => "2w2",
            Tone::ThirdHarmonic1 => "3w1",
            Tone::ThirdHarmonic2 => "3w2",
            Tone::SecondOrderIm => "w1+-w2",
            Tone::ThirdOrderIm1 => "2w1+-w2",
            Tone::ThirdOrderIm2 => "2w2+-w1",
        }
    }
}

impl fmt::Display for Tone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToneComponent {
    pub tone: Tone,
    /// Signed amplitude (volts-equivalent).
    pub amplitude: f64,
}

impl ToneComponent {
    pub fn power(&self) -> f64 {
        self.amplitude * self.amplitude / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToneSpectrum {
    pub entries: Vec<ToneComponent>,
}

impl ToneSpectrum {
    pub fn amplitude(&self, tone: Tone) -> f64 {
        self.entries
            .iter()
            .find(|c| c.tone == tone)
            .map(|c| c.amplitude)
            .unwrap_or(0.0)
    }

    pub fn power(&self, tone: Tone) -> f64 {
        let a = self.amplitude(tone);
        a * a / 2.0
    }
}

/// Output spectrum of the cubic PA for a two-tone input of amplitudes `a1`, `a2`.
pub fn pa_output_spectrum(a1: f64, a2: f64, coeffs: &PaCoefficients) -> ToneSpectrum {
    let PaCoefficients { c1, c2, c3 } = *coeffs;
    let amplitude = |tone| match tone {
        Tone::Dc => 0.5 * c2 * (a1 * a1 + a2 * a2),
        Tone::Fundamental1 => c1 * a1 - 1.5 * c3 * (a1.powi(3) / 2.0 + a1 * a2 * a2),
        Tone::Fundamental2 => c1 * a2 - 1.5 * c3 * (a2.powi(3) / 2.0 + a1 * a1 * a2),
        Tone::SecondHarmonic1 => 0.5 * c2 * a1 * a1,
        Tone::SecondHarmonic2 => 0.5 * c2 * a2 * a2,
        Tone::ThirdHarmonic1 => -0.25 * c3 * a1.powi(3),
        Tone::ThirdHarmonic2 => -0.25 * c3 * a2.powi(3),
        Tone::SecondOrderIm => c2 * a1 * a2,
        Tone::ThirdOrderIm1 => -0.75 * c3 * a1 * a1 * a2,
        Tone::ThirdOrderIm2 => -0.75 * c3 * a1 * a2 * a2,
    };
    ToneSpectrum {
        entries: Tone::ALL
            .iter()
            .map(|&tone| ToneComponent {
                tone,
                amplitude: amplitude(tone),
            })
            .collect(),
    }
}

/// PA input amplitude of one CC from the input power on its RBs (`A²/2 = Σp`).
pub fn cc_input_amplitude(per_rb_powers: &[f64]) -> f64 {
    let total: f64 = per_rb_powers.iter().sum();
    (2.0 * total.max(0.0)).sqrt()
}

/// Power of the second harmonic at the PA output, `c2² A⁴ / 8`.
pub fn second_harmonic_tx_power(amplitude: f64, c2: f64) -> f64 {
    c2 * c2 * amplitude.powi(4) / 8.0
}

/// SI power at the receiver input after the Tx/Rx coupling loss (linear).
pub fn si_at_receiver(p_2h: f64, coupling_loss: f64) -> f64 {
    p_2h / coupling_loss
}

/// Receiver sensitivity degradation in dB caused by SI power `p_si` on top of `noise`.
pub fn sensitivity_degradation(p_si: f64, noise: f64) -> f64 {
    10.0 * ((p_si + noise) / noise).log10()
}

/// Whether the second harmonic of an uplink carrier lands on the downlink
/// receive frequency within `tolerance` Hz.
pub fn si_frequency_conflict(f_ul: f64, f_dl: f64, tolerance: f64) -> bool {
    (2.0 * f_ul - f_dl).abs() <= tolerance
}

/// SI power at the receiver produced by transmitting `tx_power` watts on the
/// SI-generating CC. The PA input power is the transmit power referred back
/// through the PA gain.
pub fn si_power_from_tx(tx_power: f64, pa_gain: f64, c2: f64, coupling_loss: f64) -> f64 {
    let amplitude = cc_input_amplitude(&[tx_power / pa_gain]);
    si_at_receiver(second_harmonic_tx_power(amplitude, c2), coupling_loss)
}

/// Degradation curve sampled at evenly spaced SI levels (dBm), as
/// `(p_si_dbm, degradation_db)` pairs.
pub fn degradation_sweep(start_dbm: f64, stop_dbm: f64, step_db: f64, noise: f64) -> Vec<(f64, f64)> {
    let n = ((stop_dbm - start_dbm) / step_db).round() as usize;
    (0..=n)
        .map(|i| {
            let dbm = start_dbm + i as f64 * step_db;
            let p_si = crate::units::dbm_to_watts(dbm);
            (dbm, sensitivity_degradation(p_si, noise))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{dbm_to_watts, linear_to_db};

    fn coeffs(c2: f64, c3: f64) -> PaCoefficients {
        PaCoefficients::from_gain(1000.0, c2, c3).unwrap()
    }

    #[test]
    fn linear_plus_square_pa_has_no_third_order_products() {
        let c = coeffs(0.1417, 0.0);
        let s = pa_output_spectrum(0.7, 0.0, &c);
        assert_eq!(s.amplitude(Tone::Fundamental1), c.c1 * 0.7);
        for tone in [
            Tone::ThirdHarmonic1,
            Tone::ThirdHarmonic2,
            Tone::ThirdOrderIm1,
            Tone::ThirdOrderIm2,
        ] {
            assert_eq!(s.amplitude(tone), 0.0);
        }
    }

    #[test]
    fn third_order_intermod_amplitude() {
        let s = pa_output_spectrum(1.0, 1.0, &coeffs(0.1417, 0.01));
        assert!((s.amplitude(Tone::ThirdOrderIm1) + 0.0075).abs() < 1e-15);
    }

    #[test]
    fn second_harmonic_amplitude() {
        let s = pa_output_spectrum(2.0, 0.0, &coeffs(0.1417, 0.0));
        assert!((s.amplitude(Tone::SecondHarmonic1) - 0.2834).abs() < 1e-12);
    }

    #[test]
    fn spectrum_has_exactly_ten_rows() {
        let s = pa_output_spectrum(0.3, 0.4, &coeffs(0.1, 0.02));
        assert_eq!(s.entries.len(), 10);
        let mut tones: Vec<_> = s.entries.iter().map(|e| e.tone).collect();
        tones.dedup();
        assert_eq!(tones, Tone::ALL.to_vec());
    }

    #[test]
    fn input_amplitude() {
        assert_eq!(cc_input_amplitude(&[0.0; 4]), 0.0);
        assert!((cc_input_amplitude(&[0.25, 0.25]) - 1.0).abs() < 1e-15);
        assert!((cc_input_amplitude(&[0.25]) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn second_harmonic_power_values() {
        assert_eq!(second_harmonic_tx_power(0.0, 0.1417), 0.0);
        let a = 0.5f64.sqrt(); // A^4 = 0.25
        let p = second_harmonic_tx_power(a, 0.1417);
        assert!((p - 6.275e-4).abs() < 1e-7, "{p}");
        assert!((crate::units::watts_to_dbm(p) + 2.02).abs() < 0.01);
        let doubled = second_harmonic_tx_power(cc_input_amplitude(&[0.5]), 0.1417);
        assert!((linear_to_db(doubled / p) - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn receiver_si() {
        assert_eq!(si_at_receiver(0.0, 3162.3), 0.0);
        let lc = crate::units::db_to_linear(35.0);
        assert!((si_at_receiver(6.275e-4, lc) - 1.984e-7).abs() < 1e-10);
        assert_eq!(si_at_receiver(6.275e-4, 1.0), 6.275e-4);
    }

    #[test]
    fn degradation_values() {
        let noise = dbm_to_watts(-100.0);
        assert!((sensitivity_degradation(dbm_to_watts(-105.0), noise) - 1.19).abs() < 0.01);
        assert_eq!(sensitivity_degradation(0.0, noise), 0.0);
        assert!((sensitivity_degradation(noise, noise) - 3.010_299_956_6).abs() < 1e-6);
    }

    #[test]
    fn frequency_conflicts() {
        assert!(si_frequency_conflict(1.75e9, 3.5e9, 0.0));
        assert!(!si_frequency_conflict(3.5e9, 3.5e9, 1e6));
        assert!(si_frequency_conflict(1.7501e9, 3.5e9, 1e6));
    }

    #[test]
    fn harmonic_scaling_law_over_sweep() {
        let c = coeffs(0.1417, 0.05);
        for i in 0..20 {
            let p_db = -30.0 + i as f64;
            let lo = crate::units::db_to_linear(p_db);
            let hi = crate::units::db_to_linear(p_db + 1.0);
            let a_lo = cc_input_amplitude(&[lo]);
            let a_hi = cc_input_amplitude(&[hi]);
            let d2 = linear_to_db(second_harmonic_tx_power(a_hi, c.c2) / second_harmonic_tx_power(a_lo, c.c2));
            assert!((d2 - 2.0).abs() < 1e-9);
            let p3 = |a: f64| pa_output_spectrum(a, 0.0, &c).power(Tone::ThirdHarmonic1);
            assert!((linear_to_db(p3(a_hi) / p3(a_lo)) - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn si_from_tx_power_uses_input_referred_power() {
        // 0.25 W on the SCC through a 30 dB PA with 35 dB coupling sits just
        // above -100 dBm at the receiver.
        let p = si_power_from_tx(0.25, 1000.0, 0.1417, crate::units::db_to_linear(35.0));
        let dbm = crate::units::watts_to_dbm(p);
        assert!((dbm + 97.02).abs() < 0.01, "{dbm}");
        assert_eq!(si_power_from_tx(0.0, 1000.0, 0.1417, 3162.0), 0.0);
    }

    #[test]
    fn degradation_is_strictly_increasing() {
        let sweep = degradation_sweep(-130.0, -80.0, 0.5, dbm_to_watts(-100.0));
        assert_eq!(sweep.len(), 101);
        assert!(sweep.windows(2).all(|w| w[1].1 > w[0].1));
    }
}
