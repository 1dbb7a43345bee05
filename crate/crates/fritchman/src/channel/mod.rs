//! Waveform-level channel simulator: OOK transmitter, square-wave (PWM)
//! interferer, additive Gaussian background noise, and an ADC receiver
//! with pilot-trained decision thresholds.
//!
//! The receiver reads one ADC sample per bit, at the middle of the bit
//! interval, and compares it against a threshold calibrated from pilot
//! blocks. With an interferer present two thresholds are trained, one per
//! interferer level, and the receiver — which is told the interferer
//! state — switches between them at bit boundaries. A bit whose interval
//! contains an interferer edge can therefore be sampled on the far side
//! of the edge from where its threshold was chosen, which is the
//! edge-aligned error mechanism this simulator reproduces.

mod measure;
mod waveform;

pub use measure::{
    measure_sinr, measure_snr, sinr_from_variances, snr_from_variances, GroupingMode,
    SinrReport, SnrReport,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ErrorSequence;
use waveform::{mid_bit_codes, quantize_waveform, synthesize_block, PwmMode};

/// Interfering square wave: frequency in hertz, duty cycle and phase as
/// fractions of a period, amplitude in the same linear units as the
/// signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmConfig {
    pub frequency: f64,
    pub duty_cycle: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// ADC resolution and input range. Values map linearly onto
/// `[0, 2^bits - 1]` with clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcConfig {
    pub bits: u32,
    pub full_scale: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        // 10-bit converter, one count per linear unit.
        AdcConfig {
            bits: 10,
            full_scale: 1023.0,
        }
    }
}

/// Full simulator configuration. All levels are linear units; the default
/// ADC maps one unit to one count.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub bit_rate: f64,
    pub samples_per_bit: usize,
    pub signal_amplitude: f64,
    pub noise_sigma: f64,
    pub background_dc: f64,
    pub pwm: Option<PwmConfig>,
    pub adc: AdcConfig,
    pub pilot_length: usize,
    pub seed: u64,
}

impl ChannelConfig {
    /// A plain background-noise channel at the stock 6.25 kbit/s rate.
    pub fn background_only(signal_amplitude: f64, noise_sigma: f64, seed: u64) -> Self {
        ChannelConfig {
            bit_rate: 6250.0,
            samples_per_bit: 16,
            signal_amplitude,
            noise_sigma,
            background_dc: 60.0,
            pwm: None,
            adc: AdcConfig::default(),
            pilot_length: 256,
            seed,
        }
    }

    /// A channel with an interfering square wave at the stock 600 Hz.
    pub fn with_pwm(
        signal_amplitude: f64,
        noise_sigma: f64,
        duty_cycle: f64,
        pwm_amplitude: f64,
        seed: u64,
    ) -> Self {
        let mut config = Self::background_only(signal_amplitude, noise_sigma, seed);
        config.pwm = Some(PwmConfig {
            frequency: 600.0,
            duty_cycle,
            amplitude: pwm_amplitude,
            phase: 0.0,
        });
        config
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bit_rate > 0.0) || !self.bit_rate.is_finite() {
            return Err(Error::config("bit_rate", "must be positive"));
        }
        if self.samples_per_bit < 4 {
            return Err(Error::config("samples_per_bit", "must be at least 4"));
        }
        if !(self.signal_amplitude >= 0.0) || !self.signal_amplitude.is_finite() {
            return Err(Error::config("signal_amplitude", "must be nonnegative"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::config("noise_sigma", "must be nonnegative"));
        }
        if !self.background_dc.is_finite() {
            return Err(Error::config("background_dc", "must be finite"));
        }
        if let Some(pwm) = &self.pwm {
            if !(pwm.frequency > 0.0) || !pwm.frequency.is_finite() {
                return Err(Error::config("pwm.frequency", "must be positive"));
            }
            if !(pwm.duty_cycle > 0.0 && pwm.duty_cycle < 1.0) {
                return Err(Error::config(
                    "pwm.duty_cycle",
                    "must lie strictly between 0 and 1",
                ));
            }
            if !(pwm.amplitude >= 0.0) || !pwm.amplitude.is_finite() {
                return Err(Error::config("pwm.amplitude", "must be nonnegative"));
            }
            if !(0.0..1.0).contains(&pwm.phase) {
                return Err(Error::config("pwm.phase", "must lie in [0, 1)"));
            }
        }
        if !(1..=16).contains(&self.adc.bits) {
            return Err(Error::config("adc.bits", "must lie in 1..=16"));
        }
        if !(self.adc.full_scale > 0.0) || !self.adc.full_scale.is_finite() {
            return Err(Error::config("adc.full_scale", "must be positive"));
        }
        if self.pilot_length < 2 {
            return Err(Error::config("pilot_length", "must be at least 2 bits"));
        }
        Ok(())
    }

    /// True when the interferer is present with a nonzero amplitude and in
    /// its high phase at time `t`. A zero-amplitude interferer is never
    /// "on": it adds no level, so the receiver has nothing to switch for.
    pub fn pwm_on_at(&self, t: f64) -> bool {
        match &self.pwm {
            Some(pwm) => pwm.amplitude > 0.0 && pwm.is_high(t),
            None => false,
        }
    }

    fn sample_rate(&self) -> f64 {
        self.bit_rate * self.samples_per_bit as f64
    }
}

/// Independent deterministic sub-generators per configured seed. Pilot,
/// payload and measurement noise never share a stream, so the payload is
/// bit-identical across configs that differ only in pilot framing.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    TxBits = 1,
    PayloadNoise = 2,
    PilotOff = 3,
    PilotOn = 4,
    MeasureBackground = 5,
    MeasureSignalNoise = 6,
    MeasureSignalBits = 7,
    MeasureGrouping = 8,
}

pub(crate) fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Decision threshold(s) in ADC counts. `Dual` carries the
/// interferer-on threshold first, matching the level it calibrates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thresholds {
    Single { vth: f64 },
    Dual { vth1: f64, vth2: f64 },
}

impl Thresholds {
    /// Threshold applicable when the interferer state is `on`.
    pub fn select(&self, on: bool) -> f64 {
        match *self {
            Thresholds::Single { vth } => vth,
            Thresholds::Dual { vth1, vth2 } => {
                if on {
                    vth1
                } else {
                    vth2
                }
            }
        }
    }
}

/// Quality measurement attached to a run: a signal-to-noise report for
/// interferer-free channels, a signal-to-interference-plus-noise report
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum QualityReport {
    Snr(SnrReport),
    Sinr(SinrReport),
}

impl QualityReport {
    pub fn db(&self) -> f64 {
        match self {
            QualityReport::Snr(r) => r.snr_db,
            QualityReport::Sinr(r) => r.sinr_db,
        }
    }
}

/// Outcome of a simulated transmission.
#[derive(Debug, Clone)]
pub struct ChannelRunResult {
    pub tx_bits: Vec<u8>,
    pub rx_bits: Vec<u8>,
    /// Elementwise `tx XOR rx`.
    pub error_sequence: ErrorSequence,
    pub thresholds: Thresholds,
    /// `None` when the variance measurement degenerated (noiseless
    /// configuration).
    pub quality: Option<QualityReport>,
    /// Fraction of payload ADC samples that clipped.
    pub clipped_fraction: f64,
    /// Set when more than 1% of payload samples clipped.
    pub clipping_warning: bool,
    /// Quantized payload waveform, one code per sample.
    pub adc_payload: Vec<u16>,
}

/// Synthesizes the received waveform for a bit block, starting at time
/// zero, with the free-running interferer and noise drawn from the
/// config's payload stream. `run_transmission` decides its payload from
/// exactly this waveform.
pub fn synthesize_waveform(config: &ChannelConfig, bits: &[u8]) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, Stream::PayloadNoise);
    Ok(synthesize_block(
        config,
        bits,
        0,
        PwmMode::FreeRunning,
        &mut rng,
    ))
}

/// The alternating pilot pattern: 0, 1, 0, 1, ...
pub fn pilot_pattern(length: usize) -> Vec<u8> {
    (0..length).map(|i| (i % 2) as u8).collect()
}

/// Trains decision thresholds from pilot waveforms carrying the
/// alternating pattern.
///
/// Each threshold is the midpoint between the mean mid-bit ADC code over
/// the pilot's 1-bits and over its 0-bits. Interferer-free configs train
/// a single threshold from `pilot_on` alone; configs with an interferer
/// require both blocks, recorded with the interferer held on and off
/// respectively.
pub fn train_thresholds(
    config: &ChannelConfig,
    pilot_on: &[f64],
    pilot_off: Option<&[f64]>,
) -> Result<Thresholds> {
    config.validate()?;
    let vth_on = pilot_threshold(config, pilot_on)?;
    match (&config.pwm, pilot_off) {
        (None, _) => Ok(Thresholds::Single { vth: vth_on }),
        (Some(_), Some(off)) => Ok(Thresholds::Dual {
            vth1: vth_on,
            vth2: pilot_threshold(config, off)?,
        }),
        (Some(_), None) => Err(Error::config(
            "pilot_off",
            "config has an interferer: both pilot blocks are required",
        )),
    }
}

fn pilot_threshold(config: &ChannelConfig, pilot_waveform: &[f64]) -> Result<f64> {
    let n_bits = pilot_waveform.len() / config.samples_per_bit;
    if n_bits < 2 {
        return Err(Error::config(
            "pilot_length",
            "pilot waveform carries fewer than 2 bits",
        ));
    }
    let (codes, _) = quantize_waveform(config, pilot_waveform);
    let mids = mid_bit_codes(config, &codes);
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (bit_index, &code) in mids.iter().enumerate() {
        let symbol = bit_index % 2; // alternating pattern starting at 0
        sums[symbol] += f64::from(code);
        counts[symbol] += 1;
    }
    let mean_zero = sums[0] / counts[0] as f64;
    let mean_one = sums[1] / counts[1] as f64;
    Ok((mean_zero + mean_one) / 2.0)
}

/// Runs a full transmission: pseudo-random payload bits framed by pilot
/// blocks, mid-bit threshold decisions, and a quality measurement.
///
/// Pilot blocks are prepended and appended around the payload and are
/// excluded from error accounting; the leading blocks train the
/// thresholds. For each payload bit the receiver selects its threshold
/// from the interferer state at the bit boundary and compares the mid-bit
/// ADC code against it.
pub fn run_transmission(config: &ChannelConfig, n_bits: usize) -> Result<ChannelRunResult> {
    config.validate()?;
    if n_bits == 0 {
        return Err(Error::config("n_bits", "must be at least 1"));
    }

    let mut bits_rng = stream_rng(config.seed, Stream::TxBits);
    let tx_bits: Vec<u8> = (0..n_bits).map(|_| bits_rng.random_range(0..=1)).collect();

    let mut payload_rng = stream_rng(config.seed, Stream::PayloadNoise);
    let payload =
        synthesize_block(config, &tx_bits, 0, PwmMode::FreeRunning, &mut payload_rng);
    let (adc_payload, clipped) = quantize_waveform(config, &payload);
    let clipped_fraction = clipped as f64 / adc_payload.len() as f64;

    let thresholds = run_pilot_training(config)?;

    let spb = config.samples_per_bit;
    let sample_rate = config.sample_rate();
    let mut rx_bits = Vec::with_capacity(n_bits);
    for bit in 0..n_bits {
        let boundary_time = (bit * spb) as f64 / sample_rate;
        let vth = thresholds.select(config.pwm_on_at(boundary_time));
        let code = adc_payload[bit * spb + spb / 2];
        rx_bits.push(u8::from(f64::from(code) > vth));
    }

    let error_bits: Vec<u8> = tx_bits
        .iter()
        .zip(rx_bits.iter())
        .map(|(&t, &r)| t ^ r)
        .collect();
    let error_sequence = ErrorSequence::from_bits(error_bits).expect("xor yields 0/1");

    let quality = match &config.pwm {
        None => match measure_snr(config) {
            Ok(report) => Some(QualityReport::Snr(report)),
            Err(Error::DegenerateMeasurement(_)) => None,
            Err(other) => return Err(other),
        },
        Some(_) => match measure_sinr(config, GroupingMode::ExactPhase) {
            Ok(report) => Some(QualityReport::Sinr(report)),
            Err(Error::DegenerateMeasurement(_)) => None,
            Err(other) => return Err(other),
        },
    };

    Ok(ChannelRunResult {
        tx_bits,
        rx_bits,
        error_sequence,
        thresholds,
        quality,
        clipped_fraction,
        clipping_warning: clipped_fraction > 0.01,
        adc_payload,
    })
}

/// Synthesizes the leading and trailing pilot blocks and trains the
/// thresholds from the leading ones. Trailing blocks are generated to
/// complete the frame but carry no further information.
fn run_pilot_training(config: &ChannelConfig) -> Result<Thresholds> {
    let pattern = pilot_pattern(config.pilot_length);
    let mut off_rng = stream_rng(config.seed, Stream::PilotOff);
    let leading_off = synthesize_block(config, &pattern, 0, PwmMode::ForcedOff, &mut off_rng);

    let thresholds = if config.pwm.is_some() {
        let mut on_rng = stream_rng(config.seed, Stream::PilotOn);
        let leading_on = synthesize_block(config, &pattern, 0, PwmMode::ForcedOn, &mut on_rng);
        let t = train_thresholds(config, &leading_on, Some(&leading_off))?;
        let _trailing_on =
            synthesize_block(config, &pattern, 0, PwmMode::ForcedOn, &mut on_rng);
        t
    } else {
        train_thresholds(config, &leading_off, None)?
    };
    let _trailing_off = synthesize_block(config, &pattern, 0, PwmMode::ForcedOff, &mut off_rng);
    Ok(thresholds)
}

/// For each of `n_bits` payload bits, whether the bit interval contains
/// an interferer level transition. Bits without an interferer never do.
pub fn pwm_edge_bit_mask(config: &ChannelConfig, n_bits: usize) -> Vec<bool> {
    match &config.pwm {
        None => vec![false; n_bits],
        Some(pwm) => (0..n_bits)
            .map(|bit| {
                let t0 = bit as f64 / config.bit_rate;
                let t1 = (bit + 1) as f64 / config.bit_rate;
                pwm.edges_in(t0, t1) > 0
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::error_probability;
    use approx::assert_relative_eq;

    fn quiet_config() -> ChannelConfig {
        ChannelConfig {
            noise_sigma: 0.0,
            background_dc: 100.0,
            signal_amplitude: 200.0,
            ..ChannelConfig::background_only(200.0, 0.0, 1)
        }
    }

    #[test]
    fn noiseless_waveform_is_two_level_rectangular() {
        let config = quiet_config();
        let wave = synthesize_waveform(&config, &[1, 0]).unwrap();
        let spb = config.samples_per_bit;
        assert_eq!(wave.len(), 2 * spb);
        assert!(wave[..spb].iter().all(|&x| x == 300.0));
        assert!(wave[spb..].iter().all(|&x| x == 100.0));
    }

    #[test]
    fn noiseless_all_zero_bits_reduce_to_pwm_plus_dc() {
        let mut config = quiet_config();
        config.pwm = Some(PwmConfig {
            frequency: 600.0,
            duty_cycle: 0.5,
            amplitude: 50.0,
            phase: 0.0,
        });
        let bits = vec![0u8; 200];
        let wave = synthesize_waveform(&config, &bits).unwrap();
        let sample_rate = config.bit_rate * config.samples_per_bit as f64;
        for (i, &x) in wave.iter().enumerate() {
            let t = i as f64 / sample_rate;
            let expected = 100.0 + config.pwm.as_ref().unwrap().level(t);
            assert_eq!(x, expected);
        }
        // Both levels must actually occur.
        assert!(wave.iter().any(|&x| x == 100.0));
        assert!(wave.iter().any(|&x| x == 150.0));
    }

    #[test]
    fn waveform_variance_matches_noise_sigma() {
        let mut config = quiet_config();
        config.noise_sigma = 8.0;
        let bits = vec![0u8; 20_000];
        let wave = synthesize_waveform(&config, &bits).unwrap();
        let var = waveform::sample_variance(&wave);
        assert!(
            (var - 64.0).abs() < 0.05 * 64.0,
            "variance {var} vs expected 64"
        );
    }

    #[test]
    fn noiseless_pilot_threshold_is_the_level_midpoint() {
        let config = quiet_config();
        // Levels 100 and 300 in ADC counts (full scale 1023 over 10 bits
        // maps one count per unit).
        let pattern = pilot_pattern(config.pilot_length);
        let wave = synthesize_waveform(&config, &pattern).unwrap();
        match train_thresholds(&config, &wave, None).unwrap() {
            Thresholds::Single { vth } => assert_relative_eq!(vth, 200.0, epsilon = 1e-12),
            other => panic!("expected single threshold, got {other:?}"),
        }
    }

    #[test]
    fn zero_amplitude_interferer_trains_equal_thresholds() {
        let mut config = quiet_config();
        config.noise_sigma = 2.0;
        config.pilot_length = 512;
        config.pwm = Some(PwmConfig {
            frequency: 600.0,
            duty_cycle: 0.5,
            amplitude: 0.0,
            phase: 0.0,
        });
        let result = run_transmission(&config, 100).unwrap();
        match result.thresholds {
            Thresholds::Dual { vth1, vth2 } => {
                assert!((vth1 - vth2).abs() < 1.0, "vth1 {vth1} vth2 {vth2}")
            }
            other => panic!("expected dual thresholds, got {other:?}"),
        }
    }

    #[test]
    fn dual_threshold_gap_matches_interferer_amplitude() {
        let mut config = quiet_config();
        config.pwm = Some(PwmConfig {
            frequency: 600.0,
            duty_cycle: 0.5,
            amplitude: 150.0,
            phase: 0.0,
        });
        let pattern = pilot_pattern(config.pilot_length);
        let mut on_rng = stream_rng(config.seed, Stream::PilotOn);
        let on = synthesize_block(&config, &pattern, 0, PwmMode::ForcedOn, &mut on_rng);
        let mut off_rng = stream_rng(config.seed, Stream::PilotOff);
        let off = synthesize_block(&config, &pattern, 0, PwmMode::ForcedOff, &mut off_rng);
        match train_thresholds(&config, &on, Some(&off)).unwrap() {
            Thresholds::Dual { vth1, vth2 } => {
                assert!(vth1 > vth2);
                assert!((vth1 - vth2 - 150.0).abs() < 2.0);
            }
            other => panic!("expected dual thresholds, got {other:?}"),
        }
    }

    #[test]
    fn short_pilot_is_rejected() {
        let config = quiet_config();
        let wave = vec![100.0; config.samples_per_bit]; // one bit only
        assert!(train_thresholds(&config, &wave, None).is_err());
    }

    #[test]
    fn clean_channel_is_error_free() {
        let result = run_transmission(&quiet_config(), 5_000).unwrap();
        assert_eq!(result.error_sequence.error_count(), 0);
        assert!(result.quality.is_none(), "noiseless quality degenerates");
        assert!(!result.clipping_warning);
    }

    #[test]
    fn error_rate_falls_as_signal_grows() {
        let mut previous = 1.0;
        for amplitude in [60.0, 90.0, 120.0] {
            let config = ChannelConfig::background_only(amplitude, 30.0, 9);
            let result = run_transmission(&config, 20_000).unwrap();
            let pe = error_probability(&result.error_sequence).unwrap();
            assert!(pe < previous, "pe {pe} did not drop below {previous}");
            previous = pe;
        }
    }

    #[test]
    fn error_sequence_is_tx_xor_rx() {
        let config = ChannelConfig::background_only(80.0, 25.0, 4);
        let result = run_transmission(&config, 2_000).unwrap();
        for ((t, r), e) in result
            .tx_bits
            .iter()
            .zip(result.rx_bits.iter())
            .zip(result.error_sequence.iter())
        {
            assert_eq!(t ^ r, e);
        }
    }

    #[test]
    fn zero_amplitude_interferer_is_equivalent_to_no_interferer() {
        let base = ChannelConfig::background_only(150.0, 20.0, 77);
        let mut with_idle_pwm = base.clone();
        with_idle_pwm.pwm = Some(PwmConfig {
            frequency: 600.0,
            duty_cycle: 0.5,
            amplitude: 0.0,
            phase: 0.0,
        });
        let a = run_transmission(&base, 20_000).unwrap();
        let b = run_transmission(&with_idle_pwm, 20_000).unwrap();
        assert_eq!(a.error_sequence, b.error_sequence);
        assert_eq!(a.rx_bits, b.rx_bits);
    }

    #[test]
    fn low_noise_interferer_errors_sit_on_edge_bits() {
        let config = ChannelConfig::with_pwm(200.0, 2.0, 0.5, 150.0, 31);
        let n_bits = 50_000;
        let result = run_transmission(&config, n_bits).unwrap();
        let mask = pwm_edge_bit_mask(&config, n_bits);
        let pe = error_probability(&result.error_sequence).unwrap();
        assert!(pe > 0.02 && pe < 0.08, "pe {pe} outside expected band");
        for (i, bit) in result.error_sequence.iter().enumerate() {
            if bit == 1 {
                assert!(mask[i], "error at bit {i} without an interferer edge");
            }
        }
        // No adjacent errors: consecutive edge bits are several bits apart.
        let bits = result.error_sequence.bits();
        assert!(!bits.windows(2).any(|w| w == [1, 1]));
    }

    #[test]
    fn interferer_below_half_signal_causes_no_errors_at_low_noise() {
        // The mid-bit sample stays on the correct side of the stale
        // threshold when the interferer step is smaller than half the
        // signal swing.
        let config = ChannelConfig::with_pwm(200.0, 0.0, 0.5, 80.0, 5);
        let result = run_transmission(&config, 20_000).unwrap();
        assert_eq!(result.error_sequence.error_count(), 0);
    }

    #[test]
    fn heavy_clipping_sets_the_warning() {
        let mut config = quiet_config();
        config.noise_sigma = 5.0;
        config.signal_amplitude = 2_000.0; // far beyond full scale
        let result = run_transmission(&config, 1_000).unwrap();
        assert!(result.clipped_fraction > 0.01);
        assert!(result.clipping_warning);
    }

    #[test]
    fn edge_mask_matches_expected_density() {
        let config = ChannelConfig::with_pwm(200.0, 2.0, 0.5, 150.0, 1);
        let mask = pwm_edge_bit_mask(&config, 100_000);
        let density = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
        // Two edges per period, 600 Hz over 6250 bit/s: about 19.2% of
        // bits contain an edge.
        assert!((density - 0.192).abs() < 0.01, "density {density}");
    }

    #[test]
    fn config_validation_names_offending_keys() {
        let mut config = quiet_config();
        config.samples_per_bit = 2;
        let message = config.validate().unwrap_err().to_string();
        assert!(message.contains("samples_per_bit"));

        let mut config = quiet_config();
        config.pwm = Some(PwmConfig {
            frequency: 600.0,
            duty_cycle: 1.2,
            amplitude: 10.0,
            phase: 0.0,
        });
        let message = config.validate().unwrap_err().to_string();
        assert!(message.contains("pwm.duty_cycle"));
    }
}
