//! Waveform synthesis and ADC quantization for the channel simulator.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{ChannelConfig, PwmConfig};

/// How the interferer behaves while a block is synthesized.
///
/// Pilot blocks are sent with the interferer held at a known level so the
/// receiver can calibrate one threshold per level; payload blocks see the
/// free-running square wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PwmMode {
    FreeRunning,
    ForcedOn,
    ForcedOff,
}

impl PwmConfig {
    /// True when the square wave is in its high phase at time `t` seconds.
    pub fn is_high(&self, t: f64) -> bool {
        let cycles = t * self.frequency + self.phase;
        (cycles - cycles.floor()) < self.duty_cycle
    }

    /// Instantaneous interferer level at time `t` seconds.
    pub fn level(&self, t: f64) -> f64 {
        if self.is_high(t) {
            self.amplitude
        } else {
            0.0
        }
    }

    /// Number of level transitions (rising plus falling) in `[t0, t1)`.
    pub fn edges_in(&self, t0: f64, t1: f64) -> usize {
        let count = |offset: f64| -> usize {
            let a = t0 * self.frequency + self.phase - offset;
            let b = t1 * self.frequency + self.phase - offset;
            let n = b.ceil() - a.ceil();
            if n > 0.0 {
                n as usize
            } else {
                0
            }
        };
        // Rising edges sit at whole cycles, falling edges a duty later.
        count(0.0) + count(self.duty_cycle)
    }
}

/// Synthesizes the received waveform for a bit block starting at global
/// sample index `start_sample`, drawing noise from `rng`.
pub(crate) fn synthesize_block<R: Rng>(
    config: &ChannelConfig,
    bits: &[u8],
    start_sample: u64,
    mode: PwmMode,
    rng: &mut R,
) -> Vec<f64> {
    let spb = config.samples_per_bit;
    let sample_rate = config.bit_rate * spb as f64;
    let mut samples = Vec::with_capacity(bits.len() * spb);
    let noise = if config.noise_sigma > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma).expect("validated sigma"))
    } else {
        None
    };
    for (bit_index, &bit) in bits.iter().enumerate() {
        let level = config.signal_amplitude * f64::from(bit) + config.background_dc;
        for s in 0..spb {
            let global = start_sample + (bit_index * spb + s) as u64;
            let t = global as f64 / sample_rate;
            let pwm_level = match (&config.pwm, mode) {
                (Some(pwm), PwmMode::FreeRunning) => pwm.level(t),
                (Some(pwm), PwmMode::ForcedOn) => pwm.amplitude,
                _ => 0.0,
            };
            let n = noise.as_ref().map_or(0.0, |d| d.sample(rng));
            samples.push(level + pwm_level + n);
        }
    }
    samples
}

/// Maps a linear sample to an ADC code in `[0, 2^bits - 1]`, clipping out
/// of range values. Returns the code and whether clipping occurred.
pub(crate) fn quantize_sample(config: &ChannelConfig, value: f64) -> (u16, bool) {
    let max_code = ((1u32 << config.adc.bits) - 1) as f64;
    let scaled = (value / config.adc.full_scale * max_code).round();
    if scaled < 0.0 {
        (0, true)
    } else if scaled > max_code {
        (max_code as u16, true)
    } else {
        (scaled as u16, false)
    }
}

/// Quantizes a whole waveform, returning the codes and the number of
/// clipped samples.
pub(crate) fn quantize_waveform(config: &ChannelConfig, waveform: &[f64]) -> (Vec<u16>, usize) {
    let mut clipped = 0usize;
    let codes = waveform
        .iter()
        .map(|&x| {
            let (code, clip) = quantize_sample(config, x);
            clipped += usize::from(clip);
            code
        })
        .collect();
    (codes, clipped)
}

/// ADC codes at the mid-bit sampling instants of a quantized waveform.
pub(crate) fn mid_bit_codes(config: &ChannelConfig, codes: &[u16]) -> Vec<u16> {
    let spb = config.samples_per_bit;
    (0..codes.len() / spb)
        .map(|bit| codes[bit * spb + spb / 2])
        .collect()
}

/// Unbiased sample variance.
pub(crate) fn sample_variance(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}
