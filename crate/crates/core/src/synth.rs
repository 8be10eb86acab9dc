//! Deterministic test signals: pulse trains, tones, seeded noise, silence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio_io::AudioSignal;
use crate::error::Result;
use crate::scalar::Scalar;

fn samples_for(duration_s: f64, sample_rate_hz: u32) -> usize {
    (duration_s * f64::from(sample_rate_hz)).round() as usize
}

fn signal<T: Scalar>(x: Vec<f64>, sample_rate_hz: u32, label: &str) -> Result<AudioSignal<T>> {
    AudioSignal::new(x.into_iter().map(T::lit).collect(), sample_rate_hz, label)
}

/// Unit impulses of height `amplitude` every `period` samples, starting at 0.
pub fn impulse_train<T: Scalar>(
    period: usize,
    len: usize,
    amplitude: f64,
    sample_rate_hz: u32,
) -> Result<AudioSignal<T>> {
    let x = (0..len)
        .map(|n| {
            if n % period.max(1) == 0 {
                amplitude
            } else {
                0.0
            }
        })
        .collect();
    signal(x, sample_rate_hz, "impulse")
}

/// Band-limited pulse train: equal-amplitude cosine harmonics of `f0_hz` up to
/// Nyquist, scaled to peak `amplitude`. Works for non-integer periods.
pub fn pulse_train<T: Scalar>(
    f0_hz: f64,
    duration_s: f64,
    amplitude: f64,
    sample_rate_hz: u32,
) -> Result<AudioSignal<T>> {
    let fs = f64::from(sample_rate_hz);
    let harmonics = ((fs / 2.0 - 1e-9) / f0_hz).floor().max(1.0) as usize;
    let tau = 2.0 * std::f64::consts::PI;
    let x: Vec<f64> = (0..samples_for(duration_s, sample_rate_hz))
        .map(|n| {
            let phase = tau * f0_hz * n as f64 / fs;
            (1..=harmonics).map(|h| (phase * h as f64).cos()).sum()
        })
        .collect();
    signal(scale_to_peak(x, amplitude), sample_rate_hz, "pulse")
}

pub fn tone<T: Scalar>(
    freq_hz: f64,
    duration_s: f64,
    amplitude: f64,
    sample_rate_hz: u32,
) -> Result<AudioSignal<T>> {
    let fs = f64::from(sample_rate_hz);
    let x = (0..samples_for(duration_s, sample_rate_hz))
        .map(|n| amplitude * (2.0 * std::f64::consts::PI * freq_hz * n as f64 / fs).sin())
        .collect();
    signal(x, sample_rate_hz, "tone")
}

/// Uniform noise in `[-amplitude, amplitude)` from a ChaCha8 stream.
pub fn white_noise<T: Scalar>(
    seed: u64,
    duration_s: f64,
    amplitude: f64,
    sample_rate_hz: u32,
) -> Result<AudioSignal<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..samples_for(duration_s, sample_rate_hz))
        .map(|_| rng.gen_range(-amplitude..amplitude))
        .collect();
    signal(x, sample_rate_hz, "noise")
}

pub fn silence<T: Scalar>(duration_s: f64, sample_rate_hz: u32) -> Result<AudioSignal<T>> {
    signal(
        vec![0.0; samples_for(duration_s, sample_rate_hz)],
        sample_rate_hz,
        "silence",
    )
}

/// Joins signals of one sample rate.
pub fn concat<T: Scalar>(parts: &[AudioSignal<T>]) -> Result<AudioSignal<T>> {
    let rate = parts.first().map_or(0, AudioSignal::sample_rate_hz);
    let samples = parts
        .iter()
        .flat_map(|p| p.samples().iter().copied())
        .collect();
    AudioSignal::new(samples, rate, "concat")
}

/// Two-pole resonator at `center_hz` with bandwidth `bandwidth_hz`; output rescaled to the input peak.
pub fn resonate<T: Scalar>(
    input: &AudioSignal<T>,
    center_hz: f64,
    bandwidth_hz: f64,
) -> Result<AudioSignal<T>> {
    let fs = f64::from(input.sample_rate_hz());
    let r = (-std::f64::consts::PI * bandwidth_hz / fs).exp();
    let a1 = 2.0 * r * (2.0 * std::f64::consts::PI * center_hz / fs).cos();
    let a2 = -r * r;
    let (mut y1, mut y2) = (0.0, 0.0);
    let x: Vec<f64> = input.samples().iter().map(|s| s.as_f64()).collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let y: Vec<f64> = x
        .iter()
        .map(|&v| {
            let out = v + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = out;
            out
        })
        .collect();
    input.with_samples(scale_to_peak(y, peak).into_iter().map(T::lit).collect())
}

/// Adds seeded uniform noise of the given amplitude.
pub fn add_noise<T: Scalar>(
    input: &AudioSignal<T>,
    seed: u64,
    amplitude: f64,
) -> Result<AudioSignal<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = input
        .samples()
        .iter()
        .map(|&s| s + T::lit(rng.gen_range(-amplitude..amplitude)))
        .collect();
    input.with_samples(y)
}

fn scale_to_peak(x: Vec<f64>, peak: f64) -> Vec<f64> {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return x;
    }
    let k = peak / max;
    x.into_iter().map(|v| v * k).collect()
}
