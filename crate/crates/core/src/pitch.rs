//! Cepstral pitch detection with voiced / unvoiced / silence labels.
//!
//! Each Hamming-windowed frame is transformed to its real cepstrum and the
//! largest coefficient is located inside the quefrency band of
//! `[f_min_hz, f_max_hz]`. A peak above `cepstral_peak_threshold` marks the
//! frame voiced with `f0 = fs / quefrency`; otherwise a zero-crossing rate
//! above `zcr_unvoiced_threshold` marks it unvoiced, and anything left is
//! silence. The full-band signal is analysed; there is no low-pass stage.

use std::fmt;
use std::str::FromStr;

use crate::audio_io::AudioSignal;
use crate::cepstrum::{default_fft_size, CepstrumAnalyzer, DEFAULT_LOG_FLOOR};
use crate::error::{Error, Result};
use crate::framing::{frame_signal, pre_emphasis, FrameConfig, Window};
use crate::scalar::Scalar;
use crate::vad::zero_crossing_rate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Voicing {
    Voiced,
    Unvoiced,
    Silence,
}

impl fmt::Display for Voicing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Voicing::Voiced => "voiced",
            Voicing::Unvoiced => "unvoiced",
            Voicing::Silence => "silence",
        })
    }
}

impl FromStr for Voicing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voiced" => Ok(Voicing::Voiced),
            "unvoiced" => Ok(Voicing::Unvoiced),
            "silence" => Ok(Voicing::Silence),
            other => Err(Error::InvalidConfig(format!(
                "unknown voicing label {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Natural-log cepstrum units.
    pub cepstral_peak_threshold: f64,
    pub zcr_unvoiced_threshold: f64,
    /// Analysis geometry; the window is always Hamming regardless of `frame.window`.
    pub frame: FrameConfig,
    /// Odd; 1 disables smoothing.
    pub median_smooth_width: usize,
    /// `None` picks the smallest power of two of at least twice the frame length.
    pub fft_size: Option<usize>,
    pub log_floor: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            f_min_hz: 60.0,
            f_max_hz: 500.0,
            cepstral_peak_threshold: 0.2,
            zcr_unvoiced_threshold: 0.25,
            // two periods of 60 Hz need 33.3 ms
            frame: FrameConfig {
                frame_len_ms: 40.0,
                hop_ms: 10.0,
                window: Window::Hamming,
                // full-band input; pre-emphasis is opt-in for this stage
                preemph_alpha: 0.0,
            },
            median_smooth_width: 5,
            fft_size: None,
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min_hz.is_finite() && self.f_min_hz > 0.0 && self.f_min_hz < self.f_max_hz) {
            return Err(Error::InvalidConfig(format!(
                "pitch band [{}, {}] Hz must satisfy 0 < f_min < f_max",
                self.f_min_hz, self.f_max_hz
            )));
        }
        if !(self.cepstral_peak_threshold.is_finite() && self.cepstral_peak_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cepstral peak threshold {} must be positive",
                self.cepstral_peak_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.zcr_unvoiced_threshold) {
            return Err(Error::InvalidConfig(format!(
                "ZCR threshold {} must lie in [0, 1]",
                self.zcr_unvoiced_threshold
            )));
        }
        if self.median_smooth_width == 0 || self.median_smooth_width.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "median width {} must be odd and positive",
                self.median_smooth_width
            )));
        }
        self.frame.validate()
    }

    /// Inclusive quefrency search band `[ceil(fs / f_max), floor(fs / f_min)]`.
    pub fn quefrency_band(&self, sample_rate_hz: u32) -> Result<(usize, usize)> {
        let fs = f64::from(sample_rate_hz);
        if self.f_max_hz >= fs / 2.0 {
            return Err(Error::ConfigMismatch(format!(
                "f_max {} Hz must be below the Nyquist frequency {} Hz",
                self.f_max_hz,
                fs / 2.0
            )));
        }
        let lo = (fs / self.f_max_hz).ceil() as usize;
        let hi = (fs / self.f_min_hz).floor() as usize;
        if lo > hi {
            return Err(Error::ConfigMismatch(format!(
                "pitch band [{}, {}] Hz contains no integer quefrency at {sample_rate_hz} Hz",
                self.f_min_hz, self.f_max_hz
            )));
        }
        Ok((lo, hi))
    }

    /// Samples needed for two periods of `f_min_hz`.
    pub fn min_frame_len(&self, sample_rate_hz: u32) -> usize {
        (2.0 * f64::from(sample_rate_hz) / self.f_min_hz).ceil() as usize
    }
}

/// Per-frame outcome of the cepstral test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDecision<T> {
    pub label: Voicing,
    pub f0_hz: Option<T>,
    pub peak_value: T,
    /// Location of the band maximum, whatever the label.
    pub peak_quefrency: usize,
    pub zcr: T,
}

/// Reusable detector for one sample rate and frame length.
#[derive(Debug)]
pub struct PitchDetector<T: Scalar> {
    cfg: PitchConfig,
    sample_rate_hz: u32,
    frame_len: usize,
    band: (usize, usize),
    analyzer: CepstrumAnalyzer<T>,
}

impl<T: Scalar> PitchDetector<T> {
    pub fn new(cfg: &PitchConfig, sample_rate_hz: u32, frame_len: usize) -> Result<Self> {
        cfg.validate()?;
        let band = cfg.quefrency_band(sample_rate_hz)?;
        let needed = cfg.min_frame_len(sample_rate_hz);
        if frame_len < needed {
            return Err(Error::FrameTooShortForBand {
                len: frame_len,
                needed,
                f_min_hz: cfg.f_min_hz,
            });
        }
        let fft_size = cfg.fft_size.unwrap_or_else(|| default_fft_size(frame_len));
        if !fft_size.is_power_of_two() || fft_size < frame_len {
            return Err(Error::BadFftSize {
                fft_size,
                frame_len,
            });
        }
        if band.1 > fft_size / 2 {
            return Err(Error::ConfigMismatch(format!(
                "quefrency {} exceeds half the FFT size {fft_size}",
                band.1
            )));
        }
        Ok(Self {
            cfg: *cfg,
            sample_rate_hz,
            frame_len,
            band,
            analyzer: CepstrumAnalyzer::new(fft_size, cfg.log_floor)?,
        })
    }

    pub fn band(&self) -> (usize, usize) {
        self.band
    }

    /// Classifies one already-windowed frame.
    pub fn detect(&self, frame: &[T]) -> Result<FrameDecision<T>> {
        if frame.len() != self.frame_len {
            return Err(Error::ConfigMismatch(format!(
                "frame has {} samples, detector expects {}",
                frame.len(),
                self.frame_len
            )));
        }
        let cep = self.analyzer.analyze(frame, self.sample_rate_hz)?;
        let (lo, hi) = self.band;
        let mut peak_quefrency = lo;
        let mut peak_value = cep.coefficients[lo];
        for (q, &v) in cep
            .coefficients
            .iter()
            .enumerate()
            .take(hi + 1)
            .skip(lo + 1)
        {
            if v > peak_value {
                peak_value = v;
                peak_quefrency = q;
            }
        }
        let zcr = zero_crossing_rate(frame)?;
        let (label, f0_hz) = if peak_value > T::lit(self.cfg.cepstral_peak_threshold) {
            let f0 = T::lit(f64::from(self.sample_rate_hz)) / T::from_usize_lossy(peak_quefrency);
            (Voicing::Voiced, Some(f0))
        } else if zcr > T::lit(self.cfg.zcr_unvoiced_threshold) {
            (Voicing::Unvoiced, None)
        } else {
            (Voicing::Silence, None)
        };
        Ok(FrameDecision {
            label,
            f0_hz,
            peak_value,
            peak_quefrency,
            zcr,
        })
    }
}

/// Classifies a single Hamming-windowed frame.
pub fn detect_pitch_frame<T: Scalar>(
    frame: &[T],
    sample_rate_hz: u32,
    cfg: &PitchConfig,
) -> Result<FrameDecision<T>> {
    PitchDetector::new(cfg, sample_rate_hz, frame.len())?.detect(frame)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchEntry<T> {
    pub time_s: f64,
    pub label: Voicing,
    pub f0_hz: Option<T>,
    pub peak_value: T,
    pub zcr: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack<T> {
    pub entries: Vec<PitchEntry<T>>,
    pub hop_s: f64,
    pub frame_len: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl<T: Scalar> PitchTrack<T> {
    pub fn voiced_count(&self) -> usize {
        self.count(Voicing::Voiced)
    }

    pub fn count(&self, label: Voicing) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    /// Median-smooths f0 inside each maximal run of voiced frames; labels are untouched.
    pub fn smooth(&mut self, width: usize) {
        let mut i = 0;
        while i < self.entries.len() {
            if self.entries[i].label != Voicing::Voiced {
                i += 1;
                continue;
            }
            let start = i;
            while i < self.entries.len() && self.entries[i].label == Voicing::Voiced {
                i += 1;
            }
            let mut run: Vec<T> = self.entries[start..i]
                .iter()
                .map(|e| e.f0_hz.expect("voiced entries carry f0"))
                .collect();
            median_smooth_to_root(&mut run, width);
            for (e, f0) in self.entries[start..i].iter_mut().zip(run) {
                e.f0_hz = Some(f0);
            }
        }
    }
}

fn median_pass<T: Scalar>(values: &[T], width: usize) -> Vec<T> {
    let half = width / 2;
    let n = values.len();
    let mut window = Vec::with_capacity(width);
    (0..n)
        .map(|i| {
            window.clear();
            // replicate the end values outside the run
            window.extend((0..width).map(|k| values[(i + k).saturating_sub(half).min(n - 1)]));
            window.sort_by(|a, b| a.partial_cmp(b).expect("finite f0"));
            window[half]
        })
        .collect()
}

/// Repeats a width-`width` running median until the sequence stops changing.
///
/// The fixed point (a median root) makes the smoothing idempotent. Ends are
/// extended by replication, under which repeated median filtering of a finite
/// sequence always converges.
pub fn median_smooth_to_root<T: Scalar>(values: &mut [T], width: usize) {
    if width <= 1 || values.len() < 2 {
        return;
    }
    for _ in 0..values.len() {
        let next = median_pass(values, width);
        if next.as_slice() == &*values {
            return;
        }
        values.copy_from_slice(&next);
    }
}

/// Frames the signal, classifies each frame, then smooths voiced f0 runs.
pub fn track_pitch<T: Scalar>(signal: &AudioSignal<T>, cfg: &PitchConfig) -> Result<PitchTrack<T>> {
    cfg.validate()?;
    let fs = signal.sample_rate_hz();
    let frame_cfg = FrameConfig {
        window: Window::Hamming,
        ..cfg.frame
    };
    let emphasized = pre_emphasis(signal, frame_cfg.preemph_alpha);
    let frames = frame_signal(&emphasized, &frame_cfg)?;
    let detector = PitchDetector::new(cfg, fs, frames.frame_len())?;
    let entries = frames
        .iter()
        .zip(frames.start_offsets())
        .enumerate()
        .map(|(i, (frame, &start))| {
            let d = detector
                .detect(frame)
                .map_err(|e| e.context(format!("frame {i}")))?;
            Ok(PitchEntry {
                time_s: start as f64 / f64::from(fs),
                label: d.label,
                f0_hz: d.f0_hz,
                peak_value: d.peak_value,
                zcr: d.zcr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut track = PitchTrack {
        entries,
        hop_s: frames.hop_samples() as f64 / f64::from(fs),
        frame_len: frames.frame_len(),
        f_min_hz: cfg.f_min_hz,
        f_max_hz: cfg.f_max_hz,
    };
    track.smooth(cfg.median_smooth_width);
    Ok(track)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::framing::hamming_window;

    const FS: u32 = 16000;

    fn windowed(x: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = hamming_window(x.len());
        x.iter().zip(&w).map(|(a, b)| a * b).collect()
    }

    fn frame_len() -> usize {
        PitchConfig::default().frame.frame_len_samples(FS)
    }

    #[test]
    fn impulse_train_is_voiced_at_200_hz() {
        let mut x = vec![0.0; frame_len()];
        for i in (0..x.len()).step_by(80) {
            x[i] = 0.8;
        }
        let d = detect_pitch_frame(&windowed(&x), FS, &PitchConfig::default()).unwrap();
        assert_eq!(d.label, Voicing::Voiced);
        let f0 = d.f0_hz.unwrap();
        assert!((f0 - 200.0).abs() <= 2.5, "f0 = {f0}");
    }

    #[test]
    fn zero_frame_is_silence() {
        let d =
            detect_pitch_frame(&vec![0.0f64; frame_len()], FS, &PitchConfig::default()).unwrap();
        assert_eq!(d.label, Voicing::Silence);
        assert_eq!(d.zcr, 0.0);
        assert_eq!(d.f0_hz, None);
    }

    #[test]
    fn white_noise_is_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..frame_len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let cfg = PitchConfig::default();
        let d = detect_pitch_frame(&windowed(&x), FS, &cfg).unwrap();
        assert_eq!(d.label, Voicing::Unvoiced);
        assert!(d.peak_value < cfg.cepstral_peak_threshold);
        assert!((d.zcr - 0.5).abs() < 0.1);
    }

    #[test]
    fn short_frame_is_rejected() {
        assert!(matches!(
            detect_pitch_frame(&vec![0.0f64; 500], FS, &PitchConfig::default()),
            Err(Error::FrameTooShortForBand { needed: 534, .. })
        ));
    }

    #[test]
    fn band_rounding() {
        let cfg = PitchConfig::default();
        assert_eq!(cfg.quefrency_band(16000).unwrap(), (32, 266));
        assert_eq!(cfg.quefrency_band(8000).unwrap(), (16, 133));
        let high = PitchConfig {
            f_max_hz: 5000.0,
            ..cfg
        };
        assert!(high.quefrency_band(8000).is_err());
    }

    #[test]
    fn invalid_configs() {
        let base = PitchConfig::default();
        for bad in [
            PitchConfig {
                f_min_hz: 600.0,
                ..base
            },
            PitchConfig {
                median_smooth_width: 4,
                ..base
            },
            PitchConfig {
                median_smooth_width: 0,
                ..base
            },
            PitchConfig {
                cepstral_peak_threshold: 0.0,
                ..base
            },
            PitchConfig {
                zcr_unvoiced_threshold: 1.5,
                ..base
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn median_removes_isolated_octave_jump() {
        let mut v = vec![100.0f64, 100.0, 200.0, 100.0, 100.0, 100.0];
        median_smooth_to_root(&mut v, 5);
        assert!(v.iter().all(|&x| x == 100.0));
    }

    #[test]
    fn width_one_is_identity() {
        let mut v = vec![1.0f64, 9.0, 3.0];
        median_smooth_to_root(&mut v, 1);
        assert_eq!(v, vec![1.0, 9.0, 3.0]);
    }

    proptest! {
        #[test]
        fn median_smoothing_is_idempotent(
            v in prop::collection::vec(60.0f64..500.0, 1..40),
            half in 0usize..4,
        ) {
            let width = 2 * half + 1;
            let mut once = v.clone();
            median_smooth_to_root(&mut once, width);
            let mut twice = once.clone();
            median_smooth_to_root(&mut twice, width);
            prop_assert_eq!(&once, &twice);
            // medians pick existing values
            for x in &once {
                prop_assert!(v.contains(x));
            }
        }
    }
}
